//! Text representation: tokens with byte offsets, BIO tags, entity spans,
//! and conversions between the tag and span views of a document.
//!
//! The internal tag scheme is BIO2: every entity starts with a `B-` tag,
//! and `I-` only ever continues an entity of the same type. IOB1 input
//! (where `B-` appears only between adjacent same-type entities) is
//! repaired on ingest by [`normalize_iob1`].

mod conll;

pub use conll::{read_conll, write_conll};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of distinct tags (O plus B/I for the four entity types).
pub const TAG_COUNT: usize = 9;

/// One token of a document, with byte offsets into the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Byte offset of the first byte, 0-based.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
}

/// Entity categories recognized by the tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityLabel {
    Per,
    Org,
    Loc,
    Misc,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 4] = [
        EntityLabel::Per,
        EntityLabel::Org,
        EntityLabel::Loc,
        EntityLabel::Misc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityLabel::Per => "PER",
            EntityLabel::Org => "ORG",
            EntityLabel::Loc => "LOC",
            EntityLabel::Misc => "MISC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PER" => Some(EntityLabel::Per),
            "ORG" => Some(EntityLabel::Org),
            "LOC" => Some(EntityLabel::Loc),
            "MISC" => Some(EntityLabel::Misc),
            _ => None,
        }
    }
}

impl std::fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A BIO2 tag. `Outside` is index 0 so that a weightless model decodes to
/// all-O (mask nothing) rather than inventing entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    Outside,
    Begin(EntityLabel),
    Inside(EntityLabel),
}

impl Tag {
    /// All tags in their fixed matrix order:
    /// O, B-PER, I-PER, B-ORG, I-ORG, B-LOC, I-LOC, B-MISC, I-MISC.
    pub const ALL: [Tag; TAG_COUNT] = [
        Tag::Outside,
        Tag::Begin(EntityLabel::Per),
        Tag::Inside(EntityLabel::Per),
        Tag::Begin(EntityLabel::Org),
        Tag::Inside(EntityLabel::Org),
        Tag::Begin(EntityLabel::Loc),
        Tag::Inside(EntityLabel::Loc),
        Tag::Begin(EntityLabel::Misc),
        Tag::Inside(EntityLabel::Misc),
    ];

    /// Dense index for matrix addressing, 0..8 in the order of [`Tag::ALL`].
    pub fn index(&self) -> usize {
        match self {
            Tag::Outside => 0,
            Tag::Begin(l) => 1 + 2 * *l as usize,
            Tag::Inside(l) => 2 + 2 * *l as usize,
        }
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    /// The entity type this tag belongs to, if any.
    pub fn label(&self) -> Option<EntityLabel> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(*l),
        }
    }

    /// Parse a raw label string such as `O`, `B-PER`, `I-MISC`.
    pub fn parse_label(s: &str) -> Option<Tag> {
        if s == "O" {
            return Some(Tag::Outside);
        }
        if let Some(rest) = s.strip_prefix("B-") {
            return EntityLabel::parse(rest).map(Tag::Begin);
        }
        if let Some(rest) = s.strip_prefix("I-") {
            return EntityLabel::parse(rest).map(Tag::Inside);
        }
        None
    }

    pub fn as_label_string(&self) -> String {
        match self {
            Tag::Outside => "O".to_string(),
            Tag::Begin(l) => format!("B-{l}"),
            Tag::Inside(l) => format!("I-{l}"),
        }
    }
}

/// A labeled entity covering a contiguous token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub label: EntityLabel,
    /// First token index, inclusive.
    pub token_start: usize,
    /// One past the last token index.
    pub token_end: usize,
    /// Byte offset of the first token's first byte.
    pub byte_start: usize,
    /// Byte offset one past the last token's last byte.
    pub byte_end: usize,
}

/// A document: raw text, its tokens, and optionally a gold/predicted tag
/// per token. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub tokens: Vec<Token>,
    pub tags: Option<Vec<Tag>>,
}

impl Document {
    /// Tokenize `text` and return an untagged document.
    pub fn untagged(text: impl Into<String>) -> Document {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            text,
            tokens,
            tags: None,
        }
    }

    /// Attach a tag sequence; it must be BIO2-valid and match the token count.
    pub fn with_tags(mut self, tags: Vec<Tag>) -> Result<Document> {
        if tags.len() != self.tokens.len() {
            return Err(Error::Contract(format!(
                "{} tags for {} tokens",
                tags.len(),
                self.tokens.len()
            )));
        }
        if let Err(i) = validate_bio2(&tags) {
            return Err(Error::Validation(format!(
                "tag sequence is not BIO2-valid at index {i}"
            )));
        }
        self.tags = Some(tags);
        Ok(self)
    }

    /// Build a document from bare token strings (as read from CoNLL files),
    /// synthesizing text with single spaces between tokens.
    pub fn from_token_strings(words: &[String], tags: Option<Vec<Tag>>) -> Result<Document> {
        let mut text = String::new();
        let mut tokens = Vec::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.len();
            text.push_str(w);
            tokens.push(Token {
                text: w.clone(),
                start,
                end: text.len(),
            });
        }
        let doc = Document {
            text,
            tokens,
            tags: None,
        };
        match tags {
            Some(t) => doc.with_tags(t),
            None => Ok(doc),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Entity spans of the gold tags, if the document is tagged.
    pub fn spans(&self) -> Result<Vec<EntitySpan>> {
        match &self.tags {
            Some(tags) => tags_to_spans(&self.tokens, tags),
            None => Ok(Vec::new()),
        }
    }
}

/// Split text into tokens: maximal runs of alphanumeric characters, or a
/// single non-space character for anything else. Offsets are byte offsets
/// into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    for (pos, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(pos);
            }
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(Token {
                text: text[start..pos].to_string(),
                start,
                end: pos,
            });
        }
        if !ch.is_whitespace() {
            let end = pos + ch.len_utf8();
            tokens.push(Token {
                text: text[pos..end].to_string(),
                start: pos,
                end,
            });
        }
    }
    if let Some(start) = run_start {
        tokens.push(Token {
            text: text[start..].to_string(),
            start,
            end: text.len(),
        });
    }
    tokens
}

/// Check BIO2 validity; on failure returns the first offending index.
pub fn validate_bio2(tags: &[Tag]) -> std::result::Result<(), usize> {
    for (i, tag) in tags.iter().enumerate() {
        if let Tag::Inside(label) = tag {
            let ok = i > 0
                && match tags[i - 1] {
                    Tag::Begin(prev) | Tag::Inside(prev) => prev == *label,
                    Tag::Outside => false,
                };
            if !ok {
                return Err(i);
            }
        }
    }
    Ok(())
}

/// Repair a tag sequence into BIO2: any `I-XXX` that does not continue a
/// same-type entity becomes `B-XXX`. Idempotent.
pub fn repair_bio2(tags: &[Tag]) -> Vec<Tag> {
    let mut out = Vec::with_capacity(tags.len());
    for (i, tag) in tags.iter().enumerate() {
        let fixed = match tag {
            Tag::Inside(label) => {
                let continues = i > 0
                    && match tags[i - 1] {
                        Tag::Begin(prev) | Tag::Inside(prev) => prev == *label,
                        Tag::Outside => false,
                    };
                if continues {
                    *tag
                } else {
                    Tag::Begin(*label)
                }
            }
            _ => *tag,
        };
        out.push(fixed);
    }
    out
}

/// Parse raw IOB1 label strings and repair them into a BIO2 sequence.
///
/// Unknown labels produce a validation error naming the offending position.
pub fn normalize_iob1<S: AsRef<str>>(labels: &[S]) -> Result<Vec<Tag>> {
    let mut tags = Vec::with_capacity(labels.len());
    for (i, raw) in labels.iter().enumerate() {
        let tag = Tag::parse_label(raw.as_ref()).ok_or_else(|| {
            Error::Validation(format!("unknown label {:?} at position {i}", raw.as_ref()))
        })?;
        tags.push(tag);
    }
    Ok(repair_bio2(&tags))
}

/// Extract entity spans from a BIO2 tag sequence: one span per maximal
/// `B-XXX (I-XXX)*` run.
pub fn tags_to_spans(tokens: &[Token], tags: &[Tag]) -> Result<Vec<EntitySpan>> {
    if tokens.len() != tags.len() {
        return Err(Error::Contract(format!(
            "{} tags for {} tokens",
            tags.len(),
            tokens.len()
        )));
    }
    if let Err(i) = validate_bio2(tags) {
        return Err(Error::Validation(format!(
            "tag sequence is not BIO2-valid at index {i}"
        )));
    }
    let mut spans = Vec::new();
    let mut open: Option<(EntityLabel, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Begin(label) => {
                if let Some((l, s)) = open.take() {
                    spans.push(make_span(tokens, l, s, i));
                }
                open = Some((*label, i));
            }
            Tag::Inside(_) => {} // validated above: continues the open span
            Tag::Outside => {
                if let Some((l, s)) = open.take() {
                    spans.push(make_span(tokens, l, s, i));
                }
            }
        }
    }
    if let Some((l, s)) = open {
        spans.push(make_span(tokens, l, s, tags.len()));
    }
    Ok(spans)
}

fn make_span(tokens: &[Token], label: EntityLabel, start: usize, end: usize) -> EntitySpan {
    EntitySpan {
        label,
        token_start: start,
        token_end: end,
        byte_start: tokens[start].start,
        byte_end: tokens[end - 1].end,
    }
}

/// Render entity spans as a BIO2 tag sequence; uncovered tokens become O.
pub fn spans_to_tags(tokens: &[Token], spans: &[EntitySpan]) -> Result<Vec<Tag>> {
    let mut tags = vec![Tag::Outside; tokens.len()];
    let mut covered = vec![false; tokens.len()];
    for span in spans {
        if span.token_start >= span.token_end || span.token_end > tokens.len() {
            return Err(Error::Validation(format!(
                "span {}..{} out of range for {} tokens",
                span.token_start,
                span.token_end,
                tokens.len()
            )));
        }
        for i in span.token_start..span.token_end {
            if covered[i] {
                return Err(Error::Validation(format!(
                    "overlapping spans at token {i}"
                )));
            }
            covered[i] = true;
            tags[i] = if i == span.token_start {
                Tag::Begin(span.label)
            } else {
                Tag::Inside(span.label)
            };
        }
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(n: usize) -> Vec<Token> {
        (0..n)
            .map(|i| Token {
                text: format!("t{i}"),
                start: i * 3,
                end: i * 3 + 2,
            })
            .collect()
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_sentence_with_offsets() {
        let tokens = tokenize("John lives in Oslo.");
        let got: Vec<(&str, usize, usize)> = tokens
            .iter()
            .map(|t| (t.text.as_str(), t.start, t.end))
            .collect();
        assert_eq!(
            got,
            vec![
                ("John", 0, 4),
                ("lives", 5, 10),
                ("in", 11, 13),
                ("Oslo", 14, 18),
                (".", 18, 19),
            ]
        );
    }

    #[test]
    fn tokenize_collapses_whitespace() {
        let tokens = tokenize("A  B");
        let got: Vec<(&str, usize, usize)> = tokens
            .iter()
            .map(|t| (t.text.as_str(), t.start, t.end))
            .collect();
        assert_eq!(got, vec![("A", 0, 1), ("B", 3, 4)]);
    }

    #[test]
    fn tokenize_multibyte() {
        let tokens = tokenize("héllo, wörld");
        assert_eq!(tokens.len(), 3);
        for t in &tokens {
            assert_eq!(&"héllo, wörld"[t.start..t.end], t.text);
        }
    }

    #[test]
    fn tag_indices_are_dense_and_stable() {
        for (i, tag) in Tag::ALL.iter().enumerate() {
            assert_eq!(tag.index(), i);
            assert_eq!(Tag::from_index(i), Some(*tag));
        }
        assert_eq!(Tag::Outside.index(), 0);
        assert_eq!(Tag::parse_label("B-PER"), Some(Tag::Begin(EntityLabel::Per)));
        assert_eq!(Tag::parse_label("I-MISC"), Some(Tag::Inside(EntityLabel::Misc)));
        assert_eq!(Tag::parse_label("X-PER"), None);
        assert_eq!(Tag::parse_label("B-XYZ"), None);
    }

    #[test]
    fn spans_from_all_outside() {
        let tokens = toks(3);
        let tags = vec![Tag::Outside; 3];
        assert!(tags_to_spans(&tokens, &tags).unwrap().is_empty());
    }

    #[test]
    fn spans_from_mixed_tags() {
        let tokens = toks(4);
        let tags = vec![
            Tag::Begin(EntityLabel::Per),
            Tag::Inside(EntityLabel::Per),
            Tag::Outside,
            Tag::Begin(EntityLabel::Loc),
        ];
        let spans = tags_to_spans(&tokens, &tags).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!(
            (spans[0].label, spans[0].token_start, spans[0].token_end),
            (EntityLabel::Per, 0, 2)
        );
        assert_eq!(
            (spans[1].label, spans[1].token_start, spans[1].token_end),
            (EntityLabel::Loc, 3, 4)
        );
        assert_eq!(spans[0].byte_start, tokens[0].start);
        assert_eq!(spans[0].byte_end, tokens[1].end);
    }

    #[test]
    fn adjacent_entities_stay_separate() {
        let tokens = toks(2);
        let tags = vec![Tag::Begin(EntityLabel::Org), Tag::Begin(EntityLabel::Org)];
        let spans = tags_to_spans(&tokens, &tags).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].token_start, spans[0].token_end), (0, 1));
        assert_eq!((spans[1].token_start, spans[1].token_end), (1, 2));
    }

    #[test]
    fn invalid_bio2_names_first_offense() {
        let tokens = toks(2);
        let tags = vec![Tag::Outside, Tag::Inside(EntityLabel::Per)];
        let err = tags_to_spans(&tokens, &tags).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let err = tags_to_spans(&toks(2), &[Tag::Outside]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn tags_from_empty_spans() {
        assert_eq!(spans_to_tags(&toks(3), &[]).unwrap(), vec![Tag::Outside; 3]);
    }

    #[test]
    fn tags_from_single_token_span() {
        let tokens = toks(3);
        let span = make_span(&tokens, EntityLabel::Loc, 1, 2);
        assert_eq!(
            spans_to_tags(&tokens, &[span]).unwrap(),
            vec![Tag::Outside, Tag::Begin(EntityLabel::Loc), Tag::Outside]
        );
    }

    #[test]
    fn tags_from_adjacent_spans() {
        let tokens = toks(3);
        let spans = vec![
            make_span(&tokens, EntityLabel::Per, 0, 2),
            make_span(&tokens, EntityLabel::Per, 2, 3),
        ];
        assert_eq!(
            spans_to_tags(&tokens, &spans).unwrap(),
            vec![
                Tag::Begin(EntityLabel::Per),
                Tag::Inside(EntityLabel::Per),
                Tag::Begin(EntityLabel::Per)
            ]
        );
    }

    #[test]
    fn overlapping_spans_rejected() {
        let tokens = toks(3);
        let spans = vec![
            make_span(&tokens, EntityLabel::Per, 0, 2),
            make_span(&tokens, EntityLabel::Loc, 1, 3),
        ];
        assert!(matches!(
            spans_to_tags(&tokens, &spans),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn normalize_iob1_repairs_leading_inside() {
        let tags = normalize_iob1(&["I-PER", "I-PER"]).unwrap();
        assert_eq!(
            tags,
            vec![Tag::Begin(EntityLabel::Per), Tag::Inside(EntityLabel::Per)]
        );
        let tags = normalize_iob1(&["O", "I-LOC"]).unwrap();
        assert_eq!(tags, vec![Tag::Outside, Tag::Begin(EntityLabel::Loc)]);
    }

    #[test]
    fn normalize_iob1_keeps_valid_bio2() {
        let tags = normalize_iob1(&["B-ORG", "I-ORG"]).unwrap();
        assert_eq!(
            tags,
            vec![Tag::Begin(EntityLabel::Org), Tag::Inside(EntityLabel::Org)]
        );
    }

    #[test]
    fn normalize_iob1_rejects_unknown_labels() {
        let err = normalize_iob1(&["O", "B-THING"]).unwrap_err();
        assert!(err.to_string().contains("position 1"), "{err}");
    }

    proptest! {
        #[test]
        fn tokenizer_offsets_slice_back(text in "\\PC{0,60}") {
            let tokens = tokenize(&text);
            let mut prev_end = 0;
            for t in &tokens {
                prop_assert!(t.start < t.end);
                prop_assert_eq!(&text[t.start..t.end], t.text.as_str());
                prop_assert!(t.start >= prev_end);
                prev_end = t.end;
            }
        }

        #[test]
        fn span_tag_round_trip(raw in proptest::collection::vec(0usize..TAG_COUNT, 0..24)) {
            let tags = repair_bio2(
                &raw.iter().map(|&i| Tag::from_index(i).unwrap()).collect::<Vec<_>>(),
            );
            let tokens = toks(tags.len());
            let spans = tags_to_spans(&tokens, &tags).unwrap();
            // spans are sorted and non-overlapping
            for w in spans.windows(2) {
                prop_assert!(w[0].token_end <= w[1].token_start);
            }
            let back = spans_to_tags(&tokens, &spans).unwrap();
            prop_assert_eq!(back, tags);
        }

        #[test]
        fn repair_is_idempotent(raw in proptest::collection::vec(0usize..TAG_COUNT, 0..24)) {
            let tags: Vec<Tag> = raw.iter().map(|&i| Tag::from_index(i).unwrap()).collect();
            let once = repair_bio2(&tags);
            prop_assert!(validate_bio2(&once).is_ok());
            prop_assert_eq!(repair_bio2(&once), once.clone());
        }
    }
}
