//! Synthetic tagged-corpus generation from gazetteers: deterministic per
//! seed, gold tags correct by construction, entity byte share steerable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::gazetteer::Gazetteers;
use crate::doc::{Document, EntityLabel, Tag};
use crate::error::{Error, Result};

/// Seed of the corpus every built-in quality check trains on.
pub const STANDARD_SEED: u64 = 42;
pub const STANDARD_SENTENCES: usize = 2000;
const STANDARD_ENTITY_FRACTION: f64 = 0.3;

#[derive(Clone, Copy)]
enum Slot {
    Filler,
    Person,
    Org,
    Loc,
    Misc,
}

use Slot::{Filler as F, Loc as L, Misc as M, Org as G, Person as P};

const PATTERNS: &[&[Slot]] = &[
    &[P, F, F, L],
    &[F, P, F, L, F],
    &[P, F, G],
    &[G, F, F, L],
    &[F, M, F, P],
    &[G, F, F, M],
    &[P, F, P, F, L],
    &[F, G, F, G],
    &[L, F, F, M],
    &[P, F, M, F, F],
];

fn push_person(rng: &mut ChaCha20Rng, gaz: &Gazetteers, out: &mut Vec<(String, Tag)>) {
    let first = gaz.person_first.choose(rng).unwrap();
    out.push((first.clone(), Tag::Begin(EntityLabel::Per)));
    if rng.gen_bool(0.7) {
        let last = gaz.person_last.choose(rng).unwrap();
        out.push((last.clone(), Tag::Inside(EntityLabel::Per)));
    }
}

fn push_org(rng: &mut ChaCha20Rng, gaz: &Gazetteers, out: &mut Vec<(String, Tag)>) {
    let stem = gaz.org_stems.choose(rng).unwrap();
    out.push((stem.clone(), Tag::Begin(EntityLabel::Org)));
    if rng.gen_bool(0.6) {
        let suffix = gaz.org_suffixes.choose(rng).unwrap();
        out.push((suffix.clone(), Tag::Inside(EntityLabel::Org)));
    }
}

fn push_loc(rng: &mut ChaCha20Rng, gaz: &Gazetteers, out: &mut Vec<(String, Tag)>) {
    let place = gaz.locations.choose(rng).unwrap();
    for (i, word) in place.split(' ').enumerate() {
        let tag = if i == 0 {
            Tag::Begin(EntityLabel::Loc)
        } else {
            Tag::Inside(EntityLabel::Loc)
        };
        out.push((word.to_string(), tag));
    }
}

fn push_misc(rng: &mut ChaCha20Rng, gaz: &Gazetteers, out: &mut Vec<(String, Tag)>) {
    let word = gaz.miscs.choose(rng).unwrap();
    out.push((word.clone(), Tag::Begin(EntityLabel::Misc)));
}

fn entity_sentence(rng: &mut ChaCha20Rng, gaz: &Gazetteers) -> Vec<(String, Tag)> {
    let pattern = PATTERNS.choose(rng).unwrap();
    let mut out = Vec::with_capacity(pattern.len() + 2);
    for slot in pattern.iter() {
        match slot {
            Slot::Filler => {
                let word = gaz.fillers.choose(rng).unwrap();
                out.push((word.clone(), Tag::Outside));
            }
            Slot::Person => push_person(rng, gaz, &mut out),
            Slot::Org => push_org(rng, gaz, &mut out),
            Slot::Loc => push_loc(rng, gaz, &mut out),
            Slot::Misc => push_misc(rng, gaz, &mut out),
        }
    }
    out
}

fn filler_sentence(rng: &mut ChaCha20Rng, gaz: &Gazetteers) -> Vec<(String, Tag)> {
    let len = rng.gen_range(5..=9);
    (0..len)
        .map(|_| {
            let word = gaz.fillers.choose(rng).unwrap();
            (word.clone(), Tag::Outside)
        })
        .collect()
}

fn sentence_to_document(words_tags: Vec<(String, Tag)>) -> Result<Document> {
    let words: Vec<String> = words_tags.iter().map(|(w, _)| w.clone()).collect();
    let tags: Vec<Tag> = words_tags.into_iter().map(|(_, t)| t).collect();
    Document::from_token_strings(&words, Some(tags))
}

/// Generate a tagged sentence corpus. The share of entity bytes is steered
/// toward `entity_fraction` greedily: each next sentence carries entities
/// only while the running share is below target, so a target of zero yields
/// an all-O corpus.
pub fn generate_corpus(
    seed: u64,
    sentence_count: usize,
    entity_fraction: f64,
    gaz: &Gazetteers,
) -> Result<Vec<Document>> {
    if !(0.0..=1.0).contains(&entity_fraction) {
        return Err(Error::Contract(format!(
            "entity_fraction {entity_fraction} outside [0, 1]"
        )));
    }
    gaz.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(sentence_count);
    let mut entity_bytes = 0usize;
    let mut total_bytes = 0usize;
    for _ in 0..sentence_count {
        let want_entities =
            entity_fraction > 0.0 && (entity_bytes as f64) < entity_fraction * (total_bytes as f64 + 1.0);
        let words_tags = if want_entities {
            entity_sentence(&mut rng, gaz)
        } else {
            filler_sentence(&mut rng, gaz)
        };
        let doc = sentence_to_document(words_tags)?;
        total_bytes += doc.text.len();
        entity_bytes += doc
            .spans()?
            .iter()
            .map(|s| s.byte_end - s.byte_start)
            .sum::<usize>();
        corpus.push(doc);
    }
    Ok(corpus)
}

/// The bundled 2,000-sentence corpus used by the tagger quality checks.
pub fn standard_corpus() -> Result<Vec<Document>> {
    generate_corpus(
        STANDARD_SEED,
        STANDARD_SENTENCES,
        STANDARD_ENTITY_FRACTION,
        &Gazetteers::builtin(),
    )
}

/// Share of corpus text bytes covered by entity spans.
pub fn entity_byte_fraction(corpus: &[Document]) -> f64 {
    let mut entity = 0usize;
    let mut total = 0usize;
    for doc in corpus {
        total += doc.text.len();
        if let Ok(spans) = doc.spans() {
            entity += spans.iter().map(|s| s.byte_end - s.byte_start).sum::<usize>();
        }
    }
    if total == 0 {
        0.0
    } else {
        entity as f64 / total as f64
    }
}
