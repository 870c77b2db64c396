//! CoNLL-format corpus I/O.
//!
//! Rows are whitespace-separated columns with the token first and the
//! label last; blank lines separate sentences and `-DOCSTART-` rows are
//! skipped. Labels are repaired from IOB1 to BIO2 on read.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::doc::{repair_bio2, Document, Tag};
use crate::error::{Error, Result};

/// Read a CoNLL file into tagged documents, one per sentence.
pub fn read_conll(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let bytes = fs::read(path.as_ref())?;
    let text = String::from_utf8(bytes).map_err(|e| {
        Error::Format(format!(
            "{} is not valid UTF-8: {e}",
            path.as_ref().display()
        ))
    })?;
    parse_conll(&text)
}

pub(crate) fn parse_conll(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut raw_tags: Vec<Tag> = Vec::new();

    let mut flush = |words: &mut Vec<String>, raw_tags: &mut Vec<Tag>| -> Result<()> {
        if words.is_empty() {
            return Ok(());
        }
        let tags = repair_bio2(raw_tags);
        docs.push(Document::from_token_strings(words, Some(tags))?);
        words.clear();
        raw_tags.clear();
        Ok(())
    };

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut words, &mut raw_tags)?;
            continue;
        }
        let mut cols = line.split_whitespace();
        let token = cols.next().expect("non-empty line has a first column");
        if token == "-DOCSTART-" {
            continue;
        }
        let label = match cols.last() {
            Some(l) => l,
            None => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("row {line:?} has a token but no label column"),
                })
            }
        };
        let tag = Tag::parse_label(label).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("unknown label {label:?}"),
        })?;
        words.push(token.to_string());
        raw_tags.push(tag);
    }
    flush(&mut words, &mut raw_tags)?;
    Ok(docs)
}

/// Write documents in two-column CoNLL form (`token label`), one sentence
/// per block separated by blank lines.
pub fn write_conll(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (j, token) in doc.tokens.iter().enumerate() {
            let label = match &doc.tags {
                Some(tags) => tags[j].as_label_string(),
                None => "O".to_string(),
            };
            out.push_str(&token.text);
            out.push(' ');
            out.push_str(&label);
            out.push('\n');
        }
    }
    let mut file = fs::File::create(path.as_ref())?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
