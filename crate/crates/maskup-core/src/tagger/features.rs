//! Hand-crafted token features and the feature vocabulary.
//!
//! Features are namespaced strings ("w=", "shape=", "p1=", ...). The
//! vocabulary maps them to dense indices; once frozen, unseen features
//! stay absent so parameter indexing remains stable across updates.

use std::collections::HashMap;

use crate::doc::Document;
use crate::error::{Error, Result};

/// Sentence-boundary sentinels for the previous/next-token features.
const START_SENTINEL: &str = "<S>";
const END_SENTINEL: &str = "</S>";

/// Extract the feature set for the token at `position`.
///
/// The same (document, position) pair always yields the same list, in the
/// same order, with no duplicates.
pub fn extract_features(doc: &Document, position: usize) -> Result<Vec<String>> {
    if position >= doc.tokens.len() {
        return Err(Error::Contract(format!(
            "position {position} out of range for {} tokens",
            doc.tokens.len()
        )));
    }
    let token = &doc.tokens[position].text;
    let lower = token.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();

    let mut feats = Vec::with_capacity(16);
    feats.push("bias".to_string());
    feats.push(format!("w={lower}"));
    feats.push(format!("shape={}", word_shape(token)));
    for n in 1..=3usize {
        if chars.len() >= n {
            let prefix: String = chars[..n].iter().collect();
            feats.push(format!("p{n}={prefix}"));
            let suffix: String = chars[chars.len() - n..].iter().collect();
            feats.push(format!("s{n}={suffix}"));
        }
    }
    if token.chars().next().is_some_and(|c| c.is_uppercase()) {
        feats.push("cap=1".to_string());
    }
    if is_all_caps(token) {
        feats.push("allcaps=1".to_string());
    }
    if !token.is_empty() && token.chars().all(|c| c.is_numeric()) {
        feats.push("digit=1".to_string());
    }
    let prev = match position.checked_sub(1) {
        Some(p) => doc.tokens[p].text.to_lowercase(),
        None => START_SENTINEL.to_string(),
    };
    feats.push(format!("prev={prev}"));
    let next = match doc.tokens.get(position + 1) {
        Some(t) => t.text.to_lowercase(),
        None => END_SENTINEL.to_string(),
    };
    feats.push(format!("next={next}"));
    Ok(feats)
}

/// Character-class pattern of a token: uppercase → `X`, lowercase → `x`,
/// digit → `d`, anything else verbatim.
fn word_shape(token: &str) -> String {
    token
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_numeric() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

fn is_all_caps(token: &str) -> bool {
    let mut saw_alpha = false;
    for c in token.chars() {
        if c.is_alphabetic() {
            saw_alpha = true;
            if !c.is_uppercase() {
                return false;
            }
        }
    }
    saw_alpha
}

/// Dense feature-string-to-index map. Indices are assigned first-seen and
/// never change; a frozen vocabulary refuses to grow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVocabulary {
    names: Vec<String>,
    index: HashMap<String, u32>,
    frozen: bool,
}

impl FeatureVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuild from a saved name list (indices follow list order).
    pub fn from_names(names: Vec<String>, frozen: bool) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i as u32).is_some() {
                return Err(Error::Corrupt(format!("duplicate feature {name:?}")));
            }
        }
        Ok(Self {
            names,
            index,
            frozen,
        })
    }

    /// Look up a feature, adding it when the vocabulary is still open.
    pub fn intern(&mut self, feature: &str) -> Option<u32> {
        if let Some(&i) = self.index.get(feature) {
            return Some(i);
        }
        if self.frozen {
            return None;
        }
        let i = self.names.len() as u32;
        self.names.push(feature.to_string());
        self.index.insert(feature.to_string(), i);
        Some(i)
    }

    pub fn get(&self, feature: &str) -> Option<u32> {
        self.index.get(feature).copied()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}
