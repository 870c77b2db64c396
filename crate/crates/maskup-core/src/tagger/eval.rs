//! Token-level tagging metrics over the eight entity tags.

use serde::{Deserialize, Serialize};

use crate::doc::{Document, Tag, TAG_COUNT};
use crate::error::{Error, Result};
use crate::tagger::inference::decode;
use crate::tagger::model::CrfModel;

/// Precision/recall/F1 for one tag. `degenerate` is set when a denominator
/// was zero and the metric was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of this tag.
    pub support: usize,
    pub degenerate: bool,
}

/// Per-tag and aggregate metrics for a tagged corpus. Micro and macro
/// averages cover the eight entity tags only, never O.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Entity tags in matrix order (B-PER, I-PER, ..., I-MISC).
    pub per_tag: Vec<(String, TagMetrics)>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub micro_degenerate: bool,
    /// Total tokens evaluated.
    pub tokens: usize,
    /// Tokens whose gold tag is an entity tag.
    pub entity_tokens: usize,
}

impl EvalReport {
    /// Fixed-width table: one row per entity tag plus the two averages.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>10}\n",
            "Level", "F1-Score", "Precision", "Recall"
        ));
        for (tag, m) in &self.per_tag {
            out.push_str(&format!(
                "{:<10} {:>10.6} {:>10.6} {:>10.6}\n",
                tag, m.f1, m.precision, m.recall
            ));
        }
        out.push_str(&format!("{:<10} {:>10.6}\n", "AVG_MICRO", self.micro_f1));
        out.push_str(&format!("{:<10} {:>10.6}\n", "AVG_MACRO", self.macro_f1));
        out
    }
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64, degenerate: &mut bool) -> f64 {
    if p + r == 0.0 {
        *degenerate = true;
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Decode every document and score predictions against the gold tags.
pub fn evaluate(model: &CrfModel, corpus: &[Document]) -> Result<EvalReport> {
    let mut tp = [0usize; TAG_COUNT];
    let mut fp = [0usize; TAG_COUNT];
    let mut fnc = [0usize; TAG_COUNT];
    let mut tokens = 0usize;
    let mut entity_tokens = 0usize;

    for (i, doc) in corpus.iter().enumerate() {
        let gold = doc
            .tags
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("document {i} has no gold tags")))?;
        let pred = decode(model, doc)?;
        for (g, p) in gold.iter().zip(&pred) {
            tokens += 1;
            if *g != Tag::Outside {
                entity_tokens += 1;
            }
            if g == p {
                tp[g.index()] += 1;
            } else {
                fnc[g.index()] += 1;
                fp[p.index()] += 1;
            }
        }
    }

    let mut per_tag = Vec::with_capacity(TAG_COUNT - 1);
    let mut f1_sum = 0.0;
    for tag in &Tag::ALL[1..] {
        let t = tag.index();
        let mut degenerate = false;
        let p = ratio(tp[t], tp[t] + fp[t], &mut degenerate);
        let r = ratio(tp[t], tp[t] + fnc[t], &mut degenerate);
        let f = f1(p, r, &mut degenerate);
        f1_sum += f;
        per_tag.push((
            tag.as_label_string(),
            TagMetrics {
                precision: p,
                recall: r,
                f1: f,
                support: tp[t] + fnc[t],
                degenerate,
            },
        ));
    }

    let entity_tp: usize = (1..TAG_COUNT).map(|t| tp[t]).sum();
    let entity_fp: usize = (1..TAG_COUNT).map(|t| fp[t]).sum();
    let entity_fn: usize = (1..TAG_COUNT).map(|t| fnc[t]).sum();
    let mut micro_degenerate = false;
    let micro_p = ratio(entity_tp, entity_tp + entity_fp, &mut micro_degenerate);
    let micro_r = ratio(entity_tp, entity_tp + entity_fn, &mut micro_degenerate);
    let micro_f1 = f1(micro_p, micro_r, &mut micro_degenerate);

    Ok(EvalReport {
        per_tag,
        micro_precision: micro_p,
        micro_recall: micro_r,
        micro_f1,
        macro_f1: f1_sum / (TAG_COUNT - 1) as f64,
        micro_degenerate,
        tokens,
        entity_tokens,
    })
}
