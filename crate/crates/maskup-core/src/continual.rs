//! Continual learning through weight consolidation.
//!
//! After finishing a task, [`estimate_fisher`] snapshots the model
//! parameters and the diagonal Fisher information (mean squared gold-label
//! gradient per parameter). Later training adds a quadratic penalty that
//! pulls consolidated parameters back toward the snapshot, scaled by their
//! Fisher value, so learning a new task does not erase the old one.
//! User rectifications feed back in as ordinary training data via
//! [`corrections_to_corpus`].

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc::{tags_to_spans, Document, EntityLabel, Tag};
use crate::error::{Error, Result};
use crate::tagger::inference::{decode, neg_log_likelihood_and_gradient};
use crate::tagger::model::{CrfModel, TRANS_PARAMS};
use crate::tagger::train::{train_update, TrainConfig};

const FORMAT_NAME: &str = "maskup-ewc";
const FORMAT_VERSION: u32 = 1;

/// Consolidated snapshot of one or more finished tasks: anchor parameters
/// and their diagonal Fisher values, laid out like [`CrfModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct EwcState {
    theta_star: Vec<f64>,
    fisher: Vec<f64>,
    /// Length of the emission block when the snapshot was taken. Parameters
    /// a larger model added after the snapshot are unconsolidated.
    emission_len: usize,
    pub source_task_id: String,
    pub sample_count: usize,
}

impl EwcState {
    pub fn new(
        theta_star: Vec<f64>,
        fisher: Vec<f64>,
        emission_len: usize,
        source_task_id: impl Into<String>,
        sample_count: usize,
    ) -> Result<EwcState> {
        if theta_star.len() != fisher.len() {
            return Err(Error::Dimension {
                expected: theta_star.len(),
                got: fisher.len(),
            });
        }
        if emission_len + TRANS_PARAMS != theta_star.len() {
            return Err(Error::Dimension {
                expected: emission_len + TRANS_PARAMS,
                got: theta_star.len(),
            });
        }
        if fisher.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
            return Err(Error::Validation(
                "fisher values must be non-negative and finite".to_string(),
            ));
        }
        Ok(EwcState {
            theta_star,
            fisher,
            emission_len,
            source_task_id: source_task_id.into(),
            sample_count,
        })
    }

    pub fn len(&self) -> usize {
        self.theta_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_star.is_empty()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn fisher(&self) -> &[f64] {
        &self.fisher
    }

    /// Anchor and Fisher vectors padded to `model`'s parameter layout.
    /// Emission parameters the model added after this snapshot receive
    /// zero anchor and zero Fisher, leaving them free to learn.
    pub fn aligned_for(&self, model: &CrfModel) -> Result<(Vec<f64>, Vec<f64>)> {
        let emission_now = model.emission_param_count();
        if self.emission_len > emission_now {
            return Err(Error::Dimension {
                expected: emission_now,
                got: self.emission_len,
            });
        }
        let total = emission_now + TRANS_PARAMS;
        let mut theta = vec![0.0; total];
        let mut fisher = vec![0.0; total];
        theta[..self.emission_len].copy_from_slice(&self.theta_star[..self.emission_len]);
        fisher[..self.emission_len].copy_from_slice(&self.fisher[..self.emission_len]);
        theta[emission_now..].copy_from_slice(&self.theta_star[self.emission_len..]);
        fisher[emission_now..].copy_from_slice(&self.fisher[self.emission_len..]);
        Ok((theta, fisher))
    }

    /// Write the state to `path` atomically.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = EwcFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            source_task_id: self.source_task_id.clone(),
            sample_count: self.sample_count,
            emission_len: self.emission_len,
            theta_star: self.theta_star.clone(),
            fisher: self.fisher.clone(),
        };
        let json =
            serde_json::to_vec(&file).map_err(|e| Error::Format(format!("encode state: {e}")))?;
        crate::fsutil::atomic_write(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EwcState> {
        let bytes = fs::read(path.as_ref())?;
        let file: EwcFile = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Corrupt(format!("{}: {e}", path.as_ref().display())))?;
        if file.format != FORMAT_NAME {
            return Err(Error::Corrupt(format!(
                "unexpected container {:?}",
                file.format
            )));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: FORMAT_VERSION,
            });
        }
        EwcState::new(
            file.theta_star,
            file.fisher,
            file.emission_len,
            file.source_task_id,
            file.sample_count,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct EwcFile {
    format: String,
    version: u32,
    source_task_id: String,
    sample_count: usize,
    emission_len: usize,
    theta_star: Vec<f64>,
    fisher: Vec<f64>,
}

/// Empirical diagonal Fisher over a tagged corpus: the per-parameter mean
/// of the squared gold-label log-likelihood gradient, with the current
/// parameters as the anchor.
pub fn estimate_fisher(
    model: &CrfModel,
    corpus: &[Document],
    task_id: impl Into<String>,
) -> Result<EwcState> {
    if corpus.is_empty() {
        return Err(Error::Contract("fisher estimation corpus is empty".to_string()));
    }
    let emission_len = model.emission_param_count();
    let mut fisher = vec![0.0f64; model.param_count()];
    for doc in corpus {
        // the gold-label gradient is the negated loss gradient; squares agree
        let (_, grad) = neg_log_likelihood_and_gradient(model, doc)?;
        let dense = grad.to_dense(emission_len);
        for (f, g) in fisher.iter_mut().zip(&dense) {
            *f += g * g;
        }
    }
    let n = corpus.len() as f64;
    for f in &mut fisher {
        *f /= n;
    }
    EwcState::new(model.params(), fisher, emission_len, task_id, corpus.len())
}

/// Quadratic consolidation penalty and its gradient for a parameter
/// vector: `sum_i (lambda/2) * F_i * (theta_i - anchor_i)^2`.
pub fn ewc_penalty_and_gradient(
    theta: &[f64],
    state: &EwcState,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    if theta.len() != state.len() {
        return Err(Error::Dimension {
            expected: state.len(),
            got: theta.len(),
        });
    }
    let mut penalty = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let diff = theta[i] - state.theta_star[i];
        penalty += 0.5 * lambda * state.fisher[i] * diff * diff;
        grad[i] = lambda * state.fisher[i] * diff;
    }
    Ok((penalty, grad))
}

/// Train on a new task with the consolidation penalty active, then fold the
/// new task's Fisher into the running state.
///
/// The returned state sums the old and new Fisher vectors element-wise and
/// anchors at the new optimum; emission parameters created for new
/// vocabulary start unconsolidated.
pub fn continual_update(
    model: &CrfModel,
    state: &EwcState,
    new_corpus: &[Document],
    config: &TrainConfig,
    task_id: impl Into<String>,
) -> Result<(CrfModel, EwcState)> {
    let updated = train_update(model, new_corpus, config, Some(state))?;
    let task_id = task_id.into();
    let new_state = estimate_fisher(&updated, new_corpus, task_id)?;
    let (_, old_fisher) = state.aligned_for(&updated)?;
    let mut fisher = new_state.fisher;
    for (f, old) in fisher.iter_mut().zip(&old_fisher) {
        *f += old;
    }
    let combined = EwcState::new(
        updated.params(),
        fisher,
        updated.emission_param_count(),
        new_state.source_task_id,
        state.sample_count + new_corpus.len(),
    )?;
    Ok((updated, combined))
}

/// One user rectification of a tagged document: spans the user confirmed,
/// spans they rejected, and spans they added by hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub text: String,
    #[serde(default)]
    pub accepted: Vec<SpanRef>,
    #[serde(default)]
    pub rejected: Vec<SpanRef>,
    #[serde(default)]
    pub added: Vec<SpanRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// Token-range reference to a span, as carried in correction files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub label: EntityLabel,
    pub token_start: usize,
    pub token_end: usize,
}

/// Turn correction records into gold-tagged documents: start from the
/// model's predictions, clear the rejected spans to O, and overlay the
/// user-added spans.
pub fn corrections_to_corpus(
    records: &[CorrectionRecord],
    model: &CrfModel,
) -> Result<Vec<Document>> {
    let mut corpus = Vec::with_capacity(records.len());
    for (idx, record) in records.iter().enumerate() {
        corpus.push(
            apply_correction(record, model)
                .map_err(|e| Error::Validation(format!("correction record {idx}: {e}")))?,
        );
    }
    Ok(corpus)
}

fn apply_correction(record: &CorrectionRecord, model: &CrfModel) -> Result<Document> {
    let doc = Document::untagged(record.text.clone());
    let n = doc.len();
    for span in record
        .accepted
        .iter()
        .chain(&record.rejected)
        .chain(&record.added)
    {
        if span.token_start >= span.token_end || span.token_end > n {
            return Err(Error::Validation(format!(
                "span {}..{} out of range for {n} tokens",
                span.token_start, span.token_end
            )));
        }
    }
    // accepted, rejected, and added regions must not touch the same token
    let mut claimed = vec![false; n];
    for span in record
        .accepted
        .iter()
        .chain(&record.rejected)
        .chain(&record.added)
    {
        for i in span.token_start..span.token_end {
            if claimed[i] {
                return Err(Error::Validation(format!(
                    "token {i} claimed by more than one correction span"
                )));
            }
            claimed[i] = true;
        }
    }

    let mut tags = decode(model, &doc)?;
    for span in &record.rejected {
        for tag in &mut tags[span.token_start..span.token_end] {
            *tag = Tag::Outside;
        }
    }
    let mut tags = crate::doc::repair_bio2(&tags);
    for span in &record.added {
        for (i, tag) in tags
            .iter_mut()
            .enumerate()
            .take(span.token_end)
            .skip(span.token_start)
        {
            if *tag != Tag::Outside {
                return Err(Error::Validation(format!(
                    "added span {}..{} collides with an existing entity at token {i}",
                    span.token_start, span.token_end
                )));
            }
            *tag = if i == span.token_start {
                Tag::Begin(span.label)
            } else {
                Tag::Inside(span.label)
            };
        }
    }
    let tags = crate::doc::repair_bio2(&tags);
    doc.with_tags(tags)
}

/// Read newline-delimited correction records.
pub fn read_corrections(path: impl AsRef<Path>) -> Result<Vec<CorrectionRecord>> {
    let file = fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorrectionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Write newline-delimited correction records.
pub fn write_corrections(records: &[CorrectionRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = fs::File::create(path.as_ref())?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Format(format!("encode correction: {e}")))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Rebuild the span view of a correction-derived document; handy for
/// checking what a record resolved to.
pub fn resolved_spans(doc: &Document) -> Result<Vec<crate::doc::EntitySpan>> {
    match &doc.tags {
        Some(tags) => tags_to_spans(&doc.tokens, tags),
        None => Ok(Vec::new()),
    }
}
