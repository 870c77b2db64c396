//! SGD training for the CRF, with optional L2 and consolidation penalties.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::continual::EwcState;
use crate::doc::{Document, TAG_COUNT};
use crate::error::{Error, Result};
use crate::tagger::inference::neg_log_likelihood_and_gradient;
use crate::tagger::model::{CrfModel, TRANS_DIM};

/// Training hyperparameters. Updates are pure SGD with batch size 1 and a
/// `1/(1+epoch)` learning-rate decay.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Weight of the consolidation penalty; 0 disables it.
    pub ewc_lambda: f64,
}

impl TrainConfig {
    /// Examples per gradient step; the trainer is pure SGD.
    pub const BATCH_SIZE: usize = 1;

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Contract("epochs must be positive".to_string()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract("learning_rate must be positive".to_string()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Contract("l2 must be non-negative".to_string()));
        }
        if !(self.ewc_lambda >= 0.0 && self.ewc_lambda.is_finite()) {
            return Err(Error::Contract("ewc_lambda must be non-negative".to_string()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 42,
            ewc_lambda: 0.0,
        }
    }
}

/// Train a fresh model: the vocabulary is built from `corpus`, frozen, and
/// weights start at zero. Deterministic given the config seed.
pub fn train(corpus: &[Document], config: &TrainConfig, ewc: Option<&EwcState>) -> Result<CrfModel> {
    let mut model = CrfModel::new();
    model.absorb_features(corpus)?;
    train_in_place(&mut model, corpus, config, ewc)?;
    Ok(model)
}

/// Continue training an existing model on `corpus`. Features unseen so far
/// are appended to the vocabulary with zero weights; existing indices are
/// unchanged.
pub fn train_update(
    model: &CrfModel,
    corpus: &[Document],
    config: &TrainConfig,
    ewc: Option<&EwcState>,
) -> Result<CrfModel> {
    let mut updated = model.clone();
    updated.absorb_features(corpus)?;
    train_in_place(&mut updated, corpus, config, ewc)?;
    Ok(updated)
}

fn train_in_place(
    model: &mut CrfModel,
    corpus: &[Document],
    config: &TrainConfig,
    ewc: Option<&EwcState>,
) -> Result<()> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Contract("training corpus is empty".to_string()));
    }
    for (i, doc) in corpus.iter().enumerate() {
        if doc.tags.is_none() {
            return Err(Error::Contract(format!("document {i} has no gold tags")));
        }
    }
    // align the consolidation anchor with this model's parameter layout
    let penalty = match ewc {
        Some(state) if config.ewc_lambda > 0.0 => Some(state.aligned_for(model)?),
        _ => None,
    };
    let lambda = config.ewc_lambda;
    let emission_params = model.emission_param_count();

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate / (1.0 + epoch as f64);
        order.shuffle(&mut rng);
        for &idx in &order {
            let doc = &corpus[idx];
            let (loss, grad) = neg_log_likelihood_and_gradient(model, doc)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    example: idx,
                    loss,
                });
            }
            // L2 and the consolidation pull are applied to the parameters
            // this step touches: the document's feature rows plus the full
            // transition block.
            for (f, row) in &grad.emission {
                let base = *f as usize * TAG_COUNT;
                let weights = model.emission_row_mut(*f);
                for t in 0..TAG_COUNT {
                    let theta = weights[t];
                    let mut g = row[t] + 2.0 * config.l2 * theta;
                    if let Some((theta_star, fisher)) = &penalty {
                        let pull = lambda * fisher[base + t];
                        if pull != 0.0 {
                            g += pull * (theta - theta_star[base + t]);
                        }
                    }
                    weights[t] = theta - lr * g;
                }
            }
            let trans = model.transition_mut();
            for i in 0..TRANS_DIM {
                for j in 0..TRANS_DIM {
                    let theta = trans[i][j];
                    let mut g = grad.transition[i][j] + 2.0 * config.l2 * theta;
                    if let Some((theta_star, fisher)) = &penalty {
                        let p = emission_params + i * TRANS_DIM + j;
                        let pull = lambda * fisher[p];
                        if pull != 0.0 {
                            g += pull * (theta - theta_star[p]);
                        }
                    }
                    trans[i][j] = theta - lr * g;
                }
            }
        }
    }
    Ok(())
}
