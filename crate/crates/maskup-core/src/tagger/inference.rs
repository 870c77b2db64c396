//! Exact CRF inference in log space: partition function, posterior
//! marginals, the negative log-likelihood gradient, and Viterbi decoding.

use crate::doc::{repair_bio2, Document, Tag, TAG_COUNT};
use crate::error::{Error, Result};
use crate::tagger::model::{CrfModel, TRANS_DIM, VIRTUAL};

/// Log-sum-exp with max subtraction; empty input yields -inf.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-position emission scores: row `l` holds the score of each tag at
/// position `l`, the sum of the active features' weights in extraction
/// order.
pub(crate) fn emission_scores(model: &CrfModel, feature_ids: &[Vec<u32>]) -> Vec<[f64; TAG_COUNT]> {
    feature_ids
        .iter()
        .map(|feats| {
            let mut row = [0.0f64; TAG_COUNT];
            for &f in feats {
                let weights = model.emission_row(f);
                for (t, w) in weights.iter().enumerate() {
                    row[t] += w;
                }
            }
            row
        })
        .collect()
}

/// Forward recursion; returns per-position log alpha values and log Z.
fn forward(
    em: &[[f64; TAG_COUNT]],
    trans: &[[f64; TRANS_DIM]; TRANS_DIM],
) -> (Vec<[f64; TAG_COUNT]>, f64) {
    let n = em.len();
    if n == 0 {
        return (Vec::new(), trans[VIRTUAL][VIRTUAL]);
    }
    let mut alpha = vec![[0.0f64; TAG_COUNT]; n];
    for t in 0..TAG_COUNT {
        alpha[0][t] = trans[VIRTUAL][t] + em[0][t];
    }
    let mut scratch = [0.0f64; TAG_COUNT];
    for l in 1..n {
        for t in 0..TAG_COUNT {
            for (p, s) in scratch.iter_mut().enumerate() {
                *s = alpha[l - 1][p] + trans[p][t];
            }
            alpha[l][t] = log_sum_exp(&scratch) + em[l][t];
        }
    }
    for t in 0..TAG_COUNT {
        scratch[t] = alpha[n - 1][t] + trans[t][VIRTUAL];
    }
    let log_z = log_sum_exp(&scratch);
    (alpha, log_z)
}

/// Backward recursion; beta[l][t] is the log mass of completions after
/// emitting tag `t` at position `l`.
fn backward(
    em: &[[f64; TAG_COUNT]],
    trans: &[[f64; TRANS_DIM]; TRANS_DIM],
) -> Vec<[f64; TAG_COUNT]> {
    let n = em.len();
    let mut beta = vec![[0.0f64; TAG_COUNT]; n];
    if n == 0 {
        return beta;
    }
    for t in 0..TAG_COUNT {
        beta[n - 1][t] = trans[t][VIRTUAL];
    }
    let mut scratch = [0.0f64; TAG_COUNT];
    for l in (0..n - 1).rev() {
        for t in 0..TAG_COUNT {
            for (nx, s) in scratch.iter_mut().enumerate() {
                *s = trans[t][nx] + em[l + 1][nx] + beta[l + 1][nx];
            }
            beta[l][t] = log_sum_exp(&scratch);
        }
    }
    beta
}

/// Log of the partition function: the log-sum over all `9^L` tag sequences
/// of the exponentiated sequence score. For an empty document this is the
/// START→STOP transition score.
pub fn log_partition(model: &CrfModel, doc: &Document) -> Result<f64> {
    let ids = model.feature_ids(doc)?;
    let em = emission_scores(model, &ids);
    Ok(forward(&em, model.transition()).1)
}

/// Score of one tag sequence: START transition, then per-position emission
/// and transition terms left to right, then the STOP transition.
pub fn sequence_score(model: &CrfModel, doc: &Document, tags: &[Tag]) -> Result<f64> {
    if tags.len() != doc.len() {
        return Err(Error::Contract(format!(
            "{} tags for {} tokens",
            tags.len(),
            doc.len()
        )));
    }
    let ids = model.feature_ids(doc)?;
    let em = emission_scores(model, &ids);
    let trans = model.transition();
    if tags.is_empty() {
        return Ok(trans[VIRTUAL][VIRTUAL]);
    }
    let mut score = trans[VIRTUAL][tags[0].index()];
    score += em[0][tags[0].index()];
    for l in 1..tags.len() {
        score += trans[tags[l - 1].index()][tags[l].index()];
        score += em[l][tags[l].index()];
    }
    score += trans[tags[tags.len() - 1].index()][VIRTUAL];
    Ok(score)
}

/// Viterbi decoding. Ties break toward the lowest tag index at every
/// backtracking step; the result is repaired to BIO2 before returning.
pub fn decode(model: &CrfModel, doc: &Document) -> Result<Vec<Tag>> {
    let (raw, _) = decode_with_score(model, doc)?;
    Ok(repair_bio2(&raw))
}

/// Viterbi path (before BIO2 repair) together with its sequence score.
pub fn decode_with_score(model: &CrfModel, doc: &Document) -> Result<(Vec<Tag>, f64)> {
    let ids = model.feature_ids(doc)?;
    let em = emission_scores(model, &ids);
    let trans = model.transition();
    let n = em.len();
    if n == 0 {
        return Ok((Vec::new(), trans[VIRTUAL][VIRTUAL]));
    }

    let mut delta = vec![[f64::NEG_INFINITY; TAG_COUNT]; n];
    let mut back = vec![[0usize; TAG_COUNT]; n];
    for t in 0..TAG_COUNT {
        delta[0][t] = trans[VIRTUAL][t] + em[0][t];
    }
    for l in 1..n {
        for t in 0..TAG_COUNT {
            let mut best_prev = 0usize;
            let mut best = delta[l - 1][0] + trans[0][t];
            for p in 1..TAG_COUNT {
                let cand = delta[l - 1][p] + trans[p][t];
                if cand > best {
                    best = cand;
                    best_prev = p;
                }
            }
            back[l][t] = best_prev;
            delta[l][t] = best + em[l][t];
        }
    }

    let mut best_last = 0usize;
    let mut best_score = delta[n - 1][0] + trans[0][VIRTUAL];
    for t in 1..TAG_COUNT {
        let cand = delta[n - 1][t] + trans[t][VIRTUAL];
        if cand > best_score {
            best_score = cand;
            best_last = t;
        }
    }

    let mut path = vec![0usize; n];
    path[n - 1] = best_last;
    for l in (0..n - 1).rev() {
        path[l] = back[l + 1][path[l + 1]];
    }
    let tags = path
        .into_iter()
        .map(|i| Tag::from_index(i).expect("tag index in range"))
        .collect();
    Ok((tags, best_score))
}

/// Gradient of the negative log-likelihood for one document, stored
/// sparsely: per-feature emission rows plus the dense transition block.
#[derive(Debug, Clone)]
pub struct SparseGradient {
    /// One entry per distinct feature index appearing in the document.
    pub emission: Vec<(u32, [f64; TAG_COUNT])>,
    pub transition: [[f64; TRANS_DIM]; TRANS_DIM],
}

impl SparseGradient {
    pub fn zero() -> Self {
        SparseGradient {
            emission: Vec::new(),
            transition: [[0.0; TRANS_DIM]; TRANS_DIM],
        }
    }

    /// Expand into a dense vector laid out like [`CrfModel::params`].
    pub fn to_dense(&self, emission_param_count: usize) -> Vec<f64> {
        let mut dense = vec![0.0; emission_param_count + TRANS_DIM * TRANS_DIM];
        for (f, row) in &self.emission {
            let base = *f as usize * TAG_COUNT;
            for (t, g) in row.iter().enumerate() {
                dense[base + t] += g;
            }
        }
        for (i, row) in self.transition.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                dense[emission_param_count + i * TRANS_DIM + j] += g;
            }
        }
        dense
    }
}

/// Negative log-likelihood of the document's gold tags and its exact
/// gradient (expected feature counts minus empirical counts).
pub fn neg_log_likelihood_and_gradient(
    model: &CrfModel,
    doc: &Document,
) -> Result<(f64, SparseGradient)> {
    let tags = doc
        .tags
        .as_ref()
        .ok_or_else(|| Error::Contract("document has no gold tags".to_string()))?;
    if tags.len() != doc.len() {
        return Err(Error::Contract(format!(
            "{} tags for {} tokens",
            tags.len(),
            doc.len()
        )));
    }
    let ids = model.feature_ids(doc)?;
    let em = emission_scores(model, &ids);
    let trans = model.transition();
    let n = em.len();

    if n == 0 {
        // only sequence is the empty one: loss 0, gradient 0
        return Ok((0.0, SparseGradient::zero()));
    }

    let (alpha, log_z) = forward(&em, trans);
    let beta = backward(&em, trans);

    // unigram marginals P(y_l = t | x)
    let mut marginal = vec![[0.0f64; TAG_COUNT]; n];
    for l in 0..n {
        for t in 0..TAG_COUNT {
            marginal[l][t] = (alpha[l][t] + beta[l][t] - log_z).exp();
        }
    }

    let mut grad = SparseGradient::zero();

    // emission block: expected minus empirical per active feature
    let mut row_grad = [0.0f64; TAG_COUNT];
    let mut acc: std::collections::HashMap<u32, [f64; TAG_COUNT]> = std::collections::HashMap::new();
    let mut order: Vec<u32> = Vec::new();
    for l in 0..n {
        row_grad.copy_from_slice(&marginal[l]);
        row_grad[tags[l].index()] -= 1.0;
        for &f in &ids[l] {
            let entry = acc.entry(f).or_insert_with(|| {
                order.push(f);
                [0.0; TAG_COUNT]
            });
            for t in 0..TAG_COUNT {
                entry[t] += row_grad[t];
            }
        }
    }
    grad.emission = order
        .into_iter()
        .map(|f| (f, acc.remove(&f).expect("accumulated")))
        .collect();

    // START row and STOP column
    for t in 0..TAG_COUNT {
        grad.transition[VIRTUAL][t] = marginal[0][t];
        grad.transition[t][VIRTUAL] = marginal[n - 1][t];
    }
    grad.transition[VIRTUAL][tags[0].index()] -= 1.0;
    grad.transition[tags[n - 1].index()][VIRTUAL] -= 1.0;

    // pairwise expectations P(y_{l-1}=i, y_l=j | x)
    for l in 1..n {
        for i in 0..TAG_COUNT {
            for j in 0..TAG_COUNT {
                let log_p = alpha[l - 1][i] + trans[i][j] + em[l][j] + beta[l][j] - log_z;
                grad.transition[i][j] += log_p.exp();
            }
        }
        grad.transition[tags[l - 1].index()][tags[l].index()] -= 1.0;
    }

    let gold_score = {
        let mut s = trans[VIRTUAL][tags[0].index()] + em[0][tags[0].index()];
        for l in 1..n {
            s += trans[tags[l - 1].index()][tags[l].index()] + em[l][tags[l].index()];
        }
        s + trans[tags[n - 1].index()][VIRTUAL]
    };
    let loss = log_z - gold_score;
    Ok((loss, grad))
}
