//! Shared helpers for the oracle and acceptance suites: a brute-force CRF
//! reference, finite differences, and randomized model/document builders.

#![allow(dead_code)]

use maskup_core::doc::{Document, Tag, TAG_COUNT};
use maskup_core::tagger::{CrfModel, VIRTUAL};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Small closed vocabulary so random documents mostly hit known features.
pub const WORD_POOL: &[&str] = &[
    "Anna", "met", "bob", "in", "Paris", "Acme", "the", "office", "on",
    "Friday", "x9", "über",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_doc(rng: &mut impl Rng, len: usize, tagged: bool) -> Document {
    let words: Vec<String> = (0..len)
        .map(|_| WORD_POOL.choose(rng).unwrap().to_string())
        .collect();
    let tags = tagged.then(|| random_bio2(rng, len));
    Document::from_token_strings(&words, tags).unwrap()
}

/// Uniformly random BIO2-valid tag sequence: at each position any O or B-
/// tag, plus the continuing I- tag when the previous tag allows it.
pub fn random_bio2(rng: &mut impl Rng, len: usize) -> Vec<Tag> {
    let mut out: Vec<Tag> = Vec::with_capacity(len);
    for pos in 0..len {
        let mut options: Vec<usize> = vec![0, 1, 3, 5, 7];
        if pos > 0 {
            let prev = out[pos - 1].index();
            if prev >= 1 {
                // B-X sits at odd index, its I-X one above; I-X continues itself
                options.push(if prev % 2 == 1 { prev + 1 } else { prev });
            }
        }
        let idx = *options.choose(rng).unwrap();
        out.push(Tag::from_index(idx).unwrap());
    }
    out
}

/// Model over the word pool's features with weights drawn from [-1, 1).
pub fn random_model(rng: &mut impl Rng) -> CrfModel {
    let mut model = CrfModel::new();
    let mut seed_docs = Vec::new();
    let base: Vec<String> = WORD_POOL.iter().map(|w| w.to_string()).collect();
    seed_docs.push(Document::from_token_strings(&base, None).unwrap());
    // a couple of shuffles so context features cover more adjacent pairs
    let mut shuffled = base;
    for _ in 0..3 {
        shuffled.shuffle(rng);
        seed_docs.push(Document::from_token_strings(&shuffled, None).unwrap());
    }
    model.absorb_features(&seed_docs).unwrap();
    let params: Vec<f64> = (0..model.param_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    model.set_params(&params).unwrap();
    model
}

pub struct Enumeration {
    pub log_z: f64,
    pub max_score: f64,
}

/// Exhaustive reference over all `9^L` tag sequences. Each sequence score
/// accumulates left to right in the same order as the sequential scorer,
/// so the maximum is comparable to the Viterbi score bit for bit.
pub fn enumerate_crf(model: &CrfModel, doc: &Document) -> Enumeration {
    let ids = model.feature_ids(doc).unwrap();
    let trans = model.transition();
    let em: Vec<[f64; TAG_COUNT]> = ids
        .iter()
        .map(|feats| {
            let mut row = [0.0f64; TAG_COUNT];
            for &f in feats {
                for (t, w) in model.emission_row(f).iter().enumerate() {
                    row[t] += w;
                }
            }
            row
        })
        .collect();
    let n = doc.len();
    if n == 0 {
        let s = trans[VIRTUAL][VIRTUAL];
        return Enumeration {
            log_z: s,
            max_score: s,
        };
    }

    let mut scores = Vec::with_capacity(TAG_COUNT.pow(n as u32));
    let mut assignment = vec![0usize; n];
    loop {
        let mut s = trans[VIRTUAL][assignment[0]];
        s += em[0][assignment[0]];
        for l in 1..n {
            s += trans[assignment[l - 1]][assignment[l]];
            s += em[l][assignment[l]];
        }
        s += trans[assignment[n - 1]][VIRTUAL];
        scores.push(s);

        // odometer over base-9 assignments
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            assignment[pos - 1] += 1;
            if assignment[pos - 1] < TAG_COUNT {
                break;
            }
            assignment[pos - 1] = 0;
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
    }

    let max_score = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max_score
        + scores
            .iter()
            .map(|s| (s - max_score).exp())
            .sum::<f64>()
            .ln();
    Enumeration { log_z, max_score }
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    plus[i] += h;
    let mut minus = x.to_vec();
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Relative error scaled by the larger magnitude, floored at 1.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
