//! CRF model parameters: per-feature emission weights, tag-transition
//! weights with virtual START/STOP states, and the versioned model file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc::{Document, Tag, TAG_COUNT};
use crate::error::{Error, Result};
use crate::tagger::features::{extract_features, FeatureVocabulary};

/// Row/column used for the virtual START (as source) and STOP (as target)
/// states in the transition matrix.
pub const VIRTUAL: usize = TAG_COUNT;
/// Transition matrix dimension: 9 tags plus the virtual state.
pub const TRANS_DIM: usize = TAG_COUNT + 1;
/// Number of transition parameters.
pub const TRANS_PARAMS: usize = TRANS_DIM * TRANS_DIM;

const FORMAT_NAME: &str = "maskup-crf";
const FORMAT_VERSION: u32 = 1;

/// Linear-chain CRF weights over the fixed 9-tag order.
///
/// Transitions are indexed `[from][to]`; row [`VIRTUAL`] holds START→tag
/// scores, column [`VIRTUAL`] holds tag→STOP scores, and
/// `[VIRTUAL][VIRTUAL]` scores the empty sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    vocab: FeatureVocabulary,
    /// `vocab.len() * TAG_COUNT` weights, row-major by feature.
    emission: Vec<f64>,
    transition: [[f64; TRANS_DIM]; TRANS_DIM],
}

impl Default for CrfModel {
    fn default() -> Self {
        Self::new()
    }
}

impl CrfModel {
    pub fn new() -> Self {
        CrfModel {
            vocab: FeatureVocabulary::new(),
            emission: Vec::new(),
            transition: [[0.0; TRANS_DIM]; TRANS_DIM],
        }
    }

    pub fn vocab(&self) -> &FeatureVocabulary {
        &self.vocab
    }

    pub fn transition(&self) -> &[[f64; TRANS_DIM]; TRANS_DIM] {
        &self.transition
    }

    pub fn transition_mut(&mut self) -> &mut [[f64; TRANS_DIM]; TRANS_DIM] {
        &mut self.transition
    }

    /// Emission weights of one feature, one per tag.
    pub fn emission_row(&self, feature: u32) -> &[f64] {
        let base = feature as usize * TAG_COUNT;
        &self.emission[base..base + TAG_COUNT]
    }

    pub fn emission_row_mut(&mut self, feature: u32) -> &mut [f64] {
        let base = feature as usize * TAG_COUNT;
        &mut self.emission[base..base + TAG_COUNT]
    }

    /// Grow the vocabulary with every feature of `corpus`, zero-initializing
    /// new emission rows. Freezes the vocabulary afterwards.
    pub fn absorb_features(&mut self, corpus: &[Document]) -> Result<()> {
        self.vocab.unfreeze();
        for doc in corpus {
            for pos in 0..doc.len() {
                for feat in extract_features(doc, pos)? {
                    self.vocab.intern(&feat);
                }
            }
        }
        self.vocab.freeze();
        self.emission.resize(self.vocab.len() * TAG_COUNT, 0.0);
        Ok(())
    }

    /// Feature indices for every position of a document, unseen features
    /// dropped. Iteration order is the extraction order.
    pub fn feature_ids(&self, doc: &Document) -> Result<Vec<Vec<u32>>> {
        let mut ids = Vec::with_capacity(doc.len());
        for pos in 0..doc.len() {
            let feats = extract_features(doc, pos)?;
            ids.push(feats.iter().filter_map(|f| self.vocab.get(f)).collect());
        }
        Ok(ids)
    }

    /// Total number of parameters (emission block then transition block).
    pub fn param_count(&self) -> usize {
        self.emission.len() + TRANS_PARAMS
    }

    /// Length of the emission block within the flattened parameter vector.
    pub fn emission_param_count(&self) -> usize {
        self.emission.len()
    }

    /// Flattened parameter vector: emission weights (feature-major) followed
    /// by transition weights (row-major).
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.emission);
        for row in &self.transition {
            v.extend_from_slice(row);
        }
        v
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let split = self.emission.len();
        self.emission.copy_from_slice(&params[..split]);
        for (i, row) in self.transition.iter_mut().enumerate() {
            let base = split + i * TRANS_DIM;
            row.copy_from_slice(&params[base..base + TRANS_DIM]);
        }
        Ok(())
    }

    pub fn get_param(&self, index: usize) -> f64 {
        if index < self.emission.len() {
            self.emission[index]
        } else {
            let t = index - self.emission.len();
            self.transition[t / TRANS_DIM][t % TRANS_DIM]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        if index < self.emission.len() {
            self.emission[index] = value;
        } else {
            let t = index - self.emission.len();
            self.transition[t / TRANS_DIM][t % TRANS_DIM] = value;
        }
    }

    /// Write the model to `path` atomically (temp file plus rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            tag_order: Tag::ALL.iter().map(|t| t.as_label_string()).collect(),
            features: self.vocab.names().to_vec(),
            emission: self.emission.clone(),
            transition: self.transition.iter().map(|r| r.to_vec()).collect(),
        };
        let json =
            serde_json::to_vec(&file).map_err(|e| Error::Format(format!("encode model: {e}")))?;
        crate::fsutil::atomic_write(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CrfModel> {
        let bytes = fs::read(path.as_ref())?;
        let file: ModelFile = serde_json::from_slice(&bytes).map_err(|e| {
            Error::Corrupt(format!("{}: {e}", path.as_ref().display()))
        })?;
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
        let expected_tags: Vec<String> = Tag::ALL.iter().map(|t| t.as_label_string()).collect();
        if file.tag_order != expected_tags {
            return Err(Error::Corrupt("tag order mismatch".to_string()));
        }
        let vocab = FeatureVocabulary::from_names(file.features, true)?;
        if file.emission.len() != vocab.len() * TAG_COUNT {
            return Err(Error::Corrupt(format!(
                "emission block has {} weights for {} features",
                file.emission.len(),
                vocab.len()
            )));
        }
        if file.transition.len() != TRANS_DIM || file.transition.iter().any(|r| r.len() != TRANS_DIM)
        {
            return Err(Error::Corrupt("transition block shape mismatch".to_string()));
        }
        if file.emission.iter().any(|w| !w.is_finite())
            || file.transition.iter().flatten().any(|w| !w.is_finite())
        {
            return Err(Error::Corrupt("non-finite weight".to_string()));
        }
        let mut transition = [[0.0; TRANS_DIM]; TRANS_DIM];
        for (i, row) in file.transition.iter().enumerate() {
            transition[i].copy_from_slice(row);
        }
        Ok(CrfModel {
            vocab,
            emission: file.emission,
            transition,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    tag_order: Vec<String>,
    features: Vec<String>,
    emission: Vec<f64>,
    transition: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> CrfModel {
        let mut m = CrfModel::new();
        let corpus = vec![Document::untagged("Anna met Bob")];
        m.absorb_features(&corpus).unwrap();
        for (i, w) in m.emission.iter_mut().enumerate() {
            *w = (i as f64 * 0.137).sin();
        }
        for i in 0..TRANS_DIM {
            for j in 0..TRANS_DIM {
                m.transition[i][j] = ((i * TRANS_DIM + j) as f64 * 0.31).cos();
            }
        }
        m
    }

    #[test]
    fn param_vector_round_trips() {
        let mut m = tiny_model();
        let params = m.params();
        assert_eq!(params.len(), m.param_count());
        for (i, &p) in params.iter().enumerate() {
            assert_eq!(m.get_param(i), p);
        }
        let doubled: Vec<f64> = params.iter().map(|p| p * 2.0).collect();
        m.set_params(&doubled).unwrap();
        assert_eq!(m.params(), doubled);
        assert!(matches!(
            m.set_params(&[0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn save_load_is_identity() {
        let m = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let loaded = CrfModel::load(&path).unwrap();
        assert_eq!(m, loaded);
        // weights must round-trip bit-exactly
        assert_eq!(
            m.params().iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            loaded.params().iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn truncated_file_is_corrupt_not_partial() {
        let m = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(CrfModel::load(&path), Err(Error::Corrupt(_))));
    }

    #[test]
    fn unknown_version_is_version_error() {
        let m = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\":1", "\"version\":99");
        fs::write(&path, text).unwrap();
        match CrfModel::load(&path) {
            Err(Error::Version { found, expected }) => {
                assert_eq!((found, expected), (99, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn absorb_features_grows_then_freezes() {
        let mut m = CrfModel::new();
        m.absorb_features(&[Document::untagged("Anna met")]).unwrap();
        let v1 = m.vocab.len();
        assert!(v1 > 0);
        assert!(m.vocab.is_frozen());
        assert_eq!(m.emission.len(), v1 * TAG_COUNT);
        // absorbing a new corpus extends, keeping old indices stable
        let old_names = m.vocab.names().to_vec();
        m.absorb_features(&[Document::untagged("Bob left")]).unwrap();
        assert!(m.vocab.len() > v1);
        assert_eq!(&m.vocab.names()[..v1], old_names.as_slice());
    }
}
