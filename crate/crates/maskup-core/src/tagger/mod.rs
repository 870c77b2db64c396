//! Linear-chain CRF sequence tagger: feature extraction, the model and its
//! file format, exact inference, training, and evaluation.

pub mod eval;
pub mod features;
pub mod inference;
pub mod model;
pub mod train;

pub use eval::{evaluate, EvalReport, TagMetrics};
pub use features::{extract_features, FeatureVocabulary};
pub use inference::{
    decode, decode_with_score, log_partition, neg_log_likelihood_and_gradient, sequence_score,
    SparseGradient,
};
pub use model::{CrfModel, TRANS_DIM, TRANS_PARAMS, VIRTUAL};
pub use train::{train, train_update, TrainConfig};
