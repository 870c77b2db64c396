//! Synthetic corpus generation and the full-versus-selective encryption
//! benchmark harness.

pub mod corpus;
pub mod gazetteer;
pub mod harness;

pub use corpus::{entity_byte_fraction, generate_corpus, standard_corpus};
pub use gazetteer::Gazetteers;
pub use harness::{
    generate_document, report_to_csv, report_to_csv_string, report_to_json, run_bench,
    stable_csv_rows, ArmStats, BenchConfig, BenchReport,
};
