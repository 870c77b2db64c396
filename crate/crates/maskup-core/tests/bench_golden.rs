//! Golden-file check for the benchmark CSV: a seeded run with counter
//! nonces must reproduce these rows exactly, wall-time rows excluded.

use maskup_core::bench::{
    report_to_csv_string, run_bench, stable_csv_rows, BenchConfig, Gazetteers,
};

const GOLDEN_STABLE_ROWS: &str = "\
arm,metric,value
config,document_count,2
config,document_bytes,8192
config,entity_byte_fraction,0.1
config,repetitions,2
config,seed,42
full,bytes_encrypted,16428
full,output_bytes,16484
selective,bytes_encrypted,1692
selective,output_bytes,2494
selective,span_count,16
selective,entity_fraction_realized,0.10299488677867057
ratio,memory,0.15129822858529482
ratio,bytes,0.10299488677867057
";

#[test]
fn seeded_bench_csv_matches_golden_rows() {
    let config = BenchConfig {
        document_count: 2,
        document_bytes: 8192,
        entity_byte_fraction: 0.10,
        repetitions: 2,
        seed: 42,
    };
    let report = run_bench(&config, &Gazetteers::builtin(), None).unwrap();
    let rows = stable_csv_rows(&report_to_csv_string(&report));
    assert_eq!(rows, GOLDEN_STABLE_ROWS);
}
