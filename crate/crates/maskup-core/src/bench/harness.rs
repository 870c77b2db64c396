//! Full-versus-selective encryption comparison: byte-targeted document
//! generation, per-arm wall timing, and the serialized-output memory
//! proxy, reported as CSV and JSON.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::gazetteer::Gazetteers;
use crate::crypto::{
    derive_key, encrypt_full, mask, CounterNonceSource, EncryptedSpan, MaskedDocument,
    PlaceholderStyle, SessionKey,
};
use crate::doc::{Document, EntityLabel, EntitySpan};
use crate::error::{Error, Result};
use crate::tagger::model::CrfModel;

const WARMUP_ITERATIONS: usize = 3;
const BENCH_USER: &str = "bench";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub document_count: usize,
    pub document_bytes: usize,
    pub entity_byte_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> BenchConfig {
        BenchConfig {
            document_count: 30,
            document_bytes: 64 * 1024,
            entity_byte_fraction: 0.10,
            repetitions: 5,
            seed: 42,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.document_count == 0 || self.document_bytes == 0 || self.repetitions == 0 {
            return Err(Error::Contract(
                "document_count, document_bytes, and repetitions must be positive".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.entity_byte_fraction) {
            return Err(Error::Contract(format!(
                "entity_byte_fraction {} outside [0, 1]",
                self.entity_byte_fraction
            )));
        }
        Ok(())
    }
}

/// Aggregates for one encryption arm. Wall times are per-document means
/// over the configured repetitions; byte counts are totals over documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub wall_ms_mean: f64,
    pub wall_ms_median: f64,
    pub bytes_encrypted: u64,
    pub output_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub full: Option<ArmStats>,
    pub selective: Option<ArmStats>,
    pub span_count: u64,
    pub realized_entity_fraction: Option<f64>,
    pub time_ratio: Option<f64>,
    pub memory_ratio: Option<f64>,
    pub byte_ratio: Option<f64>,
    pub tagging_wall_ms_mean: Option<f64>,
}

impl BenchReport {
    pub fn empty(config: BenchConfig) -> BenchReport {
        BenchReport {
            config,
            full: None,
            selective: None,
            span_count: 0,
            realized_entity_fraction: None,
            time_ratio: None,
            memory_ratio: None,
            byte_ratio: None,
            tagging_wall_ms_mean: None,
        }
    }
}

fn doc_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Generate one benchmark document of roughly `target_bytes`: alternating
/// filler runs and long capitalized entity phrases, with entity phrases
/// issued greedily while the entity byte share sits below the target
/// fraction.
pub fn generate_document(
    seed: u64,
    target_bytes: usize,
    entity_fraction: f64,
    gaz: &Gazetteers,
) -> Result<(String, Vec<EntitySpan>)> {
    if target_bytes == 0 {
        return Err(Error::Contract("target_bytes must be positive".to_string()));
    }
    if !(0.0..=1.0).contains(&entity_fraction) {
        return Err(Error::Contract(format!(
            "entity_fraction {entity_fraction} outside [0, 1]"
        )));
    }
    gaz.validate()?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut entity_pool: Vec<&str> = Vec::new();
    entity_pool.extend(gaz.person_first.iter().map(String::as_str));
    entity_pool.extend(gaz.person_last.iter().map(String::as_str));
    entity_pool.extend(gaz.org_stems.iter().map(String::as_str));
    entity_pool.extend(gaz.miscs.iter().map(String::as_str));
    entity_pool.extend(gaz.locations.iter().flat_map(|l| l.split(' ')));

    let mut text = String::with_capacity(target_bytes + 256);
    let mut spans = Vec::new();
    let mut entity_bytes = 0usize;
    let mut token_count = 0usize;

    while text.len() < target_bytes {
        let want_entity = entity_fraction > 0.0
            && (entity_bytes as f64) < entity_fraction * (text.len() as f64 + 1.0);
        if !text.is_empty() {
            text.push(' ');
        }
        if want_entity {
            // long multi-word phrases keep the span count low, so the arm
            // comparison measures throughput rather than per-call setup
            let words = rng.gen_range(12..=20);
            let label = *[
                EntityLabel::Per,
                EntityLabel::Org,
                EntityLabel::Loc,
                EntityLabel::Misc,
            ]
            .choose(&mut rng)
            .unwrap();
            let byte_start = text.len();
            for i in 0..words {
                if i > 0 {
                    text.push(' ');
                }
                text.push_str(entity_pool.choose(&mut rng).unwrap());
            }
            let byte_end = text.len();
            spans.push(EntitySpan {
                label,
                token_start: token_count,
                token_end: token_count + words,
                byte_start,
                byte_end,
            });
            entity_bytes += byte_end - byte_start;
            token_count += words;
        } else {
            let words = rng.gen_range(6..=12);
            for i in 0..words {
                if i > 0 {
                    text.push(' ');
                }
                text.push_str(gaz.fillers.choose(&mut rng).unwrap());
            }
            token_count += words;
        }
    }
    Ok((text, spans))
}

/// Compact binary envelope for one encrypted span: fixed-width index,
/// label code, and offset fields plus nonce, ciphertext, and tag.
pub fn encoded_span_bytes(span: &EncryptedSpan) -> usize {
    4 + 1 + 8 + 8 + span.nonce.len() + span.ciphertext.len() + span.tag.len()
}

/// Memory proxy for the selective arm: the bytes needed to persist the
/// ciphertext and span metadata (version word, user id, span envelopes).
/// The plaintext rendering is excluded from both arms.
pub fn selective_output_bytes(masked: &MaskedDocument) -> usize {
    4 + masked.user_id.len() + masked.spans.iter().map(encoded_span_bytes).sum::<usize>()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn time_ms(f: impl FnOnce()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e3
}

fn bench_key() -> SessionKey {
    derive_key("bench-session", &[0u8; 16]).expect("static password")
}

/// Run the comparison. When a model is supplied, tagging each document is
/// timed once per document and reported separately; the encryption arms
/// always run over the generated gold spans.
pub fn run_bench(
    config: &BenchConfig,
    gaz: &Gazetteers,
    model: Option<&CrfModel>,
) -> Result<BenchReport> {
    config.validate()?;
    gaz.validate()?;
    let key = bench_key();

    let mut full_doc_means = Vec::with_capacity(config.document_count);
    let mut sel_doc_means = Vec::with_capacity(config.document_count);
    let mut tagging_times = Vec::new();
    let mut full_bytes_encrypted = 0u64;
    let mut sel_bytes_encrypted = 0u64;
    let mut full_output = 0u64;
    let mut sel_output = 0u64;
    let mut entity_bytes_total = 0u64;
    let mut total_bytes = 0u64;
    let mut span_count = 0u64;

    for doc_index in 0..config.document_count {
        let (text, spans) = generate_document(
            doc_seed(config.seed, doc_index as u64),
            config.document_bytes,
            config.entity_byte_fraction,
            gaz,
        )?;
        let entity_bytes: usize = spans.iter().map(|s| s.byte_end - s.byte_start).sum();
        entity_bytes_total += entity_bytes as u64;
        total_bytes += text.len() as u64;

        for _ in 0..WARMUP_ITERATIONS {
            encrypt_full(&text, &key, &mut CounterNonceSource::new())?;
        }
        let mut times = Vec::with_capacity(config.repetitions);
        let mut blob = Vec::new();
        for _ in 0..config.repetitions {
            let mut nonces = CounterNonceSource::new();
            times.push(time_ms(|| {
                blob = encrypt_full(&text, &key, &mut nonces).expect("full encryption");
            }));
        }
        full_doc_means.push(mean(&times));
        full_bytes_encrypted += text.len() as u64;
        full_output += blob.len() as u64;

        for _ in 0..WARMUP_ITERATIONS {
            mask(
                &text,
                &spans,
                BENCH_USER,
                &key,
                &mut CounterNonceSource::new(),
                PlaceholderStyle::Labeled,
            )?;
        }
        let mut times = Vec::with_capacity(config.repetitions);
        let mut masked = None;
        for _ in 0..config.repetitions {
            let mut nonces = CounterNonceSource::new();
            times.push(time_ms(|| {
                masked = Some(
                    mask(
                        &text,
                        &spans,
                        BENCH_USER,
                        &key,
                        &mut nonces,
                        PlaceholderStyle::Labeled,
                    )
                    .expect("selective encryption"),
                );
            }));
        }
        let masked = masked.expect("at least one repetition");
        sel_doc_means.push(mean(&times));
        let doc_encrypted: usize = masked.spans.iter().map(|s| s.ciphertext.len()).sum();
        if doc_encrypted != entity_bytes {
            return Err(Error::Validation(format!(
                "selective arm encrypted {doc_encrypted} bytes but the document holds {entity_bytes} entity bytes"
            )));
        }
        sel_bytes_encrypted += doc_encrypted as u64;
        sel_output += selective_output_bytes(&masked) as u64;
        span_count += masked.spans.len() as u64;

        if let Some(model) = model {
            let doc = Document::untagged(text);
            let mut tags = Vec::new();
            tagging_times.push(time_ms(|| {
                tags = crate::tagger::inference::decode(model, &doc).expect("tagging");
            }));
            drop(tags);
        }
    }

    let report = BenchReport {
        config: config.clone(),
        full: Some(ArmStats {
            wall_ms_mean: mean(&full_doc_means),
            wall_ms_median: median(&full_doc_means),
            bytes_encrypted: full_bytes_encrypted,
            output_bytes: full_output,
        }),
        selective: Some(ArmStats {
            wall_ms_mean: mean(&sel_doc_means),
            wall_ms_median: median(&sel_doc_means),
            bytes_encrypted: sel_bytes_encrypted,
            output_bytes: sel_output,
        }),
        span_count,
        realized_entity_fraction: (total_bytes > 0)
            .then(|| entity_bytes_total as f64 / total_bytes as f64),
        time_ratio: (mean(&full_doc_means) > 0.0)
            .then(|| mean(&sel_doc_means) / mean(&full_doc_means)),
        memory_ratio: (full_output > 0).then(|| sel_output as f64 / full_output as f64),
        byte_ratio: (full_bytes_encrypted > 0)
            .then(|| sel_bytes_encrypted as f64 / full_bytes_encrypted as f64),
        tagging_wall_ms_mean: (!tagging_times.is_empty()).then(|| mean(&tagging_times)),
    };
    Ok(report)
}

fn push_row(out: &mut String, arm: &str, metric: &str, value: impl std::fmt::Display) {
    out.push_str(arm);
    out.push(',');
    out.push_str(metric);
    out.push(',');
    out.push_str(&value.to_string());
    out.push('\n');
}

/// Render the report as `arm,metric,value` CSV. An empty report (no arms)
/// renders as the header line alone. Rows whose metric names contain
/// `wall` carry timing and vary between runs; everything else is
/// deterministic for a given seed.
pub fn report_to_csv_string(report: &BenchReport) -> String {
    let mut out = String::from("arm,metric,value\n");
    if report.full.is_none() && report.selective.is_none() {
        return out;
    }
    push_row(&mut out, "config", "document_count", report.config.document_count);
    push_row(&mut out, "config", "document_bytes", report.config.document_bytes);
    push_row(
        &mut out,
        "config",
        "entity_byte_fraction",
        report.config.entity_byte_fraction,
    );
    push_row(&mut out, "config", "repetitions", report.config.repetitions);
    push_row(&mut out, "config", "seed", report.config.seed);
    for (name, arm) in [("full", &report.full), ("selective", &report.selective)] {
        if let Some(stats) = arm {
            push_row(&mut out, name, "wall_ms_mean", stats.wall_ms_mean);
            push_row(&mut out, name, "wall_ms_median", stats.wall_ms_median);
            push_row(&mut out, name, "bytes_encrypted", stats.bytes_encrypted);
            push_row(&mut out, name, "output_bytes", stats.output_bytes);
        }
    }
    push_row(&mut out, "selective", "span_count", report.span_count);
    if let Some(fraction) = report.realized_entity_fraction {
        push_row(&mut out, "selective", "entity_fraction_realized", fraction);
    }
    if let Some(ratio) = report.time_ratio {
        push_row(&mut out, "ratio", "wall_time", ratio);
    }
    if let Some(ratio) = report.memory_ratio {
        push_row(&mut out, "ratio", "memory", ratio);
    }
    if let Some(ratio) = report.byte_ratio {
        push_row(&mut out, "ratio", "bytes", ratio);
    }
    if let Some(ms) = report.tagging_wall_ms_mean {
        push_row(&mut out, "tagging", "wall_ms_mean", ms);
    }
    out
}

pub fn report_to_csv(report: &BenchReport, path: impl AsRef<Path>) -> Result<()> {
    crate::fsutil::atomic_write(path.as_ref(), report_to_csv_string(report).as_bytes())
}

pub fn report_to_json(report: &BenchReport, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::Format(format!("encode report: {e}")))?;
    crate::fsutil::atomic_write(path.as_ref(), &json)
}

/// Drop the timing rows from a rendered CSV, leaving the rows that must be
/// byte-identical across reruns of the same seed.
pub fn stable_csv_rows(csv: &str) -> String {
    csv.lines()
        .filter(|line| !line.contains("wall"))
        .map(|line| format!("{line}\n"))
        .collect()
}
