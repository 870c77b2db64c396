//! Command-line surface for the masking toolkit: train and evaluate the
//! tagger, mask and unmask documents, apply continual updates, run the
//! encryption benchmark, and manage authority keys.
//!
//! Exit codes are a stable contract: 0 success, 2 usage or configuration
//! problems, 3 crypto, integrity, or authentication failures, 4 model or
//! data problems.

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand, ValueEnum};

use maskup_core::Error;

mod commands;

#[derive(Parser)]
#[command(name = "maskup", version, about = "Selective entity encryption for text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NonceMode {
    /// Fresh random nonces from the operating system.
    Random,
    /// Deterministic counter nonces; for tests and golden files.
    Counter,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger on a CoNLL-format corpus
    Train {
        /// Training corpus (CoNLL format)
        corpus: PathBuf,
        /// Where to write the model file
        #[arg(long)]
        out: PathBuf,
        /// Tagged corpus to evaluate after training
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Write the post-training consolidation state here
        #[arg(long)]
        state_out: Option<PathBuf>,
        /// Task label recorded in the consolidation state
        #[arg(long, default_value = "initial")]
        task_id: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
    },
    /// Evaluate a model on a tagged corpus
    Evaluate {
        /// Tagged corpus (CoNLL format)
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Tag a text file, printing token/label lines
    Tag {
        /// Plain-text input file
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Write tagged output here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tag a document, encrypt its sensitive spans, and escrow the key
    Mask {
        /// Plain-text input file
        input: PathBuf,
        /// Owner of the document; keyed by MASKUP_PASSWORD or prompt
        #[arg(long)]
        user: String,
        #[arg(long)]
        model: PathBuf,
        /// Keystore file; created on first use
        #[arg(long)]
        keystore: PathBuf,
        /// Authority public key (PEM)
        #[arg(long)]
        authority_pub: PathBuf,
        /// Labels treated as sensitive
        #[arg(long, default_value = "PER,ORG,LOC,MISC")]
        policy: String,
        #[arg(long, value_enum, default_value_t = NonceMode::Random)]
        nonce_mode: NonceMode,
        /// Hide entity classes in placeholders
        #[arg(long)]
        redact_label: bool,
        /// Where to write the masked document JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt a masked document with the owner's password
    Unmask {
        /// Masked document JSON
        masked: PathBuf,
        #[arg(long)]
        keystore: PathBuf,
    },
    /// Decrypt a masked document with the authority private key
    MasterUnmask {
        /// Masked document JSON
        masked: PathBuf,
        /// Authority private key (PEM)
        #[arg(long)]
        authority_priv: PathBuf,
    },
    /// Update a model from corrections or a corpus under consolidation
    EwcUpdate {
        #[arg(long)]
        model: PathBuf,
        /// Consolidation state from the previous task
        #[arg(long)]
        state: PathBuf,
        /// Correction records, one JSON object per line
        #[arg(long, conflicts_with = "corpus")]
        corrections: Option<PathBuf>,
        /// Tagged corpus (CoNLL format)
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Consolidation strength; 0 disables the penalty
        #[arg(long, default_value_t = 100.0)]
        lambda: f64,
        #[arg(long, default_value = "update")]
        task_id: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        /// Where to write the updated model
        #[arg(long)]
        out: PathBuf,
        /// Where to write the updated consolidation state
        #[arg(long)]
        state_out: PathBuf,
    },
    /// Compare full-document and selective encryption
    Bench {
        #[arg(long, default_value_t = 30)]
        documents: usize,
        #[arg(long, default_value_t = 65536)]
        document_bytes: usize,
        #[arg(long, default_value_t = 0.10)]
        entity_fraction: f64,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the CSV report here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the JSON report here
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Also time tagging with this model, reported separately
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generate an authority RSA-2048 keypair
    AuthorityKeygen {
        /// Where to write the private key (PEM)
        #[arg(long)]
        out_priv: PathBuf,
        /// Where to write the public key (PEM)
        #[arg(long)]
        out_pub: PathBuf,
        /// Deterministic test keys; omit for system randomness
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Contract(_)
        | Error::Validation(_)
        | Error::NotFound(_)
        | Error::Dimension { .. } => 2,
        Error::Integrity(_) | Error::Auth(_) => 3,
        Error::Parse { .. }
        | Error::Corrupt(_)
        | Error::Version { .. }
        | Error::Format(_)
        | Error::TrainingDiverged { .. }
        | Error::Io(_) => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            corpus,
            out,
            dev,
            state_out,
            task_id,
            seed,
            epochs,
            learning_rate,
            l2,
        } => commands::train(
            &corpus,
            &out,
            dev.as_deref(),
            state_out.as_deref(),
            &task_id,
            seed,
            epochs,
            learning_rate,
            l2,
        ),
        Command::Evaluate { corpus, model } => commands::evaluate(&corpus, &model),
        Command::Tag { input, model, out } => commands::tag(&input, &model, out.as_deref()),
        Command::Mask {
            input,
            user,
            model,
            keystore,
            authority_pub,
            policy,
            nonce_mode,
            redact_label,
            out,
        } => commands::mask(
            &input,
            &user,
            &model,
            &keystore,
            &authority_pub,
            &policy,
            nonce_mode,
            redact_label,
            &out,
        ),
        Command::Unmask { masked, keystore } => commands::unmask(&masked, &keystore),
        Command::MasterUnmask {
            masked,
            authority_priv,
        } => commands::master_unmask(&masked, &authority_priv),
        Command::EwcUpdate {
            model,
            state,
            corrections,
            corpus,
            lambda,
            task_id,
            seed,
            epochs,
            out,
            state_out,
        } => commands::ewc_update(
            &model,
            &state,
            corrections.as_deref(),
            corpus.as_deref(),
            lambda,
            &task_id,
            seed,
            epochs,
            &out,
            &state_out,
        ),
        Command::Bench {
            documents,
            document_bytes,
            entity_fraction,
            repetitions,
            seed,
            out,
            json_out,
            model,
        } => commands::bench(
            documents,
            document_bytes,
            entity_fraction,
            repetitions,
            seed,
            out.as_deref(),
            json_out.as_deref(),
            model.as_deref(),
        ),
        Command::AuthorityKeygen {
            out_priv,
            out_pub,
            seed,
        } => commands::authority_keygen(&out_priv, &out_pub, seed),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        process::exit(exit_code_for(&err));
    }
}
