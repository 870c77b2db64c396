//! One function per subcommand. All output files go through atomic
//! write-rename; a failed command leaves no partial artifacts.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use maskup_core::bench::{
    report_to_csv, report_to_json, run_bench, BenchConfig, Gazetteers,
};
use maskup_core::continual::{
    continual_update, corrections_to_corpus, estimate_fisher, read_corrections, EwcState,
};
use maskup_core::crypto::{
    self, derive_key, CounterNonceSource, MaskedDocument, NonceSource, PlaceholderStyle,
    RandomNonceSource, Salt, SALT_LEN,
};
use maskup_core::doc::{read_conll, Document, EntityLabel};
use maskup_core::escrow::{
    authority_unwrap, key_id_of, load_public_pem, wrap_session_key, AuthorityKeypair, Keystore,
    UserRecord, Verifier,
};
use maskup_core::tagger::{self, evaluate as evaluate_model, CrfModel, TrainConfig};
use maskup_core::{Error, Result};

use crate::NonceMode;

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{what} not found: {}",
            path.display()
        )))
    }
}

/// Password from `MASKUP_PASSWORD`, else prompted from standard input.
/// Never accepted as a flag, so it cannot leak into shell history.
fn read_password() -> Result<String> {
    if let Ok(password) = std::env::var("MASKUP_PASSWORD") {
        if !password.is_empty() {
            return Ok(password);
        }
    }
    eprint!("password: ");
    io::stderr().flush()?;
    let mut line = String::new();
    io::stdin().read_line(&mut line)?;
    let password = line.trim_end_matches(['\r', '\n']).to_string();
    if password.is_empty() {
        return Err(Error::Validation(
            "no password given (set MASKUP_PASSWORD or answer the prompt)".to_string(),
        ));
    }
    Ok(password)
}

fn parse_policy(text: &str) -> Result<Vec<EntityLabel>> {
    text.split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(|part| {
            EntityLabel::parse(part)
                .ok_or_else(|| Error::Validation(format!("unknown policy label {part:?}")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    corpus_path: &Path,
    out: &Path,
    dev: Option<&Path>,
    state_out: Option<&Path>,
    task_id: &str,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    l2: f64,
) -> Result<()> {
    require_file(corpus_path, "corpus")?;
    if let Some(dev) = dev {
        require_file(dev, "dev corpus")?;
    }
    let corpus = read_conll(corpus_path)?;
    let config = TrainConfig {
        epochs,
        learning_rate,
        l2,
        seed,
        ewc_lambda: 0.0,
    };
    let model = tagger::train(&corpus, &config, None)?;
    model.save(out)?;
    eprintln!(
        "trained on {} sentences ({} features); model written to {}",
        corpus.len(),
        model.vocab().len(),
        out.display()
    );
    if let Some(dev) = dev {
        let dev_corpus = read_conll(dev)?;
        let report = evaluate_model(&model, &dev_corpus)?;
        print!("{}", report.table());
    }
    if let Some(state_out) = state_out {
        let state = estimate_fisher(&model, &corpus, task_id)?;
        state.save(state_out)?;
        eprintln!("consolidation state written to {}", state_out.display());
    }
    Ok(())
}

pub fn evaluate(corpus_path: &Path, model_path: &Path) -> Result<()> {
    require_file(corpus_path, "corpus")?;
    require_file(model_path, "model")?;
    let corpus = read_conll(corpus_path)?;
    let model = CrfModel::load(model_path)?;
    let report = evaluate_model(&model, &corpus)?;
    print!("{}", report.table());
    Ok(())
}

pub fn tag(input: &Path, model_path: &Path, out: Option<&Path>) -> Result<()> {
    require_file(input, "input")?;
    require_file(model_path, "model")?;
    let text = fs::read_to_string(input)?;
    let model = CrfModel::load(model_path)?;
    let doc = Document::untagged(text);
    let tags = tagger::decode(&model, &doc)?;
    let mut rendered = String::new();
    for (token, tag) in doc.tokens.iter().zip(&tags) {
        rendered.push_str(&token.text);
        rendered.push(' ');
        rendered.push_str(&tag.as_label_string());
        rendered.push('\n');
    }
    match out {
        Some(path) => maskup_core::fsutil::atomic_write(path, rendered.as_bytes())?,
        None => io::stdout().write_all(rendered.as_bytes())?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn mask(
    input: &Path,
    user: &str,
    model_path: &Path,
    keystore_path: &Path,
    authority_pub: &Path,
    policy_text: &str,
    nonce_mode: NonceMode,
    redact_label: bool,
    out: &Path,
) -> Result<()> {
    require_file(input, "input")?;
    require_file(model_path, "model")?;
    require_file(authority_pub, "authority public key")?;
    let policy = parse_policy(policy_text)?;

    let text = fs::read_to_string(input)?;
    let model = CrfModel::load(model_path)?;
    let doc = Document::untagged(text.clone());
    let tags = tagger::decode(&model, &doc)?;
    let doc = doc.with_tags(tags)?;
    let selected = crypto::select_sensitive(&doc.spans()?, &policy);

    let public = load_public_pem(authority_pub)?;
    let key_id = key_id_of(&public)?;
    let mut store = if keystore_path.is_file() {
        Keystore::load(keystore_path)?
    } else {
        Keystore::new(key_id.clone())
    };
    if store.authority_key_id != key_id {
        return Err(Error::Validation(format!(
            "keystore is bound to authority {} but the supplied public key is {}",
            store.authority_key_id, key_id
        )));
    }

    let password = read_password()?;
    let store_changed;
    let (session_key, wrapped_key) = if store.contains(user) {
        store_changed = false;
        let record = store.get(user)?;
        let salt: Salt = record
            .salt
            .as_slice()
            .try_into()
            .map_err(|_| Error::Corrupt(format!("malformed salt for user {user:?}")))?;
        let key = derive_key(&password, &salt)?;
        if let Some(verifier) = &record.verifier {
            if !verifier.check(user, &key) {
                return Err(Error::Auth(format!("wrong password for user {user:?}")));
            }
        }
        (key, record.wrapped_key.clone())
    } else {
        store_changed = true;
        let mut salt = [0u8; SALT_LEN];
        OsRng.fill_bytes(&mut salt);
        let key = derive_key(&password, &salt)?;
        let wrapped = wrap_session_key(&key, &public, user, &mut OsRng)?;
        let verifier = Verifier::create(user, &key, &mut RandomNonceSource::new())?;
        store.put(
            user,
            UserRecord {
                salt: salt.to_vec(),
                wrapped_key: wrapped.clone(),
                verifier: Some(verifier),
            },
            false,
        )?;
        (key, wrapped)
    };

    let mut nonces: Box<dyn NonceSource> = match nonce_mode {
        NonceMode::Random => Box::new(RandomNonceSource::new()),
        NonceMode::Counter => Box::new(CounterNonceSource::new()),
    };
    let style = if redact_label {
        PlaceholderStyle::Redacted
    } else {
        PlaceholderStyle::Labeled
    };
    let mut masked = crypto::mask(&text, &selected, user, &session_key, nonces.as_mut(), style)?;
    masked.wrapped_key = wrapped_key;

    if store_changed {
        store.save(keystore_path)?;
    }
    masked.save(out)?;
    eprintln!(
        "masked {} spans for user {user:?}; output written to {}",
        masked.spans.len(),
        out.display()
    );
    Ok(())
}

pub fn unmask(masked_path: &Path, keystore_path: &Path) -> Result<()> {
    require_file(masked_path, "masked document")?;
    require_file(keystore_path, "keystore")?;
    let masked = MaskedDocument::load(masked_path)?;
    let store = Keystore::load(keystore_path)?;
    let record = store.get(&masked.user_id)?;
    let salt: Salt = record
        .salt
        .as_slice()
        .try_into()
        .map_err(|_| Error::Corrupt(format!("malformed salt for user {:?}", masked.user_id)))?;
    let password = read_password()?;
    let key = derive_key(&password, &salt)?;
    if let Some(verifier) = &record.verifier {
        if !verifier.check(&masked.user_id, &key) {
            return Err(Error::Auth(format!(
                "wrong password for user {:?}",
                masked.user_id
            )));
        }
    }
    let text = crypto::unmask(&masked, &key)?;
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

pub fn master_unmask(masked_path: &Path, authority_priv: &Path) -> Result<()> {
    require_file(masked_path, "masked document")?;
    require_file(authority_priv, "authority private key")?;
    let masked = MaskedDocument::load(masked_path)?;
    if masked.wrapped_key.is_empty() {
        return Err(Error::Validation(
            "masked document carries no wrapped key".to_string(),
        ));
    }
    let pair = AuthorityKeypair::load_private_pem(authority_priv)?;
    let key = authority_unwrap(&masked.wrapped_key, pair.private(), &masked.user_id)?;
    let text = crypto::unmask(&masked, &key)?;
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn ewc_update(
    model_path: &Path,
    state_path: &Path,
    corrections: Option<&Path>,
    corpus: Option<&Path>,
    lambda: f64,
    task_id: &str,
    seed: u64,
    epochs: usize,
    out: &Path,
    state_out: &Path,
) -> Result<()> {
    require_file(model_path, "model")?;
    require_file(state_path, "consolidation state")?;
    let model = CrfModel::load(model_path)?;
    let state = EwcState::load(state_path)?;
    if lambda == 0.0 {
        eprintln!("warning: lambda is 0, consolidation is disabled for this update");
    }

    let new_corpus = match (corrections, corpus) {
        (Some(path), None) => {
            require_file(path, "corrections file")?;
            let records = read_corrections(path)?;
            if records.is_empty() {
                eprintln!("no corrections supplied; writing model and state unchanged (no-op)");
                model.save(out)?;
                state.save(state_out)?;
                return Ok(());
            }
            corrections_to_corpus(&records, &model)?
        }
        (None, Some(path)) => {
            require_file(path, "corpus")?;
            read_conll(path)?
        }
        _ => {
            return Err(Error::Validation(
                "exactly one of --corrections or --corpus is required".to_string(),
            ))
        }
    };
    if new_corpus.is_empty() {
        eprintln!("corpus is empty; writing model and state unchanged (no-op)");
        model.save(out)?;
        state.save(state_out)?;
        return Ok(());
    }

    let config = TrainConfig {
        epochs,
        seed,
        ewc_lambda: lambda,
        ..Default::default()
    };
    let (new_model, new_state) = continual_update(&model, &state, &new_corpus, &config, task_id)?;
    new_model.save(out)?;
    new_state.save(state_out)?;
    eprintln!(
        "updated model on {} documents (task {task_id:?}); model {} state {}",
        new_corpus.len(),
        out.display(),
        state_out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn bench(
    documents: usize,
    document_bytes: usize,
    entity_fraction: f64,
    repetitions: usize,
    seed: u64,
    out: Option<&Path>,
    json_out: Option<&Path>,
    model_path: Option<&Path>,
) -> Result<()> {
    let config = BenchConfig {
        document_count: documents,
        document_bytes,
        entity_byte_fraction: entity_fraction,
        repetitions,
        seed,
    };
    let model = match model_path {
        Some(path) => {
            require_file(path, "model")?;
            Some(CrfModel::load(path)?)
        }
        None => None,
    };
    let report = run_bench(&config, &Gazetteers::builtin(), model.as_ref())?;

    if let (Some(full), Some(selective)) = (&report.full, &report.selective) {
        println!(
            "full:      mean {:.4} ms, {} bytes encrypted, {} output bytes",
            full.wall_ms_mean, full.bytes_encrypted, full.output_bytes
        );
        println!(
            "selective: mean {:.4} ms, {} bytes encrypted, {} output bytes, {} spans",
            selective.wall_ms_mean, selective.bytes_encrypted, selective.output_bytes,
            report.span_count
        );
    }
    if let Some(ratio) = report.time_ratio {
        println!("selective/full time ratio: {ratio:.4}");
    }
    if let Some(ratio) = report.memory_ratio {
        println!("selective/full memory ratio: {ratio:.4}");
    }
    if let Some(ratio) = report.byte_ratio {
        println!("encrypted byte ratio: {ratio:.4}");
    }
    if let Some(ms) = report.tagging_wall_ms_mean {
        println!("tagging (reported separately): mean {ms:.4} ms");
    }
    if let Some(path) = out {
        report_to_csv(&report, path)?;
        eprintln!("CSV report written to {}", path.display());
    }
    if let Some(path) = json_out {
        report_to_json(&report, path)?;
        eprintln!("JSON report written to {}", path.display());
    }
    Ok(())
}

pub fn authority_keygen(out_priv: &Path, out_pub: &Path, seed: Option<u64>) -> Result<()> {
    let pair = match seed {
        Some(seed) => {
            eprintln!("warning: seeded keygen is deterministic; use only for tests");
            AuthorityKeypair::generate(&mut ChaCha20Rng::seed_from_u64(seed))?
        }
        None => AuthorityKeypair::generate(&mut OsRng)?,
    };
    pair.save_private_pem(out_priv)?;
    pair.save_public_pem(out_pub)?;
    println!("{}", pair.key_id());
    Ok(())
}
