//! Selective encryption: derive a per-user 128-bit session key from a
//! password and salt, encrypt only the entity spans of a document with
//! AES-128-GCM, and render the rest verbatim around placeholders. A
//! whole-document cipher serves as the benchmark baseline.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::doc::{EntityLabel, EntitySpan};
use crate::error::{Error, Result};

pub const KEY_LEN: usize = 16;
pub const SALT_LEN: usize = 16;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub const FORMAT_VERSION: u32 = 1;

pub type SessionKey = [u8; KEY_LEN];
pub type Salt = [u8; SALT_LEN];

/// Derive the 128-bit session key from a password and salt by nesting two
/// salted SHA-256 passes and truncating:
/// `SHA-256(salt || SHA-256(salt || password))[..16]`.
pub fn derive_key(password: &str, salt: &Salt) -> Result<SessionKey> {
    if password.is_empty() {
        return Err(Error::Contract("password must not be empty".to_string()));
    }
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(password.as_bytes());
    let inner = hasher.finalize();

    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(inner);
    let outer = hasher.finalize();

    let mut key = [0u8; KEY_LEN];
    key.copy_from_slice(&outer[..KEY_LEN]);
    Ok(key)
}

/// Supplies the 12-byte nonces consumed by the masking and full-document
/// ciphers. One source must serve at most one masking operation at a time.
pub trait NonceSource {
    fn next_nonce(&mut self) -> [u8; NONCE_LEN];
}

/// Deterministic nonces: four zero bytes followed by a big-endian counter.
/// For tests and golden files only; production masking should use
/// [`RandomNonceSource`].
#[derive(Debug, Default)]
pub struct CounterNonceSource {
    counter: u64,
}

impl CounterNonceSource {
    pub fn new() -> CounterNonceSource {
        CounterNonceSource { counter: 0 }
    }

    pub fn starting_at(counter: u64) -> CounterNonceSource {
        CounterNonceSource { counter }
    }
}

impl NonceSource for CounterNonceSource {
    fn next_nonce(&mut self) -> [u8; NONCE_LEN] {
        let mut nonce = [0u8; NONCE_LEN];
        nonce[4..].copy_from_slice(&self.counter.to_be_bytes());
        self.counter += 1;
        nonce
    }
}

/// Fresh random nonces from the operating system.
#[derive(Debug, Default)]
pub struct RandomNonceSource;

impl RandomNonceSource {
    pub fn new() -> RandomNonceSource {
        RandomNonceSource
    }
}

impl NonceSource for RandomNonceSource {
    fn next_nonce(&mut self) -> [u8; NONCE_LEN] {
        let mut nonce = [0u8; NONCE_LEN];
        rand::rngs::OsRng.fill_bytes(&mut nonce);
        nonce
    }
}

/// How the placeholder substituted for an encrypted span is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaceholderStyle {
    /// `[MASKED:PER:0]`: the entity class stays visible.
    #[default]
    Labeled,
    /// `[MASKED:###:0]`: the entity class is hidden too.
    Redacted,
}

fn render_placeholder(style: PlaceholderStyle, label: EntityLabel, index: u32) -> String {
    match style {
        PlaceholderStyle::Labeled => format!("[MASKED:{}:{}]", label.as_str(), index),
        PlaceholderStyle::Redacted => format!("[MASKED:###:{index}]"),
    }
}

/// One encrypted entity span of a masked document. Offsets refer to the
/// original text; decrypting `ciphertext` with `nonce` and `tag` under the
/// session key yields exactly `original[byte_start..byte_end]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedSpan {
    pub index: u32,
    pub label: EntityLabel,
    pub byte_start: usize,
    pub byte_end: usize,
    #[serde(with = "b64_bytes")]
    pub nonce: Vec<u8>,
    #[serde(with = "b64_bytes")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "b64_bytes")]
    pub tag: Vec<u8>,
}

/// A document with every selected entity span replaced by a placeholder
/// and carried as authenticated ciphertext, plus the escrowed session key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedDocument {
    pub version: u32,
    pub user_id: String,
    pub masked_text: String,
    #[serde(with = "b64_bytes")]
    pub wrapped_key: Vec<u8>,
    pub spans: Vec<EncryptedSpan>,
}

mod b64_bytes {
    use super::{Engine, B64};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&B64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(de)?;
        B64.decode(text).map_err(serde::de::Error::custom)
    }
}

impl MaskedDocument {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::Format(format!("encode masked document: {e}")))
    }

    pub fn from_json(bytes: &[u8]) -> Result<MaskedDocument> {
        let doc: MaskedDocument = serde_json::from_slice(bytes)
            .map_err(|e| Error::Corrupt(format!("masked document: {e}")))?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Version {
                found: doc.version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::fsutil::atomic_write(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MaskedDocument> {
        MaskedDocument::from_json(&fs::read(path.as_ref())?)
    }
}

fn validate_spans(text: &str, spans: &[EntitySpan]) -> Result<Vec<EntitySpan>> {
    let mut ordered = spans.to_vec();
    ordered.sort_by_key(|s| s.byte_start);
    let mut prev_end = 0usize;
    for span in &ordered {
        if span.byte_start >= span.byte_end || span.byte_end > text.len() {
            return Err(Error::Contract(format!(
                "span {}..{} out of range for {} bytes",
                span.byte_start,
                span.byte_end,
                text.len()
            )));
        }
        if !text.is_char_boundary(span.byte_start) || !text.is_char_boundary(span.byte_end) {
            return Err(Error::Contract(format!(
                "span {}..{} splits a character",
                span.byte_start, span.byte_end
            )));
        }
        if span.byte_start < prev_end {
            return Err(Error::Contract(format!(
                "span {}..{} overlaps a previous span",
                span.byte_start, span.byte_end
            )));
        }
        prev_end = span.byte_end;
    }
    Ok(ordered)
}

fn aad_for(user_id: &str, index: u32) -> Vec<u8> {
    let mut aad = Vec::with_capacity(user_id.len() + 4);
    aad.extend_from_slice(user_id.as_bytes());
    aad.extend_from_slice(&index.to_be_bytes());
    aad
}

/// Encrypt the given spans of `text` in place of placeholders. Every byte
/// outside the spans is passed through untouched; each span becomes an
/// [`EncryptedSpan`] bound to `user_id` and its ordinal via the cipher's
/// associated data.
pub fn mask(
    text: &str,
    spans: &[EntitySpan],
    user_id: &str,
    key: &SessionKey,
    nonces: &mut dyn NonceSource,
    style: PlaceholderStyle,
) -> Result<MaskedDocument> {
    let ordered = validate_spans(text, spans)?;
    let cipher = Aes128Gcm::new(key.into());
    let mut seen_nonces: HashSet<[u8; NONCE_LEN]> = HashSet::with_capacity(ordered.len());
    let mut masked_text = String::with_capacity(text.len());
    let mut out_spans = Vec::with_capacity(ordered.len());
    let mut cursor = 0usize;

    for (i, span) in ordered.iter().enumerate() {
        let index = i as u32;
        let nonce = nonces.next_nonce();
        if !seen_nonces.insert(nonce) {
            return Err(Error::Contract(format!(
                "nonce source repeated a nonce at span {index}"
            )));
        }
        let aad = aad_for(user_id, index);
        let plaintext = &text.as_bytes()[span.byte_start..span.byte_end];
        let mut sealed = cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: plaintext,
                    aad: &aad,
                },
            )
            .map_err(|_| Error::Integrity(format!("encryption failed at span {index}")))?;
        let tag = sealed.split_off(sealed.len() - TAG_LEN);

        masked_text.push_str(&text[cursor..span.byte_start]);
        masked_text.push_str(&render_placeholder(style, span.label, index));
        cursor = span.byte_end;

        out_spans.push(EncryptedSpan {
            index,
            label: span.label,
            byte_start: span.byte_start,
            byte_end: span.byte_end,
            nonce: nonce.to_vec(),
            ciphertext: sealed,
            tag,
        });
    }
    masked_text.push_str(&text[cursor..]);

    Ok(MaskedDocument {
        version: FORMAT_VERSION,
        user_id: user_id.to_string(),
        masked_text,
        wrapped_key: Vec::new(),
        spans: out_spans,
    })
}

/// Reverse [`mask`]: decrypt every span and splice the plaintexts back
/// between the verbatim segments, reproducing the original text byte for
/// byte.
///
/// Reconstruction is positional. Each placeholder's location and length
/// are computed from the recorded span offsets, never searched for, so
/// user text that happens to contain placeholder-shaped strings survives
/// the round trip.
pub fn unmask(masked: &MaskedDocument, key: &SessionKey) -> Result<String> {
    if masked.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: masked.version,
            expected: FORMAT_VERSION,
        });
    }
    let cipher = Aes128Gcm::new(key.into());
    let mut original = String::new();
    let mut masked_pos = 0usize;
    let mut orig_pos = 0usize;

    for (i, span) in masked.spans.iter().enumerate() {
        if span.index != i as u32 {
            return Err(Error::Format(format!(
                "span {} out of order (index {})",
                i, span.index
            )));
        }
        if span.byte_start < orig_pos || span.byte_start >= span.byte_end {
            return Err(Error::Format(format!("span {i} has invalid offsets")));
        }
        if span.nonce.len() != NONCE_LEN || span.tag.len() != TAG_LEN {
            return Err(Error::Format(format!("span {i} has malformed nonce or tag")));
        }
        if span.ciphertext.len() != span.byte_end - span.byte_start {
            return Err(Error::Format(format!(
                "span {i} ciphertext length disagrees with its offsets"
            )));
        }

        let gap = span.byte_start - orig_pos;
        let verbatim = masked
            .masked_text
            .get(masked_pos..masked_pos + gap)
            .ok_or_else(|| Error::Format(format!("masked text too short before span {i}")))?;
        original.push_str(verbatim);
        masked_pos += gap;

        let placeholder_len = [PlaceholderStyle::Labeled, PlaceholderStyle::Redacted]
            .iter()
            .find_map(|style| {
                let expected = render_placeholder(*style, span.label, span.index);
                let found = masked.masked_text.get(masked_pos..masked_pos + expected.len());
                (found == Some(expected.as_str())).then_some(expected.len())
            })
            .ok_or_else(|| Error::Format(format!("malformed placeholder at span {i}")))?;
        masked_pos += placeholder_len;

        let aad = aad_for(&masked.user_id, span.index);
        let mut sealed = span.ciphertext.clone();
        sealed.extend_from_slice(&span.tag);
        let plaintext = cipher
            .decrypt(
                Nonce::from_slice(&span.nonce),
                Payload {
                    msg: &sealed,
                    aad: &aad,
                },
            )
            .map_err(|_| Error::Integrity(format!("span {i} failed authentication")))?;
        let plaintext = String::from_utf8(plaintext)
            .map_err(|_| Error::Corrupt(format!("span {i} decrypted to invalid UTF-8")))?;
        original.push_str(&plaintext);
        orig_pos = span.byte_end;
    }

    let tail = masked
        .masked_text
        .get(masked_pos..)
        .ok_or_else(|| Error::Format("masked text ends inside a character".to_string()))?;
    original.push_str(tail);
    Ok(original)
}

/// Whole-document baseline: one AES-128-GCM pass over the full text.
/// Output layout is `nonce || ciphertext || tag`, so the length is always
/// the plaintext length plus 28.
pub fn encrypt_full(text: &str, key: &SessionKey, nonces: &mut dyn NonceSource) -> Result<Vec<u8>> {
    let cipher = Aes128Gcm::new(key.into());
    let nonce = nonces.next_nonce();
    let sealed = cipher
        .encrypt(Nonce::from_slice(&nonce), text.as_bytes())
        .map_err(|_| Error::Integrity("full-document encryption failed".to_string()))?;
    let mut out = Vec::with_capacity(NONCE_LEN + sealed.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&sealed);
    Ok(out)
}

pub fn decrypt_full(bytes: &[u8], key: &SessionKey) -> Result<String> {
    if bytes.len() < NONCE_LEN + TAG_LEN {
        return Err(Error::Format(format!(
            "ciphertext too short: {} bytes",
            bytes.len()
        )));
    }
    let cipher = Aes128Gcm::new(key.into());
    let (nonce, sealed) = bytes.split_at(NONCE_LEN);
    let plaintext = cipher
        .decrypt(Nonce::from_slice(nonce), sealed)
        .map_err(|_| Error::Integrity("full-document authentication failed".to_string()))?;
    String::from_utf8(plaintext)
        .map_err(|_| Error::Corrupt("document decrypted to invalid UTF-8".to_string()))
}

/// Filter spans down to the labels the policy treats as sensitive.
pub fn select_sensitive(spans: &[EntitySpan], policy: &[EntityLabel]) -> Vec<EntitySpan> {
    spans
        .iter()
        .filter(|s| policy.contains(&s.label))
        .cloned()
        .collect()
}

/// The default policy: every entity class is sensitive.
pub fn default_policy() -> Vec<EntityLabel> {
    EntityLabel::ALL.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::Document;
    use proptest::prelude::*;

    fn span(label: EntityLabel, byte_start: usize, byte_end: usize) -> EntitySpan {
        EntitySpan {
            label,
            token_start: 0,
            token_end: 1,
            byte_start,
            byte_end,
        }
    }

    fn test_key() -> SessionKey {
        derive_key("hunter2", &[0u8; SALT_LEN]).unwrap()
    }

    #[test]
    fn derive_key_matches_pinned_vector() {
        let key = test_key();
        let hex: String = key.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "9395df1fb281a424da7407976d565c60");
    }

    #[test]
    fn derive_key_is_deterministic() {
        let salt = [7u8; SALT_LEN];
        assert_eq!(
            derive_key("secret", &salt).unwrap(),
            derive_key("secret", &salt).unwrap()
        );
    }

    #[test]
    fn empty_password_is_contract_error() {
        assert!(matches!(
            derive_key("", &[0u8; SALT_LEN]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn single_bit_salt_changes_never_collide() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut salt: Salt = rng.gen();
            let a = derive_key("pw", &salt).unwrap();
            let byte = rng.gen_range(0..SALT_LEN);
            let bit = rng.gen_range(0..8);
            salt[byte] ^= 1 << bit;
            let b = derive_key("pw", &salt).unwrap();
            assert_ne!(a, b);
        }
    }

    #[test]
    fn counter_nonces_are_sequential_and_unique() {
        let mut source = CounterNonceSource::new();
        let a = source.next_nonce();
        let b = source.next_nonce();
        assert_eq!(&a[..4], &[0, 0, 0, 0]);
        assert_eq!(u64::from_be_bytes(a[4..].try_into().unwrap()), 0);
        assert_eq!(u64::from_be_bytes(b[4..].try_into().unwrap()), 1);
        assert_ne!(a, b);
    }

    #[test]
    fn mask_with_no_spans_is_passthrough() {
        let masked = mask(
            "nothing sensitive here",
            &[],
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        assert_eq!(masked.masked_text, "nothing sensitive here");
        assert!(masked.spans.is_empty());
    }

    #[test]
    fn mask_matches_pinned_vectors() {
        let spans = [
            span(EntityLabel::Per, 0, 4),
            span(EntityLabel::Per, 9, 13),
        ];
        let masked = mask(
            "John met Mary",
            &spans,
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        assert_eq!(masked.masked_text, "[MASKED:PER:0] met [MASKED:PER:1]");
        assert_eq!(masked.spans.len(), 2);

        let hex = |b: &[u8]| b.iter().map(|x| format!("{x:02x}")).collect::<String>();
        assert_eq!(hex(&masked.spans[0].nonce), "000000000000000000000000");
        assert_eq!(hex(&masked.spans[0].ciphertext), "6403c09a");
        assert_eq!(hex(&masked.spans[0].tag), "b455c62227ddf99a46f402a53020fd31");
        assert_eq!(hex(&masked.spans[1].nonce), "000000000000000000000001");
        assert_eq!(hex(&masked.spans[1].ciphertext), "8999f1d4");
        assert_eq!(hex(&masked.spans[1].tag), "2183dd9c02558f10aed4a71e974fb287");
    }

    #[test]
    fn full_width_span_is_single_placeholder() {
        let masked = mask(
            "Atlantis",
            &[span(EntityLabel::Loc, 0, 8)],
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        assert_eq!(masked.masked_text, "[MASKED:LOC:0]");
        assert_eq!(
            unmask(&masked, &test_key()).unwrap(),
            "Atlantis"
        );
    }

    #[test]
    fn overlapping_spans_are_rejected() {
        let spans = [
            span(EntityLabel::Per, 0, 5),
            span(EntityLabel::Loc, 3, 8),
        ];
        assert!(matches!(
            mask(
                "overlapping",
                &spans,
                "alice",
                &test_key(),
                &mut CounterNonceSource::new(),
                PlaceholderStyle::Labeled,
            ),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn nonce_reuse_is_a_hard_error() {
        struct Stuck;
        impl NonceSource for Stuck {
            fn next_nonce(&mut self) -> [u8; NONCE_LEN] {
                [9u8; NONCE_LEN]
            }
        }
        let spans = [
            span(EntityLabel::Per, 0, 4),
            span(EntityLabel::Per, 9, 13),
        ];
        let err = mask(
            "John met Mary",
            &spans,
            "alice",
            &test_key(),
            &mut Stuck,
            PlaceholderStyle::Labeled,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "{err}");
        assert!(err.to_string().contains("nonce"), "{err}");
    }

    #[test]
    fn unmask_round_trips_both_placeholder_styles() {
        let text = "Dr Elena Vasquez flew to Port Moresby";
        let spans = [
            span(EntityLabel::Per, 3, 16),
            span(EntityLabel::Loc, 25, 37),
        ];
        for style in [PlaceholderStyle::Labeled, PlaceholderStyle::Redacted] {
            let masked = mask(
                text,
                &spans,
                "u1",
                &test_key(),
                &mut CounterNonceSource::new(),
                style,
            )
            .unwrap();
            if style == PlaceholderStyle::Redacted {
                assert!(masked.masked_text.contains("[MASKED:###:0]"));
            }
            assert_eq!(unmask(&masked, &test_key()).unwrap(), text);
        }
    }

    #[test]
    fn literal_placeholder_in_user_text_survives() {
        let text = "spoof [MASKED:PER:0] next to Alice here";
        let doc = Document::untagged(text.to_string());
        // mask the real name only; the literal placeholder string is data
        let alice = doc
            .tokens
            .iter()
            .find(|t| t.text == "Alice")
            .unwrap();
        let spans = [span(EntityLabel::Per, alice.start, alice.end)];
        let masked = mask(
            text,
            &spans,
            "u",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        assert_eq!(unmask(&masked, &test_key()).unwrap(), text);
    }

    #[test]
    fn tampered_ciphertext_is_integrity_error() {
        let spans = [span(EntityLabel::Per, 0, 4)];
        let mut masked = mask(
            "John waits",
            &spans,
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        masked.spans[0].ciphertext[0] ^= 0x01;
        let err = unmask(&masked, &test_key()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
        assert!(err.to_string().contains("span 0"), "{err}");
    }

    #[test]
    fn wrong_key_is_integrity_error() {
        let spans = [span(EntityLabel::Per, 0, 4)];
        let masked = mask(
            "John waits",
            &spans,
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        let other = derive_key("other", &[1u8; SALT_LEN]).unwrap();
        assert!(matches!(
            unmask(&masked, &other),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn edited_placeholder_is_format_error() {
        let spans = [span(EntityLabel::Per, 0, 4)];
        let mut masked = mask(
            "John waits",
            &spans,
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        masked.masked_text = masked.masked_text.replace("[MASKED:PER:0]", "[MASKED:PER:9]");
        assert!(matches!(
            unmask(&masked, &test_key()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn masked_document_json_round_trips_with_fixed_fields() {
        let spans = [span(EntityLabel::Per, 0, 4)];
        let masked = mask(
            "John waits",
            &spans,
            "alice",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        let json = masked.to_json().unwrap();
        let text = String::from_utf8(json.clone()).unwrap();
        let version_at = text.find("\"version\"").unwrap();
        let user_at = text.find("\"user_id\"").unwrap();
        let masked_at = text.find("\"masked_text\"").unwrap();
        let wrapped_at = text.find("\"wrapped_key\"").unwrap();
        let spans_at = text.find("\"spans\"").unwrap();
        assert!(version_at < user_at && user_at < masked_at);
        assert!(masked_at < wrapped_at && wrapped_at < spans_at);
        assert!(text.contains("\"label\":\"PER\""));

        let back = MaskedDocument::from_json(&json).unwrap();
        assert_eq!(back, masked);
    }

    #[test]
    fn masked_document_version_is_checked() {
        let doc = MaskedDocument {
            version: 9,
            user_id: "u".to_string(),
            masked_text: String::new(),
            wrapped_key: Vec::new(),
            spans: Vec::new(),
        };
        let json = serde_json::to_vec(&doc).unwrap();
        assert!(matches!(
            MaskedDocument::from_json(&json),
            Err(Error::Version { found: 9, .. })
        ));
    }

    #[test]
    fn encrypt_full_layout_and_round_trip() {
        let key = test_key();
        let out = encrypt_full("John met Mary", &key, &mut CounterNonceSource::new()).unwrap();
        assert_eq!(out.len(), 13 + NONCE_LEN + TAG_LEN);
        let hex: String = out.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(
            hex,
            "0000000000000000000000006403c09a19f26026c6ba291e78bc758b2647f10b269ce7f5c6354b3ad4"
        );
        assert_eq!(decrypt_full(&out, &key).unwrap(), "John met Mary");
    }

    #[test]
    fn encrypt_full_empty_text_is_28_bytes() {
        let key = test_key();
        let out = encrypt_full("", &key, &mut CounterNonceSource::new()).unwrap();
        assert_eq!(out.len(), 28);
        assert_eq!(decrypt_full(&out, &key).unwrap(), "");
    }

    #[test]
    fn decrypt_full_rejects_short_and_tampered_input() {
        let key = test_key();
        assert!(matches!(
            decrypt_full(&[0u8; 27], &key),
            Err(Error::Format(_))
        ));
        let mut out = encrypt_full("payload", &key, &mut CounterNonceSource::new()).unwrap();
        out[NONCE_LEN] ^= 0x80;
        assert!(matches!(decrypt_full(&out, &key), Err(Error::Integrity(_))));
    }

    #[test]
    fn select_sensitive_filters_by_policy() {
        let spans = [
            span(EntityLabel::Per, 0, 4),
            span(EntityLabel::Loc, 5, 9),
        ];
        let only_per = select_sensitive(&spans, &[EntityLabel::Per]);
        assert_eq!(only_per.len(), 1);
        assert_eq!(only_per[0].label, EntityLabel::Per);
        assert!(select_sensitive(&spans, &[]).is_empty());
        assert_eq!(select_sensitive(&spans, &default_policy()), spans.to_vec());
    }

    #[test]
    fn masked_byte_accounting_is_exact() {
        let text = "Ana met Bo in Rome today";
        let spans = [
            span(EntityLabel::Per, 0, 3),
            span(EntityLabel::Per, 8, 10),
            span(EntityLabel::Loc, 14, 18),
        ];
        let masked = mask(
            text,
            &spans,
            "u",
            &test_key(),
            &mut CounterNonceSource::new(),
            PlaceholderStyle::Labeled,
        )
        .unwrap();
        let encrypted: usize = masked.spans.iter().map(|s| s.ciphertext.len()).sum();
        let expected: usize = spans.iter().map(|s| s.byte_end - s.byte_start).sum();
        assert_eq!(encrypted, expected);
    }

    proptest! {
        #[test]
        fn unmask_mask_is_identity(
            words in proptest::collection::vec("[a-zA-Z]{1,8}", 1..30),
            picks in proptest::collection::vec((any::<prop::sample::Index>(), 0usize..4), 0..6),
            user in "[a-z]{1,8}",
            password in "[a-z]{4,12}",
        ) {
            let text = words.join(" ");
            let doc = Document::untagged(text.clone());
            let mut chosen: Vec<usize> = picks
                .iter()
                .map(|(idx, _)| idx.index(doc.len()))
                .collect();
            chosen.sort_unstable();
            chosen.dedup();
            let spans: Vec<EntitySpan> = chosen
                .iter()
                .zip(&picks)
                .map(|(&ti, (_, label))| {
                    let token = &doc.tokens[ti];
                    span(EntityLabel::ALL[*label], token.start, token.end)
                })
                .collect();
            let key = derive_key(&password, &[3u8; SALT_LEN]).unwrap();
            let masked = mask(
                &text,
                &spans,
                &user,
                &key,
                &mut CounterNonceSource::new(),
                PlaceholderStyle::Labeled,
            )
            .unwrap();
            prop_assert_eq!(unmask(&masked, &key).unwrap(), text);
        }
    }
}
