//! Authority escrow: every user's session key is wrapped under an
//! authority RSA keypair and stored in a file keystore, so an authorized
//! holder of the private key can unmask any document without knowing the
//! user's password.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::{CryptoRng, RngCore};
use rsa::pkcs8::{
    DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey, LineEnding,
};
use rsa::{Oaep, RsaPrivateKey, RsaPublicKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crypto::{SessionKey, KEY_LEN, SALT_LEN};
use crate::error::{Error, Result};

pub const RSA_BITS: usize = 2048;
/// Wrapped session keys are always one RSA block.
pub const WRAPPED_LEN: usize = RSA_BITS / 8;

const KEYSTORE_VERSION: u32 = 1;

/// The authority's RSA-2048 keypair plus a short identifier derived from
/// the public key.
#[derive(Debug, Clone)]
pub struct AuthorityKeypair {
    public: RsaPublicKey,
    private: RsaPrivateKey,
    key_id: String,
}

/// Hex of the first 8 bytes of SHA-256 over the DER-encoded public key.
pub fn key_id_of(public: &RsaPublicKey) -> Result<String> {
    let der = public
        .to_public_key_der()
        .map_err(|e| Error::Format(format!("encode public key: {e}")))?;
    let digest = Sha256::digest(der.as_bytes());
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

impl AuthorityKeypair {
    /// Generate a fresh RSA-2048 keypair from the given randomness source.
    /// Pass a seeded generator for reproducible test keys, the OS generator
    /// in production.
    pub fn generate(rng: &mut (impl RngCore + CryptoRng)) -> Result<AuthorityKeypair> {
        let private = RsaPrivateKey::new(rng, RSA_BITS)
            .map_err(|e| Error::Format(format!("rsa keygen: {e}")))?;
        let public = RsaPublicKey::from(&private);
        let key_id = key_id_of(&public)?;
        Ok(AuthorityKeypair {
            public,
            private,
            key_id,
        })
    }

    pub fn public(&self) -> &RsaPublicKey {
        &self.public
    }

    pub fn private(&self) -> &RsaPrivateKey {
        &self.private
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn save_private_pem(&self, path: impl AsRef<Path>) -> Result<()> {
        let pem = self
            .private
            .to_pkcs8_pem(LineEnding::LF)
            .map_err(|e| Error::Format(format!("encode private key: {e}")))?;
        crate::fsutil::atomic_write(path.as_ref(), pem.as_bytes())
    }

    pub fn save_public_pem(&self, path: impl AsRef<Path>) -> Result<()> {
        let pem = self
            .public
            .to_public_key_pem(LineEnding::LF)
            .map_err(|e| Error::Format(format!("encode public key: {e}")))?;
        crate::fsutil::atomic_write(path.as_ref(), pem.as_bytes())
    }

    /// Rebuild the keypair from a PKCS#8 private-key PEM file.
    pub fn load_private_pem(path: impl AsRef<Path>) -> Result<AuthorityKeypair> {
        let pem = fs::read_to_string(path.as_ref())?;
        let private = RsaPrivateKey::from_pkcs8_pem(&pem)
            .map_err(|e| Error::Corrupt(format!("{}: {e}", path.as_ref().display())))?;
        let public = RsaPublicKey::from(&private);
        let key_id = key_id_of(&public)?;
        Ok(AuthorityKeypair {
            public,
            private,
            key_id,
        })
    }
}

pub fn load_public_pem(path: impl AsRef<Path>) -> Result<RsaPublicKey> {
    let pem = fs::read_to_string(path.as_ref())?;
    RsaPublicKey::from_public_key_pem(&pem)
        .map_err(|e| Error::Corrupt(format!("{}: {e}", path.as_ref().display())))
}

/// Encrypt a session key under the authority public key with RSA-OAEP
/// (SHA-256), binding it to the user via the OAEP label.
pub fn wrap_session_key(
    session_key: &SessionKey,
    public: &RsaPublicKey,
    user_id: &str,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<Vec<u8>> {
    let padding = Oaep::new_with_label::<Sha256, _>(user_id);
    let wrapped = public
        .encrypt(rng, padding, session_key)
        .map_err(|e| Error::Format(format!("wrap session key: {e}")))?;
    if wrapped.len() != WRAPPED_LEN {
        return Err(Error::Format(format!(
            "wrapped key is {} bytes, expected {WRAPPED_LEN}",
            wrapped.len()
        )));
    }
    Ok(wrapped)
}

/// Recover a session key with the authority private key. Fails cleanly,
/// never returning unauthenticated bytes, when the blob was tampered with,
/// wrapped for a different user, or wrapped under a different authority.
pub fn authority_unwrap(
    wrapped: &[u8],
    private: &RsaPrivateKey,
    user_id: &str,
) -> Result<SessionKey> {
    let padding = Oaep::new_with_label::<Sha256, _>(user_id);
    let unwrapped = private.decrypt(padding, wrapped).map_err(|_| {
        Error::Integrity("session key unwrap failed: wrong key, user, or tampered data".to_string())
    })?;
    let key: [u8; KEY_LEN] = unwrapped
        .as_slice()
        .try_into()
        .map_err(|_| Error::Integrity("unwrapped key has the wrong length".to_string()))?;
    Ok(key)
}

/// The AES-GCM encryption of [`VERIFIER_PLAINTEXT`] under a user's session
/// key; lets the platform tell a wrong password apart from tampering
/// without ever storing key material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verifier {
    #[serde(with = "b64_field")]
    pub nonce: Vec<u8>,
    #[serde(with = "b64_field")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "b64_field")]
    pub tag: Vec<u8>,
}

pub const VERIFIER_PLAINTEXT: &[u8] = b"maskup-key-verifier";
/// Distinguished associated-data index for verifiers; document spans use
/// their ordinal, which can never reach this value in practice.
pub const VERIFIER_AAD_INDEX: u32 = u32::MAX;

impl Verifier {
    pub fn create(
        user_id: &str,
        key: &SessionKey,
        nonces: &mut dyn crate::crypto::NonceSource,
    ) -> Result<Verifier> {
        use aes_gcm::aead::{Aead, KeyInit, Payload};
        use aes_gcm::{Aes128Gcm, Nonce};
        let cipher = Aes128Gcm::new(key.into());
        let nonce = nonces.next_nonce();
        let mut aad = user_id.as_bytes().to_vec();
        aad.extend_from_slice(&VERIFIER_AAD_INDEX.to_be_bytes());
        let mut sealed = cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: VERIFIER_PLAINTEXT,
                    aad: &aad,
                },
            )
            .map_err(|_| Error::Integrity("verifier encryption failed".to_string()))?;
        let tag = sealed.split_off(sealed.len() - crate::crypto::TAG_LEN);
        Ok(Verifier {
            nonce: nonce.to_vec(),
            ciphertext: sealed,
            tag,
        })
    }

    /// True when `key` decrypts the verifier; an [`Error::Auth`] from the
    /// caller on `false` means "wrong password", not corruption.
    pub fn check(&self, user_id: &str, key: &SessionKey) -> bool {
        use aes_gcm::aead::{Aead, KeyInit, Payload};
        use aes_gcm::{Aes128Gcm, Nonce};
        if self.nonce.len() != crate::crypto::NONCE_LEN {
            return false;
        }
        let cipher = Aes128Gcm::new(key.into());
        let mut aad = user_id.as_bytes().to_vec();
        aad.extend_from_slice(&VERIFIER_AAD_INDEX.to_be_bytes());
        let mut sealed = self.ciphertext.clone();
        sealed.extend_from_slice(&self.tag);
        matches!(
            cipher.decrypt(
                Nonce::from_slice(&self.nonce),
                Payload { msg: &sealed, aad: &aad },
            ),
            Ok(pt) if pt == VERIFIER_PLAINTEXT
        )
    }
}

/// One user's escrow record: the key-derivation salt, the wrapped session
/// key, and the password verifier. Never any plaintext key material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    #[serde(with = "b64_field")]
    pub salt: Vec<u8>,
    #[serde(with = "b64_field")]
    pub wrapped_key: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<Verifier>,
}

mod b64_field {
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

/// File-backed map from user id to escrow record, bound to one authority
/// key. Writes go through a temp-file rename so readers never observe a
/// partial store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keystore {
    version: u32,
    pub authority_key_id: String,
    users: BTreeMap<String, UserRecord>,
}

impl Keystore {
    pub fn new(authority_key_id: impl Into<String>) -> Keystore {
        Keystore {
            version: KEYSTORE_VERSION,
            authority_key_id: authority_key_id.into(),
            users: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Insert a record; refuses to replace an existing user unless
    /// `overwrite` is set.
    pub fn put(&mut self, user_id: &str, record: UserRecord, overwrite: bool) -> Result<()> {
        if record.salt.len() != SALT_LEN {
            return Err(Error::Contract(format!(
                "salt is {} bytes, expected {SALT_LEN}",
                record.salt.len()
            )));
        }
        if !overwrite && self.users.contains_key(user_id) {
            return Err(Error::Validation(format!(
                "user {user_id:?} already exists in the keystore"
            )));
        }
        self.users.insert(user_id.to_string(), record);
        Ok(())
    }

    pub fn get(&self, user_id: &str) -> Result<&UserRecord> {
        self.users
            .get(user_id)
            .ok_or_else(|| Error::NotFound(format!("user {user_id:?} not in keystore")))
    }

    pub fn contains(&self, user_id: &str) -> bool {
        self.users.contains_key(user_id)
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.users.keys().map(String::as_str)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec(self)
            .map_err(|e| Error::Format(format!("encode keystore: {e}")))?;
        crate::fsutil::atomic_write(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Keystore> {
        let bytes = fs::read(path.as_ref())?;
        let store: Keystore = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Integrity(format!("keystore {}: {e}", path.as_ref().display())))?;
        if store.version != KEYSTORE_VERSION {
            return Err(Error::Version {
                found: store.version,
                expected: KEYSTORE_VERSION,
            });
        }
        for (user, record) in &store.users {
            if record.salt.len() != SALT_LEN {
                return Err(Error::Integrity(format!(
                    "keystore record for {user:?} has a malformed salt"
                )));
            }
        }
        Ok(store)
    }
}
