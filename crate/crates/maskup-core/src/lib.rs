//! Detects privacy-sensitive entities in text with a trainable sequence
//! tagger, encrypts only those spans under a per-user symmetric key, and
//! escrows every user key under an authority keypair so authorized parties
//! can reversibly unmask any document.

pub mod bench;
pub mod continual;
pub mod crypto;
pub mod doc;
pub mod error;
pub mod escrow;
pub mod fsutil;
pub mod tagger;

pub use error::{Error, Result};
