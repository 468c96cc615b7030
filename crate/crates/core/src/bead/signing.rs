//! Ed25519 detached signatures over canonical draft bytes.
//!
//! Signatures are written as `base64:<standard base64 of 64 bytes>`. Author
//! DIDs resolve to public keys through a local [`Keyring`] file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};

use super::{Bead, BeadError, Draft};

pub const SIGNATURE_PREFIX: &str = "base64:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed key: {0}")]
pub struct KeyFormatError(pub String);

/// Author signing key (32-byte Ed25519 seed).
#[derive(Clone)]
pub struct SecretKey(SigningKey);

impl SecretKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> SecretKey {
        SecretKey(SigningKey::generate(rng))
    }

    pub fn from_base64(s: &str) -> Result<SecretKey, KeyFormatError> {
        let bytes: [u8; 32] = decode_fixed(s.trim())?;
        Ok(SecretKey(SigningKey::from_bytes(&bytes)))
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.0.to_bytes())
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key())
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn from_base64(s: &str) -> Result<PublicKey, KeyFormatError> {
        let bytes: [u8; 32] = decode_fixed(s.trim())?;
        VerifyingKey::from_bytes(&bytes)
            .map(PublicKey)
            .map_err(|e| KeyFormatError(e.to_string()))
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.0.as_bytes())
    }

    fn verify(&self, message: &[u8], signature: &str) -> bool {
        match decode_signature(signature) {
            Some(sig) => self.0.verify_strict(message, &sig).is_ok(),
            None => false,
        }
    }
}

fn decode_fixed<const N: usize>(s: &str) -> Result<[u8; N], KeyFormatError> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| KeyFormatError(e.to_string()))?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| KeyFormatError(format!("expected {N} bytes, got {}", b.len())))
}

pub(crate) fn decode_signature(s: &str) -> Option<Signature> {
    let raw = s.strip_prefix(SIGNATURE_PREFIX)?;
    let bytes: [u8; 64] = decode_fixed(raw).ok()?;
    Some(Signature::from_bytes(&bytes))
}

/// Signs the canonical bytes of `draft`.
pub fn sign(draft: &Draft, key: &SecretKey) -> Result<String, BeadError> {
    let msg = draft.canonicalize()?;
    let sig = key.0.sign(&msg);
    Ok(format!("{SIGNATURE_PREFIX}{}", STANDARD.encode(sig.to_bytes())))
}

/// True iff the bead's signature validates over its canonical bytes.
pub fn verify_signature(bead: &Bead, key: &PublicKey) -> Result<bool, BeadError> {
    let signature = bead.signature.as_deref().ok_or(BeadError::MissingSignature)?;
    verify_draft(&bead.draft, signature, key)
}

pub(crate) fn verify_draft(draft: &Draft, signature: &str, key: &PublicKey) -> Result<bool, BeadError> {
    let msg = draft.canonicalize()?;
    Ok(key.verify(&msg, signature))
}

/// Local DID to public key map, persisted as a JSON object of
/// `did -> base64 public key`.
#[derive(Clone, Debug, Default)]
pub struct Keyring {
    keys: BTreeMap<String, PublicKey>,
}

impl Keyring {
    pub fn new() -> Keyring {
        Keyring::default()
    }

    pub fn insert(&mut self, did: impl Into<String>, key: PublicKey) {
        self.keys.insert(did.into(), key);
    }

    pub fn resolve(&self, did: &str) -> Option<&PublicKey> {
        self.keys.get(did)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn from_json(s: &str) -> Result<Keyring, KeyFormatError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(s).map_err(|e| KeyFormatError(e.to_string()))?;
        let mut keys = BTreeMap::new();
        for (did, key) in raw {
            let key = PublicKey::from_base64(&key)
                .map_err(|e| KeyFormatError(format!("{did}: {}", e.0)))?;
            keys.insert(did, key);
        }
        Ok(Keyring { keys })
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, String> = self
            .keys
            .iter()
            .map(|(did, k)| (did.as_str(), k.to_base64()))
            .collect();
        serde_json::to_string_pretty(&raw).expect("string map serializes")
    }

    pub fn load(path: &Path) -> std::io::Result<Keyring> {
        let text = fs::read_to_string(path)?;
        Keyring::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }
}
