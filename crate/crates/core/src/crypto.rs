//! Addresses, key pairs and digests.
//!
//! An [`Address`] is the trailing 20 bytes of the SHA-256 digest of an
//! Ed25519 public key, hex-encoded for transport. Signatures are detached
//! Ed25519 over canonical transaction bytes.

use std::fmt;
use std::path::Path;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, ErrorCode, Result};

pub const ADDRESS_LEN: usize = 20;

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

/// 20-byte account or contract identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address([u8; ADDRESS_LEN]);

impl Address {
    pub const ZERO: Address = Address([0u8; ADDRESS_LEN]);

    /// Trailing 20 bytes of SHA-256 over the public key bytes.
    pub fn from_public_key(public_key: &[u8]) -> Address {
        let digest = sha256(public_key);
        let mut out = [0u8; ADDRESS_LEN];
        out.copy_from_slice(&digest[32 - ADDRESS_LEN..]);
        Address(out)
    }

    pub fn from_bytes(bytes: [u8; ADDRESS_LEN]) -> Address {
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }

    pub fn from_hex(s: &str) -> Result<Address> {
        let raw = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(raw)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad address hex: {e}")))?;
        if bytes.len() != ADDRESS_LEN {
            return Err(Error::new(
                ErrorCode::BadArgs,
                format!("address must be {ADDRESS_LEN} bytes, got {}", bytes.len()),
            ));
        }
        let mut out = [0u8; ADDRESS_LEN];
        out.copy_from_slice(&bytes);
        Ok(Address(out))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Address::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// 32-byte digest (block hashes, state roots, content hashes, tx hashes).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash32([u8; 32]);

impl Hash32 {
    pub const ZERO: Hash32 = Hash32([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Hash32> {
        let raw = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(raw)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad digest hex: {e}")))?;
        if bytes.len() != 32 {
            return Err(Error::new(
                ErrorCode::BadArgs,
                format!("digest must be 32 bytes, got {}", bytes.len()),
            ));
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&bytes);
        Ok(Hash32(out))
    }

    pub fn of(bytes: &[u8]) -> Hash32 {
        Hash32(sha256(bytes))
    }
}

impl From<[u8; 32]> for Hash32 {
    fn from(bytes: [u8; 32]) -> Self {
        Hash32(bytes)
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Debug for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl Serialize for Hash32 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Hash32 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Hash32::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Ed25519 key pair bound to a derived [`Address`].
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    /// Fresh random key pair.
    pub fn generate() -> KeyPair {
        let seed: [u8; 32] = rand::random();
        KeyPair {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    /// Deterministic key pair: the seed bytes (any length) are hashed into
    /// the 32-byte secret. Same seed, same address, on every run.
    pub fn from_seed(seed: &[u8]) -> KeyPair {
        KeyPair {
            signing: SigningKey::from_bytes(&sha256(seed)),
        }
    }

    pub fn from_secret_bytes(secret: &[u8; 32]) -> KeyPair {
        KeyPair {
            signing: SigningKey::from_bytes(secret),
        }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_key_bytes(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn address(&self) -> Address {
        Address::from_public_key(&self.public_key_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.signing.sign(message).to_bytes().to_vec()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({})", self.address())
    }
}

/// Creates an account: deterministic when a seed is given.
pub fn create_account(seed: Option<&[u8]>) -> (Address, KeyPair) {
    let pair = match seed {
        Some(bytes) => KeyPair::from_seed(bytes),
        None => KeyPair::generate(),
    };
    (pair.address(), pair)
}

/// Verifies a detached Ed25519 signature against raw public key bytes.
pub fn verify_signature(public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
    let Ok(key_bytes) = <[u8; 32]>::try_from(public_key) else {
        return false;
    };
    let Ok(key) = VerifyingKey::from_bytes(&key_bytes) else {
        return false;
    };
    let Ok(sig_bytes) = <[u8; 64]>::try_from(signature) else {
        return false;
    };
    key.verify(message, &Signature::from_bytes(&sig_bytes))
        .is_ok()
}

/// On-disk key file: written by `databom keygen`, read by the gateway
/// keystore and the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyFile {
    pub name: String,
    pub address: Address,
    pub public_key: String,
    pub secret_key: String,
}

impl KeyFile {
    pub fn from_keypair(name: &str, pair: &KeyPair) -> KeyFile {
        KeyFile {
            name: name.to_string(),
            address: pair.address(),
            public_key: hex::encode(pair.public_key_bytes()),
            secret_key: hex::encode(pair.secret_bytes()),
        }
    }

    pub fn load(path: &Path) -> Result<KeyFile> {
        let data = std::fs::read(path)?;
        let file: KeyFile = serde_json::from_slice(&data).map_err(|e| {
            Error::new(
                ErrorCode::BadArgs,
                format!("malformed key file {}: {e}", path.display()),
            )
        })?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let data = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("key encode failed: {e}")))?;
        std::fs::write(path, data)?;
        Ok(())
    }

    pub fn keypair(&self) -> Result<KeyPair> {
        let bytes = hex::decode(&self.secret_key)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad secret hex: {e}")))?;
        let secret: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::new(ErrorCode::BadArgs, "secret key must be 32 bytes"))?;
        Ok(KeyPair::from_secret_bytes(&secret))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: recompute the SHA-256 tail-20 derivation by hand.
    fn address_oracle(public_key: &[u8]) -> [u8; 20] {
        let mut h = Sha256::new();
        h.update(public_key);
        let digest = h.finalize();
        digest[12..32].try_into().unwrap()
    }

    #[test]
    fn fixed_seed_gives_same_address_every_run() {
        let (a1, _) = create_account(Some(&[0u8; 32]));
        let (a2, _) = create_account(Some(&[0u8; 32]));
        assert_eq!(a1, a2);
    }

    #[test]
    fn fresh_accounts_are_distinct() {
        let (a1, _) = create_account(None);
        let (a2, _) = create_account(None);
        assert_ne!(a1, a2);
    }

    #[test]
    fn address_matches_recomputation_from_public_key() {
        let (addr, pair) = create_account(Some(b"oracle-check"));
        assert_eq!(addr.as_bytes(), &address_oracle(&pair.public_key_bytes()));
        assert_eq!(addr, Address::from_public_key(&pair.public_key_bytes()));
    }

    #[test]
    fn sign_verify_roundtrip() {
        let pair = KeyPair::from_seed(b"signer");
        let sig = pair.sign(b"message");
        assert!(verify_signature(&pair.public_key_bytes(), b"message", &sig));
        assert!(!verify_signature(&pair.public_key_bytes(), b"other", &sig));
        let other = KeyPair::from_seed(b"not-the-signer");
        assert!(!verify_signature(&other.public_key_bytes(), b"message", &sig));
    }

    #[test]
    fn address_hex_roundtrip() {
        let (addr, _) = create_account(Some(b"hex"));
        assert_eq!(Address::from_hex(&addr.to_hex()).unwrap(), addr);
        assert!(Address::from_hex("0x1234").is_err());
    }

    #[test]
    fn key_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pair = KeyPair::from_seed(b"file");
        let file = KeyFile::from_keypair("alice", &pair);
        let path = dir.path().join("alice.json");
        file.save(&path).unwrap();
        let loaded = KeyFile::load(&path).unwrap();
        assert_eq!(loaded.address, pair.address());
        assert_eq!(loaded.keypair().unwrap().secret_bytes(), pair.secret_bytes());
    }
}
