//! Per-stakeholder signing keys, loaded from a directory of JSON key files.
//! A caller names its key via the `x-databom-caller` header; the file name
//! stem is the key name. Development custody model: the gateway signs on
//! behalf of configured stakeholders.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;

use databom_core::crypto::{Address, KeyFile, KeyPair};
use databom_core::error::{Error, ErrorCode, Result};

pub struct StoredKey {
    pub name: String,
    pub address: Address,
    pub pair: KeyPair,
}

pub struct KeyStore {
    dir: PathBuf,
    keys: RwLock<HashMap<String, StoredKey>>,
}

impl KeyStore {
    pub fn open(dir: &Path) -> Result<KeyStore> {
        std::fs::create_dir_all(dir)?;
        let store = KeyStore {
            dir: dir.to_path_buf(),
            keys: RwLock::new(HashMap::new()),
        };
        store.reload()?;
        Ok(store)
    }

    pub fn reload(&self) -> Result<()> {
        let mut keys = HashMap::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let file = KeyFile::load(&path)?;
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(&file.name)
                .to_string();
            let pair = file.keypair()?;
            keys.insert(
                name.clone(),
                StoredKey {
                    name,
                    address: pair.address(),
                    pair,
                },
            );
        }
        *self.keys.write() = keys;
        Ok(())
    }

    /// Generates (or deterministically derives) a key and writes its file.
    pub fn generate(&self, name: &str, seed: Option<&[u8]>) -> Result<Address> {
        let (_, pair) = databom_core::crypto::create_account(seed);
        let file = KeyFile::from_keypair(name, &pair);
        file.save(&self.dir.join(format!("{name}.json")))?;
        let address = pair.address();
        self.keys.write().insert(
            name.to_string(),
            StoredKey {
                name: name.to_string(),
                address,
                pair,
            },
        );
        Ok(address)
    }

    pub fn resolve(&self, name: &str) -> Result<(Address, KeyPair)> {
        let keys = self.keys.read();
        let key = keys.get(name).ok_or_else(|| {
            Error::new(
                ErrorCode::KeyMismatch,
                format!("no key named {name} in the gateway key directory"),
            )
        })?;
        Ok((key.address, key.pair.clone()))
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.keys.read().keys().cloned().collect();
        names.sort();
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn generate_and_resolve_roundtrip() {
        let dir = TempDir::new().unwrap();
        let store = KeyStore::open(dir.path()).unwrap();
        let address = store.generate("alice", Some(b"alice-seed")).unwrap();
        let (resolved, pair) = store.resolve("alice").unwrap();
        assert_eq!(resolved, address);
        assert_eq!(pair.address(), address);

        // A fresh store over the same directory sees the same key.
        let store2 = KeyStore::open(dir.path()).unwrap();
        assert_eq!(store2.resolve("alice").unwrap().0, address);
    }

    #[test]
    fn unknown_key_is_key_mismatch() {
        let dir = TempDir::new().unwrap();
        let store = KeyStore::open(dir.path()).unwrap();
        assert_eq!(
            store.resolve("nobody").unwrap_err().code,
            ErrorCode::KeyMismatch
        );
    }
}
