use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::RwLock;

use thiserror::Error;

use crate::crypto::Digest;

pub const DEFAULT_MAX_BLOB: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no blob stored at {0}")]
    NotFound(Digest),
    #[error("blob of {size} bytes exceeds limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("empty blob")]
    Empty,
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
}

/// Content-addressed blob storage; the address is the SHA-256 of the blob.
///
/// Both operations take `&self` so readers can share a store across threads.
pub trait ContentStore: Send + Sync {
    fn store(&self, blob: &[u8]) -> Result<Digest, StoreError>;
    fn resolve(&self, address: &Digest) -> Result<Vec<u8>, StoreError>;
    fn contains(&self, address: &Digest) -> bool;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_size(blob: &[u8], limit: usize) -> Result<(), StoreError> {
    if blob.is_empty() {
        return Err(StoreError::Empty);
    }
    if blob.len() > limit {
        return Err(StoreError::TooLarge {
            size: blob.len(),
            limit,
        });
    }
    Ok(())
}

#[derive(Debug)]
pub struct MemoryStore {
    blobs: RwLock<BTreeMap<Digest, Vec<u8>>>,
    max_blob: usize,
}

impl Default for MemoryStore {
    fn default() -> Self {
        MemoryStore::with_limit(DEFAULT_MAX_BLOB)
    }
}

impl MemoryStore {
    pub fn with_limit(max_blob: usize) -> Self {
        MemoryStore {
            blobs: RwLock::new(BTreeMap::new()),
            max_blob,
        }
    }
}

impl ContentStore for MemoryStore {
    fn store(&self, blob: &[u8]) -> Result<Digest, StoreError> {
        check_size(blob, self.max_blob)?;
        let addr = Digest::of(blob);
        self.blobs
            .write()
            .expect("store lock")
            .entry(addr)
            .or_insert_with(|| blob.to_vec());
        Ok(addr)
    }

    fn resolve(&self, address: &Digest) -> Result<Vec<u8>, StoreError> {
        self.blobs
            .read()
            .expect("store lock")
            .get(address)
            .cloned()
            .ok_or(StoreError::NotFound(*address))
    }

    fn contains(&self, address: &Digest) -> bool {
        self.blobs.read().expect("store lock").contains_key(address)
    }

    fn len(&self) -> usize {
        self.blobs.read().expect("store lock").len()
    }
}

/// One file per blob, named by the hex address.
#[derive(Debug)]
pub struct DirStore {
    root: PathBuf,
    max_blob: usize,
}

impl DirStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DirStore {
            root,
            max_blob: DEFAULT_MAX_BLOB,
        })
    }

    fn path(&self, address: &Digest) -> PathBuf {
        self.root.join(address.to_hex())
    }
}

impl ContentStore for DirStore {
    fn store(&self, blob: &[u8]) -> Result<Digest, StoreError> {
        check_size(blob, self.max_blob)?;
        let addr = Digest::of(blob);
        let path = self.path(&addr);
        if !path.exists() {
            let tmp = self.root.join(format!(".{}.tmp", addr.to_hex()));
            fs::write(&tmp, blob)?;
            fs::rename(tmp, path)?;
        }
        Ok(addr)
    }

    fn resolve(&self, address: &Digest) -> Result<Vec<u8>, StoreError> {
        match fs::read(self.path(address)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::NotFound(*address)),
            Err(e) => Err(e.into()),
        }
    }

    fn contains(&self, address: &Digest) -> bool {
        self.path(address).exists()
    }

    fn len(&self) -> usize {
        fs::read_dir(&self.root)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
                    .count()
            })
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise(s: &dyn ContentStore) {
        let blob = b"model card v1".to_vec();
        let a = s.store(&blob).unwrap();
        assert_eq!(s.resolve(&a).unwrap(), blob);
        assert_eq!(a, Digest::of(&blob));
        let n = s.len();
        assert_eq!(s.store(&blob).unwrap(), a);
        assert_eq!(s.len(), n);
        assert!(matches!(
            s.resolve(&Digest::of(b"never stored")),
            Err(StoreError::NotFound(_))
        ));
        assert!(matches!(s.store(&[]), Err(StoreError::Empty)));
    }

    #[test]
    fn memory_store_contract() {
        exercise(&MemoryStore::default());
        let small = MemoryStore::with_limit(4);
        assert!(matches!(
            small.store(b"12345"),
            Err(StoreError::TooLarge { size: 5, limit: 4 })
        ));
    }

    #[test]
    fn one_mebibyte_limit() {
        let s = MemoryStore::default();
        assert!(s.store(&vec![1u8; DEFAULT_MAX_BLOB]).is_ok());
        assert!(matches!(
            s.store(&vec![1u8; DEFAULT_MAX_BLOB + 1]),
            Err(StoreError::TooLarge { .. })
        ));
    }

    #[test]
    fn dir_store_contract() {
        let dir = tempfile::tempdir().unwrap();
        exercise(&DirStore::open(dir.path()).unwrap());
    }
}
