use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::kg::DatasetLayout;

/// SHA-256 over length-prefixed parts, hex encoded.
pub fn digest<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Digest of every dataset file (name and contents).
pub fn dataset_digest(dir: &Path) -> io::Result<String> {
    let l = DatasetLayout::default();
    let mut parts = Vec::new();
    for name in [
        l.source_entities,
        l.target_entities,
        l.source_relations,
        l.target_relations,
        l.source_triples,
        l.target_triples,
        l.reference,
    ] {
        parts.push(name.as_bytes().to_vec());
        parts.push(fs::read(dir.join(name))?);
    }
    Ok(digest(parts.iter().map(Vec::as_slice)))
}

/// Directory of content-addressed phase outputs.
#[derive(Debug, Clone)]
pub struct PhaseCache {
    dir: PathBuf,
}

impl PhaseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, kind: &str, key: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{}.{ext}", &key[..key.len().min(16)]))
    }

    pub fn read(&self, kind: &str, key: &str, ext: &str) -> Option<Vec<u8>> {
        fs::read(self.path(kind, key, ext)).ok()
    }

    /// Writes through a temporary file so readers never see a partial entry.
    pub fn write(&self, kind: &str, key: &str, ext: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(kind, key, ext);
        let tmp = path.with_extension(format!("{ext}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_separates_parts() {
        let a = digest([b"ab".as_slice(), b"c".as_slice()]);
        let b = digest([b"a".as_slice(), b"bc".as_slice()]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let c = PhaseCache::new(dir.path().join("cache"));
        let key = digest([b"x".as_slice()]);
        assert!(c.read("t", &key, "bin").is_none());
        c.write("t", &key, "bin", b"hello").unwrap();
        assert_eq!(c.read("t", &key, "bin").unwrap(), b"hello");
    }
}
