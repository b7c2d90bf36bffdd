use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::format::{load_salmap, save_salmap};
use crate::error::Result;
use crate::raster::Plane;

/// On-disk store of composed saliency maps keyed by image content, the ordered proxy
/// classes and the backend name. Writes go through a temporary file and an atomic
/// rename, so concurrent writers of the same key are harmless.
#[derive(Clone, Debug)]
pub struct SaliencyCache {
    dir: PathBuf,
}

impl SaliencyCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(SaliencyCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(image_hash: &str, classes: &[usize], backend: &str) -> String {
        let mut h = Sha256::new();
        h.update(backend.as_bytes());
        h.update([0]);
        h.update(image_hash.as_bytes());
        h.update([0]);
        for c in classes {
            h.update((*c as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.salmap"))
    }

    pub fn get(&self, key: &str) -> Option<Plane> {
        let p = self.path(key);
        if !p.exists() {
            return None;
        }
        match load_salmap(&p) {
            Ok(plane) => Some(plane),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", p.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, plane: &Plane) -> Result<()> {
        save_salmap(plane, &self.path(key))
    }
}
