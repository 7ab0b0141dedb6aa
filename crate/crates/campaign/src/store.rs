//! Content-addressed artifact store backing campaign restartability.
//!
//! Every stage output is a JSON file keyed by a stable content hash of its
//! inputs, so re-running a completed campaign loads everything from disk
//! and performs no fresh evaluations.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs;
use std::io;
use std::path::PathBuf;

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(dir: &std::path::Path) -> io::Result<Store> {
        let root = dir.join("store");
        fs::create_dir_all(&root)?;
        Ok(Store { root })
    }

    fn path(&self, stage: &str, key: u64) -> PathBuf {
        self.root.join(stage).join(format!("{key:016x}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, stage: &str, key: u64) -> Option<T> {
        let text = fs::read_to_string(self.path(stage, key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put<T: Serialize>(&self, stage: &str, key: u64, value: &T) -> io::Result<()> {
        let path = self.path(stage, key);
        fs::create_dir_all(path.parent().unwrap())?;
        let text = serde_json::to_string(value).expect("artifacts always serialize");
        fs::write(path, text)
    }

    pub fn contains(&self, stage: &str, key: u64) -> bool {
        self.path(stage, key).exists()
    }

    /// All keys of one stage, ascending (deterministic iteration order).
    pub fn keys(&self, stage: &str) -> Vec<u64> {
        let mut out = Vec::new();
        if let Ok(entries) = fs::read_dir(self.root.join(stage)) {
            for entry in entries.flatten() {
                if let Some(stem) = entry.path().file_stem().and_then(|s| s.to_str()) {
                    if let Ok(key) = u64::from_str_radix(stem, 16) {
                        out.push(key);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Stable hash over any serializable value (FNV-1a of its JSON bytes).
pub fn content_key<T: Serialize>(value: &T) -> u64 {
    let mut h = matscreen_core::structure::Fnv1a::new();
    h.write(serde_json::to_string(value).expect("hashable values serialize").as_bytes());
    h.finish()
}
