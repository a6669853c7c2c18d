//! Content-addressed on-disk response cache.
//!
//! Entries are keyed by request fingerprint, written atomically
//! (temp file + rename), and never expire; temperature-0 responses are
//! treated as stable for a given model version. A corrupt entry is a miss —
//! it logs a warning and gets overwritten by the next store.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::ChatResponse;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    response: ChatResponse,
}

/// A directory of cached responses, one JSON file per fingerprint.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn entry_path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    /// Look up a response; any unreadable or mismatched entry is a miss.
    pub fn get(&self, fingerprint: &str) -> Option<ChatResponse> {
        let path = self.entry_path(fingerprint);
        let body = match std::fs::read_to_string(&path) {
            Ok(body) => body,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("unreadable cache entry {}: {e}", path.display());
                return None;
            }
        };
        match serde_json::from_str::<CacheEntry>(&body) {
            Ok(entry) if entry.fingerprint == fingerprint => Some(entry.response),
            Ok(entry) => {
                log::warn!(
                    "cache entry {} holds fingerprint {}; treating as a miss",
                    path.display(),
                    entry.fingerprint
                );
                None
            }
            Err(e) => {
                log::warn!("corrupt cache entry {}: {e}; treating as a miss", path.display());
                None
            }
        }
    }

    /// Store a response atomically: write a unique temp file in the cache
    /// directory, then rename over the final path.
    pub fn put(&self, fingerprint: &str, response: &ChatResponse) -> std::io::Result<()> {
        let entry = CacheEntry {
            fingerprint: fingerprint.to_string(),
            response: response.clone(),
        };
        let body = serde_json::to_vec(&entry)?;
        let unique = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let temp = self.dir.join(format!(
            ".{fingerprint}.{}.{unique}.tmp",
            std::process::id()
        ));
        std::fs::write(&temp, body)?;
        match std::fs::rename(&temp, self.entry_path(fingerprint)) {
            Ok(()) => Ok(()),
            Err(e) => {
                let _ = std::fs::remove_file(&temp);
                Err(e)
            }
        }
    }

    /// Delete every cache entry; returns how many files were removed.
    pub fn clear(&self) -> std::io::Result<usize> {
        let mut removed = 0;
        for dirent in std::fs::read_dir(&self.dir)? {
            let path = dirent?.path();
            if path.extension().is_some_and(|e| e == "json") && path.is_file() {
                std::fs::remove_file(&path)?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}
