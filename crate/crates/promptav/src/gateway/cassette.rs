//! Record/replay cassettes: a JSONL file of request-fingerprint → response
//! records that makes gateway runs reproducible without network access.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChatResponse, GatewayError};

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub fingerprint: String,
    pub response_text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model_id: String,
}

impl CassetteRecord {
    pub fn from_response(fingerprint: &str, response: &ChatResponse) -> Self {
        Self {
            fingerprint: fingerprint.to_string(),
            response_text: response.text.clone(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
            model_id: response.model_id.clone(),
        }
    }

    pub fn to_response(&self) -> ChatResponse {
        ChatResponse {
            text: self.response_text.clone(),
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
            model_id: self.model_id.clone(),
        }
    }
}

/// An in-memory cassette bound to its backing file; appends go straight to
/// disk so an interrupted recording session keeps everything finished so far.
#[derive(Debug)]
pub struct Cassette {
    path: PathBuf,
    records: HashMap<String, CassetteRecord>,
}

impl Cassette {
    /// Load a cassette; a missing file is an empty cassette ready for
    /// recording. Two records with the same fingerprint must be identical.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let mut records = HashMap::new();
        match std::fs::read_to_string(path) {
            Ok(body) => {
                for (idx, line) in body.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let record: CassetteRecord =
                        serde_json::from_str(line).map_err(|e| GatewayError::CassetteFormat {
                            path: path.to_path_buf(),
                            line: idx + 1,
                            reason: e.to_string(),
                        })?;
                    if let Some(existing) =
                        records.insert(record.fingerprint.clone(), record.clone())
                    {
                        if existing != record {
                            return Err(GatewayError::CassetteCollision {
                                fingerprint: record.fingerprint,
                            });
                        }
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(GatewayError::Io(e)),
        }
        Ok(Self {
            path: path.to_path_buf(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CassetteRecord> {
        self.records.get(fingerprint)
    }

    /// Append a record to memory and disk. A repeat of an identical record is
    /// a no-op; a different record under an existing fingerprint is rejected.
    pub fn append(&mut self, record: CassetteRecord) -> Result<(), GatewayError> {
        if let Some(existing) = self.records.get(&record.fingerprint) {
            if *existing == record {
                return Ok(());
            }
            return Err(GatewayError::CassetteCollision {
                fingerprint: record.fingerprint,
            });
        }
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(&record)
            .map_err(|e| GatewayError::Protocol(format!("cassette record serialization: {e}")))?;
        writeln!(file, "{line}")?;
        self.records.insert(record.fingerprint.clone(), record);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(fp: &str, text: &str) -> CassetteRecord {
        CassetteRecord {
            fingerprint: fp.into(),
            response_text: text.into(),
            prompt_tokens: 10,
            completion_tokens: 5,
            model_id: "test-model".into(),
        }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        {
            let mut cassette = Cassette::load(&path).unwrap();
            assert!(cassette.is_empty());
            cassette.append(record("fp-a", "first")).unwrap();
            cassette.append(record("fp-b", "second")).unwrap();
        }
        let cassette = Cassette::load(&path).unwrap();
        assert_eq!(cassette.len(), 2);
        assert_eq!(cassette.get("fp-a").unwrap().response_text, "first");
        assert_eq!(cassette.get("fp-b").unwrap().response_text, "second");
        assert!(cassette.get("fp-c").is_none());
    }

    #[test]
    fn identical_duplicate_is_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let mut cassette = Cassette::load(&path).unwrap();
        cassette.append(record("fp-a", "same")).unwrap();
        cassette.append(record("fp-a", "same")).unwrap();
        assert_eq!(cassette.len(), 1);
    }

    #[test]
    fn conflicting_duplicate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let mut cassette = Cassette::load(&path).unwrap();
        cassette.append(record("fp-a", "one")).unwrap();
        let err = cassette.append(record("fp-a", "two")).unwrap_err();
        assert!(matches!(err, GatewayError::CassetteCollision { .. }));
    }

    #[test]
    fn conflicting_records_on_disk_are_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let a = serde_json::to_string(&record("fp-a", "one")).unwrap();
        let b = serde_json::to_string(&record("fp-a", "two")).unwrap();
        std::fs::write(&path, format!("{a}\n{b}\n")).unwrap();
        assert!(matches!(
            Cassette::load(&path),
            Err(GatewayError::CassetteCollision { .. })
        ));
    }

    #[test]
    fn malformed_line_is_reported_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        match Cassette::load(&path) {
            Err(GatewayError::CassetteFormat { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected CassetteFormat, got {other:?}"),
        }
    }
}
