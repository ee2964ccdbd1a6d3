use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::AdequacyError;
use crate::gateway::{DedupCache, RelationJudgment};

/// Directory holding the persistent edge cache when set.
pub const CACHE_DIR_ENV: &str = "TAXOMETER_CACHE_DIR";
pub const CACHE_FILE: &str = "edge_judgments.jsonl";

/// One persisted edge judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub parent_id: String,
    pub child_id: String,
    pub p_contradicts: f64,
    pub p_neutral: f64,
    pub p_entails: f64,
    pub provider_fingerprint: String,
}

pub(crate) type EdgeKey = (String, String, String);

/// Judgments per `(parent_id, child_id, provider fingerprint)`.
///
/// The full judgment is kept, so strong and weak scoring share entries. With
/// a backing file, new judgments are appended as they arrive and earlier
/// ones are loaded on open.
pub struct EdgeCache {
    pub(crate) entries: DedupCache<EdgeKey, RelationJudgment>,
    file: Option<(PathBuf, Mutex<File>)>,
}

impl Default for EdgeCache {
    fn default() -> Self {
        EdgeCache::in_memory()
    }
}

impl EdgeCache {
    pub fn in_memory() -> Self {
        EdgeCache {
            entries: DedupCache::new(),
            file: None,
        }
    }

    /// Opens or creates an append-only cache file. A torn final line left
    /// by an interrupted run is dropped.
    pub fn open(path: &Path) -> Result<Self, AdequacyError> {
        let entries = DedupCache::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.split(b'\n').enumerate() {
                let line = line?;
                let text = String::from_utf8_lossy(&line);
                if text.trim().is_empty() {
                    valid_len += line.len() as u64 + 1;
                    continue;
                }
                match serde_json::from_str::<EdgeRecord>(&text) {
                    Ok(r) => {
                        let j = RelationJudgment::new(r.p_contradicts, r.p_neutral, r.p_entails).map_err(|e| {
                            AdequacyError::Cache {
                                path: path.display().to_string(),
                                message: format!("line {}: {e}", i + 1),
                            }
                        })?;
                        entries.insert((r.parent_id, r.child_id, r.provider_fingerprint), j);
                        valid_len += line.len() as u64 + 1;
                    }
                    Err(e) => {
                        tracing::warn!(path = %path.display(), line = i + 1, error = %e, "dropping unreadable cache tail");
                        break;
                    }
                }
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).read(true).open(path)?;
        let len = file.metadata()?.len();
        if valid_len < len {
            file.set_len(valid_len)?;
        }
        Ok(EdgeCache {
            entries,
            file: Some((path.to_path_buf(), Mutex::new(file))),
        })
    }

    /// Cache file under `TAXOMETER_CACHE_DIR`, or an in-memory cache when the
    /// variable is unset.
    pub fn from_env() -> Result<Self, AdequacyError> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) => EdgeCache::open(&Path::new(&dir).join(CACHE_FILE)),
            None => Ok(EdgeCache::in_memory()),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, parent_id: &str, child_id: &str, fingerprint: &str) -> Option<RelationJudgment> {
        self.entries
            .get(&(parent_id.to_string(), child_id.to_string(), fingerprint.to_string()))
    }

    pub(crate) fn persist(&self, keys: &[EdgeKey], judgments: &[RelationJudgment]) -> Result<(), AdequacyError> {
        let Some((_, file)) = &self.file else {
            return Ok(());
        };
        let mut buf = Vec::new();
        for ((parent_id, child_id, fp), j) in keys.iter().zip(judgments) {
            let record = EdgeRecord {
                parent_id: parent_id.clone(),
                child_id: child_id.clone(),
                p_contradicts: j.contradicts,
                p_neutral: j.neutral,
                p_entails: j.entails,
                provider_fingerprint: fp.clone(),
            };
            serde_json::to_writer(&mut buf, &record).map_err(std::io::Error::from)?;
            buf.push(b'\n');
        }
        let mut file = file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&buf)?;
        file.flush()?;
        Ok(())
    }
}
