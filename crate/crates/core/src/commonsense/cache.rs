//! Persistent memo of inference sets, one JSON-lines file per provider
//! fingerprint. Entries are immutable; the file is rewritten atomically on
//! every insert.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{InferenceSet, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheRecord {
    doc_id: String,
    mention_id: String,
    fingerprint: String,
    before: Vec<String>,
    after: Vec<String>,
    provenance: Provenance,
    created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub value: InferenceSet,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug)]
pub struct InferenceCache {
    path: PathBuf,
    fingerprint: String,
    entries: Mutex<BTreeMap<(String, String), CacheEntry>>,
}

fn file_name(fingerprint: &str) -> String {
    let safe: String = fingerprint
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}-{}.jsonl", &crate::util::sha256_hex(fingerprint.as_bytes())[..12])
}

impl InferenceCache {
    /// Open (or start) the cache for one provider fingerprint under `dir`.
    pub fn open(dir: impl AsRef<Path>, fingerprint: &str) -> Result<Self> {
        let path = dir.as_ref().join(file_name(fingerprint));
        let mut entries = BTreeMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let r: CacheRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if r.fingerprint != fingerprint {
                    continue;
                }
                let key = (r.doc_id.clone(), r.mention_id.clone());
                entries.entry(key).or_insert(CacheEntry {
                    fingerprint: r.fingerprint,
                    created_at: r.created_at,
                    value: InferenceSet {
                        doc_id: r.doc_id,
                        mention_id: r.mention_id,
                        before: r.before,
                        after: r.after,
                        provenance: r.provenance,
                    },
                });
            }
        }
        Ok(InferenceCache {
            path,
            fingerprint: fingerprint.to_string(),
            entries: Mutex::new(entries),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, doc_id: &str, mention_id: &str) -> Option<InferenceSet> {
        let entries = self.entries.lock().expect("cache lock");
        entries
            .get(&(doc_id.to_string(), mention_id.to_string()))
            .map(|e| e.value.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert unless the key already exists; returns the stored value.
    pub fn put(&self, value: InferenceSet) -> Result<InferenceSet> {
        let mut entries = self.entries.lock().expect("cache lock");
        let key = (value.doc_id.clone(), value.mention_id.clone());
        if let Some(existing) = entries.get(&key) {
            return Ok(existing.value.clone());
        }
        entries.insert(
            key,
            CacheEntry {
                fingerprint: self.fingerprint.clone(),
                value: value.clone(),
                created_at: Utc::now(),
            },
        );
        let mut text = String::new();
        for e in entries.values() {
            let r = CacheRecord {
                doc_id: e.value.doc_id.clone(),
                mention_id: e.value.mention_id.clone(),
                fingerprint: e.fingerprint.clone(),
                before: e.value.before.clone(),
                after: e.value.after.clone(),
                provenance: e.value.provenance.clone(),
                created_at: e.created_at,
            };
            text.push_str(&serde_json::to_string(&r)?);
            text.push('\n');
        }
        crate::util::write_atomic(&self.path, text.as_bytes())?;
        Ok(value)
    }
}
