//! Temporal commonsense inferences: what plausibly happened before and after
//! an event mention in its sentence.
//!
//! Inferences come from a [`provider::InferenceProvider`] (fixture files,
//! the synthetic generator, or a remote text-generation service) and are
//! memoized per `(doc_id, mention_id, provider fingerprint)` by
//! [`cache::InferenceCache`].

pub mod cache;
pub mod prompt;
pub mod provider;
pub mod service;

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::InferenceCache;
pub use prompt::{format_prompt, parse_completion, Exemplar, ParsedCompletion};
pub use provider::{FixtureProvider, InferenceEngine, InferenceProvider, SyntheticProvider};
pub use service::{GenerationClient, ServiceProvider};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    #[default]
    Finetuned,
    Fewshot,
}

impl FromStr for PromptMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finetuned" => Ok(PromptMode::Finetuned),
            "fewshot" => Ok(PromptMode::Fewshot),
            other => Err(Error::Config(format!("unknown prompt mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub top_p: f64,
    pub max_tokens: usize,
    pub stop: String,
    pub k: usize,
    pub mode: PromptMode,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            top_p: 0.9,
            max_tokens: 150,
            stop: "END".to_string(),
            k: DEFAULT_K,
            mode: PromptMode::Finetuned,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where an inference set came from. Serialized as a compact string such as
/// `fixture`, `service:davinci-ft` or `fewshot:davinci;warn=missing-after`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub source: Source,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Source {
    Fixture,
    Synthetic,
    Service(String),
    Fewshot(String),
}

impl Provenance {
    pub fn new(source: Source) -> Self {
        Provenance {
            source,
            warnings: Vec::new(),
        }
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Fixture => f.write_str("fixture")?,
            Source::Synthetic => f.write_str("synthetic")?,
            Source::Service(m) => write!(f, "service:{m}")?,
            Source::Fewshot(m) => write!(f, "fewshot:{m}")?,
        }
        for w in &self.warnings {
            write!(f, ";warn={w}")?;
        }
        Ok(())
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';');
        let head = parts.next().unwrap_or_default();
        let source = match head.split_once(':') {
            None if head == "fixture" => Source::Fixture,
            None if head == "synthetic" => Source::Synthetic,
            Some(("service", m)) if !m.is_empty() => Source::Service(m.to_string()),
            Some(("fewshot", m)) if !m.is_empty() => Source::Fewshot(m.to_string()),
            _ => return Err(Error::Config(format!("bad provenance `{s}`"))),
        };
        let mut warnings = Vec::new();
        for p in parts {
            match p.strip_prefix("warn=") {
                Some(w) => warnings.push(w.to_string()),
                None => return Err(Error::Config(format!("bad provenance `{s}`"))),
            }
        }
        Ok(Provenance { source, warnings })
    }
}

impl Serialize for Provenance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Up to k "before" and k "after" inference sentences for one mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSet {
    pub doc_id: String,
    pub mention_id: String,
    pub before: Vec<String>,
    pub after: Vec<String>,
    pub provenance: Provenance,
}

impl InferenceSet {
    /// Trim, drop empty strings and truncate both lists to `k`.
    pub fn normalized(mut self, k: usize) -> Self {
        for list in [&mut self.before, &mut self.after] {
            let cleaned: Vec<String> = list
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .take(k)
                .collect();
            *list = cleaned;
        }
        self
    }

    pub fn empty(doc_id: &str, mention_id: &str, provenance: Provenance) -> Self {
        InferenceSet {
            doc_id: doc_id.to_string(),
            mention_id: mention_id.to_string(),
            before: Vec::new(),
            after: Vec::new(),
            provenance,
        }
    }
}

/// One JSON object per line in fixture and cache files.
pub fn parse_inference_records(text: &str, origin: &str) -> Result<Vec<InferenceSet>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<InferenceSet>(l).map_err(|e| Error::MalformedRecord {
                path: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_inference_records(path: impl AsRef<Path>) -> Result<Vec<InferenceSet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    parse_inference_records(&text, &path.display().to_string())
}

pub fn inference_records_to_string(sets: &[InferenceSet]) -> String {
    let mut out = String::new();
    for s in sets {
        out.push_str(&serde_json::to_string(s).expect("inference set serializes"));
        out.push('\n');
    }
    out
}

pub fn write_inference_records(sets: &[InferenceSet], path: impl AsRef<Path>) -> Result<()> {
    crate::util::write_atomic(path.as_ref(), inference_records_to_string(sets).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_round_trips() {
        for s in ["fixture", "synthetic", "service:ft-1", "fewshot:base;warn=missing-after"] {
            let p: Provenance = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("service:".parse::<Provenance>().is_err());
        assert!("comet".parse::<Provenance>().is_err());
    }

    #[test]
    fn generation_defaults() {
        let g = GenerationConfig::default();
        assert_eq!((g.top_p, g.max_tokens, g.stop.as_str(), g.k), (0.9, 150, "END", 5));
        g.validate().unwrap();
        assert!(GenerationConfig { top_p: 0.0, ..g.clone() }.validate().is_err());
        assert!(GenerationConfig { k: 0, ..g }.validate().is_err());
    }

    #[test]
    fn normalization_trims_and_truncates() {
        let s = InferenceSet {
            doc_id: "d".into(),
            mention_id: "m".into(),
            before: vec!["  a b. ".into(), "".into(), "c".into()],
            after: (0..7).map(|i| format!("s{i}")).collect(),
            provenance: Provenance::new(Source::Fixture),
        }
        .normalized(5);
        assert_eq!(s.before, vec!["a b.", "c"]);
        assert_eq!(s.after.len(), 5);
    }

    #[test]
    fn record_round_trip() {
        let s = InferenceSet {
            doc_id: "d1".into(),
            mention_id: "m1".into(),
            before: vec!["b1".into()],
            after: vec!["a1".into()],
            provenance: Provenance::new(Source::Fixture),
        };
        let text = inference_records_to_string(std::slice::from_ref(&s));
        assert_eq!(parse_inference_records(&text, "mem").unwrap(), vec![s]);
    }
}
