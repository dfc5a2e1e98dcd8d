use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::warn;

use super::{GenerationConfig, InferenceCache, InferenceSet, Provenance, Source};
use crate::corpus::{generate_synthetic, Corpus, Mention, SyntheticSpec};
use crate::error::{Error, Result};

/// A source of before/after inferences for a mention in its sentence.
pub trait InferenceProvider: Send + Sync {
    /// Identifies the provider and every setting that affects its output.
    fn fingerprint(&self) -> String;

    fn generate(
        &self,
        mention: &Mention,
        context: &[String],
        config: &GenerationConfig,
    ) -> Result<InferenceSet>;
}

/// Serves inference sets loaded from a fixture file.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    sets: HashMap<(String, String), InferenceSet>,
    strict: bool,
    fingerprint: String,
}

impl FixtureProvider {
    pub fn new(sets: impl IntoIterator<Item = InferenceSet>, strict: bool) -> Self {
        let sets: HashMap<(String, String), InferenceSet> = sets
            .into_iter()
            .map(|s| ((s.doc_id.clone(), s.mention_id.clone()), s))
            .collect();
        let mut keys: Vec<&InferenceSet> = sets.values().collect();
        keys.sort_by(|a, b| (&a.doc_id, &a.mention_id).cmp(&(&b.doc_id, &b.mention_id)));
        let digest = crate::util::sha256_hex(
            super::inference_records_to_string(&keys.into_iter().cloned().collect::<Vec<_>>())
                .as_bytes(),
        );
        FixtureProvider {
            sets,
            strict,
            fingerprint: format!("fixture:{}", &digest[..16]),
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

impl InferenceProvider for FixtureProvider {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn generate(&self, mention: &Mention, _: &[String], _: &GenerationConfig) -> Result<InferenceSet> {
        match self.sets.get(&(mention.doc_id.clone(), mention.mention_id.clone())) {
            Some(s) => Ok(s.clone()),
            None if self.strict => Err(Error::MissingFixture {
                doc_id: mention.doc_id.clone(),
                mention_id: mention.mention_id.clone(),
            }),
            None => {
                warn!("no fixture for mention {}; using an empty set", mention.mention_id);
                Ok(InferenceSet::empty(
                    &mention.doc_id,
                    &mention.mention_id,
                    Provenance::new(Source::Fixture).with_warning("missing-fixture"),
                ))
            }
        }
    }
}

/// Re-derives the inference fixtures of a synthetic corpus from its spec.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    inner: FixtureProvider,
    fingerprint: String,
}

impl SyntheticProvider {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        let generated = generate_synthetic(spec)?;
        let sets = generated.fixtures.into_iter().map(|mut s| {
            s.provenance = Provenance::new(Source::Synthetic);
            s
        });
        Ok(SyntheticProvider {
            inner: FixtureProvider::new(sets, true),
            fingerprint: format!(
                "synthetic:{}",
                &crate::util::sha256_hex(serde_json::to_string(spec)?.as_bytes())[..16]
            ),
        })
    }
}

impl InferenceProvider for SyntheticProvider {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn generate(&self, mention: &Mention, context: &[String], config: &GenerationConfig) -> Result<InferenceSet> {
        self.inner.generate(mention, context, config)
    }
}

/// Provider plus memoization: each key reaches the provider at most once.
pub struct InferenceEngine {
    provider: Box<dyn InferenceProvider>,
    config: GenerationConfig,
    persistent: Option<InferenceCache>,
    memory: Mutex<HashMap<(String, String), InferenceSet>>,
    calls: AtomicUsize,
}

impl InferenceEngine {
    pub fn new(provider: Box<dyn InferenceProvider>, config: GenerationConfig) -> Self {
        InferenceEngine {
            provider,
            config,
            persistent: None,
            memory: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Persist results under `dir`, keyed by [`Self::fingerprint`].
    pub fn with_cache_dir(mut self, dir: impl AsRef<std::path::Path>) -> Result<Self> {
        self.persistent = Some(InferenceCache::open(dir, &self.fingerprint())?);
        Ok(self)
    }

    /// Provider fingerprint plus the generation settings that affect output.
    pub fn fingerprint(&self) -> String {
        let c = &self.config;
        format!(
            "{}|k={}|top_p={}|max_tokens={}|stop={}",
            self.provider.fingerprint(),
            c.k,
            c.top_p,
            c.max_tokens,
            c.stop
        )
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    /// Number of times the underlying provider was invoked.
    pub fn provider_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn get_inferences(&self, mention: &Mention, context: &[String]) -> Result<InferenceSet> {
        let key = (mention.doc_id.clone(), mention.mention_id.clone());
        if let Some(s) = self.memory.lock().expect("memo lock").get(&key) {
            return Ok(s.clone());
        }
        if let Some(s) = self.persistent.as_ref().and_then(|c| c.get(&key.0, &key.1)) {
            self.memory.lock().expect("memo lock").insert(key, s.clone());
            return Ok(s);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut set = self.provider.generate(mention, context, &self.config)?;
        set.doc_id = mention.doc_id.clone();
        set.mention_id = mention.mention_id.clone();
        let mut set = set.normalized(self.config.k);
        if let Some(cache) = &self.persistent {
            set = cache.put(set)?;
        }
        let mut memory = self.memory.lock().expect("memo lock");
        Ok(memory.entry(key).or_insert(set).clone())
    }

    /// Resolve every mention of the corpus, running up to `concurrency`
    /// provider calls at once. Output follows corpus mention order.
    pub fn resolve_corpus(&self, corpus: &Corpus, concurrency: usize) -> Result<Vec<InferenceSet>> {
        let mentions = corpus.mentions();
        let workers = concurrency.max(1).min(mentions.len().max(1));
        let chunk = mentions.len().div_ceil(workers).max(1);
        let results: Vec<Result<Vec<InferenceSet>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = mentions
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|m| self.get_inferences(m, corpus.sentence_of(m)))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(mentions.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}
