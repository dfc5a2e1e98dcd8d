//! The end-to-end commands: data loading, training over seeds, prediction,
//! scoring, attention inspection and inference generation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{CommonsenseProvider, RunConfig};
use super::data::{build_split, inference_map, InferenceMap, Split};
use crate::cluster::{cluster_corpus, read_clustering, write_clustering, ClusteringConfig, ClusteringHeader, Linkage};
use crate::commonsense::{
    load_inference_records, write_inference_records, Exemplar, FixtureProvider, GenerationClient, InferenceEngine,
    InferenceProvider, InferenceSet, ServiceProvider,
};
use crate::corpus::{generate_synthetic, load_corpus, write_corpus, Clustering, Corpus, SyntheticCorpus, SyntheticSpec};
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::scorer::{
    fit, forward_pair, load_checkpoint, save_checkpoint, CheckpointHeader, EpochRecord, ModelParameters,
};
use crate::util::{mean_std, write_atomic};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

/// The three splits with scorer inputs, plus the hard clusters when the
/// data are synthetic.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: Split,
    pub dev: Split,
    pub test: Split,
    pub hard_clusters: BTreeSet<String>,
    /// Calls that reached the inference provider (cache hits excluded).
    pub provider_calls: usize,
}

impl Datasets {
    pub fn split(&self, name: &str) -> Result<&Split> {
        match name {
            "train" => Ok(&self.train),
            "dev" => Ok(&self.dev),
            "test" => Ok(&self.test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }

    /// Locate a mention in any split.
    pub fn find(&self, mention_id: &str) -> Option<(&Split, usize)> {
        [&self.train, &self.dev, &self.test]
            .into_iter()
            .find_map(|s| s.index.get(mention_id).map(|&i| (s, i)))
    }
}

/// Train, dev and test corpora for a synthetic spec, with split-prefixed ids.
pub fn synthetic_splits(spec: &SyntheticSpec) -> Result<[SyntheticCorpus; 3]> {
    let make = |offset: u64, prefix: &str| {
        generate_synthetic(&SyntheticSpec { seed: spec.seed.wrapping_add(offset), ..spec.clone() })?.with_id_prefix(prefix)
    };
    Ok([make(0, "train-")?, make(1, "dev-")?, make(2, "test-")?])
}

fn build_engine(config: &RunConfig, synthetic: Option<Vec<InferenceSet>>) -> Result<InferenceEngine> {
    let cs = &config.commonsense;
    let provider: Box<dyn InferenceProvider> = match cs.provider {
        CommonsenseProvider::Fixture => {
            let mut sets = synthetic.unwrap_or_default();
            for path in &cs.fixtures {
                sets.extend(load_inference_records(path)?);
            }
            Box::new(FixtureProvider::new(sets, cs.strict))
        }
        CommonsenseProvider::Service => {
            let endpoint = cs
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("commonsense.endpoint is required".into()))?;
            let mut client = GenerationClient::new(endpoint, cs.model_id.clone());
            client.credential_env = cs.credential_env.clone();
            client.timeout = std::time::Duration::from_secs(cs.timeout_secs);
            client.attempts = cs.attempts;
            let exemplars = match &cs.exemplars {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    Some(serde_json::from_str::<Vec<Exemplar>>(&text)?)
                }
                None => None,
            };
            Box::new(ServiceProvider { client, mode: config.generation.mode, exemplars })
        }
    };
    let engine = InferenceEngine::new(provider, config.generation.clone());
    match &cs.cache_dir {
        Some(dir) => engine.with_cache_dir(dir),
        None => Ok(engine),
    }
}

/// Load (or generate) the corpora, resolve inferences when the mode needs
/// them, and embed everything.
pub fn load_datasets(config: &RunConfig) -> Result<Datasets> {
    let (corpora, fixtures, hard_clusters) = if config.data.is_synthetic() {
        let [train, dev, test] = synthetic_splits(&config.synthetic)?;
        let hard: BTreeSet<String> =
            [&train, &dev, &test].iter().flat_map(|s| s.hard_clusters.iter().cloned()).collect();
        let fixtures: Vec<InferenceSet> =
            [&train, &dev, &test].iter().flat_map(|s| s.fixtures.iter().cloned()).collect();
        ([train.corpus, dev.corpus, test.corpus], Some(fixtures), hard)
    } else {
        let load = |p: &Option<PathBuf>| load_corpus(p.as_ref().expect("validated"));
        (
            [load(&config.data.train)?, load(&config.data.dev)?, load(&config.data.test)?],
            None,
            BTreeSet::new(),
        )
    };

    let mut provider_calls = 0;
    let inferences: Option<InferenceMap> = if config.run.mode.uses_commonsense() {
        let engine = build_engine(config, fixtures)?;
        let mut sets = Vec::new();
        for c in &corpora {
            sets.extend(engine.resolve_corpus(c, config.commonsense.concurrency)?);
        }
        provider_calls = engine.provider_calls();
        Some(inference_map(sets))
    } else {
        None
    };
    info!("inference provider calls: {provider_calls}");

    let embedder = Embedder::new(config.embedder.clone())?;
    let [train, dev, test] = corpora;
    let scope = config.data.scope;
    Ok(Datasets {
        train: build_split("train", train, &embedder, inferences.as_ref(), scope)?,
        dev: build_split("dev", dev, &embedder, inferences.as_ref(), scope)?,
        test: build_split("test", test, &embedder, inferences.as_ref(), scope)?,
        hard_clusters,
        provider_calls,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub threshold: f64,
    pub dev_conll: f64,
    pub test_conll: f64,
    pub checkpoint_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: String,
    pub seeds: Vec<SeedResult>,
    pub failures: Vec<SeedFailure>,
    pub dev_conll_mean: f64,
    pub dev_conll_std: f64,
    pub test_conll_mean: f64,
    pub test_conll_std: f64,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "{:>6} {:>10} {:>9} {:>9} {:>9}", "seed", "best epoch", "tau", "dev", "test")?;
        for s in &self.seeds {
            writeln!(
                f,
                "{:>6} {:>10} {:>9.2} {:>9.2} {:>9.2}",
                s.seed,
                s.best_epoch,
                s.threshold,
                100.0 * s.dev_conll,
                100.0 * s.test_conll
            )?;
        }
        for x in &self.failures {
            writeln!(f, "{:>6} failed: {}", x.seed, x.error)?;
        }
        write!(
            f,
            "CoNLL F1 dev {:.2} ± {:.2}, test {:.2} ± {:.2}",
            100.0 * self.dev_conll_mean,
            100.0 * self.dev_conll_std,
            100.0 * self.test_conll_mean,
            100.0 * self.test_conll_std
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub config_sha256: String,
    pub crate_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub duration_secs: f64,
    pub provider_calls: usize,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub threshold: f64,
    pub dev_conll: f64,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// A run directory is complete once its manifest exists.
pub fn ensure_fresh_run_dir(out: &Path) -> Result<()> {
    if out.join(MANIFEST).exists() {
        return Err(Error::Config(format!(
            "{} holds a completed run; choose another output directory",
            out.display()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn train_one(config: &RunConfig, data: &Datasets, seed: u64, out: &Path) -> Result<SeedResult> {
    let train_config = config.train_config(seed);
    info!("training seed {seed} ({} mode)", train_config.mode);
    let outcome = fit(
        config.dims(),
        &data.train.inputs,
        &data.train.pairs,
        &data.dev.inputs,
        &data.dev.pairs,
        &train_config,
    )?;
    let dir = seed_dir(out, seed);
    let ckpt = dir.join("model.ckpt");
    save_checkpoint(&outcome.params, &ckpt)?;
    write_history(&dir.join("history.jsonl"), &outcome.history)?;

    let dev_scores = data.dev.score_matrix(&data.dev.predict(&outcome.params)?)?;
    let (threshold, dev_conll) = data.dev.tune_threshold(&dev_scores, &config.cluster.threshold_grid, config.eval)?;
    write_json(&dir.join("threshold.json"), &ThresholdRecord { threshold, dev_conll })?;

    let test_scores = data.test.score_matrix(&data.test.predict(&outcome.params)?)?;
    let (_, report) = data.test.cluster_and_evaluate(&test_scores, threshold, config.eval)?;
    info!("seed {seed}: τ = {threshold}, dev CoNLL {dev_conll:.4}, test CoNLL {:.4}", report.conll_f1);
    Ok(SeedResult {
        seed,
        best_epoch: outcome.best_epoch,
        threshold,
        dev_conll,
        test_conll: report.conll_f1,
        checkpoint_sha256: outcome.params.fingerprint(),
    })
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in history {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

fn finish(out: &Path, command: &str, config: &RunConfig, started: (Instant, String), provider_calls: usize, artifacts: Vec<String>) -> Result<()> {
    let manifest = Manifest {
        command: command.to_string(),
        status: "complete".into(),
        config_sha256: config.fingerprint(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at: started.1,
        finished_at: chrono::Utc::now().to_rfc3339(),
        duration_secs: started.0.elapsed().as_secs_f64(),
        provider_calls,
        artifacts,
    };
    write_json(&out.join(MANIFEST), &manifest)
}

fn now() -> (Instant, String) {
    (Instant::now(), chrono::Utc::now().to_rfc3339())
}

/// Train one model per seed, tune τ on dev and evaluate on test. Refuses a
/// directory that already holds a completed run.
pub fn train(config: &RunConfig, data: &Datasets, out: &Path) -> Result<TrainSummary> {
    ensure_fresh_run_dir(out)?;
    let started = now();
    write_atomic(&out.join("config.toml"), config.to_toml().as_bytes())?;
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for &seed in &config.run.seeds {
        match train_one(config, data, seed, out) {
            Ok(r) => seeds.push(r),
            Err(e @ Error::NonFinite(_)) => {
                warn!("seed {seed} aborted: {e}");
                failures.push(SeedFailure { seed, error: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    let (dev_conll_mean, dev_conll_std) = mean_std(&seeds.iter().map(|s| s.dev_conll).collect::<Vec<_>>());
    let (test_conll_mean, test_conll_std) = mean_std(&seeds.iter().map(|s| s.test_conll).collect::<Vec<_>>());
    let summary = TrainSummary {
        mode: config.run.mode.to_string(),
        seeds,
        failures,
        dev_conll_mean,
        dev_conll_std,
        test_conll_mean,
        test_conll_std,
    };
    write_json(&out.join(SUMMARY), &summary)?;
    write_atomic(&out.join("summary.txt"), format!("{summary}\n").as_bytes())?;
    let mut artifacts = vec!["config.toml".to_string(), SUMMARY.into(), "summary.txt".into()];
    for s in &summary.seeds {
        for f in ["model.ckpt", "history.jsonl", "threshold.json"] {
            artifacts.push(format!("seed-{}/{f}", s.seed));
        }
    }
    finish(out, "train", config, started, data.provider_calls, artifacts)?;
    Ok(summary)
}

/// Checkpoint and tuned threshold of one seed in a run directory.
pub fn load_seed(config: &RunConfig, run_dir: &Path, seed: u64) -> Result<(ModelParameters, f64)> {
    let dir = seed_dir(run_dir, seed);
    let header = CheckpointHeader::new(config.dims(), config.run.mode);
    let params = load_checkpoint(&dir.join("model.ckpt"), Some(&header))?;
    let t: ThresholdRecord = read_json(&dir.join("threshold.json"))?;
    Ok((params, t.threshold))
}

/// Score every in-scope pair of a split, cluster at `threshold` and write the clustering.
pub fn predict(split: &Split, params: &ModelParameters, threshold: f64, path: &Path) -> Result<Clustering> {
    let scores = split.score_matrix(&split.predict(params)?)?;
    let config = ClusteringConfig { scope: split.scope, ..ClusteringConfig::new(threshold) };
    let clustering = cluster_corpus(&split.corpus, &scores, &config)?;
    let header = ClusteringHeader {
        threshold,
        linkage: Linkage::Average,
        scope: split.scope,
        checkpoint: Some(params.fingerprint()),
    };
    write_clustering(path, &header, &clustering)?;
    Ok(clustering)
}

/// Evaluate a clustering file against a corpus.
pub fn score_file(corpus: &Corpus, clusters: &Path, config: &RunConfig) -> Result<EvalReport> {
    let (_, clustering) = read_clustering(clusters)?;
    evaluate(corpus, &clustering, config.eval)
}

/// Smoke path: the gold clustering scored as if it were system output.
pub fn score_gold(corpus: &Corpus, config: &RunConfig) -> Result<EvalReport> {
    evaluate(corpus, &corpus.gold_clustering()?, config.eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedInference {
    pub text: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationView {
    /// Mention whose context is the query.
    pub reader: String,
    /// Mention whose inferences are attended over.
    pub source: String,
    pub relation: String,
    /// Sorted by weight, largest first.
    pub inferences: Vec<WeightedInference>,
}

/// Attention weights of one scored pair, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub first: String,
    pub second: String,
    pub first_context: String,
    pub second_context: String,
    pub probability: f64,
    pub gold_coreferent: Option<bool>,
    pub relations: Vec<RelationView>,
}

impl fmt::Display for AttentionTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.first, self.first_context)?;
        writeln!(f, "{}: {}", self.second, self.second_context)?;
        let gold = match self.gold_coreferent {
            Some(true) => "coreferent",
            Some(false) => "not coreferent",
            None => "unknown",
        };
        writeln!(f, "probability {:.4} (gold: {gold})", self.probability)?;
        for r in &self.relations {
            writeln!(f, "\n[{}] {} reading {}'s inferences", r.relation, r.reader, r.source)?;
            for i in &r.inferences {
                writeln!(f, "  {:.4}  {}", i.weight, i.text)?;
            }
        }
        Ok(())
    }
}

/// Score one pair and report each relation's inferences by attention weight.
pub fn explain(data: &Datasets, params: &ModelParameters, first: &str, second: &str) -> Result<AttentionTrace> {
    let (split_a, a) = data.find(first).ok_or_else(|| Error::UnknownMention(first.to_string()))?;
    let (split_b, b) = data.find(second).ok_or_else(|| Error::UnknownMention(second.to_string()))?;
    let trace = forward_pair(params, &split_a.inputs[a], &split_b.inputs[b])?;
    let mention_a = &split_a.corpus.mentions()[a];
    let mention_b = &split_b.corpus.mentions()[b];
    let gold_coreferent = match (&mention_a.gold_cluster_id, &mention_b.gold_cluster_id) {
        (Some(x), Some(y)) => Some(x == y),
        _ => None,
    };
    let relations = trace
        .relations
        .iter()
        .enumerate()
        .map(|(slot, r)| {
            let mut inferences: Vec<WeightedInference> = r
                .inferences
                .iter()
                .zip(&r.weights)
                .map(|(t, &w)| WeightedInference { text: t.clone(), weight: w })
                .collect();
            inferences.sort_by(|x, y| y.weight.total_cmp(&x.weight));
            RelationView {
                reader: if slot < 2 { first.to_string() } else { second.to_string() },
                source: r.source_mention.clone(),
                relation: if slot % 2 == 0 { "before" } else { "after" }.to_string(),
                inferences,
            }
        })
        .collect();
    Ok(AttentionTrace {
        first: first.to_string(),
        second: second.to_string(),
        first_context: split_a.corpus.sentence_of(mention_a).join(" "),
        second_context: split_b.corpus.sentence_of(mention_b).join(" "),
        probability: trace.probability,
        gold_coreferent,
        relations,
    })
}

/// Write a synthetic corpus and its inference fixtures.
pub fn synth(spec: &SyntheticSpec, out: &Path) -> Result<SyntheticCorpus> {
    let generated = generate_synthetic(spec)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_corpus(&generated.corpus, out.join("corpus.jsonl"))?;
    write_inference_records(&generated.fixtures, out.join("inferences.jsonl"))?;
    Ok(generated)
}

/// Resolve inferences for every split and write one fixture file per split.
pub fn gen_inferences(config: &RunConfig, out: &Path) -> Result<usize> {
    let (corpora, fixtures) = if config.data.is_synthetic() {
        let [a, b, c] = synthetic_splits(&config.synthetic)?;
        let fixtures = [&a, &b, &c].iter().flat_map(|s| s.fixtures.iter().cloned()).collect();
        ([a.corpus, b.corpus, c.corpus], Some(fixtures))
    } else {
        let load = |p: &Option<PathBuf>| load_corpus(p.as_ref().expect("validated"));
        ([load(&config.data.train)?, load(&config.data.dev)?, load(&config.data.test)?], None)
    };
    let engine = build_engine(config, fixtures)?;
    for (name, corpus) in ["train", "dev", "test"].iter().zip(&corpora) {
        let sets = engine.resolve_corpus(corpus, config.commonsense.concurrency)?;
        write_inference_records(&sets, out.join(format!("{name}.inferences.jsonl")))?;
    }
    Ok(engine.provider_calls())
}
