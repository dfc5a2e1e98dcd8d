//! Python bindings for the coreference pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use tecr_core::cluster::{agglomerative_cluster, ClusteringConfig, ScoreMatrix};
use tecr_core::commonsense::{self, PromptMode};
use tecr_core::corpus::{self as core_corpus, generate_synthetic, SyntheticSpec};
use tecr_core::metrics::{self, EvalOptions, MetricScore};
use tecr_core::pipeline::{self, RunConfig as CoreRunConfig};
use tecr_core::scorer::{self, ScorerMode};
use tecr_core::linalg::Matrix;

create_exception!(tecr, TecrError, PyException);

fn err(e: tecr_core::Error) -> PyErr {
    TecrError::new_err(e.to_string())
}

fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| TecrError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_mode(mode: &str) -> PyResult<ScorerMode> {
    mode.parse().map_err(err)
}

/// A partition of mentions, mention id -> cluster id.
#[pyclass(module = "tecr", from_py_object)]
#[derive(Clone)]
pub struct Clustering {
    inner: core_corpus::Clustering,
}

#[pymethods]
impl Clustering {
    #[new]
    fn new(assignment: BTreeMap<String, String>) -> Self {
        Clustering { inner: core_corpus::Clustering::from_assignment(assignment) }
    }

    /// Build from member lists; each cluster is named after its smallest id.
    #[staticmethod]
    fn from_clusters(clusters: Vec<Vec<String>>) -> Self {
        Clustering { inner: core_corpus::Clustering::from_clusters(clusters) }
    }

    fn assignment(&self) -> BTreeMap<String, String> {
        self.inner.assignment().clone()
    }

    fn clusters(&self) -> BTreeMap<String, Vec<String>> {
        self.inner
            .clusters()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Clustering) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Clustering({} mentions, {} clusters)", self.inner.len(), self.inner.clusters().len())
    }
}

/// Documents and event mentions with optional gold clusters.
#[pyclass(module = "tecr", from_py_object)]
#[derive(Clone)]
pub struct Corpus {
    inner: core_corpus::Corpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Corpus { inner: core_corpus::load_corpus(path).map_err(err)? })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Corpus { inner: core_corpus::parse_corpus(text, "<python>").map_err(err)? })
    }

    /// Generate a synthetic corpus. Returns the corpus and its hard cluster ids.
    #[staticmethod]
    #[pyo3(signature = (n_topics=4, clusters_per_topic=4, mentions_per_cluster=4, hard_fraction=0.5, distractor_rate=0.5, seed=7))]
    fn synthetic(
        n_topics: usize,
        clusters_per_topic: usize,
        mentions_per_cluster: usize,
        hard_fraction: f64,
        distractor_rate: f64,
        seed: u64,
    ) -> PyResult<(Self, Vec<String>)> {
        let spec = SyntheticSpec { n_topics, clusters_per_topic, mentions_per_cluster, hard_fraction, distractor_rate, seed };
        let s = generate_synthetic(&spec).map_err(err)?;
        Ok((Corpus { inner: s.corpus }, s.hard_clusters.into_iter().collect()))
    }

    fn mention_ids(&self) -> Vec<String> {
        self.inner.mentions().iter().map(|m| m.mention_id.clone()).collect()
    }

    fn mentions<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner.mentions())
    }

    fn gold_clustering(&self) -> PyResult<Clustering> {
        Ok(Clustering { inner: self.inner.gold_clustering().map_err(err)? })
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_string_canonical()
    }

    fn __len__(&self) -> usize {
        self.inner.mentions().len()
    }

    fn __repr__(&self) -> String {
        format!("Corpus({} documents, {} mentions)", self.inner.documents().len(), self.inner.mentions().len())
    }
}

fn triple(s: MetricScore) -> (f64, f64, f64) {
    (s.precision, s.recall, s.f1)
}

/// MUC `(precision, recall, f1)`.
#[pyfunction]
fn muc(key: &Clustering, response: &Clustering) -> PyResult<(f64, f64, f64)> {
    metrics::muc(&key.inner, &response.inner).map(triple).map_err(err)
}

#[pyfunction]
fn b_cubed(key: &Clustering, response: &Clustering) -> PyResult<(f64, f64, f64)> {
    metrics::b_cubed(&key.inner, &response.inner).map(triple).map_err(err)
}

#[pyfunction]
fn ceaf_e(key: &Clustering, response: &Clustering) -> PyResult<(f64, f64, f64)> {
    metrics::ceaf_e(&key.inner, &response.inner).map(triple).map_err(err)
}

#[pyfunction]
fn conll_f1(key: &Clustering, response: &Clustering) -> PyResult<f64> {
    let (k, r) = (&key.inner, &response.inner);
    let scores = [
        metrics::muc(k, r).map_err(err)?,
        metrics::b_cubed(k, r).map_err(err)?,
        metrics::ceaf_e(k, r).map_err(err)?,
    ];
    Ok(metrics::conll_f1(&scores))
}

/// Topic-level evaluation of a system clustering against the corpus gold.
#[pyfunction]
#[pyo3(signature = (corpus, system, topic_level=true, drop_singletons=true))]
fn evaluate<'py>(
    py: Python<'py>,
    corpus: &Corpus,
    system: &Clustering,
    topic_level: bool,
    drop_singletons: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let options = EvalOptions { topic_level, drop_singletons, ..EvalOptions::default() };
    let report = metrics::evaluate(&corpus.inner, &system.inner, options).map_err(err)?;
    to_python(py, &report)
}

/// Average-linkage clustering of one scope unit from `(a, b, p)` scores.
#[pyfunction]
fn cluster(mentions: Vec<String>, scores: Vec<(String, String, f64)>, threshold: f64) -> PyResult<Clustering> {
    let matrix = ScoreMatrix::from_pairs(scores.iter().map(|(a, b, p)| (a.as_str(), b.as_str(), *p))).map_err(err)?;
    let ids: Vec<&str> = mentions.iter().map(String::as_str).collect();
    let c = agglomerative_cluster(&ids, &matrix, &ClusteringConfig::new(threshold)).map_err(err)?;
    Ok(Clustering { inner: c })
}

#[pyfunction]
#[pyo3(signature = (context, event, mode="finetuned"))]
fn format_prompt(context: &str, event: &str, mode: &str) -> PyResult<String> {
    let mode: PromptMode = mode.parse().map_err(err)?;
    commonsense::format_prompt(context, event, mode, None).map_err(err)
}

/// Split a completion into `(before, after)` sentence lists.
#[pyfunction]
#[pyo3(signature = (text, k=commonsense::DEFAULT_K, stop="END"))]
fn parse_completion(text: &str, k: usize, stop: &str) -> (Vec<String>, Vec<String>) {
    let p = commonsense::parse_completion(text, k, stop);
    (p.before, p.after)
}

/// Scaled dot-product attention; returns `(vector, weights)`.
#[pyfunction]
fn attend(query: Vec<f64>, reps: Vec<Vec<f64>>, wq: Vec<Vec<f64>>, wk: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let refs: Vec<&[f64]> = reps.iter().map(Vec::as_slice).collect();
    let out = scorer::attend(&query, &refs, &Matrix::from_rows(&wq), &Matrix::from_rows(&wk)).map_err(err)?;
    Ok((out.vector, out.weights))
}

/// Run configuration, either the desk preset or a TOML file.
#[pyclass(module = "tecr", from_py_object)]
#[derive(Clone)]
pub struct RunConfig {
    inner: CoreRunConfig,
}

#[pymethods]
impl RunConfig {
    #[new]
    fn new() -> Self {
        RunConfig { inner: CoreRunConfig::default() }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(RunConfig { inner: CoreRunConfig::load(&path).map_err(err)? })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(RunConfig { inner: CoreRunConfig::from_toml(text, std::path::Path::new(".")).map_err(err)? })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.run.seeds.clone()
    }

    #[setter]
    fn set_seeds(&mut self, seeds: Vec<u64>) {
        self.inner.run.seeds = seeds;
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.run.mode.to_string()
    }

    #[setter]
    fn set_mode(&mut self, mode: &str) -> PyResult<()> {
        self.inner.run.mode = parse_mode(mode)?;
        Ok(())
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.train.epochs
    }

    #[setter]
    fn set_epochs(&mut self, epochs: usize) {
        self.inner.train.epochs = epochs;
    }

    #[getter]
    fn n_topics(&self) -> usize {
        self.inner.synthetic.n_topics
    }

    #[setter]
    fn set_n_topics(&mut self, n: usize) {
        self.inner.synthetic.n_topics = n;
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(mode={}, seeds={:?})", self.inner.run.mode, self.inner.run.seeds)
    }
}

/// Train one model per seed into `out` and return the summary.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: &RunConfig, out: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let config = config.inner.clone();
    config.validate().map_err(err)?;
    let summary = py
        .detach(move || {
            let data = pipeline::load_datasets(&config)?;
            pipeline::train(&config, &data, &out)
        })
        .map_err(err)?;
    to_python(py, &summary)
}

/// Finite-difference gradient check with the configured blocks and seeds.
#[pyfunction]
#[pyo3(signature = (config=None, seeds=None))]
fn gradcheck<'py>(py: Python<'py>, config: Option<&RunConfig>, seeds: Option<Vec<u64>>) -> PyResult<Bound<'py, PyAny>> {
    let mut gc = config.map(|c| c.inner.gradcheck.clone()).unwrap_or_default();
    if let Some(s) = seeds {
        gc.seeds = s;
    }
    let report = py.detach(move || scorer::gradient_check(&gc)).map_err(err)?;
    to_python(py, &report)
}

/// SHA-256 of a checkpoint's parameters, or an error if it is unreadable.
#[pyfunction]
fn checkpoint_fingerprint(path: PathBuf) -> PyResult<String> {
    Ok(scorer::load_checkpoint(&path, None).map_err(err)?.fingerprint())
}

#[pymodule]
pub fn tecr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TecrError", m.py().get_type::<TecrError>())?;
    m.add_class::<Clustering>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<RunConfig>()?;
    m.add_function(wrap_pyfunction!(muc, m)?)?;
    m.add_function(wrap_pyfunction!(b_cubed, m)?)?;
    m.add_function(wrap_pyfunction!(ceaf_e, m)?)?;
    m.add_function(wrap_pyfunction!(conll_f1, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(format_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_completion, m)?)?;
    m.add_function(wrap_pyfunction!(attend, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(checkpoint_fingerprint, m)?)?;
    Ok(())
}
