//! Run configuration: TOML with section headers, layered over a named preset.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::commonsense::service::DEFAULT_CREDENTIAL_ENV;
use crate::commonsense::{GenerationConfig, PromptMode};
use crate::corpus::{Scope, SyntheticSpec};
use crate::embed::{EmbedderConfig, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::metrics::EvalOptions;
use crate::scorer::{GradCheckConfig, ModelDims, ScorerMode, TrainConfig, DEFAULT_THRESHOLD_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Service,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "service" => Ok(Preset::Service),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub mode: ScorerMode,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seeds: vec![1, 2, 3], mode: ScorerMode::Intra }
    }
}

/// Corpus files. When all three are absent, splits are generated from the
/// `[synthetic]` section with seeds `seed`, `seed + 1` and `seed + 2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub scope: Scope,
}

impl DataConfig {
    pub fn is_synthetic(&self) -> bool {
        self.train.is_none() && self.dev.is_none() && self.test.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommonsenseProvider {
    /// Inference sets read from fixture files (or generated with a synthetic corpus).
    #[default]
    Fixture,
    /// A remote text-generation service.
    Service,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommonsenseConfig {
    pub provider: CommonsenseProvider,
    pub fixtures: Vec<PathBuf>,
    /// Missing fixtures are an error instead of an empty set.
    pub strict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model_id: String,
    /// Name of the environment variable holding the service credential.
    pub credential_env: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<PathBuf>,
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub attempts: u32,
}

impl Default for CommonsenseConfig {
    fn default() -> Self {
        CommonsenseConfig {
            provider: CommonsenseProvider::Fixture,
            fixtures: Vec::new(),
            strict: true,
            cache_dir: None,
            endpoint: None,
            model_id: "inference-generator".into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            exemplars: None,
            concurrency: 4,
            timeout_secs: 60,
            attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_a: usize,
    pub h: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { d_a: 8, h: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub threshold_grid: Vec<f64>,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection { threshold_grid: DEFAULT_THRESHOLD_GRID.to_vec() }
    }
}

/// Everything a run needs. `[train]` seed and mode are ignored; `[run]`
/// supplies them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub run: RunSection,
    pub data: DataConfig,
    pub synthetic: SyntheticSpec,
    pub embedder: EmbedderConfig,
    pub commonsense: CommonsenseConfig,
    pub generation: GenerationConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub cluster: ClusterSection,
    pub eval: EvalOptions,
    pub gradcheck: GradCheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Desk)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => RunConfig {
                preset,
                run: RunSection::default(),
                data: DataConfig::default(),
                synthetic: SyntheticSpec { n_topics: 24, ..SyntheticSpec::default() },
                embedder: EmbedderConfig::default(),
                commonsense: CommonsenseConfig::default(),
                generation: GenerationConfig::default(),
                model: ModelSection::default(),
                train: TrainConfig { learning_rate: 1e-3, epochs: 40, patience: 0, ..TrainConfig::default() },
                cluster: ClusterSection::default(),
                eval: EvalOptions::default(),
                gradcheck: GradCheckConfig::default(),
            },
            Preset::Service => RunConfig {
                preset,
                run: RunSection::default(),
                data: DataConfig::default(),
                synthetic: SyntheticSpec::default(),
                embedder: EmbedderConfig {
                    provider: EmbeddingProvider::Service,
                    d: 1024,
                    ..EmbedderConfig::default()
                },
                commonsense: CommonsenseConfig {
                    provider: CommonsenseProvider::Service,
                    ..CommonsenseConfig::default()
                },
                generation: GenerationConfig::default(),
                model: ModelSection { d_a: 512, h: 1024 },
                train: TrainConfig::default(),
                cluster: ClusterSection::default(),
                eval: EvalOptions::default(),
                gradcheck: GradCheckConfig::default(),
            },
        }
    }

    /// Parse TOML text. Keys present in the text override the preset named
    /// by its top-level `preset` key (desk when absent). Relative paths are
    /// resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let preset = match user.get("preset") {
            None => Preset::Desk,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
        };
        let base = toml::Table::try_from(RunConfig::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(base, user);
        let mut config: RunConfig =
            toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.data.train, &mut self.data.dev, &mut self.data.test].into_iter().flatten() {
            fix(p);
        }
        self.commonsense.fixtures.iter_mut().for_each(fix);
        for p in [&mut self.commonsense.cache_dir, &mut self.commonsense.exemplars].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d: self.embedder.d,
            d_len: self.embedder.d_len,
            max_width_bucket: self.embedder.max_width_bucket,
            d_a: self.model.d_a,
            h: self.model.h,
        }
    }

    /// Training settings for one seed.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, mode: self.run.mode, ..self.train.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        self.embedder.validate()?;
        self.generation.validate()?;
        self.train.validate()?;
        if self.model.d_a == 0 || self.model.h == 0 {
            return Err(Error::Config("d_a and h must be positive".into()));
        }
        if self.cluster.threshold_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(t) = self.cluster.threshold_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
        }
        let d = &self.data;
        if d.is_synthetic() {
            self.synthetic.validate()?;
        } else {
            for (name, p) in [("train", &d.train), ("dev", &d.dev), ("test", &d.test)] {
                match p {
                    None => return Err(Error::Config(format!("data.{name} is missing"))),
                    Some(p) if !p.exists() => {
                        return Err(Error::Config(format!("data.{name} `{}` does not exist", p.display())))
                    }
                    _ => {}
                }
            }
        }
        let cs = &self.commonsense;
        if self.run.mode.uses_commonsense() {
            match cs.provider {
                CommonsenseProvider::Fixture => {
                    if !d.is_synthetic() && cs.fixtures.is_empty() {
                        return Err(Error::Config("commonsense.fixtures is empty".into()));
                    }
                    if let Some(p) = cs.fixtures.iter().find(|p| !p.exists()) {
                        return Err(Error::Config(format!("fixture file `{}` does not exist", p.display())));
                    }
                }
                CommonsenseProvider::Service => {
                    if cs.endpoint.is_none() {
                        return Err(Error::Config("commonsense.endpoint is required for the service provider".into()));
                    }
                    if self.generation.mode == PromptMode::Fewshot && cs.exemplars.is_none() {
                        return Err(Error::Config("few-shot prompting needs commonsense.exemplars".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Stable digest of the effective configuration.
    pub fn fingerprint(&self) -> String {
        crate::util::sha256_hex(self.to_toml().as_bytes())
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
