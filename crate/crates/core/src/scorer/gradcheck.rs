//! Central finite-difference check of the analytic gradients.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{draw_masks, run_batch, InferenceInput, MentionInput, PairExample};
use super::{ModelDims, ModelParameters, ScorerMode, BLOCK_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub dims: ModelDims,
    pub modes: Vec<ScorerMode>,
    pub seeds: Vec<u64>,
    pub mentions: usize,
    pub pairs: usize,
    pub dropout: f64,
    pub step: f64,
    pub tolerance: f64,
    /// Blocks larger than this are checked on a random subset of entries.
    pub max_entries_per_block: usize,
    /// Lower bound of the relative-error denominator.
    pub floor: f64,
    /// Test hook: perturb the analytic gradient of this block.
    pub corrupt_block: Option<String>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dims: ModelDims { d: 16, d_len: 20, max_width_bucket: 8, d_a: 8, h: 1024 },
            modes: vec![ScorerMode::Baseline, ScorerMode::Intra, ScorerMode::Inter],
            seeds: vec![1, 2, 3, 4, 5],
            mentions: 5,
            pairs: 4,
            dropout: 0.3,
            step: 1e-5,
            tolerance: 1e-4,
            max_entries_per_block: 40,
            floor: 1e-6,
            corrupt_block: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub mode: ScorerMode,
    pub seed: u64,
    pub block: String,
    pub checked: usize,
    /// Entries whose ±step evaluations straddle a relu or clamp kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub checks: Vec<BlockCheck>,
    pub pass: bool,
}

impl GradCheckReport {
    /// Largest relative error per block across modes and seeds.
    pub fn per_block_max(&self) -> Vec<(String, f64)> {
        BLOCK_NAMES
            .iter()
            .map(|&b| {
                let worst = self
                    .checks
                    .iter()
                    .filter(|c| c.block == b)
                    .map(|c| c.max_rel_error)
                    .fold(0.0, f64::max);
                (b.to_string(), worst)
            })
            .collect()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>14} {:>8} {:>8}  status", "block", "max rel error", "checked", "skipped")?;
        for (block, worst) in self.per_block_max() {
            let checked: usize = self.checks.iter().filter(|c| c.block == block).map(|c| c.checked).sum();
            let skipped: usize = self.checks.iter().filter(|c| c.block == block).map(|c| c.skipped).sum();
            let ok = self.checks.iter().filter(|c| c.block == block).all(|c| c.pass);
            writeln!(
                f,
                "{block:<12} {worst:>14.3e} {checked:>8} {skipped:>8}  {}",
                if ok { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "overall: {} (tolerance {:e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.tolerance
        )
    }
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

fn random_tokens(rng: &mut ChaCha8Rng, d: usize, max_len: usize) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=max_len);
    (0..n).map(|_| random_vec(rng, d)).collect()
}

/// Random mentions (0 to 3 inferences per relation) and random labeled pairs.
pub(crate) fn random_problem(
    rng: &mut ChaCha8Rng,
    dims: ModelDims,
    mentions: usize,
    pairs: usize,
) -> (Vec<MentionInput>, Vec<PairExample>) {
    let max_len = dims.max_width_bucket + 2;
    let mentions_v: Vec<MentionInput> = (0..mentions.max(2))
        .map(|i| {
            let infs = |rng: &mut ChaCha8Rng| -> Vec<InferenceInput> {
                let n = rng.random_range(0..=3);
                (0..n)
                    .map(|k| InferenceInput {
                        text: format!("inference {k}"),
                        tokens: random_tokens(rng, dims.d, max_len),
                    })
                    .collect()
            };
            MentionInput {
                mention_id: format!("m{i}"),
                span: random_tokens(rng, dims.d, 3),
                before: infs(rng),
                after: infs(rng),
            }
        })
        .collect();
    let n = mentions_v.len();
    let pairs_v = (0..pairs.max(1))
        .map(|_| {
            let first = rng.random_range(0..n - 1);
            let second = rng.random_range(first + 1..n);
            PairExample { first, second, label: rng.random_bool(0.5) }
        })
        .collect();
    (mentions_v, pairs_v)
}

fn check_one(config: &GradCheckConfig, mode: ScorerMode, seed: u64) -> Result<Vec<BlockCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParameters::init(config.dims, mode, &mut rng);
    let (mentions, pairs) = random_problem(&mut rng, config.dims, config.mentions, config.pairs);
    let masks = draw_masks(pairs.len(), config.dims.h, config.dropout, &mut rng);

    let base = run_batch(&params, &mentions, &pairs, Some(&masks), true)?;
    let mut analytic = base.grads.expect("requested");
    if let Some(name) = &config.corrupt_block {
        let (_, block) = analytic
            .blocks_mut()
            .into_iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Config(format!("unknown parameter block `{name}`")))?;
        for g in block.iter_mut() {
            *g = *g * 1.01 + 1e-3;
        }
    }

    let mut out = Vec::new();
    for (b, name) in BLOCK_NAMES.iter().enumerate() {
        let len = params.blocks()[b].1.len();
        let entries: Vec<usize> = if len <= config.max_entries_per_block {
            (0..len).collect()
        } else {
            let mut e = sample(&mut rng, len, config.max_entries_per_block).into_vec();
            e.sort_unstable();
            e
        };
        let mut checked = 0;
        let mut skipped = 0;
        let mut worst = 0.0f64;
        for i in entries {
            let mut plus = params.clone();
            plus.blocks_mut()[b].1[i] += config.step;
            let mut minus = params.clone();
            minus.blocks_mut()[b].1[i] -= config.step;
            let rp = run_batch(&plus, &mentions, &pairs, Some(&masks), false)?;
            let rm = run_batch(&minus, &mentions, &pairs, Some(&masks), false)?;
            let kink = rp.relu_pattern != rm.relu_pattern
                || rp.relu_pattern != base.relu_pattern
                || rp.clamped
                || rm.clamped
                || base.clamped;
            if kink {
                skipped += 1;
                continue;
            }
            let numeric = (rp.loss - rm.loss) / (2.0 * config.step);
            let a = analytic.blocks()[b].1[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(config.floor);
            worst = worst.max(rel);
            checked += 1;
        }
        out.push(BlockCheck {
            mode,
            seed,
            block: name.to_string(),
            checked,
            skipped,
            max_rel_error: worst,
            pass: checked > 0 && worst <= config.tolerance,
        });
    }
    Ok(out)
}

/// Compare analytic and central-difference gradients on random parameters
/// and random mini-batches, for every configured mode and seed.
pub fn gradient_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if config.seeds.is_empty() || config.modes.is_empty() {
        return Err(Error::Config("gradient check needs at least one seed and one mode".into()));
    }
    if !(config.step.is_finite() && config.step > 0.0) || config.max_entries_per_block == 0 {
        return Err(Error::Config("step and max_entries_per_block must be positive".into()));
    }
    let mut checks = Vec::new();
    for &mode in &config.modes {
        for &seed in &config.seeds {
            checks.extend(check_one(config, mode, seed)?);
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(GradCheckReport {
        tolerance: config.tolerance,
        checks,
        pass,
    })
}
