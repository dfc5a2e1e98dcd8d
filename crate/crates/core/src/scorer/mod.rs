//! Pairwise coreference scorer: attention over inference representations,
//! pair features, a one-hidden-layer MLP, loss, gradients and training.

mod checkpoint;
mod gradcheck;
mod model;
mod params;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{dot, softmax};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader};
pub use gradcheck::{gradient_check, BlockCheck, GradCheckConfig, GradCheckReport};
pub use model::{
    draw_masks, forward_pair, gradients, gradients_with_masks, loss_with_masks, predict_pairs, InferenceInput, MentionInput,
    PairExample, PairTrace, RelationTrace,
};
pub use params::{Matrix, ModelDims, ModelParameters, ScorerMode, BLOCK_NAMES, FORMAT_VERSION};
pub use train::{
    fit, pairwise_f1, tune_threshold, Adam, EpochRecord, TrainConfig, TrainOutcome, DEFAULT_THRESHOLD_GRID,
};

/// Lower/upper clamp applied to probabilities inside the loss.
pub const PROB_EPS: f64 = 1e-7;

/// Result of attending from one query over a list of inference representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionOutput {
    pub vector: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    pub query_proj: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub output: AttentionOutput,
}

fn check_dims(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            actual,
        })
    }
}

pub(crate) fn attend_cached(query: &[f64], reps: &[&[f64]], wq: &Matrix, wk: &Matrix) -> Result<AttentionCache> {
    check_dims("attention query", wq.rows, query.len())?;
    check_dims("attention key projection", wq.rows, wk.rows)?;
    check_dims("attention projection width", wq.cols, wk.cols)?;
    for r in reps {
        check_dims("inference representation", wk.rows, r.len())?;
    }
    let scale = (wq.cols as f64).sqrt();
    let query_proj = wq.t_mul(query);
    let keys: Vec<Vec<f64>> = reps.iter().map(|r| wk.t_mul(r)).collect();
    let scores: Vec<f64> = keys.iter().map(|k| dot(&query_proj, k) / scale).collect();
    let weights = softmax(&scores);
    let mut vector = vec![0.0; query.len()];
    for (w, r) in weights.iter().zip(reps) {
        for (v, x) in vector.iter_mut().zip(r.iter()) {
            *v += w * x;
        }
    }
    Ok(AttentionCache {
        query_proj,
        keys,
        output: AttentionOutput { vector, weights },
    })
}

/// Single-head scaled dot-product attention with an identity value map.
/// An empty list yields a zero vector and no weights.
pub fn attend(query: &[f64], reps: &[&[f64]], wq: &Matrix, wk: &Matrix) -> Result<AttentionOutput> {
    attend_cached(query, reps, wq, wk).map(|c| c.output)
}

/// `[before, after]` attended vectors for one mention. The caller picks
/// whose inferences are supplied; the query is always `ctx_self`.
pub fn commonsense_vector(
    ctx_self: &[f64],
    before_reps: &[&[f64]],
    after_reps: &[&[f64]],
    params: &ModelParameters,
) -> Result<(Vec<f64>, AttentionOutput, AttentionOutput)> {
    if !params.mode.uses_commonsense() {
        return Err(Error::Config("commonsense vector requested in baseline mode".into()));
    }
    let before = attend(ctx_self, before_reps, &params.wq_before, &params.wk_before)?;
    let after = attend(ctx_self, after_reps, &params.wq_after, &params.wk_after)?;
    let mut cs = before.vector.clone();
    cs.extend_from_slice(&after.vector);
    Ok((cs, before, after))
}

/// Input row of the MLP for one ordered mention pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeature {
    pub g: Vec<f64>,
    pub first: String,
    pub second: String,
    pub mode: ScorerMode,
}

/// `[ctx_i, ctx_j, cs_i, cs_j]`, or `[ctx_i, ctx_j]` in baseline mode.
pub fn pair_features(
    first: &str,
    second: &str,
    ctx_i: &[f64],
    ctx_j: &[f64],
    cs: Option<(&[f64], &[f64])>,
    mode: ScorerMode,
) -> Result<PairFeature> {
    check_dims("pair context", ctx_i.len(), ctx_j.len())?;
    let mut g = Vec::with_capacity(6 * ctx_i.len());
    g.extend_from_slice(ctx_i);
    g.extend_from_slice(ctx_j);
    if mode.uses_commonsense() {
        let (cs_i, cs_j) = cs.ok_or_else(|| Error::Config(format!("{mode} mode needs commonsense vectors")))?;
        check_dims("commonsense vector", 2 * ctx_i.len(), cs_i.len())?;
        check_dims("commonsense vector", 2 * ctx_i.len(), cs_j.len())?;
        g.extend_from_slice(cs_i);
        g.extend_from_slice(cs_j);
    }
    Ok(PairFeature {
        g,
        first: first.to_string(),
        second: second.to_string(),
        mode,
    })
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hidden pre-activations, post-dropout activations and output probability.
pub(crate) struct MlpForward {
    pub z1: Vec<f64>,
    pub hidden: Vec<f64>,
    pub p: f64,
}

pub(crate) fn mlp_forward(params: &ModelParameters, g: &[f64], mask: Option<&[f64]>) -> Result<MlpForward> {
    check_dims("pair feature", params.w1.rows, g.len())?;
    let mut z1 = params.w1.t_mul(g);
    for (z, b) in z1.iter_mut().zip(&params.b1) {
        *z += b;
    }
    let hidden: Vec<f64> = match mask {
        Some(m) => z1.iter().zip(m).map(|(z, m)| z.max(0.0) * m).collect(),
        None => z1.iter().map(|z| z.max(0.0)).collect(),
    };
    let z2 = dot(&params.w2, &hidden) + params.b2;
    if !z2.is_finite() {
        let block = params.first_non_finite_block().unwrap_or("pair feature");
        return Err(Error::NonFinite(block.to_string()));
    }
    Ok(MlpForward { z1, hidden, p: sigmoid(z2) })
}

/// Inverted-dropout mask over `h` hidden units: 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(h: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..h)
        .map(|_| if rate > 0.0 && rng.random_bool(rate) { 0.0 } else { keep })
        .collect()
}

/// Coreference probability for one pair feature vector. Dropout (rate
/// `dropout`) is drawn from `rng` only when `training` is set.
pub fn score_pair(params: &ModelParameters, g: &[f64], training: bool, dropout: f64, rng: &mut impl Rng) -> Result<f64> {
    let mask = training.then(|| dropout_mask(params.dims.h, dropout, rng));
    mlp_forward(params, g, mask.as_deref()).map(|f| f.p)
}

/// Binary cross-entropy of one prediction, with `p` clamped away from 0 and 1.
pub fn bce(p: f64, label: bool) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy over `(g, label)` rows.
pub fn batch_loss(
    params: &ModelParameters,
    batch: &[(Vec<f64>, bool)],
    training: bool,
    dropout: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for (g, y) in batch {
        total += bce(score_pair(params, g, training, dropout, rng)?, *y);
    }
    Ok(total / batch.len() as f64)
}
