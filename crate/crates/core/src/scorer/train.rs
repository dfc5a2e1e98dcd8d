use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{draw_masks, gradients_with_masks, loss_with_masks, predict_pairs, MentionInput, PairExample};
use super::{ModelDims, ModelParameters, ScorerMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Epochs without dev improvement before stopping; 0 never stops early.
    pub patience: usize,
    pub seed: u64,
    pub mode: ScorerMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 128,
            dropout: 0.3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 10,
            patience: 2,
            seed: 0,
            mode: ScorerMode::Intra,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::Config("invalid optimizer moments".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: ModelParameters,
    v: ModelParameters,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(params: &ModelParameters, config: &TrainConfig) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut ModelParameters, grads: &ModelParameters) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut())
            .zip(grads.blocks());
        for ((((_, p), (_, m)), (_, v)), (_, g)) in blocks {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_f1: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Pairwise F1 of the positive class at `threshold`.
pub fn pairwise_f1(probs: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// Train from a seeded initialization. Dev pairwise F1 at 0.5 is tracked
/// after every epoch; an epoch improves on the best when its F1 is higher,
/// or equal with a lower dev loss. The best epoch's parameters are returned.
pub fn fit(
    dims: ModelDims,
    train_mentions: &[MentionInput],
    train_pairs: &[PairExample],
    dev_mentions: &[MentionInput],
    dev_pairs: &[PairExample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParameters::init(dims, config.mode, &mut rng);
    let mut adam = Adam::new(&params, config);
    let mut order: Vec<PairExample> = train_pairs.to_vec();
    let dev_labels: Vec<bool> = dev_pairs.iter().map(|p| p.label).collect();

    let mut best: Option<(f64, f64)> = None;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::new();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let masks = draw_masks(batch.len(), dims.h, config.dropout, &mut rng);
            let (loss, grads) = gradients_with_masks(&params, train_mentions, batch, Some(&masks))?;
            total += loss * batch.len() as f64;
            adam.step(&mut params, &grads);
            if let Some(block) = params.first_non_finite_block() {
                return Err(Error::NonFinite(format!("{block} after epoch {epoch} update")));
            }
        }
        let train_loss = total / order.len() as f64;

        let (dev_loss, dev_f1) = if dev_pairs.is_empty() {
            (train_loss, 0.0)
        } else {
            let probs = predict_pairs(&params, dev_mentions, dev_pairs)?;
            let loss = loss_with_masks(&params, dev_mentions, dev_pairs, None)?;
            (loss, pairwise_f1(&probs, &dev_labels, 0.5))
        };
        let improved = match best {
            None => true,
            Some((f1, loss)) => dev_f1 > f1 || (dev_f1 == f1 && dev_loss < loss),
        };
        log::info!(
            "epoch {epoch}: train loss {train_loss:.4}, dev loss {dev_loss:.4}, dev F1 {dev_f1:.4}{}",
            if improved { " *" } else { "" }
        );
        history.push(EpochRecord {
            epoch,
            train_loss,
            dev_loss,
            dev_f1,
            improved,
        });
        if improved {
            best = Some((dev_f1, dev_loss));
            best_params = params.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if config.patience > 0 && stale >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch,
    })
}

/// `0.30, 0.35, …, 0.80`.
pub const DEFAULT_THRESHOLD_GRID: [f64; 11] = [0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80];

/// Pick the grid value with the highest objective; ties go to the larger τ.
/// Returns `(τ, objective)`.
pub fn tune_threshold(grid: &[f64], mut objective: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &tau in grid {
        let score = objective(tau)?;
        best = match best {
            Some((bt, bs)) if score < bs || (score == bs && tau <= bt) => Some((bt, bs)),
            _ => Some((tau, score)),
        };
    }
    best.ok_or(Error::EmptyGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::model::InferenceInput;
    use rand::Rng;

    #[test]
    fn default_grid_steps() {
        for (i, &t) in DEFAULT_THRESHOLD_GRID.iter().enumerate() {
            assert_eq!(t, (30 + 5 * i) as f64 / 100.0);
        }
    }

    #[test]
    fn threshold_tie_goes_to_larger() {
        assert_eq!(tune_threshold(&[0.4], |_| Ok(0.1)).unwrap(), (0.4, 0.1));
        assert_eq!(tune_threshold(&[0.5, 0.3], |_| Ok(0.7)).unwrap().0, 0.5);
        assert_eq!(tune_threshold(&[0.3, 0.5], |_| Ok(0.7)).unwrap().0, 0.5);
        assert_eq!(tune_threshold(&[0.3, 0.5], |t| Ok(if t < 0.4 { 0.9 } else { 0.2 })).unwrap().0, 0.3);
        assert!(matches!(tune_threshold(&[], |_| Ok(0.0)), Err(Error::EmptyGrid)));
    }

    #[test]
    fn pairwise_f1_counts() {
        // tp=1, fp=1, fn=1 -> P=R=1/2.
        let f = pairwise_f1(&[0.9, 0.8, 0.1, 0.2], &[true, false, true, false], 0.5);
        assert!((f - 0.5).abs() < 1e-15);
        assert_eq!(pairwise_f1(&[0.1], &[true], 0.5), 0.0);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let dims = ModelDims { d: 1, d_len: 1, max_width_bucket: 1, d_a: 1, h: 1 };
        let cfg = TrainConfig::default();
        let mut p = ModelParameters::zeros(dims, ScorerMode::Baseline);
        let mut g = p.zeros_like();
        g.b2 = 0.25;
        g.w2[0] = -3.0;
        let mut adam = Adam::new(&p, &cfg);
        adam.step(&mut p, &g);
        // Bias-corrected first step is lr * g / (|g| + eps).
        assert!((p.b2 + 1e-4 * 0.25 / (0.25 + 1e-8)).abs() < 1e-15);
        assert!((p.w2[0] - 1e-4 * 3.0 / (3.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(p.b1[0], 0.0);
    }

    #[test]
    fn dropout_must_be_below_one() {
        let cfg = TrainConfig { dropout: 1.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    fn toy_problem(seed: u64) -> (Vec<MentionInput>, Vec<PairExample>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..4).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let mentions: Vec<MentionInput> = (0..8)
            .map(|i| MentionInput {
                mention_id: format!("m{i}"),
                span: vec![vec(&mut rng)],
                before: vec![InferenceInput { text: "b".into(), tokens: vec![vec(&mut rng)] }],
                after: vec![],
            })
            .collect();
        let pairs = (0..8)
            .map(|i| PairExample { first: i, second: (i + 1) % 8, label: i % 2 == 0 })
            .collect();
        (mentions, pairs)
    }

    #[test]
    fn overfits_eight_pairs() {
        let (mentions, pairs) = toy_problem(11);
        let dims = ModelDims { d: 4, d_len: 2, max_width_bucket: 2, d_a: 2, h: 64 };
        let cfg = TrainConfig {
            epochs: 200,
            patience: 0,
            learning_rate: 1e-2,
            dropout: 0.0,
            seed: 3,
            mode: ScorerMode::Intra,
            ..TrainConfig::default()
        };
        let out = fit(dims, &mentions, &pairs, &mentions, &pairs, &cfg).unwrap();
        let loss = loss_with_masks(&out.params, &mentions, &pairs, None).unwrap();
        assert!(loss < 0.05, "final loss {loss}");
        assert_eq!(out.history.len(), 200);
    }

    #[test]
    fn training_is_deterministic() {
        let (mentions, pairs) = toy_problem(12);
        let dims = ModelDims { d: 4, d_len: 2, max_width_bucket: 2, d_a: 2, h: 16 };
        let cfg = TrainConfig { epochs: 5, batch_size: 3, seed: 9, ..TrainConfig::default() };
        let a = fit(dims, &mentions, &pairs, &mentions, &pairs, &cfg).unwrap();
        let b = fit(dims, &mentions, &pairs, &mentions, &pairs, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn patience_stops_early() {
        let (mentions, pairs) = toy_problem(13);
        let dims = ModelDims { d: 4, d_len: 2, max_width_bucket: 2, d_a: 2, h: 4 };
        // Updates this small leave every parameter unchanged, so epoch 2 cannot improve.
        let cfg = TrainConfig { epochs: 50, patience: 1, learning_rate: 1e-300, seed: 1, ..TrainConfig::default() };
        let out = fit(dims, &mentions, &pairs, &mentions, &pairs, &cfg).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(!out.history[1].improved);
        assert_eq!(out.best_epoch, 1);
    }
}
