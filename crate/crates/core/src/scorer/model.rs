//! Full forward and backward pass from token vectors to the pairwise loss.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{attend_cached, bce, dropout_mask, mlp_forward, AttentionCache, ModelParameters, PROB_EPS};
use crate::embed::{represent_tokens, width_bucket, SpanRepresentation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::util::dot;

/// One generated inference sentence with its token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceInput {
    pub text: String,
    pub tokens: Vec<Vec<f64>>,
}

/// Everything the scorer reads about one mention.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionInput {
    pub mention_id: String,
    /// Token vectors of the mention span.
    pub span: Vec<Vec<f64>>,
    pub before: Vec<InferenceInput>,
    pub after: Vec<InferenceInput>,
}

/// A candidate pair, as indices into a mention table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairExample {
    pub first: usize,
    pub second: usize,
    pub label: bool,
}

struct SpanCache {
    rep: SpanRepresentation,
    full: Vec<f64>,
    bucket: usize,
}

fn span_forward(params: &ModelParameters, tokens: &[Vec<f64>]) -> Result<SpanCache> {
    if tokens.is_empty() {
        return Err(Error::Config("cannot represent an empty token sequence".into()));
    }
    for t in tokens {
        if t.len() != params.dims.d {
            return Err(Error::DimensionMismatch {
                context: "token vector".into(),
                expected: params.dims.d,
                actual: t.len(),
            });
        }
    }
    let refs: Vec<&[f64]> = tokens.iter().map(Vec::as_slice).collect();
    let rep = represent_tokens(&refs, params.span_params());
    let full = rep.full();
    Ok(SpanCache {
        rep,
        full,
        bucket: width_bucket(tokens.len(), params.dims.max_width_bucket),
    })
}

/// Push the gradient of one span representation into `w_alpha` and the width table.
fn span_backward(
    params: &ModelParameters,
    tokens: &[Vec<f64>],
    cache: &SpanCache,
    grad: &[f64],
    out: &mut ModelParameters,
) {
    let d = params.dims.d;
    let d_pooled = &grad[2 * d..3 * d];
    let dalpha: Vec<f64> = tokens.iter().map(|x| dot(d_pooled, x)).collect();
    let mean: f64 = cache.rep.weights.iter().zip(&dalpha).map(|(a, g)| a * g).sum();
    for ((x, a), g) in tokens.iter().zip(&cache.rep.weights).zip(&dalpha) {
        let dlogit = a * (g - mean);
        for (w, xi) in out.w_alpha.iter_mut().zip(x) {
            *w += dlogit * xi;
        }
    }
    for (w, g) in out.width_table.row_mut(cache.bucket - 1).iter_mut().zip(&grad[3 * d..]) {
        *w += g;
    }
}

/// Gradient of the attention output w.r.t. query, inference representations
/// and both projections.
fn attention_backward(
    cache: &AttentionCache,
    query: &[f64],
    reps: &[&[f64]],
    wq: &Matrix,
    wk: &Matrix,
    grad_out: &[f64],
    dwq: &mut Matrix,
    dwk: &mut Matrix,
    dquery: &mut [f64],
    dreps: &mut [&mut Vec<f64>],
) {
    if reps.is_empty() {
        return;
    }
    let scale = (wq.cols as f64).sqrt();
    let w = &cache.output.weights;
    let dw: Vec<f64> = reps.iter().map(|r| dot(grad_out, r)).collect();
    let mean: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
    let ds: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a * (b - mean)).collect();
    let mut dqp = vec![0.0; wq.cols];
    for (s, k) in ds.iter().zip(&cache.keys) {
        for (q, kk) in dqp.iter_mut().zip(k) {
            *q += s * kk / scale;
        }
    }
    dwq.add_outer(query, &dqp, 1.0);
    for (dq, v) in dquery.iter_mut().zip(wq.mul(&dqp)) {
        *dq += v;
    }
    for (j, r) in reps.iter().enumerate() {
        let dk: Vec<f64> = cache.query_proj.iter().map(|q| ds[j] * q / scale).collect();
        dwk.add_outer(r, &dk, 1.0);
        let back = wk.mul(&dk);
        for ((dr, b), go) in dreps[j].iter_mut().zip(back).zip(grad_out) {
            *dr += w[j] * go + b;
        }
    }
}

struct MentionCache {
    ctx: SpanCache,
    before: Vec<SpanCache>,
    after: Vec<SpanCache>,
}

impl MentionCache {
    fn build(params: &ModelParameters, m: &MentionInput) -> Result<Self> {
        let reps = |list: &[InferenceInput]| -> Result<Vec<SpanCache>> {
            if params.mode.uses_commonsense() {
                list.iter().map(|i| span_forward(params, &i.tokens)).collect()
            } else {
                Ok(Vec::new())
            }
        };
        Ok(MentionCache {
            ctx: span_forward(params, &m.span).map_err(|e| match e {
                Error::Config(_) => Error::SpanOutOfBounds {
                    mention_id: m.mention_id.clone(),
                    detail: "empty span".into(),
                },
                other => other,
            })?,
            before: reps(&m.before)?,
            after: reps(&m.after)?,
        })
    }

    fn refs(list: &[SpanCache]) -> Vec<&[f64]> {
        list.iter().map(|c| c.full.as_slice()).collect()
    }
}

struct MentionGrad {
    ctx: Vec<f64>,
    before: Vec<Vec<f64>>,
    after: Vec<Vec<f64>>,
}

impl MentionGrad {
    fn zeros(cache: &MentionCache, span: usize) -> Self {
        MentionGrad {
            ctx: vec![0.0; span],
            before: vec![vec![0.0; span]; cache.before.len()],
            after: vec![vec![0.0; span]; cache.after.len()],
        }
    }
}

/// The four attention calls of one pair, in `[i before, i after, j before, j after]` order.
struct PairAttention {
    caches: [AttentionCache; 4],
}

/// Whose inferences the query of mention `self_idx` attends over.
fn owner(params: &ModelParameters, self_idx: usize, other_idx: usize) -> usize {
    match params.mode {
        super::ScorerMode::Inter => other_idx,
        _ => self_idx,
    }
}

fn pair_attention(
    params: &ModelParameters,
    caches: &BTreeMap<usize, MentionCache>,
    pair: &PairExample,
) -> Result<(Vec<f64>, Option<PairAttention>)> {
    let ci = &caches[&pair.first];
    let cj = &caches[&pair.second];
    let mut g = Vec::with_capacity(params.dims.g_dim(params.mode));
    g.extend_from_slice(&ci.ctx.full);
    g.extend_from_slice(&cj.ctx.full);
    if !params.mode.uses_commonsense() {
        return Ok((g, None));
    }
    let oi = &caches[&owner(params, pair.first, pair.second)];
    let oj = &caches[&owner(params, pair.second, pair.first)];
    let att = [
        attend_cached(&ci.ctx.full, &MentionCache::refs(&oi.before), &params.wq_before, &params.wk_before)?,
        attend_cached(&ci.ctx.full, &MentionCache::refs(&oi.after), &params.wq_after, &params.wk_after)?,
        attend_cached(&cj.ctx.full, &MentionCache::refs(&oj.before), &params.wq_before, &params.wk_before)?,
        attend_cached(&cj.ctx.full, &MentionCache::refs(&oj.after), &params.wq_after, &params.wk_after)?,
    ];
    for a in &att {
        g.extend_from_slice(&a.output.vector);
    }
    Ok((g, Some(PairAttention { caches: att })))
}

fn build_caches(
    params: &ModelParameters,
    mentions: &[MentionInput],
    pairs: &[PairExample],
) -> Result<BTreeMap<usize, MentionCache>> {
    let mut caches = BTreeMap::new();
    for p in pairs {
        for idx in [p.first, p.second] {
            if caches.contains_key(&idx) {
                continue;
            }
            let m = mentions
                .get(idx)
                .ok_or_else(|| Error::UnknownMention(format!("mention index {idx}")))?;
            caches.insert(idx, MentionCache::build(params, m)?);
        }
    }
    Ok(caches)
}

/// Draw one dropout mask per example.
pub fn draw_masks(n: usize, h: usize, rate: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| dropout_mask(h, rate, rng)).collect()
}

pub(crate) struct BatchRun {
    pub loss: f64,
    pub grads: Option<ModelParameters>,
    /// Sign of every hidden pre-activation, pair-major.
    pub relu_pattern: Vec<bool>,
    /// Whether any prediction was clamped inside the loss.
    pub clamped: bool,
}

pub(crate) fn run_batch(
    params: &ModelParameters,
    mentions: &[MentionInput],
    pairs: &[PairExample],
    masks: Option<&[Vec<f64>]>,
    want_grads: bool,
) -> Result<BatchRun> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(m) = masks {
        if m.len() != pairs.len() {
            return Err(Error::DimensionMismatch {
                context: "dropout masks".into(),
                expected: pairs.len(),
                actual: m.len(),
            });
        }
    }
    let span = params.dims.span_dim();
    let caches = build_caches(params, mentions, pairs)?;
    let mut mgrads: BTreeMap<usize, MentionGrad> = if want_grads {
        caches.iter().map(|(&i, c)| (i, MentionGrad::zeros(c, span))).collect()
    } else {
        BTreeMap::new()
    };
    let mut grads = want_grads.then(|| params.zeros_like());
    let n = pairs.len() as f64;
    let mut loss = 0.0;
    let mut relu_pattern = Vec::with_capacity(pairs.len() * params.dims.h);
    let mut clamped = false;

    for (k, pair) in pairs.iter().enumerate() {
        let (g, att) = pair_attention(params, &caches, pair)?;
        let mask = masks.map(|m| m[k].as_slice());
        let fwd = mlp_forward(params, &g, mask)?;
        loss += bce(fwd.p, pair.label);
        relu_pattern.extend(fwd.z1.iter().map(|&z| z > 0.0));
        let inside = fwd.p > PROB_EPS && fwd.p < 1.0 - PROB_EPS;
        clamped |= !inside;

        let Some(gr) = grads.as_mut() else { continue };
        if !inside {
            continue;
        }
        let y = if pair.label { 1.0 } else { 0.0 };
        let dz2 = (fwd.p - y) / n;
        gr.b2 += dz2;
        for (w, a) in gr.w2.iter_mut().zip(&fwd.hidden) {
            *w += dz2 * a;
        }
        let dz1: Vec<f64> = (0..params.dims.h)
            .map(|u| {
                if fwd.z1[u] <= 0.0 {
                    0.0
                } else {
                    dz2 * params.w2[u] * mask.map_or(1.0, |m| m[u])
                }
            })
            .collect();
        for (b, d) in gr.b1.iter_mut().zip(&dz1) {
            *b += d;
        }
        gr.w1.add_outer(&g, &dz1, 1.0);
        let dg = params.w1.mul(&dz1);

        for (v, d) in mgrads.get_mut(&pair.first).unwrap().ctx.iter_mut().zip(&dg[..span]) {
            *v += d;
        }
        for (v, d) in mgrads.get_mut(&pair.second).unwrap().ctx.iter_mut().zip(&dg[span..2 * span]) {
            *v += d;
        }
        let Some(att) = att else { continue };
        let sides = [(pair.first, pair.second), (pair.second, pair.first)];
        for (side, &(self_idx, other_idx)) in sides.iter().enumerate() {
            let own = owner(params, self_idx, other_idx);
            for relation in 0..2 {
                let slot = 2 * side + relation;
                let offset = (2 + slot) * span;
                let grad_out = &dg[offset..offset + span];
                let (wq, wk) = if relation == 0 {
                    (&params.wq_before, &params.wk_before)
                } else {
                    (&params.wq_after, &params.wk_after)
                };
                let (dwq, dwk) = if relation == 0 {
                    (&mut gr.wq_before, &mut gr.wk_before)
                } else {
                    (&mut gr.wq_after, &mut gr.wk_after)
                };
                let own_cache = &caches[&own];
                let reps = MentionCache::refs(if relation == 0 { &own_cache.before } else { &own_cache.after });
                let query = &caches[&self_idx].ctx.full;
                let mut dquery = vec![0.0; span];
                let mut own_grad = mgrads.remove(&own).unwrap();
                {
                    let list = if relation == 0 { &mut own_grad.before } else { &mut own_grad.after };
                    let mut dreps: Vec<&mut Vec<f64>> = list.iter_mut().collect();
                    attention_backward(
                        &att.caches[slot],
                        query,
                        &reps,
                        wq,
                        wk,
                        grad_out,
                        dwq,
                        dwk,
                        &mut dquery,
                        &mut dreps,
                    );
                }
                mgrads.insert(own, own_grad);
                for (v, d) in mgrads.get_mut(&self_idx).unwrap().ctx.iter_mut().zip(&dquery) {
                    *v += d;
                }
            }
        }
    }

    if let Some(gr) = grads.as_mut() {
        for (idx, mg) in &mgrads {
            let m = &mentions[*idx];
            let c = &caches[idx];
            span_backward(params, &m.span, &c.ctx, &mg.ctx, gr);
            for ((inf, sc), dg) in m.before.iter().zip(&c.before).zip(&mg.before) {
                span_backward(params, &inf.tokens, sc, dg, gr);
            }
            for ((inf, sc), dg) in m.after.iter().zip(&c.after).zip(&mg.after) {
                span_backward(params, &inf.tokens, sc, dg, gr);
            }
        }
        if let Some(block) = gr.first_non_finite_block() {
            return Err(Error::NonFinite(format!("gradient of {block}")));
        }
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(BatchRun {
        loss,
        grads,
        relu_pattern,
        clamped,
    })
}

/// Mean loss over `pairs` with fixed dropout masks (`None` disables dropout).
pub fn loss_with_masks(
    params: &ModelParameters,
    mentions: &[MentionInput],
    pairs: &[PairExample],
    masks: Option<&[Vec<f64>]>,
) -> Result<f64> {
    run_batch(params, mentions, pairs, masks, false).map(|r| r.loss)
}

/// Loss and exact gradient w.r.t. every parameter block, under fixed masks.
pub fn gradients_with_masks(
    params: &ModelParameters,
    mentions: &[MentionInput],
    pairs: &[PairExample],
    masks: Option<&[Vec<f64>]>,
) -> Result<(f64, ModelParameters)> {
    let run = run_batch(params, mentions, pairs, masks, true)?;
    Ok((run.loss, run.grads.expect("requested")))
}

/// Loss and gradients with dropout masks drawn from `rng`.
pub fn gradients(
    params: &ModelParameters,
    mentions: &[MentionInput],
    pairs: &[PairExample],
    dropout: f64,
    rng: &mut impl Rng,
) -> Result<(f64, ModelParameters)> {
    let masks = draw_masks(pairs.len(), params.dims.h, dropout, rng);
    gradients_with_masks(params, mentions, pairs, Some(&masks))
}

/// Evaluation-mode probabilities for every pair.
pub fn predict_pairs(params: &ModelParameters, mentions: &[MentionInput], pairs: &[PairExample]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let caches = build_caches(params, mentions, pairs)?;
    pairs
        .iter()
        .map(|pair| {
            let (g, _) = pair_attention(params, &caches, pair)?;
            mlp_forward(params, &g, None).map(|f| f.p)
        })
        .collect()
}

/// Attention over one relation's inferences, as read by one mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTrace {
    /// Mention whose inferences were attended over.
    pub source_mention: String,
    pub inferences: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub first: String,
    pub second: String,
    pub probability: f64,
    /// `[first before, first after, second before, second after]`; empty in baseline mode.
    pub relations: Vec<RelationTrace>,
}

/// Score one pair in evaluation mode and keep the attention weights.
pub fn forward_pair(params: &ModelParameters, first: &MentionInput, second: &MentionInput) -> Result<PairTrace> {
    let mentions = [first.clone(), second.clone()];
    let pair = PairExample { first: 0, second: 1, label: false };
    let caches = build_caches(params, &mentions, &[pair])?;
    let (g, att) = pair_attention(params, &caches, &pair)?;
    let probability = mlp_forward(params, &g, None)?.p;
    let mut relations = Vec::new();
    if let Some(att) = att {
        for (slot, cache) in att.caches.iter().enumerate() {
            let self_idx = slot / 2;
            let src = &mentions[owner(params, self_idx, 1 - self_idx)];
            let list = if slot % 2 == 0 { &src.before } else { &src.after };
            relations.push(RelationTrace {
                source_mention: src.mention_id.clone(),
                inferences: list.iter().map(|i| i.text.clone()).collect(),
                weights: cache.output.weights.clone(),
            });
        }
    }
    Ok(PairTrace {
        first: first.mention_id.clone(),
        second: second.mention_id.clone(),
        probability,
        relations,
    })
}
