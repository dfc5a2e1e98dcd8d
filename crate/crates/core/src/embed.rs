//! Token embeddings and span representations.
//!
//! A span is represented as `[first token, last token, attention-pooled
//! tokens, width embedding]`. The same representation is used for event
//! mentions and for whole inference sentences.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::util::{dot, softmax};

/// Deterministic unit-norm embedding of a token. Components are standard
/// normal draws from a generator seeded by SHA-256 of `(seed, token)`.
pub fn hash_embed(token: &str, d: usize, seed: u64) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Split free text (an inference sentence) into tokens: whitespace
/// separated, surrounding punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingProvider {
    #[default]
    Hash,
    Service,
}

impl FromStr for EmbeddingProvider {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hash" => Ok(Self::Hash),
            "service" => Ok(Self::Service),
            other => Err(Error::Config(format!("unknown embedding provider `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub provider: EmbeddingProvider,
    pub d: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub d_len: usize,
    pub max_width_bucket: usize,
    pub concurrency: usize,
    pub timeout_secs: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: EmbeddingProvider::Hash,
            d: 16,
            seed: 1,
            endpoint: None,
            d_len: 20,
            max_width_bucket: 8,
            concurrency: 4,
            timeout_secs: 60,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d_len == 0 || self.max_width_bucket == 0 {
            return Err(Error::Config("d, d_len and max_width_bucket must be positive".into()));
        }
        if self.provider == EmbeddingProvider::Service && self.endpoint.is_none() {
            return Err(Error::Config("service embedder requires an endpoint".into()));
        }
        Ok(())
    }

    /// Width of a span representation: three token vectors plus the width feature.
    pub fn span_dim(&self) -> usize {
        3 * self.d + self.d_len
    }

    pub fn fingerprint(&self) -> String {
        match self.provider {
            EmbeddingProvider::Hash => format!("hash:d={}:seed={}", self.d, self.seed),
            EmbeddingProvider::Service => format!(
                "service:d={}:{}",
                self.d,
                self.endpoint.as_deref().unwrap_or_default()
            ),
        }
    }
}

/// Per-sentence token vectors of uniform dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub d: usize,
    pub sentences: Vec<Vec<Vec<f64>>>,
}

impl EmbeddingMatrix {
    fn validate(&self, context: &str) -> Result<()> {
        for row in self.sentences.iter().flatten() {
            if row.len() != self.d {
                return Err(Error::DimensionMismatch {
                    context: context.to_string(),
                    expected: self.d,
                    actual: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(context.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    sentences: &'a [Vec<String>],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<Vec<f64>>>,
    d: usize,
}

/// Embeds documents and free-text sentences, memoizing per document id.
#[derive(Debug)]
pub struct Embedder {
    config: EmbedderConfig,
    documents: Mutex<HashMap<String, Arc<EmbeddingMatrix>>>,
}

impl Embedder {
    pub fn new(config: EmbedderConfig) -> Result<Self> {
        config.validate()?;
        Ok(Embedder {
            config,
            documents: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn embed_document(&self, doc: &Document) -> Result<Arc<EmbeddingMatrix>> {
        if let Some(m) = self.documents.lock().expect("embed cache").get(&doc.doc_id) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(self.embed_sentences(&doc.sentences)?);
        let mut cache = self.documents.lock().expect("embed cache");
        Ok(Arc::clone(cache.entry(doc.doc_id.clone()).or_insert(m)))
    }

    /// Embed many documents with up to `config.concurrency` requests in flight.
    pub fn embed_documents(&self, docs: &[Document]) -> Result<()> {
        let workers = self.config.concurrency.max(1).min(docs.len().max(1));
        let chunk = docs.len().div_ceil(workers).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = docs
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().try_for_each(|d| self.embed_document(d).map(|_| ()))))
                .collect();
            handles
                .into_iter()
                .try_for_each(|h| h.join().expect("embedding worker panicked"))
        })
    }

    pub fn embed_sentences(&self, sentences: &[Vec<String>]) -> Result<EmbeddingMatrix> {
        let matrix = match self.config.provider {
            EmbeddingProvider::Hash => EmbeddingMatrix {
                d: self.config.d,
                sentences: sentences
                    .iter()
                    .map(|s| s.iter().map(|t| hash_embed(t, self.config.d, self.config.seed)).collect())
                    .collect(),
            },
            EmbeddingProvider::Service => self.embed_remote(sentences)?,
        };
        matrix.validate("embedding matrix")?;
        Ok(matrix)
    }

    fn embed_remote(&self, sentences: &[Vec<String>]) -> Result<EmbeddingMatrix> {
        let endpoint = self.config.endpoint.as_deref().expect("validated");
        let response: EmbedResponse = crate::http::post_json(
            endpoint,
            &EmbedRequest { sentences },
            Duration::from_secs(self.config.timeout_secs),
            None,
        )
        .map_err(Error::EmbeddingService)?;
        if response.d != self.config.d {
            return Err(Error::DimensionMismatch {
                context: "embedding service".into(),
                expected: self.config.d,
                actual: response.d,
            });
        }
        if response.vectors.len() != sentences.len()
            || response.vectors.iter().zip(sentences).any(|(v, s)| v.len() != s.len())
        {
            return Err(Error::EmbeddingService(
                "response does not have one vector per token".into(),
            ));
        }
        Ok(EmbeddingMatrix {
            d: response.d,
            sentences: response.vectors,
        })
    }
}

/// 1-based width bucket, saturating at `max_bucket`.
pub fn width_bucket(width: usize, max_bucket: usize) -> usize {
    width.clamp(1, max_bucket)
}

/// Softmax-pooled sum of token vectors scored by `w_alpha`.
/// Returns the pooled vector and the attention weights.
pub fn attention_pool(tokens: &[&[f64]], w_alpha: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let logits: Vec<f64> = tokens.iter().map(|x| dot(w_alpha, x)).collect();
    let alphas = softmax(&logits);
    let d = tokens.first().map_or(0, |x| x.len());
    let mut pooled = vec![0.0; d];
    for (a, x) in alphas.iter().zip(tokens) {
        for (p, v) in pooled.iter_mut().zip(x.iter()) {
            *p += a * v;
        }
    }
    (pooled, alphas)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanRepresentation {
    pub start: Vec<f64>,
    pub last: Vec<f64>,
    pub pooled: Vec<f64>,
    pub width_feature: Vec<f64>,
    /// Pooling weights over the span tokens.
    pub weights: Vec<f64>,
}

impl SpanRepresentation {
    pub fn full(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.start.len() + self.width_feature.len());
        v.extend_from_slice(&self.start);
        v.extend_from_slice(&self.last);
        v.extend_from_slice(&self.pooled);
        v.extend_from_slice(&self.width_feature);
        v
    }
}

/// Parameters the span representation reads.
#[derive(Debug, Clone, Copy)]
pub struct SpanParams<'a> {
    pub w_alpha: &'a [f64],
    /// Row `b - 1` holds the embedding of width bucket `b`.
    pub width_table: &'a Matrix,
}

/// Representation of the inclusive token span of one sentence.
pub fn span_representation(
    matrix: &EmbeddingMatrix,
    sentence_index: usize,
    token_start: usize,
    token_end: usize,
    params: SpanParams<'_>,
) -> Result<SpanRepresentation> {
    let sentence = matrix.sentences.get(sentence_index).ok_or_else(|| Error::SpanOutOfBounds {
        mention_id: format!("sentence {sentence_index}"),
        detail: format!("matrix has {} sentences", matrix.sentences.len()),
    })?;
    if token_start > token_end || token_end >= sentence.len() {
        return Err(Error::SpanOutOfBounds {
            mention_id: format!("sentence {sentence_index}"),
            detail: format!("tokens {token_start}..={token_end} of {}", sentence.len()),
        });
    }
    if params.w_alpha.len() != matrix.d {
        return Err(Error::DimensionMismatch {
            context: "w_alpha".into(),
            expected: matrix.d,
            actual: params.w_alpha.len(),
        });
    }
    if params.width_table.rows == 0 {
        return Err(Error::Config("width table is empty".into()));
    }
    let tokens: Vec<&[f64]> = sentence[token_start..=token_end].iter().map(Vec::as_slice).collect();
    Ok(represent_tokens(&tokens, params))
}

/// Representation of a whole token sequence (e.g. an inference sentence).
pub fn represent_tokens(tokens: &[&[f64]], params: SpanParams<'_>) -> SpanRepresentation {
    let (pooled, weights) = attention_pool(tokens, params.w_alpha);
    let bucket = width_bucket(tokens.len(), params.width_table.rows);
    SpanRepresentation {
        start: tokens[0].to_vec(),
        last: tokens[tokens.len() - 1].to_vec(),
        pooled,
        width_feature: params.width_table.row(bucket - 1).to_vec(),
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hash_embed_is_deterministic_unit_norm() {
        let a = hash_embed("arrested", 16, 1);
        assert_eq!(a, hash_embed("arrested", 16, 1));
        assert_ne!(a, hash_embed("arrested", 16, 2));
        assert!((dot(&a, &a).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hash_embed_spreads_tokens() {
        // 1000 distinct tokens at d=16 should never collapse onto one direction.
        let vs: Vec<Vec<f64>> = (0..1000).map(|i| hash_embed(&format!("tok{i}"), 16, 1)).collect();
        let mut max = 0.0f64;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                max = max.max(dot(&vs[i], &vs[j]).abs());
            }
        }
        assert!(max < 0.95, "max |cos| = {max}");
    }

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(tokenize("She fired her old lawyer."), vec!["She", "fired", "her", "old", "lawyer"]);
        assert_eq!(tokenize("Victims' families hugged."), vec!["Victims", "families", "hugged"]);
        assert!(tokenize("...").is_empty());
    }

    #[test]
    fn hash_document_shapes_and_context_free_rows() {
        let e = Embedder::new(EmbedderConfig { d: 8, ..EmbedderConfig::default() }).unwrap();
        let doc = Document {
            doc_id: "d".into(),
            topic_id: "t".into(),
            subtopic_id: "s".into(),
            sentences: vec![vec!["a".into(), "b".into(), "a".into()]],
        };
        let m = e.embed_document(&doc).unwrap();
        assert_eq!(m.sentences[0].len(), 3);
        assert!(m.sentences[0].iter().all(|v| v.len() == 8));
        assert_eq!(m.sentences[0][0], m.sentences[0][2]);
    }

    #[test]
    fn service_requires_endpoint() {
        let cfg = EmbedderConfig { provider: EmbeddingProvider::Service, ..EmbedderConfig::default() };
        assert!(Embedder::new(cfg).is_err());
    }

    fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        EmbeddingMatrix { d: rows[0].len(), sentences: vec![rows] }
    }

    fn table(d_len: usize) -> Matrix {
        Matrix::from_rows(&(1..=8).map(|b| vec![b as f64; d_len]).collect::<Vec<_>>())
    }

    #[test]
    fn single_token_span() {
        let m = matrix(vec![vec![0.3, -0.2], vec![1.0, 2.0]]);
        let t = table(3);
        let r = span_representation(&m, 0, 1, 1, SpanParams { w_alpha: &[0.5, 0.5], width_table: &t }).unwrap();
        assert_eq!(r.start, vec![1.0, 2.0]);
        assert_eq!(r.last, vec![1.0, 2.0]);
        assert_eq!(r.pooled, vec![1.0, 2.0]);
        assert_eq!(r.width_feature, vec![1.0; 3]);
        assert_eq!(r.full().len(), 2 * 3 + 3);
    }

    #[test]
    fn equal_scores_average() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = table(2);
        let r = span_representation(&m, 0, 0, 1, SpanParams { w_alpha: &[0.7, 0.7], width_table: &t }).unwrap();
        assert!((r.pooled[0] - 0.5).abs() < 1e-12 && (r.pooled[1] - 0.5).abs() < 1e-12);
        assert_eq!(r.width_feature, vec![2.0; 2]);
    }

    #[test]
    fn hand_softmax_pooling() {
        // Independent scalar route: e^{ln 3} / (e^{ln 3} + e^0) = 3 / 4.
        let expected_first = 3.0f64.ln().exp() / (3.0f64.ln().exp() + 1.0);
        assert!((expected_first - 0.75).abs() < 1e-15);
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = table(2);
        let r = span_representation(&m, 0, 0, 1, SpanParams { w_alpha: &[3.0f64.ln(), 0.0], width_table: &t })
            .unwrap();
        assert!((r.pooled[0] - 0.75).abs() < 1e-12);
        assert!((r.pooled[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_span() {
        let m = matrix(vec![vec![1.0, 0.0]]);
        let t = table(2);
        let p = SpanParams { w_alpha: &[0.0, 0.0], width_table: &t };
        assert!(matches!(span_representation(&m, 0, 0, 1, p), Err(Error::SpanOutOfBounds { .. })));
        assert!(matches!(span_representation(&m, 1, 0, 0, p), Err(Error::SpanOutOfBounds { .. })));
    }

    #[test]
    fn width_saturates() {
        assert_eq!(width_bucket(1, 8), 1);
        assert_eq!(width_bucket(8, 8), 8);
        assert_eq!(width_bucket(30, 8), 8);
    }

    #[test]
    fn pooled_gradient_matches_finite_differences() {
        // d pooled_k / d w_i = sum_t alpha_t (x_t,i - xbar_i) x_t,k
        let xs = [vec![0.2, -0.4, 0.9], vec![-0.5, 0.3, 0.1], vec![0.7, 0.7, -0.2]];
        let tokens: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let w = [0.3, -0.8, 0.5];
        let (_, alphas) = attention_pool(&tokens, &w);
        let xbar: Vec<f64> = (0..3).map(|i| (0..3).map(|t| alphas[t] * xs[t][i]).sum()).collect();
        let h = 1e-5;
        for i in 0..3 {
            for k in 0..3 {
                let analytic: f64 = (0..3).map(|t| alphas[t] * (xs[t][i] - xbar[i]) * xs[t][k]).sum();
                let mut wp = w;
                wp[i] += h;
                let mut wm = w;
                wm[i] -= h;
                let fd = (attention_pool(&tokens, &wp).0[k] - attention_pool(&tokens, &wm).0[k]) / (2.0 * h);
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "i={i} k={k} analytic={analytic} fd={fd}");
            }
        }
    }

    proptest! {
        #[test]
        fn pooled_is_convex_combination(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..7),
            w in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            let tokens: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let (pooled, alphas) = attention_pool(&tokens, &w);
            prop_assert!((alphas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(alphas.iter().all(|&a| a >= 0.0));
            for k in 0..4 {
                let lo = rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(pooled[k] >= lo - 1e-9 && pooled[k] <= hi + 1e-9);
            }
            let t = Matrix::zeros(8, 5);
            let r = represent_tokens(&tokens, SpanParams { w_alpha: &w, width_table: &t });
            prop_assert_eq!(r.full().len(), 3 * 4 + 5);
        }
    }
}
