use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::linalg::Matrix;

/// How the commonsense vector of each mention is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerMode {
    /// Span representations only.
    Baseline,
    /// Each mention attends over its own inferences.
    #[default]
    Intra,
    /// Each mention attends over the other mention's inferences.
    Inter,
}

impl ScorerMode {
    pub fn uses_commonsense(self) -> bool {
        self != ScorerMode::Baseline
    }
}

impl FromStr for ScorerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "intra" => Ok(Self::Intra),
            "inter" => Ok(Self::Inter),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for ScorerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Intra => "intra",
            Self::Inter => "inter",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d: usize,
    pub d_len: usize,
    pub max_width_bucket: usize,
    pub d_a: usize,
    pub h: usize,
}

impl ModelDims {
    pub fn span_dim(&self) -> usize {
        3 * self.d + self.d_len
    }

    pub fn g_dim(&self, mode: ScorerMode) -> usize {
        if mode.uses_commonsense() {
            6 * self.span_dim()
        } else {
            2 * self.span_dim()
        }
    }
}

pub const BLOCK_NAMES: [&str; 10] = [
    "w_alpha",
    "width_table",
    "wq_before",
    "wk_before",
    "wq_after",
    "wk_after",
    "w1",
    "b1",
    "w2",
    "b2",
];

/// Every trainable array of the pairwise scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub mode: ScorerMode,
    pub dims: ModelDims,
    pub version: u32,
    pub w_alpha: Vec<f64>,
    /// `max_width_bucket × d_len`; row `b - 1` is bucket `b`.
    pub width_table: Matrix,
    /// `span_dim × d_a` query/key projections, one pair per relation.
    pub wq_before: Matrix,
    pub wk_before: Matrix,
    pub wq_after: Matrix,
    pub wk_after: Matrix,
    /// `g_dim × h`.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub const FORMAT_VERSION: u32 = 1;

impl ModelParameters {
    pub fn zeros(dims: ModelDims, mode: ScorerMode) -> Self {
        let span = dims.span_dim();
        ModelParameters {
            mode,
            dims,
            version: FORMAT_VERSION,
            w_alpha: vec![0.0; dims.d],
            width_table: Matrix::zeros(dims.max_width_bucket, dims.d_len),
            wq_before: Matrix::zeros(span, dims.d_a),
            wk_before: Matrix::zeros(span, dims.d_a),
            wq_after: Matrix::zeros(span, dims.d_a),
            wk_after: Matrix::zeros(span, dims.d_a),
            w1: Matrix::zeros(dims.g_dim(mode), dims.h),
            b1: vec![0.0; dims.h],
            w2: vec![0.0; dims.h],
            b2: 0.0,
        }
    }

    /// Uniform initialization in ±1/√fan_in, drawn block by block.
    pub fn init(dims: ModelDims, mode: ScorerMode, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dims, mode);
        let span = dims.span_dim();
        let g = dims.g_dim(mode);
        let fan_ins = [dims.d, dims.d_len, span, span, span, span, g, g, dims.h, dims.h];
        for ((_, block), fan_in) in p.blocks_mut().into_iter().zip(fan_ins) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in block.iter_mut() {
                *x = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims, self.mode)
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 10] {
        [
            (BLOCK_NAMES[0], &self.w_alpha),
            (BLOCK_NAMES[1], &self.width_table.data),
            (BLOCK_NAMES[2], &self.wq_before.data),
            (BLOCK_NAMES[3], &self.wk_before.data),
            (BLOCK_NAMES[4], &self.wq_after.data),
            (BLOCK_NAMES[5], &self.wk_after.data),
            (BLOCK_NAMES[6], &self.w1.data),
            (BLOCK_NAMES[7], &self.b1),
            (BLOCK_NAMES[8], &self.w2),
            (BLOCK_NAMES[9], std::slice::from_ref(&self.b2)),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 10] {
        [
            (BLOCK_NAMES[0], &mut self.w_alpha),
            (BLOCK_NAMES[1], &mut self.width_table.data),
            (BLOCK_NAMES[2], &mut self.wq_before.data),
            (BLOCK_NAMES[3], &mut self.wk_before.data),
            (BLOCK_NAMES[4], &mut self.wq_after.data),
            (BLOCK_NAMES[5], &mut self.wk_after.data),
            (BLOCK_NAMES[6], &mut self.w1.data),
            (BLOCK_NAMES[7], &mut self.b1),
            (BLOCK_NAMES[8], &mut self.w2),
            (BLOCK_NAMES[9], std::slice::from_mut(&mut self.b2)),
        ]
    }

    /// Row/column shape of each block, in [`BLOCK_NAMES`] order.
    pub fn block_shapes(&self) -> [Vec<usize>; 10] {
        let m = |x: &Matrix| vec![x.rows, x.cols];
        [
            vec![self.w_alpha.len()],
            m(&self.width_table),
            m(&self.wq_before),
            m(&self.wk_before),
            m(&self.wq_after),
            m(&self.wk_after),
            m(&self.w1),
            vec![self.b1.len()],
            vec![self.w2.len()],
            vec![],
        ]
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite_block(&self) -> Option<&'static str> {
        self.blocks()
            .into_iter()
            .find(|(_, b)| b.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }

    pub fn span_params(&self) -> crate::embed::SpanParams<'_> {
        crate::embed::SpanParams {
            w_alpha: &self.w_alpha,
            width_table: &self.width_table,
        }
    }
}
