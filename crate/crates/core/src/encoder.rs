//! Encoder contract and the small trainable encoder used in place of a
//! pretrained transformer.
//!
//! Inputs reach the encoder as fixed-width feature vectors: token sequences
//! through [`featurize`] (signed feature hashing), raw vectors through
//! [`vector_passthrough`]. [`ToyEncoder`] maps features through
//! `tanh(W1 x + b1)` and a linear output layer, with exact backpropagation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{check_finite, l2_normalize, Matrix};

pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_OUTPUT_DIM: usize = 32;
pub const DEFAULT_HASH_DIM: usize = 1024;
pub const MIN_HASH_DIM: usize = 16;

/// Gradient buffers aligned one-to-one with an encoder's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub blocks: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(sizes: impl IntoIterator<Item = usize>) -> Self {
        Self {
            blocks: sizes.into_iter().map(|n| vec![0.0; n]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.blocks.iter_mut().flatten().for_each(|x| *x *= factor);
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.concat()
    }
}

/// A trainable map from feature vectors to representations.
pub trait Encoder {
    /// Activations kept from a forward pass for the matching backward pass.
    type Cache;

    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Self::Cache)>;

    fn encode(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(rep, _)| rep)
    }

    /// Adds `∂loss/∂params` for one sample into `grads`, given
    /// `upstream = ∂loss/∂representation`.
    fn backward(&self, cache: &Self::Cache, upstream: &[f64], grads: &mut ParamGrads) -> Result<()>;

    /// Named parameter blocks in a fixed order.
    fn param_blocks(&self) -> Vec<(&'static str, &[f64])>;
    fn param_blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    fn zero_grads(&self) -> ParamGrads {
        ParamGrads::zeros_like(self.param_blocks().iter().map(|(_, b)| b.len()))
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed hashed bag of tokens, L2-normalized. Each token adds ±1 to one
/// bucket. An empty sequence (or one whose counts cancel exactly) maps to the
/// reserved unit vector on bucket 0.
pub fn featurize<S: AsRef<str>>(tokens: &[S], hash_dim: usize) -> Result<Vec<f64>> {
    if hash_dim < MIN_HASH_DIM {
        return Err(Error::Config(format!(
            "hash dimension must be at least {MIN_HASH_DIM}, got {hash_dim}"
        )));
    }
    let mut counts = vec![0.0; hash_dim];
    for tok in tokens {
        let h = fnv1a(tok.as_ref().as_bytes());
        let bucket = (h % hash_dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        counts[bucket] += sign;
    }
    match l2_normalize(&counts) {
        Ok(v) => Ok(v),
        Err(_) => {
            let mut empty = vec![0.0; hash_dim];
            empty[0] = 1.0;
            Ok(empty)
        }
    }
}

/// Returns a raw feature vector unchanged, or unit-normalized when asked.
pub fn vector_passthrough(features: &[f64], normalize: bool) -> Result<Vec<f64>> {
    check_finite(features, "feature vector")?;
    if normalize {
        l2_normalize(features)
    } else if features.iter().all(|&x| x == 0.0) {
        Err(Error::DegenerateInput("zero feature vector".into()))
    } else {
        Ok(features.to_vec())
    }
}

/// `buf += u vᵀ` for a row-major `u.len() × v.len()` buffer.
fn add_outer(buf: &mut [f64], u: &[f64], v: &[f64]) {
    for (row, &ur) in buf.chunks_exact_mut(v.len()).zip(u) {
        if ur == 0.0 {
            continue;
        }
        for (w, &vc) in row.iter_mut().zip(v) {
            *w += ur * vc;
        }
    }
}

/// Two-layer perceptron: `W2 · tanh(W1 · x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyCache {
    input: Vec<f64>,
    hidden: Vec<f64>,
}

impl ToyEncoder {
    /// Uniform `[-1/√fan_in, 1/√fan_in]` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(Error::Config(format!(
                "encoder dimensions must be positive: {input_dim}x{hidden_dim}x{output_dim}"
            )));
        }
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w1 = Matrix::from_vec(hidden_dim, input_dim, uniform(hidden_dim * input_dim, input_dim))?;
        let b1 = uniform(hidden_dim, input_dim);
        let w2 = Matrix::from_vec(output_dim, hidden_dim, uniform(output_dim * hidden_dim, hidden_dim))?;
        let b2 = uniform(output_dim, hidden_dim);
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden_dim, input_dim),
            b1: vec![0.0; hidden_dim],
            w2: Matrix::zeros(output_dim, hidden_dim),
            b2: vec![0.0; output_dim],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    /// Rebuilds an encoder from flattened parameter blocks in
    /// [`Encoder::param_blocks`] order.
    pub fn from_blocks(input_dim: usize, hidden_dim: usize, output_dim: usize, blocks: Vec<Vec<f64>>) -> Result<Self> {
        let [w1, b1, w2, b2]: [Vec<f64>; 4] = blocks
            .try_into()
            .map_err(|b: Vec<Vec<f64>>| Error::DimensionMismatch { expected: 4, got: b.len() })?;
        for (v, n) in [(&b1, hidden_dim), (&b2, output_dim)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            check_finite(v, "encoder bias")?;
        }
        Ok(Self {
            w1: Matrix::from_vec(hidden_dim, input_dim, w1)?,
            b1,
            w2: Matrix::from_vec(output_dim, hidden_dim, w2)?,
            b2,
        })
    }
}

impl Encoder for ToyEncoder {
    type Cache = ToyCache;

    fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    fn output_dim(&self) -> usize {
        self.b2.len()
    }

    fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ToyCache)> {
        let mut hidden = self.w1.matvec(input)?;
        for (h, b) in hidden.iter_mut().zip(&self.b1) {
            *h = (*h + b).tanh();
        }
        let mut out = self.w2.matvec(&hidden)?;
        for (o, b) in out.iter_mut().zip(&self.b2) {
            *o += b;
        }
        Ok((
            out,
            ToyCache {
                input: input.to_vec(),
                hidden,
            },
        ))
    }

    fn backward(&self, cache: &ToyCache, upstream: &[f64], grads: &mut ParamGrads) -> Result<()> {
        if cache.input.len() != self.input_dim() || cache.hidden.len() != self.hidden_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: cache.input.len(),
            });
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let sizes = [self.w1.as_slice().len(), self.b1.len(), self.w2.as_slice().len(), self.b2.len()];
        if grads.blocks.len() != 4 || grads.blocks.iter().zip(sizes).any(|(b, n)| b.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: sizes.iter().sum(),
                got: grads.blocks.iter().map(Vec::len).sum(),
            });
        }

        add_outer(&mut grads.blocks[2], upstream, &cache.hidden);
        for (g, u) in grads.blocks[3].iter_mut().zip(upstream) {
            *g += u;
        }

        let mut pre = self.w2.matvec_transposed(upstream)?;
        for (d, h) in pre.iter_mut().zip(&cache.hidden) {
            *d *= 1.0 - h * h;
        }
        add_outer(&mut grads.blocks[0], &pre, &cache.input);
        for (g, d) in grads.blocks[1].iter_mut().zip(&pre) {
            *g += d;
        }
        Ok(())
    }

    fn param_blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w1", self.w1.as_slice()),
            ("b1", &self.b1),
            ("w2", self.w2.as_slice()),
            ("b2", &self.b2),
        ]
    }

    fn param_blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w1", self.w1.as_mut_slice()),
            ("b1", &mut self.b1),
            ("w2", self.w2.as_mut_slice()),
            ("b2", &mut self.b2),
        ]
    }
}
