//! Dense vector and matrix primitives, similarity kernels and a
//! central-difference gradient oracle.
//!
//! Vectors are plain `&[f64]` slices. Every kernel that divides by a norm
//! rejects zero-norm input with [`Error::DegenerateInput`] instead of
//! returning a silent zero.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

pub fn check_finite(a: &[f64], what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn nonzero_norm(a: &[f64], what: &str) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::DegenerateInput(format!("{what} is empty")));
    }
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::DegenerateInput(format!("{what} has norm {n}")))
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_same_len(a, b)?;
    let na = nonzero_norm(a, "left vector")?;
    let nb = nonzero_norm(b, "right vector")?;
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cos(a, b)`, always in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Gradient of `cos(a, b)` with respect to `a`:
/// `b / (|a||b|) - cos(a, b) * a / |a|^2`.
pub fn cosine_similarity_grad(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_same_len(a, b)?;
    let na = nonzero_norm(a, "left vector")?;
    let nb = nonzero_norm(b, "right vector")?;
    let cos = dot(a, b) / (na * nb);
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| y / (na * nb) - cos * x / (na * na))
        .collect())
}

pub fn l2_normalize(a: &[f64]) -> Result<Vec<f64>> {
    let n = nonzero_norm(a, "vector")?;
    Ok(a.iter().map(|x| x / n).collect())
}

/// Numerically stable `log(sum(exp(x)))`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Temperature softmax computed from max-shifted scores.
pub fn softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!(
            "softmax temperature must be positive, got {temperature}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("softmax scores".into()));
    }
    check_finite(scores, "softmax scores")?;
    let scaled: Vec<f64> = scores.iter().map(|s| s / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Central-difference gradient `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps`.
///
/// `eps` must lie in `[1e-7, 1e-3]`. A non-finite evaluation aborts with
/// [`Error::NonFinite`].
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let plus = f(&probe);
        probe[i] = x[i] - eps;
        let minus = f(&probe);
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "function evaluation at coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// `max_i |a_i - b_i| / max(max(|a|, |b|), 1e-8)`: the error measure used by
/// every gradient check in this crate.
pub fn gradient_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    diff / norm(analytic).max(norm(numeric)).max(1e-8)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        check_finite(&data, "matrix entries")?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `selfᵀ · y`
    pub fn matvec_transposed(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: y.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += yr * w;
            }
        }
        Ok(out)
    }

    /// `self += scale · u vᵀ`
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            let s = scale * ur;
            if s == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, &vc) in row.iter_mut().zip(v) {
                *w += s * vc;
            }
        }
    }
}
