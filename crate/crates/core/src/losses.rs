//! Supervised contrastive (SupCon), supervised prototypical contrastive
//! (SPCL) and cross-entropy losses with closed-form gradients.
//!
//! Both contrastive losses share one shape. For anchor `z_i` with score
//! `s(i, t) = cos(z_i, t) / τ`, a set of positive terms `P` and a set of
//! denominator terms `D`:
//!
//! ```text
//! L_i = -log( (1/|P|) · Σ_{t∈P} exp s(i,t) / Σ_{t∈D} exp s(i,t) )
//!     = LSE_D − LSE_P + ln |P|
//! ```
//!
//! SupCon uses `P = P(i)` (same-label batch members) and `D = A(i)` (every
//! other batch member). SPCL adds the own-class prototype to `P` and every
//! other class prototype to `D`; the own-class prototype is not part of `D`,
//! so SPCL values can be negative. The batch loss is the plain sum of `L_i`.
//!
//! Gradients flow to batch representations only. Prototypes are treated as
//! constants.

use crate::error::{Error, Result};
use crate::numerics::{check_finite, dot, l2_normalize, log_sum_exp, norm, Matrix};
use crate::protomem::PrototypeSet;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub temperature: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl LossConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        let cfg = Self { temperature };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature > 0.0 && self.temperature.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )))
        }
    }
}

/// A batch of representations with their labels.
#[derive(Debug, Clone, Copy)]
pub struct BatchView<'a> {
    reps: &'a [Vec<f64>],
    labels: &'a [usize],
}

impl<'a> BatchView<'a> {
    pub fn new(reps: &'a [Vec<f64>], labels: &'a [usize]) -> Result<Self> {
        if reps.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: reps.len(),
                got: labels.len(),
            });
        }
        if let Some(first) = reps.first() {
            for r in reps {
                if r.len() != first.len() {
                    return Err(Error::DimensionMismatch {
                        expected: first.len(),
                        got: r.len(),
                    });
                }
                check_finite(r, "batch representation")?;
            }
        }
        Ok(Self { reps, labels })
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn reps(&self) -> &'a [Vec<f64>] {
        self.reps
    }

    pub fn labels(&self) -> &'a [usize] {
        self.labels
    }

    pub fn dim(&self) -> Option<usize> {
        self.reps.first().map(Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    /// `∂loss/∂z_i`, one row per batch sample (or per logit row for
    /// cross-entropy).
    pub grads: Vec<Vec<f64>>,
    /// Samples that contributed zero because no positive term existed.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermTarget {
    /// Another batch member, by index.
    Batch(usize),
    /// A class prototype, by label.
    Prototype(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Term {
    pub target: TermTarget,
    pub label: usize,
}

/// The terms entering one anchor's loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTerms {
    pub anchor_label: usize,
    pub positives: Vec<Term>,
    pub denominator: Vec<Term>,
}

impl SampleTerms {
    /// Denominator terms carrying a label different from the anchor's.
    pub fn negatives(&self) -> impl Iterator<Item = &Term> {
        self.denominator
            .iter()
            .filter(move |t| t.label != self.anchor_label)
    }

    /// The `1/|P|` coefficient's denominator: the number of positive terms.
    pub fn divisor(&self) -> usize {
        self.positives.len()
    }

    /// Whether the anchor produces a defined, non-zero-by-rule loss term.
    pub fn contributes(&self) -> bool {
        !self.positives.is_empty() && !self.denominator.is_empty()
    }
}

/// Builds the positive and denominator term lists for every anchor.
/// `prototypes = None` yields the SupCon terms.
pub fn contrastive_terms(batch: &BatchView<'_>, prototypes: Option<&PrototypeSet>) -> Vec<SampleTerms> {
    let labels = batch.labels();
    (0..batch.len())
        .map(|i| {
            let own = labels[i];
            let mut positives = Vec::new();
            let mut denominator = Vec::with_capacity(batch.len());
            for (j, &lj) in labels.iter().enumerate() {
                if j == i {
                    continue;
                }
                let term = Term {
                    target: TermTarget::Batch(j),
                    label: lj,
                };
                denominator.push(term);
                if lj == own {
                    positives.push(term);
                }
            }
            if let Some(protos) = prototypes {
                for (label, _) in protos.iter() {
                    let term = Term {
                        target: TermTarget::Prototype(label),
                        label,
                    };
                    if label == own {
                        positives.push(term);
                    } else {
                        denominator.push(term);
                    }
                }
            }
            SampleTerms {
                anchor_label: own,
                positives,
                denominator,
            }
        })
        .collect()
}

/// `exp(cos(z_i, z_j) / τ)`.
pub fn pair_score(z_i: &[f64], z_j: &[f64], cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    Ok((crate::numerics::cosine_similarity(z_i, z_j)? / cfg.temperature).exp())
}

/// Supervised contrastive loss over a batch of at least two samples.
/// Anchors without a same-label partner contribute zero.
pub fn supcon_loss(batch: &BatchView<'_>, cfg: &LossConfig) -> Result<LossOutput> {
    if batch.len() < 2 {
        return Err(Error::BatchTooSmall {
            needed: 2,
            got: batch.len(),
        });
    }
    contrastive_loss(batch, None, cfg)
}

/// Supervised prototypical contrastive loss. With an empty prototype set
/// it equals [`supcon_loss`]; unlike SupCon it accepts a single-sample batch.
pub fn spcl_loss(batch: &BatchView<'_>, prototypes: &PrototypeSet, cfg: &LossConfig) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::BatchTooSmall { needed: 1, got: 0 });
    }
    if let (Some(pd), Some(bd)) = (prototypes.dim(), batch.dim()) {
        if pd != bd {
            return Err(Error::DimensionMismatch {
                expected: bd,
                got: pd,
            });
        }
    }
    contrastive_loss(batch, Some(prototypes), cfg)
}

fn contrastive_loss(
    batch: &BatchView<'_>,
    prototypes: Option<&PrototypeSet>,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    cfg.validate()?;
    let inv_tau = 1.0 / cfg.temperature;
    let reps = batch.reps();
    let n = reps.len();
    let dim = batch.dim().unwrap_or(0);

    let norms: Vec<f64> = reps.iter().map(|z| norm(z)).collect();
    let units = reps
        .iter()
        .map(|z| l2_normalize(z))
        .collect::<Result<Vec<_>>>()?;
    let proto_units: Vec<(usize, Vec<f64>)> = match prototypes {
        Some(p) => p
            .iter()
            .map(|(l, v)| Ok((l, l2_normalize(v)?)))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let proto_unit = |label: usize| -> &[f64] {
        let pos = proto_units
            .binary_search_by_key(&label, |(l, _)| *l)
            .expect("term refers to a known prototype");
        &proto_units[pos].1
    };

    let mut cos = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let c = dot(&units[i], &units[j]).clamp(-1.0, 1.0);
            cos[i * n + j] = c;
            cos[j * n + i] = c;
        }
    }

    let terms = contrastive_terms(batch, prototypes);
    let mut grad_units = vec![vec![0.0; dim]; n];
    let mut value = 0.0;
    let mut skipped = 0;
    let mut scores_p = Vec::new();
    let mut scores_d = Vec::new();

    for (i, st) in terms.iter().enumerate() {
        if !st.contributes() {
            skipped += 1;
            continue;
        }
        let score = |t: &Term| -> f64 {
            match t.target {
                TermTarget::Batch(j) => cos[i * n + j] * inv_tau,
                TermTarget::Prototype(l) => dot(&units[i], proto_unit(l)).clamp(-1.0, 1.0) * inv_tau,
            }
        };
        scores_p.clear();
        scores_p.extend(st.positives.iter().map(score));
        scores_d.clear();
        scores_d.extend(st.denominator.iter().map(score));
        let lse_p = log_sum_exp(&scores_p);
        let lse_d = log_sum_exp(&scores_d);
        value += lse_d - lse_p + (st.divisor() as f64).ln();

        // ∂L_i/∂s = softmax_D(s) for denominator terms, −softmax_P(s) for
        // positive terms; ∂s/∂cos = 1/τ.
        let mut apply = |t: &Term, coef: f64| {
            let c = coef * inv_tau;
            match t.target {
                TermTarget::Batch(j) => {
                    for k in 0..dim {
                        grad_units[i][k] += c * units[j][k];
                        grad_units[j][k] += c * units[i][k];
                    }
                }
                TermTarget::Prototype(l) => {
                    let p = proto_unit(l);
                    for k in 0..dim {
                        grad_units[i][k] += c * p[k];
                    }
                }
            }
        };
        for (t, s) in st.denominator.iter().zip(&scores_d) {
            apply(t, (s - lse_d).exp());
        }
        for (t, s) in st.positives.iter().zip(&scores_p) {
            apply(t, -(s - lse_p).exp());
        }
    }

    // Chain through u = z/|z|: ∂L/∂z = (g − (g·u)u)/|z|.
    let grads: Vec<Vec<f64>> = grad_units
        .iter()
        .zip(&units)
        .zip(&norms)
        .map(|((g, u), &nz)| {
            let gu = dot(g, u);
            g.iter().zip(u).map(|(gk, uk)| (gk - gu * uk) / nz).collect()
        })
        .collect();

    if !value.is_finite() {
        return Err(Error::NonFinite("contrastive loss value".into()));
    }
    for g in &grads {
        check_finite(g, "contrastive loss gradient")?;
    }
    Ok(LossOutput {
        value,
        grads,
        skipped,
    })
}

/// Mean cross-entropy of row-wise softmax(logits) against `labels`.
/// Gradient rows are `(softmax − onehot) / N`.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<LossOutput> {
    if logits.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.rows(),
            got: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("cross-entropy batch".into()));
    }
    let classes = logits.cols();
    let n = labels.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(labels.len());
    for (r, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        let row = logits.row(r);
        let lse = log_sum_exp(row);
        value += lse - row[y];
        let mut g: Vec<f64> = row.iter().map(|x| (x - lse).exp() / n).collect();
        g[y] -= 1.0 / n;
        grads.push(g);
    }
    Ok(LossOutput {
        value: value / n,
        grads,
        skipped: 0,
    })
}
