//! Prediction heads over frozen representations: center matching and a
//! linear probe.

use rand::Rng;

use super::optim::{optimizer_step, AdamState, CosineSchedule, OptimizerConfig};
use crate::curriculum::ClassCenters;
use crate::error::{Error, Result};
use crate::losses::cross_entropy_loss;
use crate::numerics::{cosine_similarity, softmax, Matrix};

/// Label of the most cosine-similar center, with a temperature softmax over
/// the similarities (in ascending label order). Ties go to the lowest label.
pub fn predict_center_match(z: &[f64], centers: &ClassCenters, temperature: f64) -> Result<(usize, Vec<f64>)> {
    if centers.is_empty() {
        return Err(Error::EmptyInput("no class centers".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut sims = Vec::with_capacity(centers.len());
    for (label, center) in centers.iter() {
        let s = cosine_similarity(z, center)?;
        sims.push(s);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((label, s));
        }
    }
    let probs = softmax(&sims, temperature)?;
    Ok((best.map(|(l, _)| l).unwrap_or_default(), probs))
}

/// Linear classifier `W z + b` with `W: classes × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl LinearProbe {
    /// Uniform `[-1/√dim, 1/√dim]` initialization.
    pub fn new<R: Rng + ?Sized>(classes: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::Config(format!("probe shape {classes}x{dim} must be positive")));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-bound..=bound)).collect::<Vec<f64>>();
        let w = Matrix::from_vec(classes, dim, draw(classes * dim))?;
        let b = draw(classes);
        Ok(Self { w, b })
    }

    pub fn classes(&self) -> usize {
        self.b.len()
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.w.matvec(z)?;
        out.iter_mut().zip(&self.b).for_each(|(o, b)| *o += b);
        Ok(out)
    }

    /// Argmax of the logits; ties go to the lowest label.
    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        let logits = self.logits(z)?;
        Ok(logits
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > logits[best] { i } else { best }))
    }

    /// Mean cross-entropy over `reps`, with gradients for `[W, b]` and for
    /// each representation.
    pub fn loss_and_grads<V: AsRef<[f64]>>(&self, reps: &[V], labels: &[usize]) -> Result<ProbeGrads> {
        let rows = reps.iter().map(|z| self.logits(z.as_ref())).collect::<Result<Vec<_>>>()?;
        let logits = Matrix::from_vec(rows.len(), self.classes(), rows.concat())?;
        let out = cross_entropy_loss(&logits, labels)?;
        let mut gw = Matrix::zeros(self.classes(), self.dim());
        let mut gb = vec![0.0; self.classes()];
        let mut reps_grad = Vec::with_capacity(reps.len());
        for (g, z) in out.grads.iter().zip(reps) {
            gw.add_outer(g, z.as_ref(), 1.0);
            gb.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            reps_grad.push(self.w.matvec_transposed(g)?);
        }
        Ok(ProbeGrads {
            value: out.value,
            params: vec![gw.as_slice().to_vec(), gb],
            reps: reps_grad,
        })
    }

    pub fn param_blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("head_w", self.w.as_mut_slice()), ("head_b", &mut self.b)]
    }

    pub fn block_sizes(&self) -> [usize; 2] {
        [self.w.as_slice().len(), self.b.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrads {
    pub value: f64,
    /// Gradients for `[W, b]`, flattened row-major.
    pub params: Vec<Vec<f64>>,
    pub reps: Vec<Vec<f64>>,
}

/// Full-batch cross-entropy training of a probe on frozen representations.
/// Zero iterations returns the seeded initialization unchanged.
pub fn train_linear_probe<V: AsRef<[f64]>, R: Rng + ?Sized>(
    reps: &[V],
    labels: &[usize],
    classes: usize,
    iterations: usize,
    opt: &OptimizerConfig,
    rng: &mut R,
) -> Result<LinearProbe> {
    opt.validate()?;
    let dim = reps
        .first()
        .map(|z| z.as_ref().len())
        .ok_or_else(|| Error::EmptyInput("no representations for the probe".into()))?;
    let mut probe = LinearProbe::new(classes, dim, rng)?;
    let mut state = AdamState::new(probe.block_sizes());
    let schedule = CosineSchedule {
        peak: opt.lr,
        floor: opt.lr_floor,
        total_steps: iterations as u64,
    };
    for step in 0..iterations {
        let grads = probe.loss_and_grads(reps, labels)?;
        optimizer_step(&mut probe.param_blocks_mut(), &grads.params, &mut state, schedule.lr_at(step as u64), opt)?;
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::class_centers;
    use crate::numerics::{finite_difference_gradient, gradient_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn centers(list: &[(usize, Vec<f64>)]) -> ClassCenters {
        let c: BTreeMap<usize, Vec<f64>> = list.iter().cloned().collect();
        let n = c.keys().map(|&k| (k, 1)).collect();
        ClassCenters::from_parts(c, n)
    }

    #[test]
    fn center_match_examples() {
        let c = centers(&[(0, vec![1.0, 0.0, 0.0]), (1, vec![0.0, 1.0, 0.0]), (2, vec![0.0, 0.0, 1.0])]);
        let (label, probs) = predict_center_match(&[0.0, 1.0, 0.0], &c, 0.1).unwrap();
        assert_eq!(label, 1);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs[1] > probs[0] && probs[1] > probs[2]);

        let c = centers(&[(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])]);
        assert_eq!(predict_center_match(&[1.0, 1.0], &c, 0.1).unwrap().0, 0);
        let c = centers(&[(3, vec![1.0, 0.0]), (7, vec![0.0, 1.0])]);
        assert_eq!(predict_center_match(&[0.5, 0.5], &c, 0.1).unwrap().0, 3);
        assert!(predict_center_match(&[0.0, 0.0], &c, 0.1).is_err());
        assert!(predict_center_match(&[1.0, 0.0], &centers(&[]), 0.1).is_err());
    }

    #[test]
    fn center_match_agrees_with_exhaustive_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let list: Vec<(usize, Vec<f64>)> = (0..5)
            .map(|l| (l * 2, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let c = centers(&list);
        for _ in 0..1000 {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for (label, center) in &list {
                let cos = crate::numerics::dot(&z, center) / (crate::numerics::norm(&z) * crate::numerics::norm(center));
                if cos > best.1 {
                    best = (*label, cos);
                }
            }
            assert_eq!(predict_center_match(&z, &c, 0.1).unwrap().0, best.0);
        }
    }

    #[test]
    fn probe_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let probe = LinearProbe::new(3, 4, &mut rng).unwrap();
        let reps: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = [0, 1, 2, 2, 1, 0];
        let grads = probe.loss_and_grads(&reps, &labels).unwrap();
        let flat: Vec<f64> = [probe.w.as_slice(), &probe.b].concat();
        let numeric = finite_difference_gradient(
            |p| {
                let q = LinearProbe {
                    w: Matrix::from_vec(3, 4, p[..12].to_vec()).unwrap(),
                    b: p[12..].to_vec(),
                };
                q.loss_and_grads(&reps, &labels).unwrap().value
            },
            &flat,
            1e-6,
        )
        .unwrap();
        assert!(gradient_relative_error(&grads.params.concat(), &numeric) <= 1e-6);

        let flat_reps = reps.concat();
        let numeric = finite_difference_gradient(
            |p| {
                let rs: Vec<Vec<f64>> = p.chunks(4).map(<[f64]>::to_vec).collect();
                probe.loss_and_grads(&rs, &labels).unwrap().value
            },
            &flat_reps,
            1e-6,
        )
        .unwrap();
        assert!(gradient_relative_error(&grads.reps.concat(), &numeric) <= 1e-6);
    }

    #[test]
    fn probe_separates_two_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut reps = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let label = i % 2;
            let offset = if label == 0 { -1.0 } else { 1.0 };
            reps.push(vec![offset + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]);
            labels.push(label);
        }
        let opt = OptimizerConfig {
            lr: 0.05,
            weight_decay: 0.0,
            ..Default::default()
        };
        let probe = train_linear_probe(&reps, &labels, 2, 300, &opt, &mut rng).unwrap();
        let correct = reps
            .iter()
            .zip(&labels)
            .filter(|(z, &l)| probe.predict(z).unwrap() == l)
            .count();
        assert_eq!(correct, reps.len());
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let reps = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let opt = OptimizerConfig::default();
        let a = train_linear_probe(&reps, &[0, 1], 2, 0, &opt, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = LinearProbe::new(2, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centers_from_fit_model_classify_training_points() {
        let reps = vec![vec![1.0, 0.1], vec![0.9, -0.1], vec![-0.1, 1.0], vec![0.1, 0.8]];
        let labels = [0, 0, 1, 1];
        let c = class_centers(&reps, &labels).unwrap();
        for (z, &l) in reps.iter().zip(&labels) {
            assert_eq!(predict_center_match(z, &c, 0.1).unwrap().0, l);
        }
    }
}
