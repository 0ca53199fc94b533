//! AdamW with a half-cosine learning-rate schedule.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Peak learning rate, reached at step 0.
    pub lr: f64,
    /// Decoupled weight decay coefficient.
    pub weight_decay: f64,
    /// Learning rate at and after the last planned step.
    pub lr_floor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 3e-3,
            weight_decay: 0.01,
            lr_floor: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..=self.lr).contains(&self.lr_floor)
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// `floor + (peak − floor) · (1 + cos(π · min(step, total) / total)) / 2`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineSchedule {
    pub peak: f64,
    pub floor: f64,
    pub total_steps: u64,
}

impl CosineSchedule {
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return self.floor;
        }
        let progress = step.min(self.total_steps) as f64 / self.total_steps as f64;
        self.floor + 0.5 * (self.peak - self.floor) * (1.0 + (PI * progress).cos())
    }
}

/// First and second moment estimates, one buffer per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(block_sizes: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<f64>> = block_sizes.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One AdamW update at learning rate `lr`. All gradients are checked before
/// any parameter is touched, so a failed step leaves parameters and state
/// unchanged.
pub fn optimizer_step(
    params: &mut [(&'static str, &mut [f64])],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    for ((name, p), (g, m)) in params.iter().zip(grads.iter().zip(&state.m)) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: g.len(),
            }
            .context(format!("parameter block {name}")));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of parameter block {name}")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((_, p), g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
            p[i] -= lr * (update + cfg.weight_decay * p[i]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = CosineSchedule {
            peak: 1e-2,
            floor: 1e-4,
            total_steps: 100,
        };
        assert_eq!(s.lr_at(0), 1e-2);
        assert!((s.lr_at(50) - (1e-4 + 0.5 * (1e-2 - 1e-4))).abs() < 1e-15);
        assert!((s.lr_at(100) - 1e-4).abs() < 1e-18);
        assert_eq!(s.lr_at(100), s.lr_at(1000));
        let mut prev = f64::INFINITY;
        for step in 0..=100 {
            let lr = s.lr_at(step);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn zero_gradients_without_decay_leave_params() {
        let cfg = OptimizerConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut a = vec![1.0, -2.0, 3.5];
        let before = a.clone();
        let mut state = AdamState::new([3]);
        for _ in 0..5 {
            optimizer_step(&mut [("a", &mut a)], &[vec![0.0; 3]], &mut state, 0.1, &cfg).unwrap();
        }
        assert_eq!(a, before);
        assert_eq!(state.steps(), 5);
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let cfg = OptimizerConfig {
            weight_decay: 0.5,
            ..Default::default()
        };
        let mut a = vec![2.0];
        let mut state = AdamState::new([1]);
        optimizer_step(&mut [("a", &mut a)], &[vec![0.0]], &mut state, 0.1, &cfg).unwrap();
        assert!((a[0] - 2.0 * (1.0 - 0.1 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // bias correction makes the first update exactly lr · sign(g)
        let cfg = OptimizerConfig {
            weight_decay: 0.0,
            eps: 0.0,
            ..Default::default()
        };
        let mut a = vec![0.0, 0.0];
        let mut state = AdamState::new([2]);
        optimizer_step(&mut [("a", &mut a)], &[vec![3.0, -0.01]], &mut state, 0.05, &cfg).unwrap();
        assert!((a[0] + 0.05).abs() < 1e-15);
        assert!((a[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn scalar_quadratic_converges() {
        let cfg = OptimizerConfig {
            lr: 0.2,
            weight_decay: 0.0,
            lr_floor: 0.0,
            ..Default::default()
        };
        let schedule = CosineSchedule {
            peak: cfg.lr,
            floor: cfg.lr_floor,
            total_steps: 200,
        };
        let target = 3.0;
        let mut x = vec![-1.0];
        let mut state = AdamState::new([1]);
        for step in 0..200 {
            let g = vec![2.0 * (x[0] - target)];
            optimizer_step(&mut [("x", &mut x)], &[g], &mut state, schedule.lr_at(step), &cfg).unwrap();
        }
        assert!((x[0] - target).abs() <= 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let cfg = OptimizerConfig::default();
        let mut a = vec![1.0];
        let mut b = vec![1.0, 2.0];
        let mut state = AdamState::new([1, 2]);
        let err = optimizer_step(
            &mut [("w1", &mut a), ("b1", &mut b)],
            &[vec![0.5], vec![f64::NAN, 0.0]],
            &mut state,
            0.1,
            &cfg,
        )
        .unwrap_err();
        assert!(err.to_string().contains("b1"));
        assert_eq!(a, vec![1.0]);
        assert_eq!(state.steps(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        for bad in [
            OptimizerConfig { lr: 0.0, ..Default::default() },
            OptimizerConfig { lr_floor: 1.0, ..Default::default() },
            OptimizerConfig { beta2: 1.0, ..Default::default() },
            OptimizerConfig { weight_decay: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
