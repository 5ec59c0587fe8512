//! Adam with a reduce-on-plateau learning-rate schedule.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub initial_lr: f64,
    /// Iterations without improvement before the learning rate is decayed.
    pub plateau_patience: usize,
    pub lr_decay: f64,
    pub max_iters: usize,
    /// Optimization stops once the learning rate falls below this.
    pub min_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            initial_lr: 0.1,
            plateau_patience: 10,
            lr_decay: 0.1,
            max_iters: 200,
            min_lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_lr", self.initial_lr),
            ("min_lr", self.min_lr),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(Error::InvalidArgument("lr_decay must lie in (0, 1)".into()));
        }
        if self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(Error::InvalidArgument("Adam betas must be below 1".into()));
        }
        if self.plateau_patience == 0 {
            return Err(Error::InvalidArgument("plateau_patience must be positive".into()));
        }
        Ok(())
    }
}

/// Adam state for minimizing a loss.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &OptimizerConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }

    /// One descent step along `grad` (the gradient of the loss).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Multiplies the learning rate by `decay` after `patience` consecutive
/// observations that do not improve the best loss by more than `threshold`.
#[derive(Debug, Clone)]
pub(crate) struct Plateau {
    lr: f64,
    best: f64,
    stale: usize,
    patience: usize,
    decay: f64,
    threshold: f64,
}

impl Plateau {
    pub fn new(cfg: &OptimizerConfig, threshold: f64) -> Self {
        Plateau {
            lr: cfg.initial_lr,
            best: f64::INFINITY,
            stale: 0,
            patience: cfg.plateau_patience,
            decay: cfg.lr_decay,
            threshold,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn observe(&mut self, loss: f64) {
        if loss < self.best - self.threshold {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.decay;
                self.stale = 0;
            }
        }
    }

    /// Counts as a full plateau: decays immediately.
    pub fn force_decay(&mut self) {
        self.lr *= self.decay;
        self.stale = 0;
    }
}
