use serde::{Deserialize, Serialize};

use super::{Gradients, LrSchedule, Network};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
}

impl OptimizerConfig {
    /// SGD with momentum 0.9 and the 40/60/80 step decay.
    pub fn sgd_momentum(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::SgdMomentum,
            learning_rate,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: LrSchedule::step_decay(),
        }
    }

    /// Adam with the usual (0.9, 0.999, 1e-8) constants and a constant rate.
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: LrSchedule::constant(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config("adam eps must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Optimizer state: hyperparameters plus per-parameter moment buffers.
///
/// Buffers start at zero and are created on the first step with the shapes of
/// the parameters they track.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    learning_rate: f64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            learning_rate: config.learning_rate,
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    /// Applies the schedule for `epoch` to the base rate.
    pub fn start_epoch(&mut self, epoch: usize) {
        self.learning_rate = self.config.schedule.lr_at(self.config.learning_rate, epoch);
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let grads: Vec<&Matrix> = grads.matrices().collect();
        let mut params: Vec<&mut Matrix> = net.params_mut().collect();
        self.step_params(&mut params, &grads)
    }

    /// Updates `params` in place from `grads`, matched by position.
    pub fn step_params(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameters vs {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if self.first.is_empty() {
            self.first = params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect();
            if self.config.kind == OptimizerKind::Adam {
                self.second = self.first.clone();
            }
        } else if self.first.len() != params.len()
            || self
                .first
                .iter()
                .zip(params.iter())
                .any(|(b, p)| b.shape() != p.shape())
        {
            return Err(Error::Shape(
                "parameter shapes changed since the first step".into(),
            ));
        }
        self.steps += 1;
        let lr = self.learning_rate;
        match self.config.kind {
            OptimizerKind::SgdMomentum => {
                // v ← μ v + g ;  θ ← θ − lr v
                let mu = self.config.momentum;
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((pv, gv), vv) in p
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(v.as_mut_slice())
                    {
                        *vv = mu * *vv + gv;
                        *pv -= lr * *vv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.eps);
                let t = self.steps as i32;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((pv, gv), mv), vv) in p
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice())
                        .zip(v.as_mut_slice())
                    {
                        *mv = b1 * *mv + (1.0 - b1) * gv;
                        *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn run(opt: &mut Optimizer, p: &mut Matrix, g: &Matrix) {
        opt.step_params(&mut [p], &[g]).unwrap();
    }

    #[test]
    fn zero_gradient_sgd_is_noop() {
        let mut opt = Optimizer::new(OptimizerConfig::sgd_momentum(0.001)).unwrap();
        let mut p = Matrix::from_rows(&[[1.0, -2.0]]).unwrap();
        let before = p.clone();
        run(&mut opt, &mut p, &Matrix::zeros(1, 2));
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_momentum_unrolls() {
        let mut opt = Optimizer::new(OptimizerConfig::sgd_momentum(0.001)).unwrap();
        let mut p = Matrix::zeros(1, 1);
        let g = Matrix::filled(1, 1, 1.0);
        run(&mut opt, &mut p, &g);
        run(&mut opt, &mut p, &g);
        assert_abs_diff_eq!(p.get(0, 0), -0.0029, epsilon = 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3, 0.5, -7.0, 250.0] {
            let mut opt = Optimizer::new(OptimizerConfig::adam(0.001)).unwrap();
            let mut p = Matrix::filled(1, 1, 3.0);
            run(&mut opt, &mut p, &Matrix::filled(1, 1, g));
            let moved = 3.0 - p.get(0, 0);
            assert_abs_diff_eq!(moved.abs(), 0.001, epsilon = 1e-6);
            assert_eq!(moved.signum(), g.signum());
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut opt = Optimizer::new(OptimizerConfig::adam(0.001)).unwrap();
        let mut p = Matrix::zeros(2, 2);
        assert!(opt
            .step_params(&mut [&mut p], &[&Matrix::zeros(1, 2)])
            .is_err());
    }

    #[test]
    fn schedule_applies_per_epoch() {
        let mut opt = Optimizer::new(OptimizerConfig::sgd_momentum(0.001)).unwrap();
        opt.start_epoch(61);
        assert_abs_diff_eq!(opt.learning_rate(), 1e-5, epsilon = 1e-18);
    }
}
