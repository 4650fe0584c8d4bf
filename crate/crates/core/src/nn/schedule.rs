use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant learning rate: multiply by `gamma` at each milestone epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub milestones: Vec<usize>,
    pub gamma: f64,
}

impl LrSchedule {
    pub fn constant() -> Self {
        Self {
            milestones: Vec::new(),
            gamma: 1.0,
        }
    }

    /// Decay by 0.1 at epochs 40, 60 and 80.
    pub fn step_decay() -> Self {
        Self {
            milestones: vec![40, 60, 80],
            gamma: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config("schedule gamma must be positive".into()));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "schedule milestones must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn lr_at(&self, base_lr: f64, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        base_lr * self.gamma.powi(passed as i32)
    }
}

/// Learning rate under the 40/60/80 step decay.
pub fn lr_at_epoch(base_lr: f64, epoch: usize) -> f64 {
    LrSchedule::step_decay().lr_at(base_lr, epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_decay_examples() {
        assert_eq!(lr_at_epoch(0.001, 0), 0.001);
        assert_eq!(lr_at_epoch(0.001, 39), 0.001);
        assert_relative_eq!(lr_at_epoch(0.001, 40), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(lr_at_epoch(0.001, 45), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(lr_at_epoch(0.001, 60), 1e-5, max_relative = 1e-12);
        assert_relative_eq!(lr_at_epoch(0.001, 85), 1e-6, max_relative = 1e-12);
        assert_relative_eq!(lr_at_epoch(0.001, 99), 1e-6, max_relative = 1e-12);
    }

    #[test]
    fn constant_schedule() {
        assert_eq!(LrSchedule::constant().lr_at(0.01, 500), 0.01);
    }

    #[test]
    fn rejects_unsorted_milestones() {
        let s = LrSchedule {
            milestones: vec![60, 40],
            gamma: 0.1,
        };
        assert!(s.validate().is_err());
    }
}
