use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Activation, AdamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMetric {
    /// Mean task BCE on the held-out source rows.
    TaskBce,
    /// Mean joint loss (task + λ·pivot) on the held-out rows, without the
    /// regularizer.
    JointLoss,
}

/// Joint model hyperparameters. Defaults are the published settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden size `d`.
    pub hidden: usize,
    /// Pivot count `p`.
    pub pivots: usize,
    pub lambda: f64,
    pub rho: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mask_pivots_in_input: bool,
    pub validation_metric: ValidationMetric,
    pub use_bias: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 2000,
            pivots: 100,
            lambda: 100.0,
            rho: 0.1,
            lr: 0.001,
            epochs: 30,
            batch_size: 50,
            seed: 0,
            mask_pivots_in_input: false,
            validation_metric: ValidationMetric::TaskBce,
            use_bias: false,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("pivots", self.pivots),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if !(self.lambda >= 0.0 && self.rho >= 0.0) {
            return Err(Error::InvalidArgument("lambda and rho must be non-negative".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Logistic regression on (possibly augmented) features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lr: 0.01,
            l2: 0.01,
            epochs: 30,
            batch_size: 50,
            seed: 0,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("logreg epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.l2 >= 0.0) {
            return Err(Error::InvalidArgument("logreg needs lr > 0 and l2 >= 0".into()));
        }
        Ok(())
    }
}

/// AE-SCL: pivot predictor over non-pivot inputs, then logistic regression
/// on `[x, h]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSclConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub lr: f64,
    pub rho: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub classifier: LogRegConfig,
}

impl Default for AeSclConfig {
    fn default() -> Self {
        AeSclConfig {
            hidden: 100,
            activation: Activation::Sigmoid,
            lr: 0.001,
            rho: 0.0,
            epochs: 30,
            batch_size: 50,
            classifier: LogRegConfig::default(),
        }
    }
}

/// SVD-based SCL: linear pivot predictors, top-`k` left singular vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicSclConfig {
    pub k: usize,
    pub predictor: LogRegConfig,
    pub classifier: LogRegConfig,
}

impl Default for ClassicSclConfig {
    fn default() -> Self {
        ClassicSclConfig {
            k: 50,
            predictor: LogRegConfig {
                epochs: 5,
                ..LogRegConfig::default()
            },
            classifier: LogRegConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_published_values() {
        let c = TrainConfig::default();
        assert_eq!((c.hidden, c.pivots, c.epochs, c.batch_size), (2000, 100, 30, 50));
        assert_eq!((c.lambda, c.rho, c.lr), (100.0, 0.1, 0.001));
        c.validate().unwrap();
        assert!(TrainConfig { epochs: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { rho: -1.0, ..c }.validate().is_err());
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"hidden": 8, "seed": 3}"#).unwrap();
        assert_eq!(c.hidden, 8);
        assert_eq!(c.lambda, 100.0);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"hiden": 8}"#).is_err());
    }
}
