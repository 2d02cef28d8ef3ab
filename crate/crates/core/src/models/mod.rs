//! The trainable systems: the joint model and its three baselines.

pub mod aescl;
pub mod classic;
pub mod config;
pub mod joint;
pub mod logreg;

pub use aescl::{train_aescl, AeSclModel};
pub use classic::{train_classic_scl, ClassicSclModel};
pub use config::{AeSclConfig, ClassicSclConfig, LogRegConfig, TrainConfig, ValidationMetric};
pub use joint::{predict_joint, train_joint, Prediction, TrainedJointModel};
pub use logreg::{train_logreg, FeatureRow, LogRegModel};

use crate::error::{Error, Result};
use crate::featurize::SparseVector;
use crate::neural::Checkpoint;

/// Any trained system, as stored in a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Joint(TrainedJointModel),
    AeScl(AeSclModel),
    ClassicScl(ClassicSclModel),
    LogReg(LogRegModel),
}

impl TrainedModel {
    pub fn predict(&self, x: &SparseVector) -> Result<Prediction> {
        match self {
            TrainedModel::Joint(m) => predict_joint(m, x),
            TrainedModel::AeScl(m) => m.predict(x),
            TrainedModel::ClassicScl(m) => m.predict(x),
            TrainedModel::LogReg(m) => {
                if x.dim != m.dim() {
                    return Err(Error::Shape(format!("input dim {} != {}", x.dim, m.dim())));
                }
                Ok(Prediction::from_probability(m.predict_proba(&FeatureRow::binary(x))))
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        match self {
            TrainedModel::Joint(m) => m.best_epoch,
            TrainedModel::AeScl(m) => m.classifier.best_epoch,
            TrainedModel::ClassicScl(m) => m.classifier.best_epoch,
            TrainedModel::LogReg(m) => m.best_epoch,
        }
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        match self {
            TrainedModel::Joint(m) => m.to_checkpoint(),
            TrainedModel::AeScl(m) => m.to_checkpoint(seed),
            TrainedModel::ClassicScl(m) => m.to_checkpoint(seed),
            TrainedModel::LogReg(m) => m.to_checkpoint("logreg", seed),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(match ck.kind.as_str() {
            "joint" => TrainedModel::Joint(TrainedJointModel::from_checkpoint(ck)?),
            "aescl" => TrainedModel::AeScl(AeSclModel::from_checkpoint(ck)?),
            "classic_scl" => TrainedModel::ClassicScl(ClassicSclModel::from_checkpoint(ck)?),
            "logreg" => TrainedModel::LogReg(LogRegModel::from_checkpoint(ck, "")?),
            other => return Err(Error::Checkpoint(format!("unknown model kind `{other}`"))),
        })
    }
}
