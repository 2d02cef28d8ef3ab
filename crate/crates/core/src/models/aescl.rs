//! AE-SCL baseline: a pivot predictor over non-pivot inputs is trained
//! first; its frozen hidden layer is then appended to the original features
//! of a logistic regression classifier.

use crate::error::{Error, Result};
use crate::featurize::{DesignMatrix, SparseVector};
use crate::models::config::AeSclConfig;
use crate::models::joint::{
    fit_two_head, net_from_checkpoint, net_to_checkpoint, pivots_from_checkpoint, pivots_tensor,
    Prediction, Selection, TwoHeadOptions,
};
use crate::models::logreg::{train_logreg, FeatureRow, LogRegModel};
use crate::neural::net::hidden;
use crate::neural::{Activation, AdamConfig, Checkpoint, JointModelParams};
use crate::pivot::PivotSet;

#[derive(Clone, Debug, PartialEq)]
pub struct AeSclModel {
    /// Phase-one network; pivot columns are masked from its input and its
    /// task head is unused.
    pub net: JointModelParams,
    pub classifier: LogRegModel,
    pub pivots: PivotSet,
    pub representation_best_epoch: usize,
}

impl AeSclModel {
    pub fn input_dim(&self) -> usize {
        self.net.w_h.cols
    }

    pub fn features(&self, x: &SparseVector) -> FeatureRow {
        let (_, h) = hidden(&self.net, x);
        FeatureRow::augmented(x, self.input_dim(), &h)
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Prediction> {
        if x.dim != self.input_dim() {
            return Err(Error::Shape(format!("input dim {} != {}", x.dim, self.input_dim())));
        }
        Ok(Prediction::from_probability(self.classifier.predict_proba(&self.features(x))))
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let mut ck = Checkpoint::new("aescl", seed)
            .with_meta("activation", serde_json::to_string(&self.net.activation).unwrap())
            .with_meta("pivot_strategy", self.pivots.strategy)
            .with_meta("pivot_seed", self.pivots.seed)
            .with_meta("candidate_min_df", self.pivots.candidate_min_df)
            .with_meta("best_epoch", self.classifier.best_epoch);
        net_to_checkpoint(&mut ck, "rep.", &self.net);
        ck.push("pivot_indices", pivots_tensor(&self.pivots));
        for (name, m) in self.classifier.to_checkpoint("", seed).tensors {
            ck.push(&format!("clf.{name}"), m);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "aescl" {
            return Err(Error::Checkpoint(format!("expected an aescl model, found `{}`", ck.kind)));
        }
        let activation: Activation = serde_json::from_str(ck.meta("activation")?)?;
        let pivots = pivots_from_checkpoint(ck)?;
        let n = ck.tensor("rep.W_h")?.cols;
        let net = net_from_checkpoint(ck, "rep.", activation, Some(pivots.mask(n)))?;
        Ok(AeSclModel {
            net,
            classifier: LogRegModel::from_checkpoint(ck, "clf.")?,
            pivots,
            representation_best_epoch: 0,
        })
    }
}

fn targets(m: &DesignMatrix) -> Result<Vec<f64>> {
    m.labels
        .as_ref()
        .map(|l| l.iter().map(|&y| f64::from(y)).collect())
        .ok_or_else(|| Error::MissingLabels("AE-SCL classifier needs labeled source rows".into()))
}

pub fn train_aescl(
    source_train: &DesignMatrix,
    source_val: &DesignMatrix,
    unlabeled: &DesignMatrix,
    pivots: &PivotSet,
    cfg: &AeSclConfig,
    seed: u64,
) -> Result<AeSclModel> {
    if source_train.is_empty() {
        return Err(Error::Size("no labeled training rows".into()));
    }
    // phase 1: every available row is pivot-prediction data
    let pool = DesignMatrix::concat(&[&source_train.unlabeled(), unlabeled])?;
    let opts = TwoHeadOptions {
        hidden: cfg.hidden,
        activation: cfg.activation,
        lambda: 1.0,
        rho: cfg.rho,
        adam: AdamConfig::with_lr(cfg.lr),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed,
        mask_pivots: true,
        use_bias: true,
        selection: Selection::PivotBce,
    };
    let empty = DesignMatrix::new(Vec::new(), Some(Vec::new()), source_train.dim)?;
    let fit = fit_two_head(&empty, &source_val.unlabeled(), &pool, pivots, &opts)?;

    // phase 2: logistic regression on [x, h(x)]
    let n = source_train.dim;
    let mut model = AeSclModel {
        net: fit.params,
        classifier: LogRegModel::zeros(0),
        pivots: pivots.clone(),
        representation_best_epoch: fit.best_epoch,
    };
    let train_rows: Vec<FeatureRow> = source_train.rows.iter().map(|x| model.features(x)).collect();
    let val_rows: Vec<FeatureRow> = source_val.rows.iter().map(|x| model.features(x)).collect();
    let mut clf_cfg = cfg.classifier.clone();
    clf_cfg.seed = seed;
    model.classifier = train_logreg(
        &train_rows,
        &targets(source_train)?,
        Some((&val_rows, &targets(source_val)?)),
        n + cfg.hidden,
        &clf_cfg,
    )?;
    Ok(model)
}
