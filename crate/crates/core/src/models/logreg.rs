//! L2-regularized logistic regression trained with Adam.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::featurize::SparseVector;
use crate::models::config::LogRegConfig;
use crate::neural::activation::{bce_unchecked, sigmoid};
use crate::neural::{adam_step, AdamState, Checkpoint, DenseMatrix};
use crate::rng;

/// Sparse real-valued row. Binary bag-of-n-grams rows, optionally with
/// dense extra features appended after the vocabulary block.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl FeatureRow {
    pub fn binary(x: &SparseVector) -> Self {
        FeatureRow {
            indices: x.indices.clone(),
            values: x.values.clone(),
        }
    }

    /// `[x, extra]`: `extra[j]` lands at column `offset + j`.
    pub fn augmented(x: &SparseVector, offset: usize, extra: &[f64]) -> Self {
        let mut row = FeatureRow::binary(x);
        for (j, &v) in extra.iter().enumerate() {
            row.indices.push(offset + j);
            row.values.push(v);
        }
        row
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| w[i] * v)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel {
    pub w: Vec<f64>,
    pub bias: f64,
    pub best_epoch: usize,
    /// Per-epoch validation loss; empty when trained without validation.
    pub validation_curve: Vec<f64>,
}

impl LogRegModel {
    pub fn zeros(dim: usize) -> Self {
        LogRegModel {
            w: vec![0.0; dim],
            bias: 0.0,
            best_epoch: 0,
            validation_curve: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn predict_proba(&self, row: &FeatureRow) -> f64 {
        sigmoid(row.dot(&self.w) + self.bias)
    }

    pub fn predict(&self, row: &FeatureRow) -> u8 {
        u8::from(self.predict_proba(row) >= 0.5)
    }

    pub fn to_checkpoint(&self, kind: &str, seed: u64) -> Checkpoint {
        let mut ck = Checkpoint::new(kind, seed).with_meta("best_epoch", self.best_epoch);
        ck.push("w", DenseMatrix::from_vec(1, self.w.len(), self.w.clone()).unwrap());
        ck.push("bias", DenseMatrix::from_vec(1, 1, vec![self.bias]).unwrap());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let w = ck.tensor(&format!("{prefix}w"))?.data.clone();
        let bias = ck.tensor(&format!("{prefix}bias"))?.data[0];
        Ok(LogRegModel {
            w,
            bias,
            best_epoch: ck.meta.get("best_epoch").and_then(|v| v.parse().ok()).unwrap_or(0),
            validation_curve: Vec::new(),
        })
    }
}

/// Sum of BCE over the rows plus `l2 · ½‖w‖²` (bias unregularized).
pub fn logreg_loss(model: &LogRegModel, rows: &[FeatureRow], targets: &[f64], l2: f64) -> f64 {
    let data: f64 = rows
        .iter()
        .zip(targets)
        .map(|(r, &t)| bce_unchecked(model.predict_proba(r), t))
        .sum();
    data + l2 * 0.5 * model.w.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logreg_loss`], flattened as `[w..., bias]`.
pub fn logreg_gradient(model: &LogRegModel, rows: &[FeatureRow], targets: &[f64], l2: f64) -> Vec<f64> {
    gradient_of(model, rows.iter().zip(targets.iter().copied()), l2)
}

fn gradient_of<'a>(
    model: &LogRegModel,
    pairs: impl Iterator<Item = (&'a FeatureRow, f64)>,
    l2: f64,
) -> Vec<f64> {
    let mut g: Vec<f64> = model.w.iter().map(|w| l2 * w).collect();
    g.push(0.0);
    let dim = model.w.len();
    for (r, t) in pairs {
        let delta = model.predict_proba(r) - t;
        for (&i, &v) in r.indices.iter().zip(&r.values) {
            g[i] += delta * v;
        }
        g[dim] += delta;
    }
    g
}

fn mean_bce(model: &LogRegModel, rows: &[FeatureRow], targets: &[f64]) -> f64 {
    logreg_loss(model, rows, targets, 0.0) / rows.len().max(1) as f64
}

/// Trains on `targets` in `[0, 1]`. With a validation set the epoch with the
/// lowest mean validation BCE is returned (first on ties); without one the
/// final epoch is.
pub fn train_logreg(
    train: &[FeatureRow],
    targets: &[f64],
    validation: Option<(&[FeatureRow], &[f64])>,
    dim: usize,
    cfg: &LogRegConfig,
) -> Result<LogRegModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Size("logistic regression needs training rows".into()));
    }
    if train.len() != targets.len() {
        return Err(Error::Shape(format!("{} rows, {} targets", train.len(), targets.len())));
    }
    if let Some(&i) = train.iter().flat_map(|r| &r.indices).find(|&&i| i >= dim) {
        return Err(Error::Shape(format!("feature {i} outside dim {dim}")));
    }
    let mut model = LogRegModel::zeros(dim);
    let mut state = AdamState::new(dim + 1, crate::neural::AdamConfig::with_lr(cfg.lr));
    let mut rng = rng::rng_for(cfg.seed, "logreg-shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, LogRegModel)> = None;
    let mut curve = Vec::new();
    let mut params = vec![0.0; dim + 1];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let g = gradient_of(&model, chunk.iter().map(|&i| (&train[i], targets[i])), cfg.l2);
            params[..dim].copy_from_slice(&model.w);
            params[dim] = model.bias;
            adam_step(&mut params, &g, &mut state)?;
            model.w.copy_from_slice(&params[..dim]);
            model.bias = params[dim];
        }
        if let Some((vrows, vt)) = validation.filter(|(r, _)| !r.is_empty()) {
            let loss = mean_bce(&model, vrows, vt);
            curve.push(loss);
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                let mut snap = model.clone();
                snap.best_epoch = epoch;
                best = Some((loss, snap));
            }
        }
    }
    let mut out = match best {
        Some((_, m)) => m,
        None => {
            model.best_epoch = cfg.epochs - 1;
            model
        }
    };
    out.validation_curve = curve;
    Ok(out)
}
