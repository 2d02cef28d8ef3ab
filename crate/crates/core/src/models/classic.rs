//! SVD-based structural correspondence learning.
//!
//! One linear predictor per pivot is fit from the non-pivot features; the
//! predictors' weight vectors form the columns of `W` (non-pivot × p) and
//! the top `k` left singular vectors of `W` give the projection `Θ`. The
//! classifier sees `[x, Θᵀ x_nonpivot]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featurize::{DesignMatrix, SparseVector};
use crate::models::config::ClassicSclConfig;
use crate::models::joint::{pivots_from_checkpoint, pivots_tensor, Prediction};
use crate::models::logreg::{train_logreg, FeatureRow, LogRegModel};
use crate::neural::{truncated_svd, Checkpoint, DenseMatrix};
use crate::pivot::PivotSet;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicSclModel {
    /// Non-pivot feature indices, ascending; row `r` of `theta` belongs to
    /// `nonpivot[r]`.
    pub nonpivot: Vec<usize>,
    pub theta: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub classifier: LogRegModel,
    pub pivots: PivotSet,
    pub input_dim: usize,
}

impl ClassicSclModel {
    /// `Θᵀ x_nonpivot`.
    pub fn project(&self, x: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.theta.cols];
        for &i in &x.indices {
            if let Ok(r) = self.nonpivot.binary_search(&i) {
                for (o, &t) in out.iter_mut().zip(self.theta.row(r)) {
                    *o += t;
                }
            }
        }
        out
    }

    pub fn features(&self, x: &SparseVector) -> FeatureRow {
        FeatureRow::augmented(x, self.input_dim, &self.project(x))
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Prediction> {
        if x.dim != self.input_dim {
            return Err(Error::Shape(format!("input dim {} != {}", x.dim, self.input_dim)));
        }
        Ok(Prediction::from_probability(self.classifier.predict_proba(&self.features(x))))
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let mut ck = Checkpoint::new("classic_scl", seed)
            .with_meta("n", self.input_dim)
            .with_meta("pivot_strategy", self.pivots.strategy)
            .with_meta("pivot_seed", self.pivots.seed)
            .with_meta("candidate_min_df", self.pivots.candidate_min_df)
            .with_meta("best_epoch", self.classifier.best_epoch);
        ck.push("theta", self.theta.clone());
        ck.push(
            "singular_values",
            DenseMatrix::from_vec(1, self.singular_values.len(), self.singular_values.clone()).unwrap(),
        );
        ck.push("pivot_indices", pivots_tensor(&self.pivots));
        for (name, m) in self.classifier.to_checkpoint("", seed).tensors {
            ck.push(&format!("clf.{name}"), m);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "classic_scl" {
            return Err(Error::Checkpoint(format!("expected a classic_scl model, found `{}`", ck.kind)));
        }
        let input_dim: usize = ck
            .meta("n")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad `n`".into()))?;
        let pivots = pivots_from_checkpoint(ck)?;
        let mask = pivots.mask(input_dim);
        Ok(ClassicSclModel {
            nonpivot: (0..input_dim).filter(|&i| !mask[i]).collect(),
            theta: ck.tensor("theta")?.clone(),
            singular_values: ck.tensor("singular_values")?.data.clone(),
            classifier: LogRegModel::from_checkpoint(ck, "clf.")?,
            pivots,
            input_dim,
        })
    }
}

fn nonpivot_row(x: &SparseVector, nonpivot: &[usize]) -> FeatureRow {
    let indices: Vec<usize> = x
        .indices
        .iter()
        .filter_map(|i| nonpivot.binary_search(i).ok())
        .collect();
    let values = vec![1.0; indices.len()];
    FeatureRow { indices, values }
}

/// Fits the pivot predictors and stacks their weights into `W`.
pub fn pivot_predictor_matrix(
    rows: &[&SparseVector],
    pivots: &PivotSet,
    nonpivot: &[usize],
    cfg: &ClassicSclConfig,
) -> Result<DenseMatrix> {
    let inputs: Vec<FeatureRow> = rows.iter().map(|x| nonpivot_row(x, nonpivot)).collect();
    let columns: Vec<Vec<f64>> = pivots
        .indices
        .par_iter()
        .enumerate()
        .map(|(j, &pivot)| {
            let targets: Vec<f64> = rows.iter().map(|x| if x.contains(pivot) { 1.0 } else { 0.0 }).collect();
            let mut pcfg = cfg.predictor.clone();
            pcfg.seed = cfg.predictor.seed.wrapping_add(j as u64);
            train_logreg(&inputs, &targets, None, nonpivot.len(), &pcfg).map(|m| m.w)
        })
        .collect::<Result<_>>()?;
    let dead: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, w)| w.iter().all(|&v| v == 0.0))
        .map(|(j, _)| j)
        .collect();
    if !dead.is_empty() && dead.len() == columns.len() {
        return Err(Error::Degenerate(format!(
            "all pivot predictors have zero weights (pivots {dead:?})"
        )));
    }
    if !dead.is_empty() {
        log::warn!("pivot predictors {dead:?} learned zero weights");
    }
    Ok(DenseMatrix::from_fn(nonpivot.len(), columns.len(), |r, c| columns[c][r]))
}

pub fn train_classic_scl(
    source_train: &DesignMatrix,
    source_val: &DesignMatrix,
    unlabeled: &DesignMatrix,
    pivots: &PivotSet,
    cfg: &ClassicSclConfig,
    seed: u64,
) -> Result<ClassicSclModel> {
    if cfg.k > pivots.len() {
        return Err(Error::InvalidArgument(format!("k = {} exceeds {} pivots", cfg.k, pivots.len())));
    }
    let labels = |m: &DesignMatrix| -> Result<Vec<f64>> {
        m.labels
            .as_ref()
            .map(|l| l.iter().map(|&y| f64::from(y)).collect())
            .ok_or_else(|| Error::MissingLabels("classic SCL classifier needs labels".into()))
    };
    let train_targets = labels(source_train)?;
    let n = source_train.dim;
    let mask = pivots.mask(n);
    let nonpivot: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let rows: Vec<&SparseVector> = source_train.rows.iter().chain(&unlabeled.rows).collect();
    let mut pcfg = cfg.clone();
    pcfg.predictor.seed = seed;
    let w = pivot_predictor_matrix(&rows, pivots, &nonpivot, &pcfg)?;
    let svd = truncated_svd(&w, cfg.k)?;

    let mut model = ClassicSclModel {
        nonpivot,
        theta: svd.theta,
        singular_values: svd.singular_values,
        classifier: LogRegModel::zeros(0),
        pivots: pivots.clone(),
        input_dim: n,
    };
    let k = model.theta.cols;
    let train_rows: Vec<FeatureRow> = source_train.rows.iter().map(|x| model.features(x)).collect();
    let val_rows: Vec<FeatureRow> = source_val.rows.iter().map(|x| model.features(x)).collect();
    let val_targets = if source_val.is_empty() { Vec::new() } else { labels(source_val)? };
    let mut ccfg = cfg.classifier.clone();
    ccfg.seed = seed;
    model.classifier = train_logreg(
        &train_rows,
        &train_targets,
        Some((&val_rows, &val_targets)),
        n + k,
        &ccfg,
    )?;
    Ok(model)
}
