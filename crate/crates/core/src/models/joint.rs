//! Joint training of the shared representation, task head and pivot head.
//!
//! Each epoch shuffles the labeled source rows and the unlabeled rows
//! independently and feeds their mini-batches strictly alternately
//! (labeled, unlabeled, labeled, ...); once one stream runs out the other
//! finishes on its own. Labeled batches carry the task loss plus the
//! weighted pivot loss, unlabeled batches only the pivot loss; both add the
//! regularizer once. After every epoch the model is scored on held-out
//! source rows and the best snapshot is kept.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::featurize::{DesignMatrix, SparseVector};
use crate::models::config::{TrainConfig, ValidationMetric};
use crate::neural::activation::bce_unchecked;
use crate::neural::{
    apply_adam, forward, init_weights, joint_gradients_with, Activation, AdamConfig, AdamState,
    Biases, Checkpoint, DenseMatrix, Example, JointModelParams, NetDims, Workspace,
};
use crate::pivot::{PivotSet, PivotStrategy};
use crate::rng;

/// What the per-epoch held-out score measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Selection {
    TaskBce,
    JointLoss,
    PivotBce,
}

/// Everything the generic two-head trainer needs.
#[derive(Clone, Debug)]
pub(crate) struct TwoHeadOptions {
    pub hidden: usize,
    pub activation: Activation,
    pub lambda: f64,
    pub rho: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mask_pivots: bool,
    pub use_bias: bool,
    pub selection: Selection,
}

pub(crate) struct TwoHeadFit {
    pub params: JointModelParams,
    pub best_epoch: usize,
    pub validation_curve: Vec<f64>,
}

fn examples(m: &DesignMatrix, with_labels: bool) -> Vec<Example<'_>> {
    m.rows
        .iter()
        .enumerate()
        .map(|(i, x)| Example {
            x,
            label: if with_labels {
                m.labels.as_ref().map(|l| l[i])
            } else {
                None
            },
        })
        .collect()
}

fn held_out_score(params: &JointModelParams, rows: &[Example<'_>], pivots: &PivotSet, opts: &TwoHeadOptions) -> f64 {
    let mut total = 0.0;
    for ex in rows {
        let f = forward(params, ex.x).expect("dims checked before training");
        let task = ex.label.map_or(0.0, |y| bce_unchecked(f.y_task, f64::from(y)));
        let pivot = || -> f64 {
            f.y_pivot
                .iter()
                .zip(pivots.targets(ex.x))
                .map(|(&p, t)| bce_unchecked(p, t))
                .sum()
        };
        total += match opts.selection {
            Selection::TaskBce => task,
            Selection::JointLoss => task + opts.lambda * pivot(),
            Selection::PivotBce => pivot(),
        };
    }
    total / rows.len() as f64
}

/// Builds the alternating batch schedule for one epoch.
pub(crate) fn interleave<T: Copy>(labeled: &[T], unlabeled: &[T], batch: usize) -> Vec<(bool, Vec<T>)> {
    let mut l = labeled.chunks(batch);
    let mut u = unlabeled.chunks(batch);
    let mut out = Vec::new();
    loop {
        let a = l.next();
        let b = u.next();
        if a.is_none() && b.is_none() {
            break;
        }
        if let Some(c) = a {
            out.push((true, c.to_vec()));
        }
        if let Some(c) = b {
            out.push((false, c.to_vec()));
        }
    }
    out
}

pub(crate) fn fit_two_head(
    labeled: &DesignMatrix,
    validation: &DesignMatrix,
    unlabeled: &DesignMatrix,
    pivots: &PivotSet,
    opts: &TwoHeadOptions,
) -> Result<TwoHeadFit> {
    let n = labeled.dim;
    for (name, m) in [("validation", validation), ("unlabeled", unlabeled)] {
        if m.dim != n {
            return Err(Error::Shape(format!("{name} dim {} != labeled dim {n}", m.dim)));
        }
    }
    if validation.is_empty() {
        return Err(Error::Size("validation set is empty".into()));
    }
    let needs_labels = opts.selection != Selection::PivotBce;
    if needs_labels && (labeled.labels.is_none() || validation.labels.is_none()) {
        return Err(Error::MissingLabels("labeled and validation rows need labels".into()));
    }
    let dims = NetDims {
        n,
        d: opts.hidden,
        p: pivots.len(),
    };
    let mut params = init_weights(dims, opts.seed, opts.use_bias);
    params.activation = opts.activation;
    if opts.mask_pivots {
        params.input_mask = Some(pivots.mask(n));
    }
    // validated once here so later forward passes cannot fail
    crate::neural::loss_parts(&params, &[], pivots)?;

    let mut state = AdamState::new(params.num_params(), opts.adam);
    let mut ws = Workspace::default();
    let mut rng = rng::rng_for(opts.seed, "batches");
    let lab = examples(labeled, true);
    let unl = examples(unlabeled, false);
    let val = examples(validation, needs_labels);
    let mut lab_order: Vec<usize> = (0..lab.len()).collect();
    let mut unl_order: Vec<usize> = (0..unl.len()).collect();

    let mut best: Option<(f64, usize, JointModelParams)> = None;
    let mut curve = Vec::with_capacity(opts.epochs);
    let mut batch = Vec::with_capacity(opts.batch_size);

    for epoch in 0..opts.epochs {
        lab_order.shuffle(&mut rng);
        unl_order.shuffle(&mut rng);
        for (step, (is_labeled, idx)) in interleave(&lab_order, &unl_order, opts.batch_size)
            .into_iter()
            .enumerate()
        {
            batch.clear();
            let src = if is_labeled { &lab } else { &unl };
            batch.extend(idx.iter().map(|&i| src[i]));
            let grads = joint_gradients_with(&params, &batch, pivots, opts.lambda, opts.rho, &mut ws)?;
            if cfg!(debug_assertions) && step == 0 {
                let reference = crate::neural::joint_loss(&params, &batch, pivots, opts.lambda, opts.rho)?;
                debug_assert!(
                    (reference - grads.loss).abs() <= 1e-9 * reference.abs().max(1.0),
                    "optimized loss {} differs from joint loss {reference}",
                    grads.loss
                );
            }
            apply_adam(&mut params, &grads, &mut state)?;
        }
        let score = held_out_score(&params, &val, pivots, opts);
        log::debug!("epoch {epoch}: held-out {score:.6}");
        curve.push(score);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.ok_or_else(|| Error::InvalidArgument("zero epochs".into()))?;
    Ok(TwoHeadFit {
        params,
        best_epoch,
        validation_curve: curve,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedJointModel {
    pub params: JointModelParams,
    pub pivots: PivotSet,
    pub best_epoch: usize,
    pub validation_curve: Vec<f64>,
    pub config: TrainConfig,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    /// 1 iff `probability >= 0.5`.
    pub label: u8,
}

impl Prediction {
    pub fn from_probability(p: f64) -> Self {
        let probability = p.clamp(crate::neural::BCE_CLAMP, 1.0 - crate::neural::BCE_CLAMP);
        Prediction {
            probability,
            label: u8::from(probability >= 0.5),
        }
    }
}

/// Trains the joint model on labeled source rows and unlabeled rows from
/// both domains.
pub fn train_joint(
    source_train: &DesignMatrix,
    source_val: &DesignMatrix,
    unlabeled: &DesignMatrix,
    pivots: &PivotSet,
    cfg: &TrainConfig,
) -> Result<TrainedJointModel> {
    cfg.validate()?;
    if source_train.is_empty() {
        return Err(Error::Size("no labeled training rows".into()));
    }
    if unlabeled.is_empty() {
        log::warn!("no unlabeled rows; the pivot loss only sees labeled data");
    }
    let opts = TwoHeadOptions {
        hidden: cfg.hidden,
        activation: Activation::Relu,
        lambda: cfg.lambda,
        rho: cfg.rho,
        adam: cfg.adam(),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        mask_pivots: cfg.mask_pivots_in_input,
        use_bias: cfg.use_bias,
        selection: match cfg.validation_metric {
            ValidationMetric::TaskBce => Selection::TaskBce,
            ValidationMetric::JointLoss => Selection::JointLoss,
        },
    };
    let fit = fit_two_head(source_train, source_val, unlabeled, pivots, &opts)?;
    Ok(TrainedJointModel {
        params: fit.params,
        pivots: pivots.clone(),
        best_epoch: fit.best_epoch,
        validation_curve: fit.validation_curve,
        config: cfg.clone(),
    })
}

pub fn predict_joint(model: &TrainedJointModel, x: &SparseVector) -> Result<Prediction> {
    Ok(Prediction::from_probability(forward(&model.params, x)?.y_task))
}

pub(crate) fn pivots_tensor(pivots: &PivotSet) -> DenseMatrix {
    DenseMatrix::from_vec(1, pivots.len(), pivots.indices.iter().map(|&i| i as f64).collect())
        .unwrap()
}

pub(crate) fn pivots_from_checkpoint(ck: &Checkpoint) -> Result<PivotSet> {
    let indices = ck.tensor("pivot_indices")?.data.iter().map(|&v| v as usize).collect();
    let strategy = ck.meta("pivot_strategy")?.parse::<PivotStrategy>()?;
    Ok(PivotSet {
        indices,
        scores: None,
        strategy,
        candidate_min_df: ck.meta("candidate_min_df")?.parse().unwrap_or(0),
        seed: ck.meta("pivot_seed")?.parse().unwrap_or(0),
        truncated: false,
    })
}

pub(crate) fn net_to_checkpoint(ck: &mut Checkpoint, prefix: &str, params: &JointModelParams) {
    ck.push(&format!("{prefix}W_h"), params.w_h.clone());
    ck.push(&format!("{prefix}W_t"), params.w_t.clone());
    ck.push(&format!("{prefix}W_p"), params.w_p.clone());
    if let Some(b) = &params.biases {
        ck.push(&format!("{prefix}b_h"), DenseMatrix::from_vec(1, b.h.len(), b.h.clone()).unwrap());
        ck.push(&format!("{prefix}b_t"), DenseMatrix::from_vec(1, 1, vec![b.t]).unwrap());
        ck.push(&format!("{prefix}b_p"), DenseMatrix::from_vec(1, b.p.len(), b.p.clone()).unwrap());
    }
}

pub(crate) fn net_from_checkpoint(
    ck: &Checkpoint,
    prefix: &str,
    activation: Activation,
    mask: Option<Vec<bool>>,
) -> Result<JointModelParams> {
    let t = |name: &str| ck.tensor(&format!("{prefix}{name}"));
    let biases = match t("b_h") {
        Ok(bh) => Some(Biases {
            h: bh.data.clone(),
            t: t("b_t")?.data[0],
            p: t("b_p")?.data.clone(),
        }),
        Err(_) => None,
    };
    let params = JointModelParams {
        w_h: t("W_h")?.clone(),
        w_t: t("W_t")?.clone(),
        w_p: t("W_p")?.clone(),
        biases,
        activation,
        input_mask: mask,
    };
    let NetDims { n, d, p } = params.dims();
    if params.w_t.rows != 1 || params.w_t.cols != d || params.w_p.cols != d || params.w_p.rows != p {
        return Err(Error::Checkpoint(format!("inconsistent shapes for n={n}, d={d}, p={p}")));
    }
    Ok(params)
}

impl TrainedJointModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let NetDims { n, d, p } = self.params.dims();
        let mut ck = Checkpoint::new("joint", self.config.seed)
            .with_meta("n", n)
            .with_meta("d", d)
            .with_meta("p", p)
            .with_meta("best_epoch", self.best_epoch)
            .with_meta("mask_pivots_in_input", self.config.mask_pivots_in_input)
            .with_meta("pivot_strategy", self.pivots.strategy)
            .with_meta("pivot_seed", self.pivots.seed)
            .with_meta("candidate_min_df", self.pivots.candidate_min_df)
            .with_meta("config", serde_json::to_string(&self.config).expect("config serializes"));
        net_to_checkpoint(&mut ck, "", &self.params);
        ck.push("pivot_indices", pivots_tensor(&self.pivots));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "joint" {
            return Err(Error::Checkpoint(format!("expected a joint model, found `{}`", ck.kind)));
        }
        let config: TrainConfig = serde_json::from_str(ck.meta("config")?)?;
        let pivots = pivots_from_checkpoint(ck)?;
        let n = ck.tensor("W_h")?.cols;
        let mask = config.mask_pivots_in_input.then(|| pivots.mask(n));
        let params = net_from_checkpoint(ck, "", Activation::Relu, mask)?;
        Ok(TrainedJointModel {
            params,
            pivots,
            best_epoch: ck.meta("best_epoch")?.parse().unwrap_or(0),
            validation_curve: Vec::new(),
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleave_alternates_then_drains() {
        let l: Vec<usize> = (0..5).collect();
        let u: Vec<usize> = (10..22).collect();
        let sched = interleave(&l, &u, 2);
        let kinds: Vec<bool> = sched.iter().map(|(k, _)| *k).collect();
        assert_eq!(kinds, [true, false, true, false, true, false, false, false, false]);
        assert_eq!(sched[4].1, [4]);
        let total: usize = sched.iter().map(|(_, c)| c.len()).sum();
        assert_eq!(total, 17);
        assert!(interleave::<usize>(&[], &[], 3).is_empty());
    }

    #[test]
    fn zero_weight_prediction_is_half_and_positive() {
        let dims = NetDims { n: 3, d: 2, p: 1 };
        let model = TrainedJointModel {
            params: JointModelParams::zeros(dims, false),
            pivots: PivotSet {
                indices: vec![0],
                scores: None,
                strategy: PivotStrategy::Random,
                candidate_min_df: 0,
                seed: 0,
                truncated: false,
            },
            best_epoch: 0,
            validation_curve: vec![],
            config: TrainConfig::default(),
        };
        let p = predict_joint(&model, &SparseVector::from_indices(vec![1], 3)).unwrap();
        assert_eq!(p, Prediction { probability: 0.5, label: 1 });
        assert!(predict_joint(&model, &SparseVector::empty(4)).is_err());
    }
}
