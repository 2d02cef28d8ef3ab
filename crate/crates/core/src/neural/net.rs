//! The shared-hidden-layer network with a task head and a pivot head.
//!
//! ```text
//! h      = act(W_h x)        W_h: d × n   (act = ReLU by default)
//! y_task = σ(W_t h)          W_t: 1 × d
//! y_piv  = σ(W_p h)          W_p: p × d
//! ```
//!
//! Inputs are sparse binary rows, so `W_h x` is the sum of the columns of
//! `W_h` at the row's active indices; dense inputs are never built.

use rand::distributions::{Distribution, Uniform};

use super::activation::{bce_unchecked, sigmoid, Activation};
use super::adam::{check_finite, AdamState};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::featurize::SparseVector;
use crate::pivot::PivotSet;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetDims {
    pub n: usize,
    pub d: usize,
    pub p: usize,
}

/// Optional bias vectors; absent in the default model.
#[derive(Clone, Debug, PartialEq)]
pub struct Biases {
    pub h: Vec<f64>,
    pub t: f64,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointModelParams {
    pub w_h: DenseMatrix,
    pub w_t: DenseMatrix,
    pub w_p: DenseMatrix,
    pub biases: Option<Biases>,
    pub activation: Activation,
    /// Input columns excluded from the hidden layer (true = masked).
    pub input_mask: Option<Vec<bool>>,
}

impl JointModelParams {
    pub fn zeros(dims: NetDims, with_bias: bool) -> Self {
        JointModelParams {
            w_h: DenseMatrix::zeros(dims.d, dims.n),
            w_t: DenseMatrix::zeros(1, dims.d),
            w_p: DenseMatrix::zeros(dims.p, dims.d),
            biases: with_bias.then(|| Biases {
                h: vec![0.0; dims.d],
                t: 0.0,
                p: vec![0.0; dims.p],
            }),
            activation: Activation::Relu,
            input_mask: None,
        }
    }

    pub fn dims(&self) -> NetDims {
        NetDims {
            n: self.w_h.cols,
            d: self.w_h.rows,
            p: self.w_p.rows,
        }
    }

    pub fn num_params(&self) -> usize {
        let NetDims { n, d, p } = self.dims();
        let bias = if self.biases.is_some() { d + 1 + p } else { 0 };
        d * n + d + p * d + bias
    }

    /// `½ (‖W_h‖² + ‖W_t‖² + ‖W_p‖²)`; biases are not regularized.
    pub fn regularizer(&self) -> f64 {
        0.5 * (self.w_h.squared_norm() + self.w_t.squared_norm() + self.w_p.squared_norm())
    }

    fn is_masked(&self, col: usize) -> bool {
        self.input_mask.as_ref().is_some_and(|m| m[col])
    }

    /// Flattened copy in the order `W_h, W_t, W_p, b_h, b_t, b_p`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.w_h.data);
        out.extend_from_slice(&self.w_t.data);
        out.extend_from_slice(&self.w_p.data);
        if let Some(b) = &self.biases {
            out.extend_from_slice(&b.h);
            out.push(b.t);
            out.extend_from_slice(&b.p);
        }
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut rest = flat;
        for dst in [&mut self.w_h.data, &mut self.w_t.data, &mut self.w_p.data] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        if let Some(b) = &mut self.biases {
            let (head, tail) = rest.split_at(b.h.len());
            b.h.copy_from_slice(head);
            b.t = tail[0];
            b.p.copy_from_slice(&tail[1..]);
        }
        Ok(())
    }
}

/// Glorot-uniform weights on `±√(6 / (fan_in + fan_out))`; biases start at 0.
pub fn init_weights(dims: NetDims, seed: u64, with_bias: bool) -> JointModelParams {
    let mut params = JointModelParams::zeros(dims, with_bias);
    let mut rng = rng::rng_for(seed, "init");
    for (m, fan_in, fan_out) in [
        (&mut params.w_h, dims.n, dims.d),
        (&mut params.w_t, dims.d, 1),
        (&mut params.w_p, dims.d, dims.p),
    ] {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        for v in &mut m.data {
            *v = dist.sample(&mut rng);
        }
    }
    params
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// Pre-activation `W_h x (+ b_h)`.
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub y_task: f64,
    pub y_pivot: Vec<f64>,
}

fn check_dim(params: &JointModelParams, x: &SparseVector) -> Result<()> {
    let n = params.w_h.cols;
    if x.dim != n {
        return Err(Error::Shape(format!("input dim {} but model expects {n}", x.dim)));
    }
    Ok(())
}

pub(crate) fn hidden(params: &JointModelParams, x: &SparseVector) -> (Vec<f64>, Vec<f64>) {
    let NetDims { n, d, .. } = params.dims();
    let mut z = match &params.biases {
        Some(b) => b.h.clone(),
        None => vec![0.0; d],
    };
    let w = &params.w_h.data;
    for &i in &x.indices {
        if params.is_masked(i) {
            continue;
        }
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += w[r * n + i];
        }
    }
    let h = z.iter().map(|&v| params.activation.apply(v)).collect();
    (z, h)
}

fn forward_unchecked(params: &JointModelParams, x: &SparseVector) -> Forward {
    let (z, h) = hidden(params, x);
    let dot = |row: &[f64]| row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
    let bt = params.biases.as_ref().map_or(0.0, |b| b.t);
    let y_task = sigmoid(dot(params.w_t.row(0)) + bt);
    let y_pivot = (0..params.w_p.rows)
        .map(|j| {
            let bp = params.biases.as_ref().map_or(0.0, |b| b.p[j]);
            sigmoid(dot(params.w_p.row(j)) + bp)
        })
        .collect();
    Forward {
        z,
        h,
        y_task,
        y_pivot,
    }
}

pub fn forward(params: &JointModelParams, x: &SparseVector) -> Result<Forward> {
    check_dim(params, x)?;
    Ok(forward_unchecked(params, x))
}

/// One row of a training batch; `label` is `None` for unlabeled rows.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub x: &'a SparseVector,
    pub label: Option<u8>,
}

/// The three unweighted pieces of the joint objective over a batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    /// Task BCE summed over labeled rows.
    pub task: f64,
    /// Pivot BCE summed over all rows and pivots.
    pub pivot: f64,
    /// `½‖θ‖²`, counted once per batch.
    pub reg: f64,
}

impl LossParts {
    pub fn combine(&self, lambda: f64, rho: f64) -> f64 {
        self.task + lambda * self.pivot + rho * self.reg
    }
}

fn check_pivots(params: &JointModelParams, pivots: &PivotSet) -> Result<()> {
    let NetDims { n, p, .. } = params.dims();
    if pivots.len() != p {
        return Err(Error::Shape(format!("{} pivots but pivot head has {p} outputs", pivots.len())));
    }
    if let Some(&i) = pivots.indices.iter().find(|&&i| i >= n) {
        return Err(Error::Shape(format!("pivot index {i} outside input dim {n}")));
    }
    Ok(())
}

pub fn loss_parts(
    params: &JointModelParams,
    batch: &[Example<'_>],
    pivots: &PivotSet,
) -> Result<LossParts> {
    check_pivots(params, pivots)?;
    let mut parts = LossParts {
        task: 0.0,
        pivot: 0.0,
        reg: params.regularizer(),
    };
    for ex in batch {
        let f = forward(params, ex.x)?;
        if let Some(y) = ex.label {
            parts.task += bce_unchecked(f.y_task, f64::from(y));
        }
        for (yp, t) in f.y_pivot.iter().zip(pivots.targets(ex.x)) {
            parts.pivot += bce_unchecked(*yp, t);
        }
    }
    Ok(parts)
}

/// Task BCE over labeled rows, plus `lambda` times pivot BCE over every row,
/// plus `rho · ½‖θ‖²` once.
pub fn joint_loss(
    params: &JointModelParams,
    batch: &[Example<'_>],
    pivots: &PivotSet,
    lambda: f64,
    rho: f64,
) -> Result<f64> {
    Ok(loss_parts(params, batch, pivots)?.combine(lambda, rho))
}

/// Gradient of `W_h`, kept as the data term over touched columns plus the
/// implicit `rho · W_h` regularization term.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenGrad {
    /// Sorted distinct input columns that received data gradient.
    pub cols: Vec<usize>,
    /// `d × cols.len()`, row-major.
    pub vals: Vec<f64>,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w_h: HiddenGrad,
    pub w_t: DenseMatrix,
    pub w_p: DenseMatrix,
    pub biases: Option<Biases>,
    /// The batch loss these gradients belong to.
    pub loss: f64,
}

/// Dense gradients shaped exactly like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGradients {
    pub w_h: DenseMatrix,
    pub w_t: DenseMatrix,
    pub w_p: DenseMatrix,
    pub biases: Option<Biases>,
}

impl DenseGradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.w_h.data.clone();
        out.extend_from_slice(&self.w_t.data);
        out.extend_from_slice(&self.w_p.data);
        if let Some(b) = &self.biases {
            out.extend_from_slice(&b.h);
            out.push(b.t);
            out.extend_from_slice(&b.p);
        }
        out
    }
}

impl Gradients {
    pub fn to_dense(&self, params: &JointModelParams) -> DenseGradients {
        let mut w_h = params.w_h.clone();
        for v in &mut w_h.data {
            *v *= self.w_h.rho;
        }
        let k = self.w_h.cols.len();
        for r in 0..w_h.rows {
            for (j, &c) in self.w_h.cols.iter().enumerate() {
                w_h.data[r * w_h.cols + c] += self.w_h.vals[r * k + j];
            }
        }
        DenseGradients {
            w_h,
            w_t: self.w_t.clone(),
            w_p: self.w_p.clone(),
            biases: self.biases.clone(),
        }
    }
}

/// Reusable scratch space for [`joint_gradients_with`].
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    slot: Vec<u32>,
}

const NO_SLOT: u32 = u32::MAX;

/// Analytic gradients of [`joint_loss`].
pub fn joint_gradients(
    params: &JointModelParams,
    batch: &[Example<'_>],
    pivots: &PivotSet,
    lambda: f64,
    rho: f64,
) -> Result<Gradients> {
    joint_gradients_with(params, batch, pivots, lambda, rho, &mut Workspace::default())
}

pub fn joint_gradients_with(
    params: &JointModelParams,
    batch: &[Example<'_>],
    pivots: &PivotSet,
    lambda: f64,
    rho: f64,
    ws: &mut Workspace,
) -> Result<Gradients> {
    check_pivots(params, pivots)?;
    for ex in batch {
        check_dim(params, ex.x)?;
    }
    let NetDims { n, d, p } = params.dims();

    let mut cols: Vec<usize> = batch
        .iter()
        .flat_map(|ex| ex.x.indices.iter().copied())
        .filter(|&i| !params.is_masked(i))
        .collect();
    cols.sort_unstable();
    cols.dedup();
    if ws.slot.len() != n {
        ws.slot = vec![NO_SLOT; n];
    }
    for (j, &c) in cols.iter().enumerate() {
        ws.slot[c] = j as u32;
    }
    let k = cols.len();

    let mut g_h = vec![0.0; d * k];
    let mut g_t = DenseMatrix::zeros(1, d);
    let mut g_p = DenseMatrix::zeros(p, d);
    let mut g_b = params.biases.as_ref().map(|_| Biases {
        h: vec![0.0; d],
        t: 0.0,
        p: vec![0.0; p],
    });
    let mut loss = 0.0;
    let mut dh = vec![0.0; d];

    for ex in batch {
        let f = forward_unchecked(params, ex.x);
        dh.iter_mut().for_each(|v| *v = 0.0);

        if let Some(y) = ex.label {
            let y = f64::from(y);
            loss += bce_unchecked(f.y_task, y);
            let delta = f.y_task - y;
            for ((g, &h), (dhr, &w)) in g_t.data.iter_mut().zip(&f.h).zip(dh.iter_mut().zip(params.w_t.row(0))) {
                *g += delta * h;
                *dhr += delta * w;
            }
            if let Some(b) = &mut g_b {
                b.t += delta;
            }
        }

        for (j, (&yp, t)) in f.y_pivot.iter().zip(pivots.targets(ex.x)).enumerate() {
            loss += lambda * bce_unchecked(yp, t);
            let delta = lambda * (yp - t);
            if delta == 0.0 {
                continue;
            }
            let w = params.w_p.row(j);
            for ((g, &h), (dhr, &w)) in g_p.row_mut(j).iter_mut().zip(&f.h).zip(dh.iter_mut().zip(w)) {
                *g += delta * h;
                *dhr += delta * w;
            }
            if let Some(b) = &mut g_b {
                b.p[j] += delta;
            }
        }

        // back through the activation
        for ((dhr, &z), &h) in dh.iter_mut().zip(&f.z).zip(&f.h) {
            *dhr *= params.activation.derivative(z, h);
        }
        if let Some(b) = &mut g_b {
            for (g, &v) in b.h.iter_mut().zip(&dh) {
                *g += v;
            }
        }
        for &i in &ex.x.indices {
            let s = ws.slot[i];
            if s == NO_SLOT {
                continue;
            }
            let s = s as usize;
            for (r, &v) in dh.iter().enumerate() {
                g_h[r * k + s] += v;
            }
        }
    }

    for &c in &cols {
        ws.slot[c] = NO_SLOT;
    }

    loss += rho * params.regularizer();
    for (g, &w) in g_t.data.iter_mut().zip(&params.w_t.data) {
        *g += rho * w;
    }
    for (g, &w) in g_p.data.iter_mut().zip(&params.w_p.data) {
        *g += rho * w;
    }

    Ok(Gradients {
        w_h: HiddenGrad {
            cols,
            vals: g_h,
            rho,
        },
        w_t: g_t,
        w_p: g_p,
        biases: g_b,
        loss,
    })
}

/// Applies one Adam step to every parameter. `state` must have been created
/// with `params.num_params()` entries.
pub fn apply_adam(params: &mut JointModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if state.len() != params.num_params() {
        return Err(Error::Shape(format!(
            "optimizer state of {} for {} parameters",
            state.len(),
            params.num_params()
        )));
    }
    check_finite(&grads.w_h.vals, "dW_h")?;
    check_finite(&grads.w_t.data, "dW_t")?;
    check_finite(&grads.w_p.data, "dW_p")?;
    if let Some(b) = &grads.biases {
        check_finite(&b.h, "db_h")?;
        check_finite(&b.p, "db_p")?;
        check_finite(&[b.t], "db_t")?;
    }

    let coef = state.begin_step();
    let NetDims { n, d, p } = params.dims();
    let hg = &grads.w_h;
    let k = hg.cols.len();
    // column -> slot lookup for the touched columns
    let mut slot = vec![NO_SLOT; n];
    for (j, &c) in hg.cols.iter().enumerate() {
        slot[c] = j as u32;
    }
    state.apply_rows(coef, 0, &mut params.w_h.data, n, |r, c, w| {
        let s = slot[c];
        let data = if s == NO_SLOT { 0.0 } else { hg.vals[r * k + s as usize] };
        hg.rho * w + data
    });
    let mut off = d * n;
    state.apply(coef, off, &mut params.w_t.data, &grads.w_t.data);
    off += d;
    state.apply(coef, off, &mut params.w_p.data, &grads.w_p.data);
    off += p * d;
    if let (Some(b), Some(gb)) = (&mut params.biases, &grads.biases) {
        state.apply(coef, off, &mut b.h, &gb.h);
        off += d;
        let mut t = [b.t];
        state.apply(coef, off, &mut t, &[gb.t]);
        b.t = t[0];
        off += 1;
        state.apply(coef, off, &mut b.p, &gb.p);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pivot::PivotStrategy;

    pub(crate) fn pivots(indices: Vec<usize>) -> PivotSet {
        PivotSet {
            indices,
            scores: None,
            strategy: PivotStrategy::Random,
            candidate_min_df: 0,
            seed: 0,
            truncated: false,
        }
    }

    #[test]
    fn zero_weights_give_half() {
        let params = JointModelParams::zeros(NetDims { n: 5, d: 3, p: 2 }, false);
        let x = SparseVector::from_indices(vec![0, 4], 5);
        let f = forward(&params, &x).unwrap();
        assert_eq!(f.h, [0.0; 3]);
        assert_eq!(f.y_task, 0.5);
        assert_eq!(f.y_pivot, [0.5, 0.5]);
        assert!(forward(&params, &SparseVector::empty(4)).is_err());
    }

    #[test]
    fn empty_input_has_zero_hidden() {
        let params = init_weights(NetDims { n: 5, d: 3, p: 2 }, 9, false);
        let f = forward(&params, &SparseVector::empty(5)).unwrap();
        assert_eq!(f.h, [0.0; 3]);
    }

    #[test]
    fn zero_weight_loss() {
        let lambda = 3.0;
        let params = JointModelParams::zeros(NetDims { n: 4, d: 2, p: 1 }, false);
        let x = SparseVector::from_indices(vec![1, 2], 4);
        let batch = [Example { x: &x, label: Some(1) }];
        let loss = joint_loss(&params, &batch, &pivots(vec![2]), lambda, 0.7).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((loss - (ln2 + lambda * ln2)).abs() < 1e-14);
    }

    #[test]
    fn task_head_gradient_identity() {
        let params = init_weights(NetDims { n: 6, d: 4, p: 2 }, 3, false);
        let x = SparseVector::from_indices(vec![0, 3, 5], 6);
        let batch = [Example { x: &x, label: Some(0) }];
        let g = joint_gradients(&params, &batch, &pivots(vec![1, 3]), 0.0, 0.0).unwrap();
        let f = forward(&params, &x).unwrap();
        for (gj, hj) in g.w_t.data.iter().zip(&f.h) {
            assert!((gj - f.y_task * hj).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_row_only_regularization_reaches_w_h() {
        let params = init_weights(NetDims { n: 6, d: 4, p: 2 }, 3, false);
        let x = SparseVector::empty(6);
        let batch = [Example { x: &x, label: Some(1) }];
        let g = joint_gradients(&params, &batch, &pivots(vec![1, 3]), 5.0, 0.1).unwrap();
        let dense = g.to_dense(&params);
        for (gv, w) in dense.w_h.data.iter().zip(&params.w_h.data) {
            assert_eq!(*gv, 0.1 * w);
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let dims = NetDims { n: 30, d: 8, p: 3 };
        let a = init_weights(dims, 1, false);
        assert_eq!(a, init_weights(dims, 1, false));
        assert_ne!(a, init_weights(dims, 2, false));
        let limit = (6.0f64 / 38.0).sqrt();
        assert!(a.w_h.data.iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn masked_columns_do_not_reach_hidden() {
        let mut params = init_weights(NetDims { n: 6, d: 4, p: 2 }, 5, false);
        params.input_mask = Some(pivots(vec![1, 3]).mask(6));
        let with = SparseVector::from_indices(vec![0, 1, 3], 6);
        let without = SparseVector::from_indices(vec![0], 6);
        assert_eq!(forward(&params, &with).unwrap().z, forward(&params, &without).unwrap().z);
    }

    #[test]
    fn flat_round_trip() {
        let mut params = init_weights(NetDims { n: 5, d: 3, p: 2 }, 4, true);
        let flat = params.to_flat();
        assert_eq!(flat.len(), params.num_params());
        let copy = params.clone();
        params.set_flat(&flat).unwrap();
        assert_eq!(params, copy);
    }
}
