use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

/// Bias-correction denominators for the current step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StepCoef {
    c1: f64,
    c2: f64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub(crate) fn begin_step(&mut self) -> StepCoef {
        self.t += 1;
        let t = self.t as i32;
        StepCoef {
            c1: 1.0 - self.config.beta1.powi(t),
            c2: 1.0 - self.config.beta2.powi(t),
        }
    }

    #[inline]
    fn update_one(cfg: &AdamConfig, coef: StepCoef, w: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / coef.c1;
        let v_hat = *v / coef.c2;
        *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }

    /// Updates `params` (stored at `offset` in the flat vector) from dense
    /// gradients.
    pub(crate) fn apply(&mut self, coef: StepCoef, offset: usize, params: &mut [f64], grads: &[f64]) {
        let cfg = self.config;
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for (((w, m), v), &g) in params.iter_mut().zip(m).zip(v).zip(grads) {
            Self::update_one(&cfg, coef, w, m, v, g);
        }
    }

    /// Row-parallel update where the gradient is produced on the fly by
    /// `grad(row, col, current_value)`. Elementwise, so the result does not
    /// depend on the thread count.
    pub(crate) fn apply_rows<G>(
        &mut self,
        coef: StepCoef,
        offset: usize,
        params: &mut [f64],
        row_len: usize,
        grad: G,
    ) where
        G: Fn(usize, usize, f64) -> f64 + Sync,
    {
        let cfg = self.config;
        let len = params.len();
        let m = &mut self.m[offset..offset + len];
        let v = &mut self.v[offset..offset + len];
        params
            .par_chunks_mut(row_len)
            .zip(m.par_chunks_mut(row_len))
            .zip(v.par_chunks_mut(row_len))
            .enumerate()
            .for_each(|(r, ((w, m), v))| {
                for (c, ((w, m), v)) in w.iter_mut().zip(m).zip(v).enumerate() {
                    let g = grad(r, c, *w);
                    Self::update_one(&cfg, coef, w, m, v, g);
                }
            });
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}

/// One Adam update of a flat parameter vector. Fails before touching
/// anything if a gradient entry is not finite.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, state of {}",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    check_finite(grads, "gradient")?;
    let coef = state.begin_step();
    state.apply(coef, 0, params, grads);
    Ok(())
}
