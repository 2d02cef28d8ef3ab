use crate::error::{Error, Result};

/// Predictions are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before the logs.
pub const BCE_CLAMP: f64 = 1e-12;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => relu(z),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    /// ReLU uses 0 at `z == 0`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Binary cross-entropy without target validation, for inner loops.
#[inline]
pub(crate) fn bce_unchecked(prediction: f64, target: f64) -> f64 {
    let p = prediction.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let mut loss = 0.0;
    if target != 0.0 {
        loss -= target * p.ln();
    }
    if target != 1.0 {
        loss -= (1.0 - target) * (1.0 - p).ln();
    }
    loss
}

pub fn bce(prediction: f64, target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidArgument(format!("BCE target {target} outside [0, 1]")));
    }
    Ok(bce_unchecked(prediction, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bce_examples() {
        assert_abs_diff_eq!(bce(0.5, 1.0).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        assert!(bce(1.0 - 1e-12, 1.0).unwrap() <= 1e-11);
        assert_abs_diff_eq!(bce(0.2, 0.0).unwrap(), -(0.8f64.ln()), epsilon = 1e-15);
        assert!(bce(0.5, 1.5).is_err());
        assert!(bce(0.0, 1.0).unwrap().is_finite());
        assert!(bce(1.0, 0.0).unwrap().is_finite());
    }

    #[test]
    fn sigmoid_is_stable_and_open() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(sigmoid(30.0) < 1.0 && sigmoid(-30.0) > 0.0);
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(Activation::Relu.derivative(0.0, 0.0), 0.0);
    }
}
