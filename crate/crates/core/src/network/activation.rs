use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Linear => "linear",
        }
    }

    /// Applies the activation to a whole vector. Softmax subtracts the max first.
    pub fn apply(self, v: &[f64]) -> Result<Vec<f64>> {
        if v.is_empty() {
            return Err(Error::Numeric("activation input is empty".into()));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "activation input[{i}] = {} is not finite",
                v[i]
            )));
        }
        Ok(self.apply_finite(v))
    }

    pub(crate) fn apply_finite(self, v: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => v.iter().map(|&x| x.max(0.0)).collect(),
            Activation::Sigmoid => v.iter().map(|&x| sigmoid(x)).collect(),
            Activation::Linear => v.to_vec(),
            Activation::Softmax => softmax(v),
        }
    }

    /// Elementwise derivative given pre-activation `z` and output `a`.
    /// Not defined for softmax, which is only ever paired with cross-entropy.
    pub(crate) fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
            Activation::Softmax => unreachable!("softmax derivative is folded into the loss"),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_softmax() {
        let out = Activation::Softmax.apply(&[0.0; 10]).unwrap();
        for p in out {
            assert!((p - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn relu_definition() {
        assert_eq!(
            Activation::Relu.apply(&[-2.0, 0.0, 3.0]).unwrap(),
            vec![0.0, 0.0, 3.0]
        );
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(Activation::Sigmoid.apply(&[0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn linear_is_identity() {
        let v = [-1.5, 0.0, 2.25];
        assert_eq!(Activation::Linear.apply(&v).unwrap(), v.to_vec());
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(matches!(
            Activation::Relu.apply(&[1.0, f64::NAN]),
            Err(Error::Numeric(_))
        ));
        assert!(Activation::Softmax.apply(&[f64::INFINITY]).is_err());
        assert!(Activation::Linear.apply(&[]).is_err());
    }

    #[test]
    fn sigmoid_extremes_stay_finite() {
        let out = Activation::Sigmoid.apply(&[-1e3, 1e3]).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 1.0);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(v in prop::collection::vec(-1e3f64..1e3, 1..16)) {
            let p = Activation::Softmax.apply(&v).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for &x in &p {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        // Strict (0,1) needs the spread below ~36 (ln 2^53); the offset is what
        // would overflow exp() without the max subtraction.
        #[test]
        fn softmax_strictly_inside_unit_interval(
            base in -1e3f64..1e3,
            offsets in prop::collection::vec(-15f64..15.0, 2..16),
        ) {
            let v: Vec<f64> = offsets.iter().map(|o| base + o).collect();
            let p = Activation::Softmax.apply(&v).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for &x in &p {
                prop_assert!(x > 0.0 && x < 1.0);
            }
        }
    }
}
