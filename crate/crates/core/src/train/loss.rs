use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Real};

pub const CHARBONNIER_EPS: Real = 1e-3;

/// Pixel losses, averaged over every element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    L1,
    /// `sqrt((p - t)^2 + eps^2)`.
    Charbonnier { eps: Real },
}

impl Default for Loss {
    fn default() -> Self {
        Loss::Charbonnier { eps: CHARBONNIER_EPS }
    }
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::L1 => "l1",
            Loss::Charbonnier { .. } => "charbonnier",
        }
    }

    /// Mean loss and its gradient with respect to `pred`.
    pub fn value_and_grad(&self, pred: &FeatureMap, target: &FeatureMap) -> Result<(Real, FeatureMap)> {
        if pred.shape() != target.shape() {
            return Err(Error::ShapeMismatch {
                expected: target.shape(),
                actual: pred.shape(),
            });
        }
        let n = pred.data().len() as Real;
        let mut total = 0.0;
        let grad: Vec<Real> = pred
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| {
                let d = p - t;
                match *self {
                    Loss::L1 => {
                        total += d.abs();
                        // Subgradient 0 at d = 0.
                        if d > 0.0 {
                            1.0 / n
                        } else if d < 0.0 {
                            -1.0 / n
                        } else {
                            0.0
                        }
                    }
                    Loss::Charbonnier { eps } => {
                        let r = (d * d + eps * eps).sqrt();
                        total += r;
                        d / r / n
                    }
                }
            })
            .collect();
        Ok((total / n, FeatureMap::from_vec(pred.shape(), grad)?))
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Loss::L1),
            "charbonnier" => Ok(Loss::default()),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn charbonnier_at_zero_is_eps() {
        let a = FeatureMap::filled(Shape::new(1, 1, 2, 2), 0.3);
        let (v, g) = Loss::default().value_and_grad(&a, &a).unwrap();
        assert!((v - CHARBONNIER_EPS).abs() < 1e-15);
        assert!(g.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = FeatureMap::from_vec(Shape::new(1, 1, 1, 3), vec![0.1, 0.5, 0.9]).unwrap();
        let t = FeatureMap::from_vec(Shape::new(1, 1, 1, 3), vec![0.2, 0.5005, 0.4]).unwrap();
        for loss in [Loss::default(), Loss::L1] {
            let (_, g) = loss.value_and_grad(&p, &t).unwrap();
            for i in 0..3 {
                let h = 1e-7;
                let mut a = p.clone();
                a.data_mut()[i] += h;
                let mut b = p.clone();
                b.data_mut()[i] -= h;
                let fd = (loss.value_and_grad(&a, &t).unwrap().0 - loss.value_and_grad(&b, &t).unwrap().0) / (2.0 * h);
                assert!((fd - g.data()[i]).abs() < 1e-6, "{loss:?} {i}: {fd} vs {}", g.data()[i]);
            }
        }
    }
}
