use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::{check_dim, dot};

/// Network utility `U` applied to the net flow `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Utility {
    /// `U(y) = cᵀy`.
    Linear { c: Vec<f64> },
    /// `U(y) = cᵀy - (μ/2) yᵀy` with `μ > 0`.
    Quadratic { c: Vec<f64>, mu: f64 },
    /// `U(y) = slope·y - I(y >= b)` on a single node.
    LinearAboveThreshold {
        b: f64,
        #[serde(default = "default_slope")]
        slope: f64,
    },
}

fn default_slope() -> f64 {
    1.0
}

/// Value of the conjugate `Ū(ν) = sup_y U(y) - νᵀy` and a maximizing `y`.
///
/// `maximizer` is `None` when the supremum is attained on a whole subspace
/// (linear utility at `ν = c`), where every `y` is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub maximizer: Option<Vec<f64>>,
}

impl Utility {
    pub fn linear(c: Vec<f64>) -> Self {
        Utility::Linear { c }
    }

    pub fn quadratic(c: Vec<f64>, mu: f64) -> Self {
        Utility::Quadratic { c, mu }
    }

    pub fn threshold(b: f64) -> Self {
        Utility::LinearAboveThreshold { b, slope: 1.0 }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Utility::Linear { .. } => "linear",
            Utility::Quadratic { .. } => "quadratic",
            Utility::LinearAboveThreshold { .. } => "linear_above_threshold",
        }
    }

    /// Number of nodes the utility is defined on.
    pub fn dim(&self) -> usize {
        match self {
            Utility::Linear { c } | Utility::Quadratic { c, .. } => c.len(),
            Utility::LinearAboveThreshold { .. } => 1,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_dim(n, self.dim())?;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Utility::Linear { c } if !finite(c) => Err(Error::InvalidParameter(
                "utility weights must be finite".into(),
            )),
            Utility::Quadratic { c, mu } => {
                if !finite(c) {
                    Err(Error::InvalidParameter(
                        "utility weights must be finite".into(),
                    ))
                } else if !(*mu > 0.0 && mu.is_finite()) {
                    Err(Error::InvalidParameter(format!(
                        "quadratic utility needs mu > 0, got {mu}"
                    )))
                } else {
                    Ok(())
                }
            }
            Utility::LinearAboveThreshold { b, slope }
                if !(b.is_finite() && *slope >= 0.0 && slope.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "threshold utility needs finite b and slope >= 0, got b={b}, slope={slope}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `U(y)`, with `-∞` outside the domain.
    pub fn value(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        Ok(match self {
            Utility::Linear { c } => dot(c, y),
            Utility::Quadratic { c, mu } => dot(c, y) - 0.5 * mu * dot(y, y),
            Utility::LinearAboveThreshold { b, slope } => {
                if y[0] >= *b {
                    slope * y[0]
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
    }

    /// Componentwise lower bound of the conjugate's domain intersected with
    /// the nonnegative orthant (node prices are nonnegative).
    pub fn price_floor(&self) -> Vec<f64> {
        match self {
            Utility::LinearAboveThreshold { slope, .. } => vec![*slope],
            _ => vec![0.0; self.dim()],
        }
    }

    /// `Ū(ν) = sup_y U(y) - νᵀy`; `+∞` outside the domain.
    pub fn conjugate(&self, nu: &[f64]) -> Result<Conjugate> {
        check_dim(self.dim(), nu.len())?;
        Ok(match self {
            Utility::Linear { c } => {
                if c.iter().zip(nu).all(|(a, b)| a == b) {
                    Conjugate {
                        value: 0.0,
                        maximizer: None,
                    }
                } else {
                    Conjugate {
                        value: f64::INFINITY,
                        maximizer: None,
                    }
                }
            }
            Utility::Quadratic { c, mu } => {
                let y: Vec<f64> = c.iter().zip(nu).map(|(a, b)| (a - b) / mu).collect();
                let value = c
                    .iter()
                    .zip(nu)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / (2.0 * mu);
                Conjugate {
                    value,
                    maximizer: Some(y),
                }
            }
            Utility::LinearAboveThreshold { b, slope } => {
                if nu[0] >= *slope {
                    Conjugate {
                        value: (slope - nu[0]) * b,
                        maximizer: Some(vec![*b]),
                    }
                } else {
                    Conjugate {
                        value: f64::INFINITY,
                        maximizer: None,
                    }
                }
            }
        })
    }
}
