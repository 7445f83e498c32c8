//! Evaluable cost functions on ℝ×ℝ, restricted to atom grids at solve time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::DiscreteMeasure;
use crate::tol::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("point ({x}, {y}) is off the cost grid")]
    OffGrid { x: f64, y: f64 },
    #[error("cost produced a non-finite value at ({x}, {y})")]
    NonFiniteValue { x: f64, y: f64 },
    #[error("invalid cost specification: {detail}")]
    Invalid { detail: String },
}

/// Cost function specification.
///
/// `LeftCurtainProbe { s, t }` is the probing family
/// (x, y) ↦ 1_{x ≤ s}·|y − t| whose simultaneous minimizers single out the
/// left-curtain coupling. `PowerSpread { p }` is |y − x|^p. `Grid` carries
/// explicit values on a product grid, and `SeparableBound` is a sum
/// c₁(x) + c₂(y) tabulated on marginal grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum CostSpec {
    #[serde(rename = "cst")]
    LeftCurtainProbe { s: f64, t: f64 },
    #[serde(rename = "power")]
    PowerSpread { p: f64 },
    #[serde(rename = "grid")]
    Grid {
        x: Vec<f64>,
        y: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    #[serde(rename = "separable")]
    SeparableBound {
        x: Vec<f64>,
        c1: Vec<f64>,
        y: Vec<f64>,
        c2: Vec<f64>,
    },
}

fn grid_lookup(grid: &[f64], v: f64, tol: f64) -> Option<usize> {
    let i = grid.partition_point(|&g| g < v - tol);
    (i < grid.len() && (grid[i] - v).abs() <= tol).then_some(i)
}

impl CostSpec {
    /// Structural validation: finite, nonnegative values; consistent grid
    /// dimensions; positive spread exponent.
    pub fn validate(&self) -> Result<(), CostError> {
        match self {
            CostSpec::LeftCurtainProbe { s, t } => {
                if !s.is_finite() || !t.is_finite() {
                    return Err(CostError::Invalid {
                        detail: "probe parameters must be finite".into(),
                    });
                }
            }
            CostSpec::PowerSpread { p } => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(CostError::Invalid {
                        detail: format!("spread exponent must be positive, got {p}"),
                    });
                }
            }
            CostSpec::Grid { x, y, values } => {
                if values.len() != x.len() || values.iter().any(|row| row.len() != y.len()) {
                    return Err(CostError::Invalid {
                        detail: "grid value matrix dimensions do not match the grids".into(),
                    });
                }
                for row in values {
                    for &v in row {
                        if !v.is_finite() || v < 0.0 {
                            return Err(CostError::Invalid {
                                detail: format!("grid values must be finite and ≥ 0, got {v}"),
                            });
                        }
                    }
                }
            }
            CostSpec::SeparableBound { x, c1, y, c2 } => {
                if c1.len() != x.len() || c2.len() != y.len() {
                    return Err(CostError::Invalid {
                        detail: "separable bound lengths do not match the grids".into(),
                    });
                }
                if c1.iter().chain(c2.iter()).any(|v| !v.is_finite()) {
                    return Err(CostError::Invalid {
                        detail: "separable bound values must be finite".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Evaluates the cost at (x, y). Tabulated variants require the point to
    /// lie on their grid (within `tol.cmp`).
    pub fn evaluate(&self, x: f64, y: f64, tol: &Tolerances) -> Result<f64, CostError> {
        let v = match self {
            CostSpec::LeftCurtainProbe { s, t } => {
                if x <= *s {
                    (y - t).abs()
                } else {
                    0.0
                }
            }
            CostSpec::PowerSpread { p } => (y - x).abs().powf(*p),
            CostSpec::Grid {
                x: xs,
                y: ys,
                values,
            } => {
                let i = grid_lookup(xs, x, tol.cmp).ok_or(CostError::OffGrid { x, y })?;
                let j = grid_lookup(ys, y, tol.cmp).ok_or(CostError::OffGrid { x, y })?;
                values[i][j]
            }
            CostSpec::SeparableBound {
                x: xs,
                c1,
                y: ys,
                c2,
            } => {
                let i = grid_lookup(xs, x, tol.cmp).ok_or(CostError::OffGrid { x, y })?;
                let j = grid_lookup(ys, y, tol.cmp).ok_or(CostError::OffGrid { x, y })?;
                c1[i] + c2[j]
            }
        };
        if !v.is_finite() {
            return Err(CostError::NonFiniteValue { x, y });
        }
        Ok(v)
    }
}

/// Outcome of the integrable-bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IntegrableBound {
    /// c(x, y) ≤ c₁(x) + c₂(y) on the atom grid, with the canonical choice
    /// c₁(x) = max over the row and c₂ ≡ 0.
    Bounded { c1: Vec<f64>, c2: Vec<f64> },
    /// The cost evaluates to +∞ somewhere on the grid.
    Unbounded { x: f64, y: f64 },
}

/// Constructs the separable bound c₁ ⊕ c₂ dominating `c` on the product of
/// atom grids, taking row maxima for c₁ and zero for c₂, and asserts its
/// validity pointwise.
pub fn check_integrable_bound(
    c: &CostSpec,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: &Tolerances,
) -> Result<IntegrableBound, CostError> {
    let mut c1 = Vec::with_capacity(mu.len());
    for &x in mu.positions() {
        let mut row_max = 0.0f64;
        for &y in nu.positions() {
            match c.evaluate(x, y, tol) {
                Ok(v) => row_max = row_max.max(v),
                Err(CostError::NonFiniteValue { x, y }) => {
                    return Ok(IntegrableBound::Unbounded { x, y })
                }
                Err(e) => return Err(e),
            }
        }
        c1.push(row_max);
    }
    let c2 = vec![0.0; nu.len()];
    for (i, &x) in mu.positions().iter().enumerate() {
        for (j, &y) in nu.positions().iter().enumerate() {
            debug_assert!(c.evaluate(x, y, tol)? <= c1[i] + c2[j]);
        }
    }
    Ok(IntegrableBound::Bounded { c1, c2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn probe_active_and_inactive() {
        let c = CostSpec::LeftCurtainProbe { s: 0.0, t: 0.0 };
        assert_eq!(c.evaluate(0.0, 3.0, &tol()).unwrap(), 3.0);
        assert_eq!(c.evaluate(1.0, 3.0, &tol()).unwrap(), 0.0);
    }

    #[test]
    fn power_spread() {
        let c = CostSpec::PowerSpread { p: 2.0 };
        assert_eq!(c.evaluate(1.0, 4.0, &tol()).unwrap(), 9.0);
    }

    #[test]
    fn grid_off_grid_error() {
        let c = CostSpec::Grid {
            x: vec![0.0, 1.0],
            y: vec![0.0],
            values: vec![vec![1.0], vec![2.0]],
        };
        assert_eq!(c.evaluate(1.0, 0.0, &tol()).unwrap(), 2.0);
        assert!(matches!(
            c.evaluate(0.5, 0.0, &tol()),
            Err(CostError::OffGrid { .. })
        ));
    }

    #[test]
    fn probe_vanishes_right_of_s() {
        let c = CostSpec::LeftCurtainProbe { s: -0.5, t: 2.0 };
        for y in [-3.0, 0.0, 5.0] {
            assert_eq!(c.evaluate(0.0, y, &tol()).unwrap(), 0.0);
            assert!(c.evaluate(-1.0, y, &tol()).unwrap() >= 0.0);
        }
    }

    #[test]
    fn integrable_bound_row_maxima() {
        let mu = DiscreteMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let nu = DiscreteMeasure::from_atoms([(-2.0, 0.5), (2.0, 0.5)]).unwrap();
        let c = CostSpec::LeftCurtainProbe { s: 0.0, t: 0.0 };
        match check_integrable_bound(&c, &mu, &nu, &tol()).unwrap() {
            IntegrableBound::Bounded { c1, c2 } => {
                assert_eq!(c1, vec![2.0, 0.0]);
                assert_eq!(c2, vec![0.0, 0.0]);
            }
            other => panic!("expected bound, got {other:?}"),
        }
    }

    #[test]
    fn integrable_bound_power_single_source() {
        let mu = DiscreteMeasure::dirac(0.0, 1.0);
        let nu = DiscreteMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let c = CostSpec::PowerSpread { p: 1.0 };
        match check_integrable_bound(&c, &mu, &nu, &tol()).unwrap() {
            IntegrableBound::Bounded { c1, .. } => assert_eq!(c1, vec![1.0]),
            other => panic!("expected bound, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_bad_grid() {
        let c = CostSpec::Grid {
            x: vec![0.0],
            y: vec![0.0, 1.0],
            values: vec![vec![1.0]],
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn serde_tags() {
        let c = CostSpec::LeftCurtainProbe { s: 1.0, t: -2.0 };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"type\":\"cst\""));
        let back: CostSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }
}
