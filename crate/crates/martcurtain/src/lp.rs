//! Dense linear-program solver: two-phase primal simplex with Bland's
//! anti-cycling rule.
//!
//! Solves `min c·x  s.t.  A x = b, x ≥ 0` on a dense tableau and returns, on
//! optimality, the primal solution together with equality-constraint dual
//! multipliers. Instances in this crate are tiny (at most a few hundred
//! variables), so robustness is preferred over speed throughout.

use thiserror::Error;

use crate::tol::Tolerances;

/// Equality-form linear program; all variables implicitly ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Objective coefficients, length n.
    pub objective: Vec<f64>,
    /// Equality-constraint rows, each of length n.
    pub constraints: Vec<Vec<f64>>,
    /// Right-hand side, length = number of rows.
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Primal solution, length n.
    pub primal: Vec<f64>,
    /// Objective value c·x.
    pub objective: f64,
    /// Dual multipliers for the equality constraints, one per row.
    pub duals: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("non-finite coefficient in the program data")]
    NonFinite,
    #[error("simplex iteration limit exceeded after {iterations} pivots")]
    IterationLimit { iterations: usize },
}

struct Tableau {
    /// (m+1) × (n + m + 1): constraint rows then the reduced-cost row;
    /// columns are the n structural variables, m artificials, rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    m: usize,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.n + self.m
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let rhs_col = self.rhs_col();
        let piv = self.rows[r][q];
        for j in 0..=rhs_col {
            self.rows[r][j] /= piv;
        }
        self.rows[r][q] = 1.0;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][q];
            if factor == 0.0 {
                continue;
            }
            for j in 0..=rhs_col {
                self.rows[i][j] -= factor * self.rows[r][j];
            }
            self.rows[i][q] = 0.0;
        }
        self.basis[r] = q;
    }

    /// Runs simplex iterations with Bland's rule, entering only among the
    /// structural columns. Returns `None` on optimality, or the unbounded
    /// entering column.
    fn run(&mut self, tol: &Tolerances, iterations: &mut usize) -> Result<Option<usize>, LpError> {
        loop {
            if *iterations >= tol.lp_iter_limit {
                return Err(LpError::IterationLimit {
                    iterations: *iterations,
                });
            }
            let obj_row = self.m;
            // Bland: smallest-index column with negative reduced cost.
            let entering = (0..self.n).find(|&j| self.rows[obj_row][j] < -tol.pivot);
            let q = match entering {
                Some(q) => q,
                None => return Ok(None),
            };
            // Ratio test; ties broken by smallest basis variable index.
            let rhs_col = self.rhs_col();
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.m {
                let coef = self.rows[r][q];
                if coef > tol.pivot {
                    let ratio = (self.rows[r][rhs_col]).max(0.0) / coef;
                    best = match best {
                        None => Some((ratio, r)),
                        Some((bratio, brow)) => {
                            if ratio < bratio
                                || (ratio == bratio && self.basis[r] < self.basis[brow])
                            {
                                Some((ratio, r))
                            } else {
                                Some((bratio, brow))
                            }
                        }
                    };
                }
            }
            match best {
                Some((_, r)) => {
                    self.pivot(r, q);
                    *iterations += 1;
                }
                None => return Ok(Some(q)),
            }
        }
    }
}

/// Solves the program. `Infeasible` and `Unbounded` are statuses, not errors;
/// errors are reserved for malformed input and the iteration budget.
pub fn solve_lp(p: &LinearProgram, tol: &Tolerances) -> Result<LpOutcome, LpError> {
    let n = p.objective.len();
    let m = p.constraints.len();
    if p.rhs.len() != m {
        return Err(LpError::DimensionMismatch {
            detail: format!("{} constraint rows vs {} rhs entries", m, p.rhs.len()),
        });
    }
    for (i, row) in p.constraints.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::DimensionMismatch {
                detail: format!("row {i} has {} coefficients, expected {n}", row.len()),
            });
        }
    }
    let finite = p.objective.iter().all(|v| v.is_finite())
        && p.rhs.iter().all(|v| v.is_finite())
        && p.constraints
            .iter()
            .all(|row| row.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(LpError::NonFinite);
    }

    // Rows are flipped so the initial artificial basis is feasible; the sign
    // is undone when the duals are read off.
    let mut flipped = vec![false; m];
    let width = n + m + 1;
    let rhs_col = n + m;
    let mut rows = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        let sign = if p.rhs[i] < 0.0 {
            flipped[i] = true;
            -1.0
        } else {
            1.0
        };
        for j in 0..n {
            rows[i][j] = sign * p.constraints[i][j];
        }
        rows[i][n + i] = 1.0;
        rows[i][rhs_col] = sign * p.rhs[i];
    }
    // Phase-1 reduced costs: minimize the sum of artificials.
    for j in 0..n {
        rows[m][j] = -(0..m).map(|i| rows[i][j]).sum::<f64>();
    }
    rows[m][rhs_col] = -(0..m).map(|i| rows[i][rhs_col]).sum::<f64>();

    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        n,
        m,
    };
    let mut iterations = 0usize;

    // Phase 1 cannot be unbounded (objective ≥ 0).
    tab.run(tol, &mut iterations)?;
    let phase1 = -tab.rows[m][rhs_col];
    if phase1 > tol.feas {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive artificials out of the basis where possible; rows that admit no
    // structural pivot are redundant and keep their artificial at level zero.
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(q) = (0..n).find(|&j| tab.rows[r][j].abs() > tol.pivot) {
                tab.pivot(r, q);
            }
        }
    }

    // Phase-2 reduced costs over the current basis (artificials cost zero).
    for j in 0..=rhs_col {
        tab.rows[m][j] = 0.0;
    }
    for j in 0..n {
        tab.rows[m][j] = p.objective[j];
    }
    for r in 0..m {
        let b = tab.basis[r];
        if b < n && p.objective[b] != 0.0 {
            let c = p.objective[b];
            for j in 0..=rhs_col {
                tab.rows[m][j] -= c * tab.rows[r][j];
            }
        }
    }

    if let Some(_q) = tab.run(tol, &mut iterations)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut primal = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            primal[tab.basis[r]] = tab.rows[r][rhs_col];
        }
    }
    let objective = -tab.rows[m][rhs_col];
    // The artificial column block carries B⁻¹, so the phase-2 reduced cost of
    // artificial k is −y_k for the (possibly flipped) row k.
    let mut duals = vec![0.0; m];
    for k in 0..m {
        let y = -tab.rows[m][n + k];
        duals[k] = if flipped[k] { -y } else { y };
    }
    Ok(LpOutcome::Optimal(LpSolution {
        primal,
        objective,
        duals,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn assert_certified(p: &LinearProgram, sol: &LpSolution, tol: &Tolerances) {
        // primal feasibility
        for (row, &b) in p.constraints.iter().zip(&p.rhs) {
            let ax: f64 = row.iter().zip(&sol.primal).map(|(a, x)| a * x).sum();
            assert!((ax - b).abs() <= tol.feas, "residual {}", ax - b);
        }
        assert!(sol.primal.iter().all(|&x| x >= -tol.feas));
        // strong duality
        let dual_value: f64 = sol.duals.iter().zip(&p.rhs).map(|(y, b)| y * b).sum();
        assert!(
            (dual_value - sol.objective).abs() <= tol.gap,
            "gap {}",
            dual_value - sol.objective
        );
        // dual feasibility: reduced costs nonnegative
        for j in 0..p.objective.len() {
            let ya: f64 = sol
                .duals
                .iter()
                .zip(&p.constraints)
                .map(|(y, row)| y * row[j])
                .sum();
            assert!(p.objective[j] - ya >= -1e-7, "reduced cost {}", p.objective[j] - ya);
        }
    }

    #[test]
    fn basic_optimal() {
        // min x1 s.t. x1 + x2 = 1
        let p = LinearProgram {
            objective: vec![1.0, 0.0],
            constraints: vec![vec![1.0, 1.0]],
            rhs: vec![1.0],
        };
        let out = solve_lp(&p, &tol()).unwrap();
        let sol = out.optimal().expect("optimal");
        assert!(sol.objective.abs() < 1e-12);
        assert!((sol.primal[1] - 1.0).abs() < 1e-12);
        assert_certified(&p, sol, &tol());
    }

    #[test]
    fn unbounded() {
        // min −x1 s.t. x1 − x2 = 0
        let p = LinearProgram {
            objective: vec![-1.0, 0.0],
            constraints: vec![vec![1.0, -1.0]],
            rhs: vec![0.0],
        };
        assert_eq!(solve_lp(&p, &tol()).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn infeasible() {
        // min x1 s.t. x1 = −1, x ≥ 0
        let p = LinearProgram {
            objective: vec![1.0],
            constraints: vec![vec![1.0]],
            rhs: vec![-1.0],
        };
        assert_eq!(solve_lp(&p, &tol()).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn duals_certify_transport_like_program() {
        // min 2a + b s.t. a + b = 1, a − b = 0  →  a = b = ½, value 1.5
        let p = LinearProgram {
            objective: vec![2.0, 1.0],
            constraints: vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            rhs: vec![1.0, 0.0],
        };
        let out = solve_lp(&p, &tol()).unwrap();
        let sol = out.optimal().unwrap();
        assert!((sol.objective - 1.5).abs() < 1e-10);
        assert_certified(&p, sol, &tol());
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let p = LinearProgram {
            objective: vec![1.0, 3.0],
            constraints: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            rhs: vec![1.0, 2.0],
        };
        let out = solve_lp(&p, &tol()).unwrap();
        let sol = out.optimal().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-10);
        assert_certified(&p, sol, &tol());
    }

    #[test]
    fn negative_rhs_duals_unflipped() {
        // min x1 + x2 s.t. −x1 = −1 (flips internally), x2 free at 0
        let p = LinearProgram {
            objective: vec![1.0, 1.0],
            constraints: vec![vec![-1.0, 0.0]],
            rhs: vec![-1.0],
        };
        let out = solve_lp(&p, &tol()).unwrap();
        let sol = out.optimal().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        // y·b must equal the objective: y·(−1) = 1 ⇒ y = −1
        assert!((sol.duals[0] + 1.0).abs() < 1e-12);
        assert_certified(&p, sol, &tol());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = LinearProgram {
            objective: vec![1.0],
            constraints: vec![vec![1.0, 2.0]],
            rhs: vec![1.0],
        };
        assert!(matches!(
            solve_lp(&p, &tol()),
            Err(LpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let p = LinearProgram {
            objective: vec![f64::NAN],
            constraints: vec![vec![1.0]],
            rhs: vec![1.0],
        };
        assert!(matches!(solve_lp(&p, &tol()), Err(LpError::NonFinite)));
    }

    #[test]
    fn deterministic_across_runs() {
        let p = LinearProgram {
            objective: vec![1.0, -2.0, 0.5, 0.0, 3.0],
            constraints: vec![
                vec![1.0, 1.0, 1.0, 1.0, 1.0],
                vec![0.5, -1.0, 2.0, 0.0, 1.0],
            ],
            rhs: vec![4.0, 1.0],
        };
        let a = solve_lp(&p, &tol()).unwrap();
        let b = solve_lp(&p, &tol()).unwrap();
        assert_eq!(a, b);
    }
}
