//! Transport plans on product grids, martingale checks, the primal and dual
//! martingale transport LP, and the associated integral functionals.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::costs::{CostError, CostSpec};
use crate::lp::{solve_lp, LinearProgram, LpError, LpOutcome};
use crate::measures::{DiscreteMeasure, PiecewiseLinearConvex};
use crate::tol::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("entry index ({source_index}, {target_index}) out of range")]
    IndexOutOfRange {
        source_index: usize,
        target_index: usize,
    },
    #[error("entry mass {mass} at ({source_index}, {target_index}) is negative")]
    NegativeMass {
        source_index: usize,
        target_index: usize,
        mass: f64,
    },
    #[error("row sum {actual} differs from source weight {expected} at source {index}")]
    RowSumMismatch {
        index: usize,
        expected: f64,
        actual: f64,
    },
    #[error("column sum {actual} differs from target weight {expected} at target {index}")]
    ColumnSumMismatch {
        index: usize,
        expected: f64,
        actual: f64,
    },
    #[error("coupling is not a martingale (first barycenter deviation {deviation} at source {index})")]
    NotMartingale { index: usize, deviation: f64 },
    #[error("value vector length {actual} does not match the {expected} atoms")]
    ValueLength { expected: usize, actual: usize },
    #[error("coupling marginals do not match the supplied measures")]
    MarginalMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotError {
    #[error("marginals are not in convex order: the martingale transport set is empty")]
    NotInConvexOrder,
    #[error("measure is not a probability measure (mass {mass})")]
    NotProbability { mass: f64 },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("transport LP reported unbounded, which is impossible for nonnegative costs")]
    UnexpectedUnbounded,
}

/// One sparse entry of a transport plan: mass sent from source atom `source`
/// to target atom `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// Sparse transport plan between two atomic measures. Row sums reproduce the
/// source weights and column sums the target weights, within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    entries: Vec<CouplingEntry>,
}

impl Coupling {
    /// Validating constructor. Duplicate (source, target) entries are merged;
    /// entries below the dust threshold are dropped before validation.
    pub fn new(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        tol: &Tolerances,
    ) -> Result<Self, CouplingError> {
        let mut list: Vec<CouplingEntry> = Vec::new();
        for (source, target, mass) in entries {
            if source >= mu.len() || target >= nu.len() {
                return Err(CouplingError::IndexOutOfRange {
                    source_index: source,
                    target_index: target,
                });
            }
            if mass < -tol.dust() {
                return Err(CouplingError::NegativeMass {
                    source_index: source,
                    target_index: target,
                    mass,
                });
            }
            list.push(CouplingEntry {
                source,
                target,
                mass,
            });
        }
        list.sort_by_key(|e| (e.source, e.target));
        let mut merged: Vec<CouplingEntry> = Vec::with_capacity(list.len());
        for e in list {
            match merged.last_mut() {
                Some(last) if last.source == e.source && last.target == e.target => {
                    last.mass += e.mass;
                }
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.mass > tol.dust());

        let mut row = vec![0.0; mu.len()];
        let mut col = vec![0.0; nu.len()];
        for e in &merged {
            row[e.source] += e.mass;
            col[e.target] += e.mass;
        }
        for (i, (&actual, &expected)) in row.iter().zip(mu.weights()).enumerate() {
            if (actual - expected).abs() > tol.cmp {
                return Err(CouplingError::RowSumMismatch {
                    index: i,
                    expected,
                    actual,
                });
            }
        }
        for (j, (&actual, &expected)) in col.iter().zip(nu.weights()).enumerate() {
            if (actual - expected).abs() > tol.cmp {
                return Err(CouplingError::ColumnSumMismatch {
                    index: j,
                    expected,
                    actual,
                });
            }
        }
        Ok(Coupling {
            mu,
            nu,
            entries: merged,
        })
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn entries(&self) -> &[CouplingEntry] {
        &self.entries
    }

    /// Support as (x, y) position pairs, one per entry.
    pub fn support_pairs(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .map(|e| (self.mu.positions()[e.source], self.nu.positions()[e.target]))
            .collect()
    }

    /// Mass at a specific (source, target) cell, zero if absent.
    pub fn mass_at(&self, source: usize, target: usize) -> f64 {
        self.entries
            .iter()
            .find(|e| e.source == source && e.target == target)
            .map_or(0.0, |e| e.mass)
    }

    /// Largest entrywise mass difference against another coupling on the same
    /// index grids.
    pub fn entrywise_distance(&self, other: &Coupling) -> f64 {
        let mut d = 0.0f64;
        for e in &self.entries {
            d = d.max((e.mass - other.mass_at(e.source, e.target)).abs());
        }
        for e in &other.entries {
            d = d.max((e.mass - self.mass_at(e.source, e.target)).abs());
        }
        d
    }

    /// Non-normalized disintegration slice at source atom `i`: the measure
    /// (y_j, mass(i, j)) with total mass equal to the source weight.
    pub fn disintegrate(&self, i: usize) -> DiscreteMeasure {
        let mut positions = Vec::new();
        let mut weights = Vec::new();
        for e in &self.entries {
            if e.source == i {
                positions.push(self.nu.positions()[e.target]);
                weights.push(e.mass);
            }
        }
        DiscreteMeasure::from_sorted_unchecked(positions, weights)
    }

    /// Restriction of the plan to the first `k` source atoms (prefix in
    /// ascending source order), as a plain entry list.
    pub fn prefix_target_marginal(&self, k: usize, tol: &Tolerances) -> DiscreteMeasure {
        let pairs = self
            .entries
            .iter()
            .filter(|e| e.source < k)
            .map(|e| (self.nu.positions()[e.target], e.mass));
        DiscreteMeasure::new(pairs, tol).expect("entry masses are positive")
    }
}

impl Serialize for Coupling {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            mu: &'a DiscreteMeasure,
            nu: &'a DiscreteMeasure,
            entries: Vec<(usize, usize, f64)>,
        }
        Repr {
            mu: &self.mu,
            nu: &self.nu,
            entries: self
                .entries
                .iter()
                .map(|e| (e.source, e.target, e.mass))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            mu: DiscreteMeasure,
            nu: DiscreteMeasure,
            entries: Vec<(usize, usize, f64)>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Coupling::new(repr.mu, repr.nu, repr.entries, &Tolerances::default())
            .map_err(D::Error::custom)
    }
}

/// Outcome of the martingale barycenter check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MartingaleCheck {
    Pass,
    Violations(Vec<BarycenterViolation>),
}

impl MartingaleCheck {
    pub fn is_pass(&self) -> bool {
        matches!(self, MartingaleCheck::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarycenterViolation {
    pub source: usize,
    pub deviation: f64,
}

/// Checks the martingale property: for every source atom with positive mass,
/// the barycenter of its disintegration equals the atom position within
/// `tol.cmp`.
pub fn check_martingale(pi: &Coupling, tol: &Tolerances) -> MartingaleCheck {
    let mut violations = Vec::new();
    let mut row_moment = vec![0.0; pi.mu().len()];
    let mut row_mass = vec![0.0; pi.mu().len()];
    for e in pi.entries() {
        row_moment[e.source] += e.mass * pi.nu().positions()[e.target];
        row_mass[e.source] += e.mass;
    }
    for i in 0..pi.mu().len() {
        if row_mass[i] <= tol.cmp {
            continue;
        }
        let deviation = row_moment[i] / row_mass[i] - pi.mu().positions()[i];
        if deviation.abs() > tol.cmp {
            violations.push(BarycenterViolation {
                source: i,
                deviation,
            });
        }
    }
    if violations.is_empty() {
        MartingaleCheck::Pass
    } else {
        MartingaleCheck::Violations(violations)
    }
}

/// Total transport cost ∫ c dπ = Σ mass·c(x, y).
pub fn transport_cost(pi: &Coupling, c: &CostSpec, tol: &Tolerances) -> Result<f64, CostError> {
    let mut total = 0.0;
    for e in pi.entries() {
        let x = pi.mu().positions()[e.source];
        let y = pi.nu().positions()[e.target];
        total += e.mass * c.evaluate(x, y, tol)?;
    }
    Ok(total)
}

/// Dual variables of the martingale transport LP: one φ and Δ per source atom,
/// one ψ per target atom, evaluated through ξ(x, y) = φ(x) + ψ(y) + Δ(x)(y−x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualTriple {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub delta: Vec<f64>,
}

impl DualTriple {
    /// ξ at the grid cell (i, j) of the given marginals.
    pub fn xi(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, i: usize, j: usize) -> f64 {
        let x = mu.positions()[i];
        let y = nu.positions()[j];
        self.phi[i] + self.psi[j] + self.delta[i] * (y - x)
    }

    /// ∫ ξ dπ over the entries of a coupling.
    pub fn integrate_xi(&self, pi: &Coupling) -> f64 {
        pi.entries()
            .iter()
            .map(|e| e.mass * self.xi(pi.mu(), pi.nu(), e.source, e.target))
            .sum()
    }

    /// Dual objective value ∫φ dμ + ∫ψ dν (the martingale rows have zero
    /// right-hand side).
    pub fn value(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let a: f64 = self.phi.iter().zip(mu.weights()).map(|(p, w)| p * w).sum();
        let b: f64 = self.psi.iter().zip(nu.weights()).map(|(p, w)| p * w).sum();
        a + b
    }
}

/// Solution of the martingale transport problem: optimal plan, optimal value,
/// and the dual triple certifying it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotSolution {
    pub coupling: Coupling,
    pub value: f64,
    pub dual: DualTriple,
}

fn require_probability(m: &DiscreteMeasure, tol: &Tolerances) -> Result<(), MotError> {
    let mass = m.mass();
    if (mass - 1.0).abs() > tol.cmp {
        return Err(MotError::NotProbability { mass });
    }
    Ok(())
}

/// Solves inf ∫ c dπ over martingale transports of (μ, ν) as a dense LP.
///
/// Variables are the product-grid cells; constraints are the row marginals,
/// the column marginals, and one barycenter row Σ_j π_ij (y_j − x_i) = 0 per
/// source atom. Infeasibility of the LP is reported as `NotInConvexOrder`
/// (the transport set is non-empty exactly for convex-ordered marginals).
pub fn solve_mot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostSpec,
    tol: &Tolerances,
) -> Result<MotSolution, MotError> {
    require_probability(mu, tol)?;
    require_probability(nu, tol)?;
    let m = mu.len();
    let n = nu.len();
    let nv = m * n;
    let idx = |i: usize, j: usize| i * n + j;

    let mut objective = vec![0.0; nv];
    for (i, &x) in mu.positions().iter().enumerate() {
        for (j, &y) in nu.positions().iter().enumerate() {
            objective[idx(i, j)] = c.evaluate(x, y, tol)?;
        }
    }

    let mut constraints = Vec::with_capacity(2 * m + n);
    let mut rhs = Vec::with_capacity(2 * m + n);
    for i in 0..m {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[idx(i, j)] = 1.0;
        }
        constraints.push(row);
        rhs.push(mu.weights()[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; nv];
        for i in 0..m {
            row[idx(i, j)] = 1.0;
        }
        constraints.push(row);
        rhs.push(nu.weights()[j]);
    }
    for (i, &x) in mu.positions().iter().enumerate() {
        // barycenter rows only matter for sources carrying mass; atoms below
        // the comparison tolerance never survive construction, so all rows
        // are kept
        let mut row = vec![0.0; nv];
        for (j, &y) in nu.positions().iter().enumerate() {
            row[idx(i, j)] = y - x;
        }
        constraints.push(row);
        rhs.push(0.0);
    }

    let program = LinearProgram {
        objective,
        constraints,
        rhs,
    };
    let solution = match solve_lp(&program, tol)? {
        LpOutcome::Infeasible => return Err(MotError::NotInConvexOrder),
        LpOutcome::Unbounded => return Err(MotError::UnexpectedUnbounded),
        LpOutcome::Optimal(s) => s,
    };

    let entries = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
        let mass = solution.primal[idx(i, j)];
        (mass > tol.dust()).then_some((i, j, mass))
    });
    let coupling = Coupling::new(mu.clone(), nu.clone(), entries, tol)?;
    let dual = DualTriple {
        phi: solution.duals[0..m].to_vec(),
        psi: solution.duals[m..m + n].to_vec(),
        delta: solution.duals[m + n..2 * m + n].to_vec(),
    };
    Ok(MotSolution {
        coupling,
        value: solution.objective,
        dual,
    })
}

/// Dual side of the transport problem: the triple (φ, ψ, Δ) with
/// φ(x) + ψ(y) + Δ(x)(y − x) ≤ c(x, y) on the grid and value equal to the
/// primal optimum.
pub fn solve_mot_dual(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostSpec,
    tol: &Tolerances,
) -> Result<(DualTriple, f64), MotError> {
    let sol = solve_mot(mu, nu, c, tol)?;
    Ok((sol.dual, sol.value))
}

fn require_martingale(pi: &Coupling, tol: &Tolerances) -> Result<(), CouplingError> {
    match check_martingale(pi, tol) {
        MartingaleCheck::Pass => Ok(()),
        MartingaleCheck::Violations(v) => Err(CouplingError::NotMartingale {
            index: v[0].source,
            deviation: v[0].deviation,
        }),
    }
}

/// J(χ) = ∫∫ χ(y) dπ_x(y) dμ(x) − ∫ χ dμ for a martingale coupling; equals
/// ∫χ dν − ∫χ dμ and is nonnegative for convex χ.
pub fn j_functional(
    chi: &PiecewiseLinearConvex,
    pi: &Coupling,
    tol: &Tolerances,
) -> Result<f64, CouplingError> {
    require_martingale(pi, tol)?;
    let inner: f64 = pi
        .entries()
        .iter()
        .map(|e| e.mass * chi.evaluate(pi.nu().positions()[e.target]))
        .sum();
    let outer: f64 = pi
        .mu()
        .atoms()
        .map(|(x, w)| w * chi.evaluate(x))
        .sum();
    Ok(inner - outer)
}

/// I(φ+ψ) = ∫(φ−χ) dμ + ∫(ψ+χ) dν − J(χ); independent of the admissible χ
/// and equal to ∫ ξ dπ for any martingale coupling π of the marginals.
pub fn i_functional(
    phi: &[f64],
    psi: &[f64],
    chi: &PiecewiseLinearConvex,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    pi: &Coupling,
    tol: &Tolerances,
) -> Result<f64, CouplingError> {
    if phi.len() != mu.len() {
        return Err(CouplingError::ValueLength {
            expected: mu.len(),
            actual: phi.len(),
        });
    }
    if psi.len() != nu.len() {
        return Err(CouplingError::ValueLength {
            expected: nu.len(),
            actual: psi.len(),
        });
    }
    if pi.mu() != mu || pi.nu() != nu {
        return Err(CouplingError::MarginalMismatch);
    }
    let j = j_functional(chi, pi, tol)?;
    let a: f64 = mu
        .atoms()
        .zip(phi)
        .map(|((x, w), &p)| w * (p - chi.evaluate(x)))
        .sum();
    let b: f64 = nu
        .atoms()
        .zip(psi)
        .map(|((y, w), &p)| w * (p + chi.evaluate(y)))
        .sum();
    Ok(a + b - j)
}
