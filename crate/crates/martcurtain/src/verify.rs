//! Structural verification: left-monotonicity of supports, finite optimality
//! via competitor LPs, partial-sum convex order, irreducible decomposition of
//! marginal pairs, lower convex envelopes, and dual-splitting certificates.

use serde::Serialize;
use thiserror::Error;

use crate::costs::{CostError, CostSpec};
use crate::coupling::{check_martingale, Coupling, CouplingError, DualTriple, MartingaleCheck};
use crate::lp::{solve_lp, LinearProgram, LpError, LpOutcome};
use crate::measures::{
    check_convex_order, grid_union, ConvexOrder, ConvexOrderViolation, DiscreteMeasure, Interval,
    MeasureError, PiecewiseLinearConvex,
};
use crate::tol::Tolerances;

/// Hard cap on the number of source subsets a finite-optimality scan may
/// enumerate.
const MAX_SUBSETS: u128 = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("marginals are not in convex order: {0:?}")]
    NotConvexOrder(ConvexOrderViolation),
    #[error("subset enumeration overflow: {subsets} subsets of {sources} source values at k = {k}")]
    EnumerationOverflow {
        sources: usize,
        k: usize,
        subsets: u128,
    },
    #[error("inputs are not a competitor pair: {detail}")]
    NotCompetitors { detail: String },
    #[error("k must be at least 1")]
    ZeroSubsetSize,
    #[error("empty grid")]
    EmptyGrid,
    #[error("decomposition failed: {detail}")]
    Decomposition { detail: String },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// Deduplicated, lexicographically ordered set of (x, y) support points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSet {
    pairs: Vec<(f64, f64)>,
}

impl SupportSet {
    /// Builds the set from arbitrary pairs; points equal within `tol.cmp` in
    /// both coordinates are merged.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>, tol: &Tolerances) -> Self {
        let mut list: Vec<(f64, f64)> = pairs.into_iter().collect();
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        list.dedup_by(|a, b| (a.0 - b.0).abs() <= tol.cmp && (a.1 - b.1).abs() <= tol.cmp);
        SupportSet { pairs: list }
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Support of a coupling's entry list.
    pub fn from_coupling(pi: &Coupling, tol: &Tolerances) -> Self {
        Self::from_pairs(pi.support_pairs(), tol)
    }

    /// Groups the pairs by source value (within `tol.cmp`), ascending; each
    /// group carries its representative x and the target values above it.
    fn source_groups(&self, tol: &Tolerances) -> Vec<(f64, Vec<f64>)> {
        let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
        for &(x, y) in &self.pairs {
            match groups.last_mut() {
                Some((gx, ys)) if (x - *gx).abs() <= tol.cmp => ys.push(y),
                _ => groups.push((x, vec![y])),
            }
        }
        groups
    }
}

/// Outcome of the left-monotonicity scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LeftMonotone {
    Pass,
    Witness(LeftMonotoneWitness),
}

impl LeftMonotone {
    pub fn is_pass(&self) -> bool {
        matches!(self, LeftMonotone::Pass)
    }
}

/// A triple (x, y⁻), (x, y⁺), (x′, y′) with x < x′ and y⁻ < y′ < y⁺.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeftMonotoneWitness {
    pub x: f64,
    pub y_minus: f64,
    pub y_plus: f64,
    pub x_prime: f64,
    pub y_prime: f64,
}

/// Exhaustively checks left-monotonicity: no target of a strictly-right
/// source may fall strictly between two targets of a source to its left.
/// The first witness in scan order (sources ascending, then the offending
/// right point) is reported.
pub fn check_left_monotone(gamma: &SupportSet, tol: &Tolerances) -> LeftMonotone {
    let groups = gamma.source_groups(tol);
    for (gi, (x, ys)) in groups.iter().enumerate() {
        if ys.len() < 2 {
            continue;
        }
        for (x_prime, ys_prime) in groups.iter().skip(gi + 1) {
            if *x_prime <= x + tol.cmp {
                continue;
            }
            for &y_prime in ys_prime {
                // tightest bracket of y′ within this group's targets
                let below = ys
                    .iter()
                    .filter(|&&y| y < y_prime - tol.cmp)
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let above = ys
                    .iter()
                    .filter(|&&y| y > y_prime + tol.cmp)
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if below.is_finite() && above.is_finite() {
                    return LeftMonotone::Witness(LeftMonotoneWitness {
                        x: *x,
                        y_minus: below,
                        y_plus: above,
                        x_prime: *x_prime,
                        y_prime,
                    });
                }
            }
        }
    }
    LeftMonotone::Pass
}

/// Outcome of the finite-optimality scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FiniteOptimality {
    Pass,
    Witness(FiniteOptimalityWitness),
}

impl FiniteOptimality {
    pub fn is_pass(&self) -> bool {
        matches!(self, FiniteOptimality::Pass)
    }
}

/// A measure α on the support together with a strictly cheaper competitor α′.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteOptimalityWitness {
    pub alpha: Coupling,
    pub alpha_prime: Coupling,
    /// ∫c dα′ − ∫c dα < 0.
    pub gap: f64,
}

/// Optimal competitor pair of one source-subset LP.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitorPair {
    /// Source values of the subset.
    pub sources: Vec<f64>,
    /// LP optimum min ∫c dα′ − ∫c dα over the subset.
    pub gap: f64,
    pub alpha: Coupling,
    pub alpha_prime: Coupling,
}

fn count_subsets(sources: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    for size in 1..=k.min(sources) {
        let mut c: u128 = 1;
        for i in 0..size {
            c = c.saturating_mul((sources - i) as u128) / (i as u128 + 1);
        }
        total = total.saturating_add(c);
    }
    total
}

/// Joint LP over one subset of source values: variables are a measure α on
/// the subset's support pairs (normalized to total mass one) and a competitor
/// α′ on sources × target values, constrained to share per-source masses,
/// per-source barycenters and the overall target marginal. The optimum of
/// ∫c dα′ − ∫c dα is nonnegative exactly when no improving competitor exists.
fn subset_competitor_lp(
    groups: &[(f64, Vec<f64>)],
    subset: &[usize],
    c: &CostSpec,
    tol: &Tolerances,
) -> Result<CompetitorPair, VerifyError> {
    let sources: Vec<f64> = subset.iter().map(|&a| groups[a].0).collect();
    let mut pairs: Vec<(usize, f64)> = Vec::new(); // (subset slot, target value)
    for (slot, &a) in subset.iter().enumerate() {
        for &y in &groups[a].1 {
            pairs.push((slot, y));
        }
    }
    let mut targets: Vec<f64> = pairs.iter().map(|&(_, y)| y).collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| (*a - *b).abs() <= tol.cmp);
    let target_index = |y: f64| -> usize {
        targets
            .iter()
            .position(|&t| (t - y).abs() <= tol.cmp)
            .expect("target value is in the deduplicated list")
    };

    let np = pairs.len();
    let ns = sources.len();
    let nt = targets.len();
    let nv = np + ns * nt;
    let prime = |a: usize, v: usize| np + a * nt + v;

    let mut objective = vec![0.0; nv];
    for (p, &(slot, y)) in pairs.iter().enumerate() {
        objective[p] = -c.evaluate(sources[slot], y, tol)?;
    }
    for (a, &x) in sources.iter().enumerate() {
        for (v, &y) in targets.iter().enumerate() {
            objective[prime(a, v)] = c.evaluate(x, y, tol)?;
        }
    }

    let mut constraints: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    // normalization of α
    let mut row = vec![0.0; nv];
    for p in 0..np {
        row[p] = 1.0;
    }
    constraints.push(row);
    rhs.push(1.0);
    // per-source mass and barycenter matching
    for a in 0..ns {
        let mut mass_row = vec![0.0; nv];
        let mut bary_row = vec![0.0; nv];
        for (p, &(slot, y)) in pairs.iter().enumerate() {
            if slot == a {
                mass_row[p] = -1.0;
                bary_row[p] = -y;
            }
        }
        for (v, &y) in targets.iter().enumerate() {
            mass_row[prime(a, v)] = 1.0;
            bary_row[prime(a, v)] = y;
        }
        constraints.push(mass_row);
        rhs.push(0.0);
        constraints.push(bary_row);
        rhs.push(0.0);
    }
    // overall target marginal matching
    for v in 0..nt {
        let mut row = vec![0.0; nv];
        for (p, &(_, y)) in pairs.iter().enumerate() {
            if target_index(y) == v {
                row[p] = -1.0;
            }
        }
        for a in 0..ns {
            row[prime(a, v)] = 1.0;
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
        LpOutcome::Optimal(s) => s,
        // α′ = α is always feasible and the objective is bounded by the
        // normalized masses, so neither status can occur
        LpOutcome::Infeasible | LpOutcome::Unbounded => {
            return Err(VerifyError::Decomposition {
                detail: "competitor LP unexpectedly infeasible or unbounded".into(),
            })
        }
    };

    // marginals shared by α and α′
    let mut src_mass = vec![0.0; ns];
    let mut tgt_mass = vec![0.0; nt];
    for (p, &(slot, y)) in pairs.iter().enumerate() {
        src_mass[slot] += solution.primal[p];
        tgt_mass[target_index(y)] += solution.primal[p];
    }
    let kept_src: Vec<usize> = (0..ns).filter(|&a| src_mass[a] > tol.dust()).collect();
    let kept_tgt: Vec<usize> = (0..nt).filter(|&v| tgt_mass[v] > tol.dust()).collect();
    let mu_w = DiscreteMeasure::from_sorted_unchecked(
        kept_src.iter().map(|&a| sources[a]).collect(),
        kept_src.iter().map(|&a| src_mass[a]).collect(),
    );
    let nu_w = DiscreteMeasure::from_sorted_unchecked(
        kept_tgt.iter().map(|&v| targets[v]).collect(),
        kept_tgt.iter().map(|&v| tgt_mass[v]).collect(),
    );
    let src_slot = |a: usize| kept_src.iter().position(|&s| s == a);
    let tgt_slot = |v: usize| kept_tgt.iter().position(|&s| s == v);

    let mut alpha_entries = Vec::new();
    for (p, &(slot, y)) in pairs.iter().enumerate() {
        let mass = solution.primal[p];
        if mass > tol.dust() {
            if let (Some(i), Some(j)) = (src_slot(slot), tgt_slot(target_index(y))) {
                alpha_entries.push((i, j, mass));
            }
        }
    }
    let mut alpha_prime_entries = Vec::new();
    for a in 0..ns {
        for v in 0..nt {
            let mass = solution.primal[prime(a, v)];
            if mass > tol.dust() {
                if let (Some(i), Some(j)) = (src_slot(a), tgt_slot(v)) {
                    alpha_prime_entries.push((i, j, mass));
                }
            }
        }
    }
    let alpha = Coupling::new(mu_w.clone(), nu_w.clone(), alpha_entries, tol)?;
    let alpha_prime = Coupling::new(mu_w, nu_w, alpha_prime_entries, tol)?;
    Ok(CompetitorPair {
        sources,
        gap: solution.objective,
        alpha,
        alpha_prime,
    })
}

/// Visits every subset of `1..=k` indices out of `0..ns`, by size and then
/// lexicographically. The callback returns `true` to stop early.
fn for_each_subset<F>(ns: usize, k: usize, mut f: F) -> Result<(), VerifyError>
where
    F: FnMut(&[usize]) -> Result<bool, VerifyError>,
{
    for size in 1..=k.min(ns) {
        let mut subset: Vec<usize> = (0..size).collect();
        'combos: loop {
            if f(&subset)? {
                return Ok(());
            }
            let mut i = size;
            while i > 0 {
                i -= 1;
                if subset[i] < ns - size + i {
                    subset[i] += 1;
                    for j in i + 1..size {
                        subset[j] = subset[j - 1] + 1;
                    }
                    continue 'combos;
                }
            }
            break;
        }
    }
    Ok(())
}

/// Scans every subset of at most `k` distinct source values (all support
/// pairs above them) and solves the joint competitor LP, collecting the
/// optimal pair per subset. Subsets are visited by size, then
/// lexicographically.
pub fn finite_optimality_scan(
    gamma: &SupportSet,
    c: &CostSpec,
    k: usize,
    tol: &Tolerances,
) -> Result<Vec<CompetitorPair>, VerifyError> {
    if k == 0 {
        return Err(VerifyError::ZeroSubsetSize);
    }
    let groups = gamma.source_groups(tol);
    let ns = groups.len();
    let subsets = count_subsets(ns, k);
    if subsets > MAX_SUBSETS {
        return Err(VerifyError::EnumerationOverflow {
            sources: ns,
            k,
            subsets,
        });
    }
    let mut out = Vec::new();
    for_each_subset(ns, k, |subset| {
        out.push(subset_competitor_lp(&groups, subset, c, tol)?);
        Ok(false)
    })?;
    Ok(out)
}

/// Checks c-finite optimality of a support set: every finite measure on its
/// points must be cost-minimal among its competitors. Subsets of up to `k`
/// distinct source values are scanned; the first subset whose competitor LP
/// attains a gap below −tol yields the witness.
pub fn check_finite_optimality(
    gamma: &SupportSet,
    c: &CostSpec,
    k: usize,
    tol: &Tolerances,
) -> Result<FiniteOptimality, VerifyError> {
    if k == 0 {
        return Err(VerifyError::ZeroSubsetSize);
    }
    let groups = gamma.source_groups(tol);
    let ns = groups.len();
    let subsets = count_subsets(ns, k);
    if subsets > MAX_SUBSETS {
        return Err(VerifyError::EnumerationOverflow {
            sources: ns,
            k,
            subsets,
        });
    }
    let mut witness: Option<FiniteOptimalityWitness> = None;
    for_each_subset(ns, k, |subset| {
        let pair = subset_competitor_lp(&groups, subset, c, tol)?;
        if pair.gap < -tol.cmp {
            witness = Some(FiniteOptimalityWitness {
                alpha: pair.alpha,
                alpha_prime: pair.alpha_prime,
                gap: pair.gap,
            });
            return Ok(true);
        }
        Ok(false)
    })?;
    Ok(match witness {
        Some(w) => FiniteOptimality::Witness(w),
        None => FiniteOptimality::Pass,
    })
}

/// Outcome of the partial-sum convex-order check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PartialSumOrder {
    Pass,
    Fail {
        /// 1-based number of leading sources whose summed disintegrations
        /// violate the order.
        index: usize,
        /// Target grid point where call-function domination fails.
        witness: f64,
    },
}

impl PartialSumOrder {
    pub fn is_pass(&self) -> bool {
        matches!(self, PartialSumOrder::Pass)
    }
}

fn competitor_pair_deviation(alpha: &Coupling, alpha_prime: &Coupling) -> Result<f64, VerifyError> {
    if alpha.mu().len() != alpha_prime.mu().len() || alpha.nu().len() != alpha_prime.nu().len() {
        return Err(VerifyError::NotCompetitors {
            detail: "marginal supports differ in size".into(),
        });
    }
    let mut dev = 0.0f64;
    for ((pa, wa), (pb, wb)) in alpha.mu().atoms().zip(alpha_prime.mu().atoms()) {
        dev = dev.max((pa - pb).abs()).max((wa - wb).abs());
    }
    for ((pa, wa), (pb, wb)) in alpha.nu().atoms().zip(alpha_prime.nu().atoms()) {
        dev = dev.max((pa - pb).abs()).max((wa - wb).abs());
    }
    for i in 0..alpha.mu().len() {
        let a = alpha.disintegrate(i);
        let b = alpha_prime.disintegrate(i);
        dev = dev.max((a.moment() - b.moment()).abs());
    }
    Ok(dev)
}

/// Checks α_{x₁} + ⋯ + α_{xᵢ} ≤꜀ₓ α′_{x₁} + ⋯ + α′_{xᵢ} for every i, where
/// the sums run over the leading source atoms in ascending order. The inputs
/// must be a competitor pair (identical marginals and per-source barycenters,
/// validated at the LP feasibility tolerance).
pub fn check_partial_sum_convex_order(
    alpha: &Coupling,
    alpha_prime: &Coupling,
    tol: &Tolerances,
) -> Result<PartialSumOrder, VerifyError> {
    let dev = competitor_pair_deviation(alpha, alpha_prime)?;
    if dev > tol.feas {
        return Err(VerifyError::NotCompetitors {
            detail: format!("marginal or barycenter deviation {dev}"),
        });
    }
    let n = alpha.mu().len();
    let mut sum_a = DiscreteMeasure::zero();
    let mut sum_b = DiscreteMeasure::zero();
    for i in 0..n {
        sum_a = sum_a.add(&alpha.disintegrate(i), tol);
        sum_b = sum_b.add(&alpha_prime.disintegrate(i), tol);
        let (u_a, u_b) = (sum_a.potential(), sum_b.potential());
        for &t in grid_union(&sum_a, &sum_b).iter() {
            if u_a.evaluate(t) > u_b.evaluate(t) + tol.cmp {
                return Ok(PartialSumOrder::Fail {
                    index: i + 1,
                    witness: t,
                });
            }
        }
    }
    Ok(PartialSumOrder::Pass)
}

/// One irreducible component: an open interval where the potential of ν
/// strictly dominates, with the marginal pieces transported inside it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub lo: f64,
    pub hi: f64,
    pub mu_part: DiscreteMeasure,
    pub nu_part: DiscreteMeasure,
}

/// Decomposition of a convex-ordered pair into a common part μ₀ = ν₀ and
/// irreducible components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub common: DiscreteMeasure,
    pub components: Vec<Component>,
}

impl Decomposition {
    /// Re-checks the structural invariants against the original marginals.
    pub fn validate(
        &self,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        tol: &Tolerances,
    ) -> Result<(), VerifyError> {
        for w in self.components.windows(2) {
            if w[0].hi > w[1].lo + tol.cmp {
                return Err(VerifyError::Decomposition {
                    detail: format!(
                        "intervals ({}, {}) and ({}, {}) overlap",
                        w[0].lo, w[0].hi, w[1].lo, w[1].hi
                    ),
                });
            }
        }
        let mut mu_sum = self.common.clone();
        let mut nu_sum = self.common.clone();
        for c in &self.components {
            if c.lo >= c.hi {
                return Err(VerifyError::Decomposition {
                    detail: format!("degenerate interval ({}, {})", c.lo, c.hi),
                });
            }
            mu_sum = mu_sum.add(&c.mu_part, tol);
            nu_sum = nu_sum.add(&c.nu_part, tol);
            match check_convex_order(&c.mu_part, &c.nu_part, tol)? {
                ConvexOrder::Ordered => {}
                ConvexOrder::Violation(v) => {
                    return Err(VerifyError::Decomposition {
                        detail: format!("component ({}, {}) not convex-ordered: {v:?}", c.lo, c.hi),
                    })
                }
            }
        }
        for (sum, original, name) in [(&mu_sum, mu, "mu"), (&nu_sum, nu, "nu")] {
            if !measures_approx_eq(sum, original, tol.cmp, tol.cmp) {
                return Err(VerifyError::Decomposition {
                    detail: format!("{name} parts do not reconstitute the original"),
                });
            }
        }
        Ok(())
    }

    /// Largest coupling mass escaping any component, i.e. transported from
    /// inside an open interval to outside its closure.
    pub fn max_escaping_mass(&self, pi: &Coupling, tol: &Tolerances) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.components {
            let open = Interval::open(c.lo, c.hi);
            let closed = Interval::new(c.lo, c.hi, true, true);
            for e in pi.entries() {
                let x = pi.mu().positions()[e.source];
                let y = pi.nu().positions()[e.target];
                if open.contains(x, tol) && !closed.contains(y, tol) {
                    worst = worst.max(e.mass);
                }
            }
        }
        worst
    }
}

fn measures_approx_eq(a: &DiscreteMeasure, b: &DiscreteMeasure, pos_tol: f64, w_tol: f64) -> bool {
    a.len() == b.len()
        && a.atoms()
            .zip(b.atoms())
            .all(|((pa, wa), (pb, wb))| (pa - pb).abs() <= pos_tol && (wa - wb).abs() <= w_tol)
}

fn zero_crossing(x0: f64, d0: f64, x1: f64, d1: f64) -> f64 {
    if (d1 - d0).abs() < f64::MIN_POSITIVE {
        return x0;
    }
    (x0 + (0.0 - d0) * (x1 - x0) / (d1 - d0)).clamp(x0, x1)
}

/// Decomposes a convex-ordered pair into its irreducible components: the
/// maximal open intervals where u_ν − u_μ exceeds the tolerance, with
/// endpoints located by interpolating the zero of the piecewise linear
/// difference (clamped to the enclosing grid segment). μ restricted to a
/// component is transported within it; endpoint masses of ν are chosen so
/// each component matches its μ piece in mass and mean.
pub fn irreducible_components(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: &Tolerances,
) -> Result<Decomposition, VerifyError> {
    match check_convex_order(mu, nu, tol)? {
        ConvexOrder::Ordered => {}
        ConvexOrder::Violation(v) => return Err(VerifyError::NotConvexOrder(v)),
    }
    let grid = grid_union(mu, nu);
    let (u_mu, u_nu) = (mu.potential(), nu.potential());
    let d: Vec<f64> = grid
        .iter()
        .map(|&x| u_nu.evaluate(x) - u_mu.evaluate(x))
        .collect();

    let mut components = Vec::new();
    let mut used_mu = DiscreteMeasure::zero();
    let mut i = 0;
    while i < grid.len() {
        if d[i] <= tol.cmp {
            i += 1;
            continue;
        }
        let first = i;
        while i + 1 < grid.len() && d[i + 1] > tol.cmp {
            i += 1;
        }
        let last = i;
        i += 1;

        let lo = if first == 0 {
            grid[first]
        } else {
            zero_crossing(grid[first - 1], d[first - 1], grid[first], d[first])
        };
        let hi = if last + 1 == grid.len() {
            grid[last]
        } else {
            zero_crossing(grid[last], d[last], grid[last + 1], d[last + 1])
        };
        if hi - lo <= tol.cmp {
            continue;
        }
        let open = Interval::open(lo, hi);
        let mu_part = mu.restrict(&open, tol);
        if mu_part.is_empty() {
            return Err(VerifyError::Decomposition {
                detail: format!("component ({lo}, {hi}) contains no source mass"),
            });
        }
        let inner = nu.restrict(&open, tol);
        let mass_def = mu_part.mass() - inner.mass();
        let moment_def = mu_part.moment() - inner.moment();
        let mut w_hi = (moment_def - lo * mass_def) / (hi - lo);
        let mut w_lo = mass_def - w_hi;
        if w_lo < -1e-7 || w_hi < -1e-7 {
            return Err(VerifyError::Decomposition {
                detail: format!(
                    "negative endpoint masses ({w_lo}, {w_hi}) for component ({lo}, {hi})"
                ),
            });
        }
        w_lo = w_lo.max(0.0);
        w_hi = w_hi.max(0.0);
        let nu_part = DiscreteMeasure::new(
            inner
                .atoms()
                .chain([(lo, w_lo), (hi, w_hi)]),
            tol,
        )?;
        used_mu = used_mu.add(&mu_part, tol);
        components.push(Component {
            lo,
            hi,
            mu_part,
            nu_part,
        });
    }

    let common = mu.subtract(&used_mu, tol)?;
    Ok(Decomposition {
        common,
        components,
    })
}

/// Lower convex envelope of values on a strictly increasing grid, returned as
/// the piecewise linear function through the hull vertices, extended beyond
/// the grid with the boundary segment slopes.
pub fn convex_envelope(xs: &[f64], values: &[f64]) -> Result<PiecewiseLinearConvex, VerifyError> {
    if xs.is_empty() {
        return Err(VerifyError::EmptyGrid);
    }
    if xs.len() != values.len() {
        return Err(VerifyError::Measure(MeasureError::LengthMismatch {
            expected: xs.len(),
            actual: values.len(),
        }));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VerifyError::Measure(MeasureError::UnorderedBreakpoints));
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &v) in xs.iter().zip(values.iter()) {
        while hull.len() >= 2 {
            let (x1, v1) = hull[hull.len() - 2];
            let (x2, v2) = hull[hull.len() - 1];
            // pop the middle point unless it lies strictly below the chord
            if (x2 - x1) * (v - v1) - (x - x1) * (v2 - v1) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, v));
    }
    let (left_slope, right_slope) = if hull.len() == 1 {
        (0.0, 0.0)
    } else {
        let first = (hull[1].1 - hull[0].1) / (hull[1].0 - hull[0].0);
        let m = hull.len();
        let last = (hull[m - 1].1 - hull[m - 2].1) / (hull[m - 1].0 - hull[m - 2].0);
        (first, last)
    };
    let (bps, vals): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
    Ok(PiecewiseLinearConvex::new(
        bps,
        vals,
        left_slope,
        right_slope,
    )?)
}

/// Outcome of the dual-splitting certificate check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DualSplitting {
    Pass,
    Fail(DualSplittingFailure),
}

impl DualSplitting {
    pub fn is_pass(&self) -> bool {
        matches!(self, DualSplitting::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSplittingFailure {
    pub source: usize,
    pub target: usize,
    pub kind: DualSplittingFailureKind,
    /// ξ − c at the failing cell.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualSplittingFailureKind {
    /// ξ exceeds c somewhere on the grid.
    InequalityViolated,
    /// ξ differs from c on a support cell.
    EqualityBroken,
}

/// Checks φ(x) + ψ(y) + Δ(x)(y − x) ≤ c(x, y) on the full product grid of the
/// coupling's marginals, with equality on every support cell.
pub fn verify_dual_splitting(
    pi: &Coupling,
    c: &CostSpec,
    d: &DualTriple,
    tol: &Tolerances,
) -> Result<DualSplitting, VerifyError> {
    if d.phi.len() != pi.mu().len() || d.delta.len() != pi.mu().len() {
        return Err(VerifyError::Coupling(CouplingError::ValueLength {
            expected: pi.mu().len(),
            actual: d.phi.len(),
        }));
    }
    if d.psi.len() != pi.nu().len() {
        return Err(VerifyError::Coupling(CouplingError::ValueLength {
            expected: pi.nu().len(),
            actual: d.psi.len(),
        }));
    }
    if let MartingaleCheck::Violations(v) = check_martingale(pi, tol) {
        return Err(VerifyError::Coupling(CouplingError::NotMartingale {
            index: v[0].source,
            deviation: v[0].deviation,
        }));
    }
    for i in 0..pi.mu().len() {
        for j in 0..pi.nu().len() {
            let xi = d.xi(pi.mu(), pi.nu(), i, j);
            let cost = c.evaluate(pi.mu().positions()[i], pi.nu().positions()[j], tol)?;
            if xi > cost + tol.cmp {
                return Ok(DualSplitting::Fail(DualSplittingFailure {
                    source: i,
                    target: j,
                    kind: DualSplittingFailureKind::InequalityViolated,
                    slack: xi - cost,
                }));
            }
        }
    }
    for e in pi.entries() {
        let xi = d.xi(pi.mu(), pi.nu(), e.source, e.target);
        let cost = c.evaluate(
            pi.mu().positions()[e.source],
            pi.nu().positions()[e.target],
            tol,
        )?;
        if (xi - cost).abs() > tol.cmp {
            return Ok(DualSplitting::Fail(DualSplittingFailure {
                source: e.source,
                target: e.target,
                kind: DualSplittingFailureKind::EqualityBroken,
                slack: xi - cost,
            }));
        }
    }
    Ok(DualSplitting::Pass)
}
