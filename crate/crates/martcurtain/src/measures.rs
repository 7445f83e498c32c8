//! Finite atomic measures on the real line, their potential functions, and
//! convex / extended convex order checks.
//!
//! A [`DiscreteMeasure`] is a finite nonnegative measure supported on finitely
//! many points. Positions are kept strictly increasing; atoms closer than the
//! comparison tolerance are merged on construction (weights added, position at
//! the weighted mean, which preserves the total mean exactly).

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tol::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom weight {weight} at position {position} is negative")]
    NegativeWeight { position: f64, weight: f64 },
    #[error("non-finite atom (position {position}, weight {weight})")]
    NonFiniteAtom { position: f64, weight: f64 },
    #[error("measure has zero mass but the operation requires mass > 0")]
    ZeroMass,
    #[error("subtrahend is not dominated: atom at {position} (weight {weight}) exceeds or misses the minuend")]
    NotDominated { position: f64, weight: f64 },
    #[error("breakpoints must be strictly increasing")]
    UnorderedBreakpoints,
    #[error("piecewise linear data is not convex at breakpoint {index}")]
    NotConvex { index: usize },
    #[error("length mismatch: {expected} breakpoints vs {actual} values")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Finite atomic measure on the line with strictly increasing atom positions
/// and strictly positive weights. The empty list is the zero measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from `(position, weight)` pairs. Atoms closer than
    /// `tol.cmp` are merged (weights added, position at the weighted mean);
    /// weights below the dust threshold are dropped; negative weights beyond
    /// dust are rejected.
    pub fn new(
        atoms: impl IntoIterator<Item = (f64, f64)>,
        tol: &Tolerances,
    ) -> Result<Self, MeasureError> {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (p, w) in atoms {
            if !p.is_finite() || !w.is_finite() {
                return Err(MeasureError::NonFiniteAtom {
                    position: p,
                    weight: w,
                });
            }
            if w < -tol.dust() {
                return Err(MeasureError::NegativeWeight {
                    position: p,
                    weight: w,
                });
            }
            if w > tol.dust() {
                pairs.push((p, w));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut positions = Vec::with_capacity(pairs.len());
        let mut weights = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            match positions.last_mut() {
                Some(last) if p - *last <= tol.cmp => {
                    let lw = *weights.last().unwrap();
                    let merged = lw + w;
                    *last = (*last * lw + p * w) / merged;
                    *weights.last_mut().unwrap() = merged;
                }
                _ => {
                    positions.push(p);
                    weights.push(w);
                }
            }
        }
        Ok(DiscreteMeasure { positions, weights })
    }

    /// Same as [`DiscreteMeasure::new`] with default tolerances.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MeasureError> {
        Self::new(atoms, &Tolerances::default())
    }

    /// The zero measure.
    pub fn zero() -> Self {
        DiscreteMeasure {
            positions: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// A single atom of weight `w` at `x`.
    pub fn dirac(x: f64, w: f64) -> Self {
        DiscreteMeasure {
            positions: vec![x],
            weights: vec![w],
        }
    }

    /// Internal constructor for data already sorted, merged and positive.
    pub(crate) fn from_sorted_unchecked(positions: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(positions.len(), weights.len());
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(weights.iter().all(|&w| w > 0.0));
        DiscreteMeasure { positions, weights }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// First moment Σ wᵢ·xᵢ.
    pub fn moment(&self) -> f64 {
        self.atoms().map(|(p, w)| p * w).sum()
    }

    /// Barycenter; `None` for the zero measure.
    pub fn mean(&self) -> Option<f64> {
        let m = self.mass();
        (m > 0.0).then(|| self.moment() / m)
    }

    /// Index of the atom at position `x` within `tol.cmp`, if any.
    pub fn index_of(&self, x: f64, tol: &Tolerances) -> Option<usize> {
        let i = self.positions.partition_point(|&p| p < x - tol.cmp);
        (i < self.positions.len() && (self.positions[i] - x).abs() <= tol.cmp).then_some(i)
    }

    /// Call value ∫ (y − t)₊ dm(y).
    pub fn call_value(&self, t: f64) -> f64 {
        self.atoms().map(|(p, w)| w * (p - t).max(0.0)).sum()
    }

    /// Put value ∫ (t − y)₊ dm(y).
    pub fn put_value(&self, t: f64) -> f64 {
        self.atoms().map(|(p, w)| w * (t - p).max(0.0)).sum()
    }

    /// Potential function u(x) = ∫ |x − y| dm(y): piecewise linear and convex,
    /// with breakpoints exactly at atom positions and asymptotic slopes ∓mass.
    pub fn potential(&self) -> PiecewiseLinearConvex {
        let total_mass = self.mass();
        let total_moment = self.moment();
        let mut values = Vec::with_capacity(self.len());
        let mut left_mass = 0.0;
        let mut left_moment = 0.0;
        for (p, w) in self.atoms() {
            // Σ_{y<p} w(p−y) + Σ_{y>p} w(y−p); the atom at p contributes 0.
            let v = p * (2.0 * left_mass - total_mass) - 2.0 * left_moment + total_moment;
            values.push(v);
            left_mass += w;
            left_moment += p * w;
        }
        PiecewiseLinearConvex {
            breakpoints: self.positions.clone(),
            values,
            left_slope: -total_mass,
            right_slope: total_mass,
        }
    }

    /// Restriction to an interval: keeps exactly the atoms inside, weights
    /// unchanged. Boundary membership follows the interval's closed-end flags,
    /// with positions within `tol.cmp` of an endpoint treated as on it.
    pub fn restrict(&self, interval: &Interval, tol: &Tolerances) -> DiscreteMeasure {
        let (mut positions, mut weights) = (Vec::new(), Vec::new());
        for (p, w) in self.atoms() {
            if interval.contains(p, tol) {
                positions.push(p);
                weights.push(w);
            }
        }
        DiscreteMeasure { positions, weights }
    }

    /// Atomwise difference `self − other`. Every atom of `other` must sit at an
    /// atom of `self` (within `tol.cmp`) with weight not exceeding it by more
    /// than `tol.cmp`. Resulting weights below `tol.cmp` are dropped.
    pub fn subtract(
        &self,
        other: &DiscreteMeasure,
        tol: &Tolerances,
    ) -> Result<DiscreteMeasure, MeasureError> {
        let mut remaining = self.weights.clone();
        for (p, w) in other.atoms() {
            let i = self
                .index_of(p, tol)
                .ok_or(MeasureError::NotDominated {
                    position: p,
                    weight: w,
                })?;
            if w > remaining[i] + tol.cmp {
                return Err(MeasureError::NotDominated {
                    position: p,
                    weight: w,
                });
            }
            remaining[i] -= w;
        }
        let (mut positions, mut weights) = (Vec::new(), Vec::new());
        for (i, &w) in remaining.iter().enumerate() {
            if w >= tol.cmp {
                positions.push(self.positions[i]);
                weights.push(w);
            }
        }
        Ok(DiscreteMeasure { positions, weights })
    }

    /// Measure sum, merging atoms within `tol.cmp`.
    pub fn add(&self, other: &DiscreteMeasure, tol: &Tolerances) -> DiscreteMeasure {
        DiscreteMeasure::new(self.atoms().chain(other.atoms()), tol)
            .expect("sum of valid measures is valid")
    }

    /// Rescales to total mass one.
    pub fn normalize(&self) -> Result<DiscreteMeasure, MeasureError> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(MeasureError::ZeroMass);
        }
        Ok(DiscreteMeasure {
            positions: self.positions.clone(),
            weights: self.weights.iter().map(|w| w / m).collect(),
        })
    }
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            atoms: Vec<(&'a f64, &'a f64)>,
        }
        Repr {
            atoms: self.positions.iter().zip(self.weights.iter()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            atoms: Vec<(f64, f64)>,
        }
        let repr = Repr::deserialize(deserializer)?;
        DiscreteMeasure::from_atoms(repr.atoms).map_err(D::Error::custom)
    }
}

/// Interval of the extended real line with per-end closedness flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: {lo} > {hi}");
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    /// The whole line.
    pub fn all() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY, false, false)
    }

    /// (−∞, s] or (−∞, s) depending on `closed`.
    pub fn left_ray(s: f64, closed: bool) -> Self {
        Self::new(f64::NEG_INFINITY, s, false, closed)
    }

    /// [s, ∞) or (s, ∞) depending on `closed`.
    pub fn right_ray(s: f64, closed: bool) -> Self {
        Self::new(s, f64::INFINITY, closed, false)
    }

    /// Open interval (lo, hi).
    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    /// Membership with points within `tol.cmp` of an endpoint classified as on
    /// that endpoint (included iff the end is closed).
    pub fn contains(&self, x: f64, tol: &Tolerances) -> bool {
        if self.lo.is_finite() {
            if (x - self.lo).abs() <= tol.cmp {
                if !self.lo_closed {
                    return false;
                }
            } else if x < self.lo {
                return false;
            }
        }
        if self.hi.is_finite() {
            if (x - self.hi).abs() <= tol.cmp {
                if !self.hi_closed {
                    return false;
                }
            } else if x > self.hi {
                return false;
            }
        }
        true
    }
}

/// Piecewise linear convex function: values at finitely many breakpoints,
/// linear interpolation between them, and affine extensions with the given
/// asymptotic slopes. No breakpoints encodes the zero function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinearConvex {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

impl PiecewiseLinearConvex {
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    ) -> Result<Self, MeasureError> {
        if breakpoints.len() != values.len() {
            return Err(MeasureError::LengthMismatch {
                expected: breakpoints.len(),
                actual: values.len(),
            });
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeasureError::UnorderedBreakpoints);
        }
        let f = PiecewiseLinearConvex {
            breakpoints,
            values,
            left_slope,
            right_slope,
        };
        if let Some(index) = f.first_nonconvex_index(0.0) {
            return Err(MeasureError::NotConvex { index });
        }
        Ok(f)
    }

    /// Constant zero function.
    pub fn zero() -> Self {
        PiecewiseLinearConvex {
            breakpoints: Vec::new(),
            values: Vec::new(),
            left_slope: 0.0,
            right_slope: 0.0,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.right_slope
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.breakpoints.len();
        if n == 0 {
            return 0.0;
        }
        if x <= self.breakpoints[0] {
            return self.values[0] + self.left_slope * (x - self.breakpoints[0]);
        }
        if x >= self.breakpoints[n - 1] {
            return self.values[n - 1] + self.right_slope * (x - self.breakpoints[n - 1]);
        }
        let i = self.breakpoints.partition_point(|&b| b <= x);
        let (x0, x1) = (self.breakpoints[i - 1], self.breakpoints[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Successive segment slopes: left asymptote, interior segments, right
    /// asymptote.
    pub fn slopes(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.breakpoints.len() + 1);
        s.push(self.left_slope);
        for w in self.breakpoints.windows(2).zip(self.values.windows(2)) {
            let (xs, vs) = w;
            s.push((vs[1] - vs[0]) / (xs[1] - xs[0]));
        }
        s.push(self.right_slope);
        s
    }

    fn first_nonconvex_index(&self, slack: f64) -> Option<usize> {
        let s = self.slopes();
        s.windows(2).position(|w| w[1] < w[0] - slack)
    }

    /// Segmentwise convexity: consecutive slopes nondecreasing within `slack`.
    pub fn is_convex(&self, slack: f64) -> bool {
        self.first_nonconvex_index(slack).is_none()
    }
}

/// Outcome of a convex-order comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConvexOrder {
    Ordered,
    Violation(ConvexOrderViolation),
}

impl ConvexOrder {
    pub fn is_ordered(&self) -> bool {
        matches!(self, ConvexOrder::Ordered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexOrderViolation {
    MassMismatch { mu: f64, nu: f64 },
    MeanMismatch { mu: f64, nu: f64 },
    PotentialExceeds { x: f64, u_mu: f64, u_nu: f64 },
}

/// Tests μ ≤꜀ₓ ν: equal mass, equal mean, and u_μ ≤ u_ν at every atom position
/// of both measures (sufficient for piecewise linear potentials with matching
/// asymptotes). Both measures must have positive mass.
pub fn check_convex_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: &Tolerances,
) -> Result<ConvexOrder, MeasureError> {
    let (mass_mu, mass_nu) = (mu.mass(), nu.mass());
    if mass_mu <= 0.0 || mass_nu <= 0.0 {
        return Err(MeasureError::ZeroMass);
    }
    if (mass_mu - mass_nu).abs() > tol.cmp {
        return Ok(ConvexOrder::Violation(ConvexOrderViolation::MassMismatch {
            mu: mass_mu,
            nu: mass_nu,
        }));
    }
    let (mean_mu, mean_nu) = (mu.mean().unwrap(), nu.mean().unwrap());
    if (mean_mu - mean_nu).abs() > tol.cmp {
        return Ok(ConvexOrder::Violation(ConvexOrderViolation::MeanMismatch {
            mu: mean_mu,
            nu: mean_nu,
        }));
    }
    let (u_mu, u_nu) = (mu.potential(), nu.potential());
    for &x in grid_union(mu, nu).iter() {
        let (a, b) = (u_mu.evaluate(x), u_nu.evaluate(x));
        if a > b + tol.cmp {
            return Ok(ConvexOrder::Violation(
                ConvexOrderViolation::PotentialExceeds { x, u_mu: a, u_nu: b },
            ));
        }
    }
    Ok(ConvexOrder::Ordered)
}

/// Outcome of an extended convex-order comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExtendedOrder {
    Ordered,
    Violation(ExtendedOrderViolation),
}

impl ExtendedOrder {
    pub fn is_ordered(&self) -> bool {
        matches!(self, ExtendedOrder::Ordered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtendedOrderViolation {
    MassExceeds { mu: f64, nu: f64 },
    CallExceeds { t: f64, mu_value: f64, nu_value: f64 },
    PutExceeds { t: f64, mu_value: f64, nu_value: f64 },
}

/// Tests μ ≤_E ν (the inequality ∫φ dμ ≤ ∫φ dν for nonnegative convex φ):
/// mass(μ) ≤ mass(ν) plus call- and put-value domination at every atom
/// position of either measure. Zero measures are allowed.
pub fn check_extended_convex_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: &Tolerances,
) -> ExtendedOrder {
    let (mass_mu, mass_nu) = (mu.mass(), nu.mass());
    if mass_mu > mass_nu + tol.cmp {
        return ExtendedOrder::Violation(ExtendedOrderViolation::MassExceeds {
            mu: mass_mu,
            nu: mass_nu,
        });
    }
    for &t in grid_union(mu, nu).iter() {
        let (cm, cn) = (mu.call_value(t), nu.call_value(t));
        if cm > cn + tol.cmp {
            return ExtendedOrder::Violation(ExtendedOrderViolation::CallExceeds {
                t,
                mu_value: cm,
                nu_value: cn,
            });
        }
        let (pm, pn) = (mu.put_value(t), nu.put_value(t));
        if pm > pn + tol.cmp {
            return ExtendedOrder::Violation(ExtendedOrderViolation::PutExceeds {
                t,
                mu_value: pm,
                nu_value: pn,
            });
        }
    }
    ExtendedOrder::Ordered
}

/// Sorted union of the atom positions of two measures (exact duplicates kept
/// once; near-duplicates are harmless for evaluation grids).
pub(crate) fn grid_union(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Vec<f64> {
    let mut grid: Vec<f64> = a
        .positions()
        .iter()
        .chain(b.positions().iter())
        .copied()
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn uniform3() -> DiscreteMeasure {
        DiscreteMeasure::from_atoms([(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0)])
            .unwrap()
    }

    fn pm1() -> DiscreteMeasure {
        DiscreteMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn construction_merges_close_atoms() {
        let m = DiscreteMeasure::from_atoms([(0.0, 0.5), (1e-12, 0.5), (1.0, 1.0)]).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.mass() - 2.0).abs() < 1e-15);
        // merged position is the weighted mean, preserving the total moment
        assert!((m.moment() - (0.5 * 1e-12 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_negative_weight() {
        assert!(matches!(
            DiscreteMeasure::from_atoms([(0.0, -0.5)]),
            Err(MeasureError::NegativeWeight { .. })
        ));
    }

    #[test]
    fn potential_of_dirac_is_absolute_value() {
        let u = DiscreteMeasure::dirac(0.0, 1.0).potential();
        assert_eq!(u.breakpoints(), &[0.0]);
        assert_eq!(u.values(), &[0.0]);
        assert_eq!(u.left_slope(), -1.0);
        assert_eq!(u.right_slope(), 1.0);
        assert!((u.evaluate(-3.5) - 3.5).abs() < 1e-15);
        assert!((u.evaluate(2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn potential_symmetric_pair_at_origin() {
        let u = pm1().potential();
        assert!((u.evaluate(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn potential_uniform_three_points() {
        // direct summation: (|0.5+1| + |0.5| + |0.5−1|)/3 = 2.5/3
        let u = uniform3().potential();
        assert!((u.evaluate(0.5) - 2.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn potential_is_convex_with_slope_range() {
        let m = DiscreteMeasure::from_atoms([(-2.0, 0.3), (0.5, 1.2), (3.0, 0.7)]).unwrap();
        let u = m.potential();
        assert!(u.is_convex(1e-12));
        let slopes = u.slopes();
        assert!((slopes[0] + m.mass()).abs() < 1e-12);
        assert!((slopes[slopes.len() - 1] - m.mass()).abs() < 1e-12);
    }

    #[test]
    fn convex_order_dirac_vs_dilation() {
        let mu = DiscreteMeasure::dirac(0.0, 1.0);
        let res = check_convex_order(&mu, &pm1(), &tol()).unwrap();
        assert!(res.is_ordered());
    }

    #[test]
    fn convex_order_mean_mismatch() {
        let mu = DiscreteMeasure::dirac(0.0, 1.0);
        let nu = DiscreteMeasure::dirac(1.0, 1.0);
        let res = check_convex_order(&mu, &nu, &tol()).unwrap();
        assert!(matches!(
            res,
            ConvexOrder::Violation(ConvexOrderViolation::MeanMismatch { .. })
        ));
    }

    #[test]
    fn convex_order_potential_witness() {
        let nu = DiscreteMeasure::dirac(0.0, 1.0);
        let res = check_convex_order(&pm1(), &nu, &tol()).unwrap();
        match res {
            ConvexOrder::Violation(ConvexOrderViolation::PotentialExceeds { x, u_mu, u_nu }) => {
                assert_eq!(x, 0.0);
                assert!((u_mu - 1.0).abs() < 1e-15);
                assert!(u_nu.abs() < 1e-15);
            }
            other => panic!("expected potential witness, got {other:?}"),
        }
    }

    #[test]
    fn convex_order_rejects_zero_mass() {
        let z = DiscreteMeasure::zero();
        assert!(matches!(
            check_convex_order(&z, &pm1(), &tol()),
            Err(MeasureError::ZeroMass)
        ));
    }

    #[test]
    fn extended_order_examples() {
        // any convex-ordered pair is extended-ordered
        let mu = DiscreteMeasure::dirac(0.0, 1.0);
        assert!(check_extended_convex_order(&mu, &pm1(), &tol()).is_ordered());
        // ½δ₀ ≤_E δ₀
        let half = DiscreteMeasure::dirac(0.0, 0.5);
        let full = DiscreteMeasure::dirac(0.0, 1.0);
        assert!(check_extended_convex_order(&half, &full, &tol()).is_ordered());
        // δ₀ ≤_E ½δ₀ fails on mass
        assert!(matches!(
            check_extended_convex_order(&full, &half, &tol()),
            ExtendedOrder::Violation(ExtendedOrderViolation::MassExceeds { .. })
        ));
    }

    #[test]
    fn restrict_left_ray() {
        let r = pm1().restrict(&Interval::left_ray(0.0, true), &tol());
        assert_eq!(r.positions(), &[-1.0]);
        assert_eq!(r.weights(), &[0.5]);
    }

    #[test]
    fn restrict_whole_line_is_identity() {
        let m = uniform3();
        assert_eq!(m.restrict(&Interval::all(), &tol()), m);
    }

    #[test]
    fn restrict_right_open_excludes_endpoint() {
        let r = uniform3().restrict(&Interval::new(f64::NEG_INFINITY, 0.0, false, false), &tol());
        assert_eq!(r.positions(), &[-1.0]);
        assert!((r.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn subtract_self_is_zero() {
        let m = uniform3();
        assert!(m.subtract(&m, &tol()).unwrap().is_empty());
    }

    #[test]
    fn subtract_partial() {
        let d = uniform3()
            .subtract(&DiscreteMeasure::dirac(0.0, 1.0 / 3.0), &tol())
            .unwrap();
        assert_eq!(d.positions(), &[-1.0, 1.0]);
    }

    #[test]
    fn subtract_not_dominated() {
        assert!(matches!(
            uniform3().subtract(&DiscreteMeasure::dirac(0.0, 0.5), &tol()),
            Err(MeasureError::NotDominated { .. })
        ));
    }

    #[test]
    fn restrict_subtract_roundtrip() {
        let m = DiscreteMeasure::from_atoms([(-2.0, 0.4), (0.0, 0.6), (1.5, 1.0)]).unwrap();
        let left = m.restrict(&Interval::left_ray(0.0, true), &tol());
        let right = m.restrict(&Interval::right_ray(0.0, false), &tol());
        assert_eq!(m.subtract(&left, &tol()).unwrap(), right);
    }

    #[test]
    fn serde_round_trip() {
        let m = DiscreteMeasure::from_atoms([(-1.25, 0.3), (0.7, 0.123456789123)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn pwl_rejects_nonconvex() {
        assert!(matches!(
            PiecewiseLinearConvex::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], -1.0, 1.0),
            Err(MeasureError::NotConvex { .. })
        ));
    }
}
