//! Shadow measures and the left-curtain coupling.
//!
//! The shadow of m·δ_x in ν is the convex-order-smallest measure θ with
//! θ ≤ ν, mass m and mean x. For atomic ν it is realized by a contiguous
//! quantile window of ν: the window mean is continuous and nondecreasing in
//! the starting quantile, so the window achieving mean x is found by
//! bisection. Processing a source measure atom by atom and peeling each
//! shadow off ν yields the shadow of the whole measure and, reading the
//! slices as coupling rows, the left-curtain transport plan.

use thiserror::Error;

use crate::coupling::{Coupling, CouplingError};
use crate::measures::{
    check_convex_order, check_extended_convex_order, ConvexOrder, DiscreteMeasure, ExtendedOrder,
    ExtendedOrderViolation, MeasureError,
};
use crate::tol::Tolerances;

/// Bisection stops when the window mean is within this of the target…
const MEAN_TOL: f64 = 1e-12;
/// …or the quantile bracket is narrower than this.
const BRACKET_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShadowError {
    #[error("extended convex order violated{}: {violation:?}", prefix_note(.prefix))]
    ExtendedOrderViolated {
        /// Number of source atoms already absorbed when the violation
        /// surfaced (`None` for a single-atom request).
        prefix: Option<usize>,
        violation: ExtendedOrderViolation,
    },
    #[error("marginals are not in convex order: {violation:?}")]
    NotConvexOrder {
        violation: crate::measures::ConvexOrderViolation,
    },
    #[error("atom mass must be positive, got {mass}")]
    NonPositiveMass { mass: f64 },
    #[error("target mean {x} is outside the attainable window range [{lo}, {hi}]")]
    MeanOutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("source atom order must be a permutation of 0..{expected}")]
    BadOrder { expected: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

fn prefix_note(prefix: &Option<usize>) -> String {
    match prefix {
        Some(k) => format!(" after absorbing {k} source atoms"),
        None => String::new(),
    }
}

/// Quantile window of mass `m` starting at quantile level `q`, with
/// fractional weights at the window boundary. Dust-sized fragments are
/// dropped.
fn quantile_slice(nu: &DiscreteMeasure, q: f64, m: f64, tol: &Tolerances) -> DiscreteMeasure {
    let hi = q + m;
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    let mut cum: f64 = 0.0;
    for (p, w) in nu.atoms() {
        let lo_edge = cum.max(q);
        let hi_edge = (cum + w).min(hi);
        cum += w;
        let overlap = hi_edge - lo_edge;
        if overlap > tol.dust() {
            positions.push(p);
            weights.push(overlap);
        }
        if cum >= hi {
            break;
        }
    }
    DiscreteMeasure::from_sorted_unchecked(positions, weights)
}

fn slice_mean(nu: &DiscreteMeasure, q: f64, m: f64, tol: &Tolerances) -> f64 {
    let s = quantile_slice(nu, q, m, tol);
    s.moment() / s.mass()
}

/// Shadow of the atom m·δ_x in ν: the quantile window of ν with mass m and
/// mean x, taking the smallest starting quantile when the mean has a flat
/// stretch. Requires m·δ_x ≤_E ν.
pub fn shadow_atom(
    nu: &DiscreteMeasure,
    x: f64,
    m: f64,
    tol: &Tolerances,
) -> Result<DiscreteMeasure, ShadowError> {
    if m <= 0.0 {
        return Err(ShadowError::NonPositiveMass { mass: m });
    }
    let atom = DiscreteMeasure::dirac(x, m);
    if let ExtendedOrder::Violation(violation) = check_extended_convex_order(&atom, nu, tol) {
        return Err(ShadowError::ExtendedOrderViolated {
            prefix: None,
            violation,
        });
    }

    let total = nu.mass();
    let m_eff = m.min(total);
    let q_max = total - m_eff;
    if q_max <= BRACKET_TOL {
        return Ok(quantile_slice(nu, 0.0, m_eff, tol));
    }

    let mean_lo = slice_mean(nu, 0.0, m_eff, tol);
    let mean_hi = slice_mean(nu, q_max, m_eff, tol);
    // The order check guarantees x sits in the attainable range up to
    // tolerance; clamp the residue.
    if x < mean_lo - tol.cmp || x > mean_hi + tol.cmp {
        return Err(ShadowError::MeanOutOfRange {
            x,
            lo: mean_lo,
            hi: mean_hi,
        });
    }
    let target = x.clamp(mean_lo, mean_hi);

    if mean_lo >= target {
        return Ok(quantile_slice(nu, 0.0, m_eff, tol));
    }
    // Leftmost q with slice mean ≥ target: lo stays strictly below, hi at or
    // above.
    let (mut lo, mut hi) = (0.0, q_max);
    while hi - lo > BRACKET_TOL {
        let mid = 0.5 * (lo + hi);
        let mean_mid = slice_mean(nu, mid, m_eff, tol);
        if (mean_mid - target).abs() <= MEAN_TOL {
            hi = mid;
            break;
        }
        if mean_mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(quantile_slice(nu, hi, m_eff, tol))
}

/// Shadow of a whole measure in ν, absorbing the source atoms in ascending
/// position order. Requires μ ≤_E ν.
pub fn shadow_measure(
    nu: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    tol: &Tolerances,
) -> Result<DiscreteMeasure, ShadowError> {
    let order: Vec<usize> = (0..mu.len()).collect();
    shadow_measure_ordered(nu, mu, &order, tol)
}

/// Shadow of a whole measure with an explicit processing order of the source
/// atoms. The result is order-independent up to tolerance; the canonical
/// order is ascending.
pub fn shadow_measure_ordered(
    nu: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    order: &[usize],
    tol: &Tolerances,
) -> Result<DiscreteMeasure, ShadowError> {
    {
        let mut seen = vec![false; mu.len()];
        for &i in order {
            if i >= mu.len() || seen[i] {
                return Err(ShadowError::BadOrder { expected: mu.len() });
            }
            seen[i] = true;
        }
        if order.len() != mu.len() {
            return Err(ShadowError::BadOrder { expected: mu.len() });
        }
    }
    if let ExtendedOrder::Violation(violation) = check_extended_convex_order(mu, nu, tol) {
        return Err(ShadowError::ExtendedOrderViolated {
            prefix: Some(0),
            violation,
        });
    }

    let mut remaining = nu.clone();
    let mut total = DiscreteMeasure::zero();
    for (step, &i) in order.iter().enumerate() {
        let x = mu.positions()[i];
        let w = mu.weights()[i];
        let slice = shadow_atom(&remaining, x, w, tol).map_err(|e| match e {
            ShadowError::ExtendedOrderViolated { violation, .. } => {
                ShadowError::ExtendedOrderViolated {
                    prefix: Some(step),
                    violation,
                }
            }
            other => other,
        })?;
        remaining = remaining.subtract(&slice, tol)?;
        total = total.add(&slice, tol);
    }
    Ok(total)
}

/// Left-curtain coupling of two convex-ordered probability measures: each
/// source atom, taken left to right, is coupled to the shadow of its mass in
/// what remains of ν.
pub fn left_curtain(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: &Tolerances,
) -> Result<Coupling, ShadowError> {
    match check_convex_order(mu, nu, tol)? {
        ConvexOrder::Ordered => {}
        ConvexOrder::Violation(violation) => {
            return Err(ShadowError::NotConvexOrder { violation })
        }
    }
    let mut remaining = nu.clone();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (i, (x, w)) in mu.atoms().enumerate() {
        let slice = shadow_atom(&remaining, x, w, tol).map_err(|e| match e {
            ShadowError::ExtendedOrderViolated { violation, .. } => {
                ShadowError::ExtendedOrderViolated {
                    prefix: Some(i),
                    violation,
                }
            }
            other => other,
        })?;
        for (y, mass) in slice.atoms() {
            let j = nu
                .index_of(y, tol)
                .expect("slice atoms sit on the target grid");
            entries.push((i, j, mass));
        }
        remaining = remaining.subtract(&slice, tol)?;
    }
    Ok(Coupling::new(mu.clone(), nu.clone(), entries, tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::check_martingale;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn uniform3() -> DiscreteMeasure {
        DiscreteMeasure::from_atoms([(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0)])
            .unwrap()
    }

    fn e1() -> (DiscreteMeasure, DiscreteMeasure) {
        (
            DiscreteMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap(),
            DiscreteMeasure::from_atoms([(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]).unwrap(),
        )
    }

    #[test]
    fn shadow_atom_whole_measure_when_masses_match() {
        let nu = uniform3();
        let theta = shadow_atom(&nu, 0.0, 1.0, &tol()).unwrap();
        assert_eq!(theta.positions(), nu.positions());
        for (a, b) in theta.weights().iter().zip(nu.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shadow_atom_centered_window() {
        let nu = uniform3();
        let theta = shadow_atom(&nu, 0.0, 0.5, &tol()).unwrap();
        assert_eq!(theta.positions(), &[-1.0, 0.0, 1.0]);
        let w = theta.weights();
        assert!((w[0] - 1.0 / 12.0).abs() < 1e-9);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!((w[2] - 1.0 / 12.0).abs() < 1e-9);
        assert!((theta.mass() - 0.5).abs() < 1e-9);
        assert!(theta.mean().unwrap().abs() < 1e-9);
    }

    #[test]
    fn shadow_atom_left_window() {
        let nu = DiscreteMeasure::from_atoms([(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]).unwrap();
        let theta = shadow_atom(&nu, -1.0, 0.5, &tol()).unwrap();
        assert_eq!(theta.positions(), &[-2.0, 0.0]);
        assert!((theta.weights()[0] - 0.25).abs() < 1e-9);
        assert!((theta.weights()[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn shadow_atom_rejects_infeasible() {
        let nu = uniform3();
        assert!(matches!(
            shadow_atom(&nu, 5.0, 0.5, &tol()),
            Err(ShadowError::ExtendedOrderViolated { .. })
        ));
        assert!(matches!(
            shadow_atom(&nu, 0.0, 2.0, &tol()),
            Err(ShadowError::ExtendedOrderViolated { .. })
        ));
    }

    #[test]
    fn shadow_measure_identity() {
        let nu = uniform3();
        let s = shadow_measure(&nu, &nu, &tol()).unwrap();
        assert_eq!(s.positions(), nu.positions());
        for (a, b) in s.weights().iter().zip(nu.weights()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn shadow_measure_two_step_fills_target() {
        let (mu, nu) = e1();
        let s = shadow_measure(&nu, &mu, &tol()).unwrap();
        assert_eq!(s.positions(), nu.positions());
        for (a, b) in s.weights().iter().zip(nu.weights()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn shadow_measure_order_independent_on_e1() {
        let (mu, nu) = e1();
        let asc = shadow_measure_ordered(&nu, &mu, &[0, 1], &tol()).unwrap();
        let desc = shadow_measure_ordered(&nu, &mu, &[1, 0], &tol()).unwrap();
        assert_eq!(asc.positions().len(), desc.positions().len());
        for ((pa, wa), (pb, wb)) in asc.atoms().zip(desc.atoms()) {
            assert!((pa - pb).abs() < 1e-9);
            assert!((wa - wb).abs() < 1e-8);
        }
    }

    #[test]
    fn left_curtain_singleton() {
        let mu = DiscreteMeasure::dirac(0.0, 1.0);
        let nu = DiscreteMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let pi = left_curtain(&mu, &nu, &tol()).unwrap();
        assert!((pi.mass_at(0, 0) - 0.5).abs() < 1e-9);
        assert!((pi.mass_at(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn left_curtain_example_e1() {
        let (mu, nu) = e1();
        let pi = left_curtain(&mu, &nu, &tol()).unwrap();
        assert_eq!(pi.entries().len(), 4);
        assert!((pi.mass_at(0, 0) - 0.25).abs() < 1e-9);
        assert!((pi.mass_at(0, 1) - 0.25).abs() < 1e-9);
        assert!((pi.mass_at(1, 1) - 0.25).abs() < 1e-9);
        assert!((pi.mass_at(1, 2) - 0.25).abs() < 1e-9);
        assert!(check_martingale(&pi, &tol()).is_pass());
    }

    #[test]
    fn left_curtain_identity() {
        let m = uniform3();
        let pi = left_curtain(&m.normalize().unwrap(), &m.normalize().unwrap(), &tol()).unwrap();
        for (k, e) in pi.entries().iter().enumerate() {
            assert_eq!(e.source, k);
            assert_eq!(e.target, k);
        }
    }

    #[test]
    fn left_curtain_rejects_unordered_marginals() {
        let mu = DiscreteMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let nu = DiscreteMeasure::dirac(0.0, 1.0);
        assert!(matches!(
            left_curtain(&mu, &nu, &tol()),
            Err(ShadowError::NotConvexOrder { .. })
        ));
    }

    #[test]
    fn left_curtain_prefix_property_on_e1() {
        let (mu, nu) = e1();
        let pi = left_curtain(&mu, &nu, &tol()).unwrap();
        for k in 1..=mu.len() {
            let prefix_pairs: Vec<(f64, f64)> = mu.atoms().take(k).collect();
            let prefix = DiscreteMeasure::from_atoms(prefix_pairs).unwrap();
            let expected = shadow_measure(&nu, &prefix, &tol()).unwrap();
            let actual = pi.prefix_target_marginal(k, &tol());
            assert_eq!(expected.len(), actual.len());
            for ((pa, wa), (pb, wb)) in expected.atoms().zip(actual.atoms()) {
                assert!((pa - pb).abs() < 1e-9);
                assert!((wa - wb).abs() < 1e-9);
            }
        }
    }
}
