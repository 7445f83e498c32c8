//! Tolerance configuration shared by all numeric routines.

use serde::{Deserialize, Serialize};

/// Default comparison tolerance for positions, weights and order checks.
pub const DEFAULT_CMP_TOL: f64 = 1e-9;
/// Default LP primal feasibility tolerance.
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
/// Default LP duality-gap tolerance.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;
/// Default simplex pivot threshold.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;

/// Numeric tolerances used across the crate.
///
/// Every verification report embeds the configuration it ran with, so a
/// witness can be reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Comparison tolerance: atom merging, order checks, marginal sums.
    pub cmp: f64,
    /// LP feasibility tolerance.
    pub feas: f64,
    /// LP duality-gap tolerance.
    pub gap: f64,
    /// Simplex pivot threshold.
    pub pivot: f64,
    /// Simplex iteration budget per phase.
    pub lp_iter_limit: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cmp: DEFAULT_CMP_TOL,
            feas: DEFAULT_FEAS_TOL,
            gap: DEFAULT_GAP_TOL,
            pivot: DEFAULT_PIVOT_TOL,
            lp_iter_limit: 50_000,
        }
    }
}

impl Tolerances {
    /// Configuration with a custom comparison tolerance and default LP settings.
    pub fn with_cmp(cmp: f64) -> Self {
        Tolerances {
            cmp,
            ..Tolerances::default()
        }
    }

    /// Threshold below which weights are considered numerical dust and dropped
    /// where an operation is documented to do so.
    pub fn dust(&self) -> f64 {
        self.cmp * 1e-3
    }
}
