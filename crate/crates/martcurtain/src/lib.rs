//! Discrete martingale optimal transport on the real line.
//!
//! The crate works with finite atomic marginals and provides:
//!
//! - [`measures`]: atomic measures, potential functions, convex and extended
//!   convex order checks;
//! - [`lp`]: a self-contained dense two-phase simplex solver with dual
//!   multipliers;
//! - [`costs`]: evaluable cost functions, including the probing family
//!   1_{x ≤ s}·|y − t| and separable bounds;
//! - [`coupling`]: transport plans, martingale checks, the primal/dual
//!   martingale transport LP, and the J/I integral functionals;
//! - [`shadow`]: shadow measures and the left-curtain coupling;
//! - [`verify`]: left-monotonicity, finite optimality via competitor LPs,
//!   partial-sum convex order, irreducible decomposition, convex envelopes,
//!   and dual-splitting certificates;
//! - [`suite`]: the randomized desk-scale verification suite behind
//!   `martcurtain verify-suite`;
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod costs;
pub mod coupling;
pub mod lp;
pub mod measures;
pub mod shadow;
pub mod suite;
pub mod tol;
pub mod verify;

pub use costs::CostSpec;
pub use coupling::{Coupling, DualTriple};
pub use measures::{DiscreteMeasure, Interval, PiecewiseLinearConvex};
pub use tol::Tolerances;
