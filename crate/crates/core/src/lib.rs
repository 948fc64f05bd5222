//! Stationary spherically symmetric equilibria of the Vlasov-Poisson system.
//!
//! The crate builds distribution-function models ([`model`]), integrates the
//! static field equations in physical variables ([`physical`]) and in the
//! compactified `(U, Q, Ω)` state space ([`compact`]), and turns the
//! finite-radius criteria into numerical checks ([`analysis`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod compact;
pub mod error;
pub mod export;
pub mod model;
pub mod ode;
pub mod physical;
pub mod quadrature;
pub mod roots;

pub use error::{Error, Result};
pub use analysis::{
    check_theorem1, check_theorem2, classify_solution, omega_crit, sweep_omega_c, Holds, OmegaCrit,
    SweepResult, SweepSettings, Theorem, TheoremVerdict,
};
pub use compact::{
    compactify, fixed_lines, from_compact, integrate_compact, jacobian_eigenvalues, rhs_compact,
    to_dimensionless, CompactSettings, CompactState, CompactSystem, FixedLine, LimitPoint, Orbit,
};
pub use model::{DistributionModel, Family, GEvaluation, Interpolation, Regularity, Table};
pub use physical::{
    center_series, integrate_physical, rhs_physical, Classification, LengthSpec, PhysicalState,
    Radius, SolutionProfile, SolveSettings,
};
