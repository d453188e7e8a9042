//! Optimal dividend payout for an insurer whose shareholders evaluate
//! discounted dividend streams with an entropic (exponential-utility)
//! certainty equivalent.
//!
//! The surplus evolves as x ↦ x − a + Z with i.i.d. increments Z; paying more
//! than the surplus is not allowed and a negative surplus ends the process.
//! The crate solves the resulting dynamic programme on a uniform grid, both
//! over finite horizons and in the discounted infinite-horizon limit, and
//! extracts the band/barrier structure of optimal policies.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod case_studies;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod grid;
mod kernel;
pub mod model;
pub mod numeric;
pub mod operators;
pub mod oracles;
mod par;
pub mod quad;
pub mod risk;
pub mod solvers;

pub use bands::{classify, extract_bands, extract_xi, BandPolicy, PolicyClass};
pub use error::{Error, Result};
pub use grid::{PolicyFn, SurplusGrid, ValueFn};
pub use model::{AssumptionViolation, IncrementModel, ModelKind, TabulatedDensity};
pub use operators::{bellman_t, operator_l, operator_u, HProfile};
pub use risk::{certainty_equivalent, gamma_transform, risk_integral, BbarBound, RiskParams};
pub use solvers::{
    finite_horizon_solve, infinite_horizon_solve, policy_evaluation, policy_improvement_step, policy_iteration,
    FiniteHorizonResult, SolveReport,
};
