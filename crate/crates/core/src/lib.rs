//! Entropy-dissipative one-leg multistep time discretizations for nonlinear
//! diffusion equations.
//!
//! The unknown of every solver in this crate is the *entropy variable*
//! `v = h(u)^{1/2} = u^{alpha/2}`. A one-leg scheme `(rho, sigma)` advances `v`,
//! and the physical density is recovered from the blended state as
//! `w = (sigma(E) v)^{2/alpha}`. When the scheme is G-stable, the discrete
//! entropy `H[V_k] = 1/2 |V_k|_G^2` of the solution window is nonincreasing.
//!
//! Modules:
//!
//! * [schemes]: scheme coefficients, order conditions, G-matrices and the
//!   numerical G-stability certifier.
//! * [state] and [entropy]: grid states, history windows, the variable
//!   transformation and entropy functionals.
//! * [skt] and [dlss]: finite-difference residuals and Jacobians for the
//!   cross-diffusion population system and the fourth-order quantum
//!   diffusion equation on the periodic unit interval.
//! * [newton] and [integrator]: damped Newton solver with a positivity
//!   safeguard and the time-stepping driver.
//! * [harness]: problem specifications, convergence and entropy-decay
//!   studies, and CSV output.

// negated comparisons reject NaN on purpose; index loops mirror the stencils
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dlss;
pub mod entropy;
mod error;
pub mod harness;
pub mod integrator;
pub mod linalg;
pub mod newton;
pub mod real;
pub mod schemes;
pub mod skt;
pub mod state;

pub use error::{Error, Result};
pub use schemes::{GMatrix, SchemeCoefficients};
pub use state::{GridState, History};
