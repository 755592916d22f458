//! Solvers for finite-horizon linear regulator problems subject to a convex
//! barrier constraint `|x| < b` on the state.
//!
//! The barrier is rewritten as a supremum of quadratics indexed by a penalty
//! level `alpha`. Truncating that supremum at a level `M` turns the constrained
//! regulator into a two-player linear-quadratic game: one player picks the
//! control, the other picks a time-varying penalty schedule. For a fixed
//! schedule the inner problem is an ordinary LQR solved by a differential
//! Riccati equation, and the saddle point is found by shooting over the
//! terminal state.
//!
//! Module map:
//!
//! - [`barrier`]: scalar barriers, their conjugates and truncations.
//! - [`lti`]: plant, problem data, simulation and cost functionals.
//! - [`riccati`]: Riccati final value problems for a fixed penalty schedule.
//! - [`shooting`]: the coupled two-point boundary value problem.
//! - [`verify`]: brute-force oracles, audits and truncation sweeps.

pub mod barrier;
mod error;
mod ext;
pub mod lti;
pub mod nelder_mead;
mod ode;
pub mod riccati;
pub mod shooting;
pub mod verify;

pub use error::{Error, Result};
pub use ext::ExtReal;
