//! Scalar convex barriers on `[0, b^2)`, their Fenchel conjugates, and the
//! exact and truncated sup-of-quadratics representations
//!
//! ```text
//! Phi(rho)   = sup_{alpha >= -phi(0)}      a^{-1}(alpha) rho - alpha
//! Phi^M(rho) = sup_{alpha in [-phi(0), M]} a^{-1}(alpha) rho - alpha
//! ```

mod dual;
mod lambert;
mod spec;
mod truncated;

pub use dual::{conjugate, DualBarrier, DEFAULT_INV_TOLERANCE};
pub use lambert::lambert_w_m1;
pub use spec::{make_log_barrier, BarrierKind, BarrierSpec, ScalarFn};
pub use truncated::Truncation;
