//! Shape-constrained nonparametric estimation.
//!
//! The crate is organised around four layers:
//!
//! * [`shape`]: monotone and concave fitting primitives (PAVA, least concave
//!   majorants, one-sided derivatives) and one-dimensional probability metrics.
//! * [`grenander`]: the maximum likelihood estimator of a decreasing density on
//!   `(0, ∞)` and its population counterpart.
//! * [`logconcave`]: the univariate log-concave maximum likelihood estimator,
//!   its smoothed variant and class-level checks.
//! * [`convexm`]: antitonic score projection, antitonic efficiency and convex
//!   M-estimation for linear regression.
//!
//! [`harness`] ties these together into seeded Monte Carlo experiments.

pub mod convexm;
pub mod error;
pub mod grenander;
pub mod harness;
pub mod logconcave;
pub mod quad;
pub mod shape;

pub use error::{Result, ShapeError};
