//! Univariate log-concave density estimation: the maximum likelihood
//! estimator, its Gaussian-smoothed variant and class-level checks.

mod checks;
mod density;
mod mle;
mod segment;
mod smoothed;
mod tent;

pub use checks::{
    empirical_kl, envelope_bound, envelope_check, is_log_concave, ENVELOPE_GRID, ENVELOPE_SLACK,
    LOG_CONCAVE_GRID_TOL, STANDARDIZATION_TOL,
};
pub use density::{LogLinearDensity, LOG_CONCAVITY_TOL, LOG_LINEAR_MASS_TOL};
pub use mle::logconcave_mle;
pub use segment::exp_segment_integral;
pub use smoothed::{smoothed_mle, SmoothedLogConcave, A_HAT_FLOOR};
pub use tent::{sigma_objective, sigma_supergradient, tent_function, TentHeights};

/// Mean and variance of a log-linear density.
pub fn density_moments(f: &LogLinearDensity) -> (f64, f64) {
    f.moments()
}
