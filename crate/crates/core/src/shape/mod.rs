//! Monotone and concave fitting primitives shared by every estimator, plus
//! one-dimensional probability metrics.

mod density;
mod lcm;
mod metrics;
mod pava;
mod sample;

pub use density::{Density, DistributionFunction, GridDensity};
pub use lcm::{
    cumulative_diagram, least_concave_majorant, PiecewiseLinearFn, PlanarPoints,
    CONCAVITY_TOL,
};
pub use metrics::{
    epsilon_p, epsilon_p_density, hellinger_sq, kl, kolmogorov, tv, wasserstein1, EpsilonP,
    MIN_PANELS, NORMALIZATION_TOL,
};
pub use pava::pava_antitonic;
pub use sample::{EmpiricalCdf, SortedSample};
