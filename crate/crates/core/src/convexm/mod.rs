//! Optimal convex M-estimation for linear regression: density quantile
//! functions, antitonic score projection, antitonic information, the
//! log-concave projection under the Fisher divergence, convex losses, the
//! M-estimation solvers and the alternating data-driven fit.

mod alternating;
mod efficiency;
mod loss;
mod mest;
mod model;
mod projected;
mod score;

pub use alternating::{alternating_fit, AlternatingConfig, AlternatingFit, Symmetry};
pub use efficiency::{
    are_star, are_star_with, fisher_info, istar, score_matching, score_matching_min,
    variance_factor, DecreasingScore, INFO_TAIL,
};
pub use loss::{convex_loss_from_score, ConvexLoss};
pub use mest::{
    m_estimate, m_estimate_from, ols, LinearModelData, MEstimate, GRADIENT_TOL,
    GRAM_CONDITION_LIMIT, MAX_ITERATIONS,
};
pub use model::{DensityModel, MixtureComponent, SUPPORT_TAIL};
pub use projected::{projected_density, ProjectedDensity};
pub use score::{
    antitonic_score, antitonic_score_on_grid, density_quantile, PlScore, QuantileDensity,
    ScoreFn, SCORE_GRID,
};
