use super::score::{PlScore, ScoreFn};

/// Convex loss `ℓ(z) = −∫₀ᶻ ψ` for a decreasing piecewise-linear score `ψ`;
/// piecewise quadratic, with `ℓ(0) = 0` and `ℓ' = −ψ` off the jumps of `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexLoss {
    score: PlScore,
    cum: Vec<f64>,
    at_zero: f64,
}

impl ConvexLoss {
    pub fn from_score(score: PlScore) -> Self {
        let cum = score.node_primitives();
        let at_zero = score.primitive_from_first(0.0, &cum);
        Self { score, cum, at_zero }
    }

    /// `ℓ(z) = z²/2`.
    pub fn squared() -> Self {
        Self::from_score(PlScore::linear(-1.0).expect("valid linear score"))
    }

    /// `ℓ(z) = |z|`.
    pub fn absolute() -> Self {
        Self::from_score(PlScore::neg_sign())
    }

    pub fn score(&self) -> &PlScore {
        &self.score
    }

    pub fn value(&self, z: f64) -> f64 {
        -(self.score.primitive_from_first(z, &self.cum) - self.at_zero)
    }

    /// `ψ(z) = −ℓ'(z+)`.
    pub fn psi(&self, z: f64) -> f64 {
        self.score.eval(z)
    }

    /// `−ℓ'(z−)`.
    pub fn psi_left(&self, z: f64) -> f64 {
        self.score.eval_left(z)
    }

    /// Second derivative of the absolutely continuous part.
    pub fn curvature(&self, z: f64) -> f64 {
        -self.score.slope_at(z)
    }
}

/// Loss whose negative derivative is the piecewise-linear version of `psi`.
pub fn convex_loss_from_score(psi: &ScoreFn) -> ConvexLoss {
    ConvexLoss::from_score(psi.to_pl())
}
