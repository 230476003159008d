//! Nuisance learners and the cross-fitting engine.

mod crossfit;
mod isotonic;
mod linear;
mod logistic;

use serde::{Deserialize, Serialize};

pub use crossfit::{assign_folds, crossfit, crossfit_with_folds, NuisanceFit, PROPENSITY_CLIP};
pub use isotonic::{isotonic_calibrate, IsotonicMap};
pub use linear::{fit_ols, LinearModel, RCOND_MIN};
pub use logistic::{fit_logistic, log_likelihood, LogitModel, DEFAULT_MAX_ITER, DEFAULT_TOL, IRLS_RIDGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeLearner {
    #[default]
    Ols,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PropensityLearner {
    #[default]
    Logit,
}

/// Learner choices and cross-fitting settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSpec {
    pub outcome: OutcomeLearner,
    pub propensity: PropensityLearner,
    pub ridge_lambda: f64,
    pub folds: usize,
    /// Isotonic recalibration of the propensity score.
    pub calibrate: bool,
    pub seed: u64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self {
            outcome: OutcomeLearner::Ols,
            propensity: PropensityLearner::Logit,
            ridge_lambda: 0.0,
            folds: 5,
            calibrate: false,
            seed: 0,
        }
    }
}

impl LearnerSpec {
    /// Penalty actually applied to the outcome regressions.
    pub fn lambda(&self) -> f64 {
        match self.outcome {
            OutcomeLearner::Ols => 0.0,
            OutcomeLearner::Ridge => self.ridge_lambda,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}
