use serde::{Deserialize, Serialize};

use super::{bound_value, elements, robustness_value, Scenario};
use crate::did::att_dml;
use crate::error::{Error, Result};
use crate::learners::{assign_folds, crossfit_with_folds, LearnerSpec};
use crate::multi::GtResult;
use crate::panel::TwoByTwoView;

/// Lower bound applied to benchmarked strengths.
pub const BENCHMARK_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub scenario: Scenario,
    pub leave_out: Vec<String>,
    pub theta_full: f64,
    pub theta_short: f64,
    pub sigma2_full: f64,
    pub sigma2_short: f64,
    pub nu2_full: f64,
    pub nu2_short: f64,
    /// Short-model bound at the benchmarked strengths with `ρ = 1`.
    pub b_short: f64,
}

/// Treats the left-out covariates as if they were the omitted confounder.
///
/// Full and short models share one fold assignment, drawn from `learner.seed`.
pub fn benchmark(
    view: &TwoByTwoView,
    learner: &LearnerSpec,
    leave_out: &[String],
    normalized: bool,
) -> Result<BenchmarkResult> {
    if leave_out.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one covariate to leave out".into()));
    }
    let short_view = view.without_covariates(leave_out)?;
    let folds = assign_folds(&view.treat, learner.folds, learner.seed)?;
    let full = elements(&att_dml(&crossfit_with_folds(view, learner, &folds)?, normalized)?)?;
    let short = elements(&att_dml(&crossfit_with_folds(&short_view, learner, &folds)?, normalized)?)?;

    let cf_y = ((short.sigma2 - full.sigma2) / short.sigma2).max(BENCHMARK_FLOOR);
    let cf_d = ((full.nu2 - short.nu2) / full.nu2).max(BENCHMARK_FLOOR);
    let b_short = bound_value(&short, cf_y, cf_d, 1.0);
    let rho = if b_short > 0.0 { ((full.theta - short.theta) / b_short).clamp(-1.0, 1.0) } else { 1.0 };
    Ok(BenchmarkResult {
        scenario: Scenario::new(cf_y, cf_d, rho, format!("benchmark: {}", leave_out.join(",")))?,
        leave_out: leave_out.to_vec(),
        theta_full: full.theta,
        theta_short: short.theta,
        sigma2_full: full.sigma2,
        sigma2_short: short.sigma2,
        nu2_full: full.nu2,
        nu2_short: short.nu2,
        b_short,
    })
}

/// Largest ceiling below one for pre-test strengths.
const CF_MAX: f64 = 1.0 - 1e-9;

/// Symmetric scenario `cf_y = cf_d = k · max RV_t` over placebo cells, each
/// robustness value taken against `h0 = 0`.
pub fn pretest_scenario(pre_results: &[GtResult], k: f64, rho: f64) -> Result<Scenario> {
    if pre_results.is_empty() {
        return Err(Error::NoPrePeriods);
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
    }
    let mut best: Option<(f64, &GtResult)> = None;
    for r in pre_results {
        if !r.pre_period {
            return Err(Error::InvalidArgument(format!(
                "cell g = {}, t_eval = {} is not a pre-treatment cell",
                r.spec.g, r.spec.t_eval
            )));
        }
        let rv = robustness_value(&elements(&r.estimate)?, 0.0, rho)?;
        if best.is_none_or(|(b, _)| rv > b) {
            best = Some((rv, r));
        }
    }
    let (rv, cell) = best.expect("non-empty");
    let cf = (k * rv).clamp(0.0, CF_MAX);
    Scenario::new(
        cf,
        cf,
        rho,
        format!("pretest: k = {k} x RV {rv:.4} at g = {}, t_eval = {}", cell.spec.g, cell.spec.t_eval),
    )
}
