//! Bias bounds for violations of conditional parallel trends.
//!
//! Everything here is built from two sensitivity elements of a fitted
//! estimate: the residual variance `σ̂²` of the outcome difference and the
//! second moment `ν̂²` of the Riesz representer. A scenario `(cf_y, cf_d, ρ)`
//! then bounds the bias by `|ρ| sqrt(cf_y · cf_d/(1−cf_d) · σ̂² ν̂²)`.

mod benchmark;
mod contour;

use serde::{Deserialize, Serialize};

use crate::did::AttEstimate;
use crate::error::{Error, Result};
use crate::stats::normal_quantile;

pub use benchmark::{benchmark, pretest_scenario, BenchmarkResult, BENCHMARK_FLOOR};
pub use contour::{contour_grid, write_contour_csv, write_contour_svg, ContourGrid, ContourSide};

/// Bisection tolerance for [`robustness_value_a`].
pub const RV_A_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityElements {
    pub theta: f64,
    pub se: f64,
    pub n: usize,
    /// `mean((ΔY − ĝ(D, X))²)`.
    pub sigma2: f64,
    /// `mean(α̂²)`.
    pub nu2: f64,
    #[serde(skip)]
    pub psi_sigma: Vec<f64>,
    #[serde(skip)]
    pub psi_nu: Vec<f64>,
    #[serde(skip)]
    pub psi_theta: Vec<f64>,
}

impl SensitivityElements {
    /// `S = sqrt(σ̂² ν̂²)`.
    pub fn s(&self) -> f64 {
        (self.sigma2 * self.nu2).sqrt()
    }
}

pub fn elements(est: &AttEstimate) -> Result<SensitivityElements> {
    let fit = est.fit()?;
    let n = est.n;
    if fit.g1_hat.len() != n || fit.g0_hat.len() != n {
        return Err(Error::MissingG1);
    }
    let g = fit.g_hat();
    let resid2: Vec<f64> = fit.delta_y.iter().zip(&g).map(|(y, g)| (y - g) * (y - g)).collect();
    let sigma2 = resid2.iter().sum::<f64>() / n as f64;
    let scale = fit.delta_y.iter().map(|y| y * y).sum::<f64>() / n as f64;
    if !(sigma2 > 1e-20 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateSigma);
    }
    let a2: Vec<f64> = est.riesz.iter().map(|a| a * a).collect();
    let nu2 = a2.iter().sum::<f64>() / n as f64;
    Ok(SensitivityElements {
        theta: est.theta,
        se: est.se,
        n,
        sigma2,
        nu2,
        psi_sigma: resid2.iter().map(|r| r - sigma2).collect(),
        psi_nu: a2.iter().map(|a| a - nu2).collect(),
        psi_theta: est.psi.clone(),
    })
}

/// `C̃² ↦ C² = C̃²/(1 − C̃²)`.
pub fn cd_from_bounded(cf_d: f64) -> f64 {
    cf_d / (1.0 - cf_d)
}

/// `C² ↦ C̃² = C²/(1 + C²)`.
pub fn bounded_from_cd(c: f64) -> f64 {
    c / (1.0 + c)
}

/// A violation scenario; `cf_d` is always in the bounded form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cf_y: f64,
    pub cf_d: f64,
    pub rho: f64,
    #[serde(default)]
    pub label: String,
}

impl Scenario {
    pub fn new(cf_y: f64, cf_d: f64, rho: f64, label: impl Into<String>) -> Result<Self> {
        if !(0.0..1.0).contains(&cf_y) {
            return Err(Error::InvalidArgument(format!("cf_y must lie in [0, 1), got {cf_y}")));
        }
        if !(0.0..1.0).contains(&cf_d) {
            return Err(Error::InvalidArgument(format!("cf_d must lie in [0, 1), got {cf_d}")));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [-1, 1], got {rho}")));
        }
        Ok(Self { cf_y, cf_d, rho, label: label.into() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasBound {
    pub b: f64,
    /// Delta-method influence values of `B`.
    pub psi_b: Vec<f64>,
}

fn bound_value(el: &SensitivityElements, cf_y: f64, cf_d: f64, rho: f64) -> f64 {
    rho.abs() * (cf_y * cd_from_bounded(cf_d) * el.sigma2 * el.nu2).sqrt()
}

pub fn bias_bound(el: &SensitivityElements, sc: &Scenario) -> BiasBound {
    let b = bound_value(el, sc.cf_y, sc.cf_d, sc.rho);
    let psi_b = el
        .psi_sigma
        .iter()
        .zip(&el.psi_nu)
        .map(|(s, v)| 0.5 * b * (s / el.sigma2 + v / el.nu2))
        .collect();
    BiasBound { b, psi_b }
}

/// Root-mean-square of `ψθ + sign·ψB`, divided by `sqrt(n)`.
fn combined_se(el: &SensitivityElements, psi_b: &[f64], sign: f64) -> f64 {
    let n = el.n as f64;
    let ss: f64 = el.psi_theta.iter().zip(psi_b).map(|(t, b)| (t + sign * b).powi(2)).sum();
    (ss / n).sqrt() / n.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedBounds {
    pub bias: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub se_minus: f64,
    pub se_plus: f64,
    /// One-sided lower confidence bound for `θ−`.
    pub ell_minus: f64,
    /// One-sided upper confidence bound for `θ+`.
    pub u_plus: f64,
}

pub fn adjusted_bounds(el: &SensitivityElements, sc: &Scenario, level: f64) -> Result<AdjustedBounds> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let z = normal_quantile(level);
    let bb = bias_bound(el, sc);
    let se_minus = combined_se(el, &bb.psi_b, -1.0);
    let se_plus = combined_se(el, &bb.psi_b, 1.0);
    let theta_minus = el.theta - bb.b;
    let theta_plus = el.theta + bb.b;
    Ok(AdjustedBounds {
        bias: bb.b,
        theta_minus,
        theta_plus,
        se_minus,
        se_plus,
        ell_minus: theta_minus - z * se_minus,
        u_plus: theta_plus + z * se_plus,
    })
}

fn check_rv_inputs(el: &SensitivityElements, rho: f64) -> Result<()> {
    if rho == 0.0 {
        return Err(Error::RhoZero);
    }
    if !(el.sigma2 > 0.0) || !(el.nu2 > 0.0) {
        return Err(Error::DegenerateSigma);
    }
    Ok(())
}

/// Smallest symmetric strength `c = cf_y = cf_d` with `B(c) = |θ̂ − h0|`.
///
/// Since `B(c) = |ρ| S c / sqrt(1 − c)`, `c` solves `c² + qc − q = 0` with
/// `q = (θ̂ − h0)²/(ρ² S²)`.
pub fn robustness_value(el: &SensitivityElements, h0: f64, rho: f64) -> Result<f64> {
    check_rv_inputs(el, rho)?;
    let q = (el.theta - h0).powi(2) / (rho * rho * el.sigma2 * el.nu2);
    if q == 0.0 {
        return Ok(0.0);
    }
    // 2q/(q + sqrt(q² + 4q)) avoids cancellation for large q
    Ok(2.0 * q / (q + (q * q + 4.0 * q).sqrt()))
}

/// Bias bound along the symmetric ray `cf_y = cf_d = c`.
pub fn symmetric_bound(el: &SensitivityElements, c: f64, rho: f64) -> f64 {
    bound_value(el, c, c, rho)
}

/// Like [`robustness_value`], but the one-sided confidence bound on the `h0`
/// side must reach `h0`. Found by bisection on `[0, RV]`.
pub fn robustness_value_a(el: &SensitivityElements, h0: f64, rho: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let rv = robustness_value(el, h0, rho)?;
    let gap = (el.theta - h0).abs();
    if gap == 0.0 {
        return Ok(0.0);
    }
    let z = normal_quantile(level);
    let sign = if el.theta > h0 { -1.0 } else { 1.0 };
    let f = |c: f64| {
        let sc = Scenario { cf_y: c, cf_d: c, rho, label: String::new() };
        let bb = bias_bound(el, &sc);
        gap - bb.b - z * combined_se(el, &bb.psi_b, sign)
    };
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, rv);
    while hi - lo > RV_A_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub theta: f64,
    pub se: f64,
    pub sigma2: f64,
    pub nu2: f64,
    #[serde(flatten)]
    pub bounds: AdjustedBounds,
    /// `None` when the scenario has `ρ = 0`.
    pub rv: Option<f64>,
    pub rv_a: Option<f64>,
    pub scenario: Scenario,
    pub h0: f64,
    pub level: f64,
}

/// Bounds under `sc` plus robustness values for `h0` at the scenario's `ρ`.
pub fn sensitivity_report(el: &SensitivityElements, sc: &Scenario, level: f64, h0: f64) -> Result<SensitivityReport> {
    let bounds = adjusted_bounds(el, sc, level)?;
    let (rv, rv_a) = if sc.rho == 0.0 {
        (None, None)
    } else {
        (Some(robustness_value(el, h0, sc.rho)?), Some(robustness_value_a(el, h0, sc.rho, level)?))
    };
    Ok(SensitivityReport {
        theta: el.theta,
        se: el.se,
        sigma2: el.sigma2,
        nu2: el.nu2,
        bounds,
        rv,
        rv_a,
        scenario: sc.clone(),
        h0,
        level,
    })
}
