use serde::{Deserialize, Serialize};

use super::dgp::{DgpConfig, RawDraw, SimSample};
use crate::did::att_dml;
use crate::error::{Error, Result};
use crate::learners::{fit_logistic, fit_ols, LearnerSpec, NuisanceFit, DEFAULT_MAX_ITER, DEFAULT_TOL, PROPENSITY_CLIP};
use crate::panel::TwoByTwoView;
use crate::sensitivity::{cd_from_bounded, elements};

pub const MAX_OUTER_ITERATIONS: usize = 60;
pub const DEFAULT_CALIBRATION_TOL: f64 = 0.005;
pub const DEFAULT_SUPERPOP_N: usize = 1_000_000;

/// Population sensitivity values of the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleScenario {
    pub cf_y: f64,
    /// Bounded form.
    pub cf_d: f64,
    /// Correlation form of the bias decomposition.
    pub rho: f64,
    /// `(θ_long − θ_short)/B(cf_y, cf_d, ρ = 1)`.
    pub rho_backed_out: f64,
    /// `sqrt(σ²_short ν²_short)`.
    pub s: f64,
    pub theta_short: f64,
    pub theta_long: f64,
    pub sigma2_short: f64,
    pub nu2_short: f64,
    pub nu2_long: f64,
    /// `mean((ĝ − ĝ_s)(α − α_s))`.
    pub bias_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub gamma_a: f64,
    pub beta_a: f64,
    pub oracle: OracleScenario,
    pub outer_iterations: usize,
    pub superpop_n: usize,
    pub target: f64,
    pub tol: f64,
}

/// Nuisances fitted and evaluated on the same rows.
pub fn insample_fit(view: &TwoByTwoView, m_hat: Option<Vec<f64>>) -> Result<NuisanceFit> {
    let outcome = |treated: bool| -> Result<Vec<f64>> {
        let rows: Vec<usize> = (0..view.n()).filter(|&i| view.treat[i] == treated).collect();
        let y: Vec<f64> = rows.iter().map(|&i| view.delta_y[i]).collect();
        Ok(fit_ols(&view.xmat.select_rows(&rows), &y, 0.0)?.predict(&view.xmat))
    };
    let m_hat = match m_hat {
        Some(m) => m,
        None => insample_propensity(view)?,
    };
    Ok(NuisanceFit {
        g0_hat: outcome(false)?,
        g1_hat: outcome(true)?,
        m_hat,
        folds: vec![0; view.n()],
        p_hat: view.p_hat(),
        spec: LearnerSpec::default(),
        delta_y: view.delta_y.clone(),
        treat: view.treat.clone(),
        propensity_converged: true,
    })
}

pub fn insample_propensity(view: &TwoByTwoView) -> Result<Vec<f64>> {
    let model = fit_logistic(&view.xmat, &view.treat, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    Ok(model
        .predict_proba(&view.xmat)
        .into_iter()
        .map(|m| m.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP))
        .collect())
}

/// Long (with `A`) and short propensities; they depend on `γ_A` only.
struct Propensities {
    long: Vec<f64>,
    short: Vec<f64>,
}

fn propensities(sample: &SimSample) -> Result<Propensities> {
    let short = sample.short_view()?;
    let long = short.with_hidden_confounder()?;
    Ok(Propensities { long: insample_propensity(&long)?, short: insample_propensity(&short)? })
}

fn oracle_from(sample: &SimSample, props: &Propensities) -> Result<OracleScenario> {
    let short_view = sample.short_view()?;
    let long_view = short_view.with_hidden_confounder()?;
    let short = att_dml(&insample_fit(&short_view, Some(props.short.clone()))?, false)?;
    let long = att_dml(&insample_fit(&long_view, Some(props.long.clone()))?, false)?;
    let el_s = elements(&short)?;
    let el_l = elements(&long)?;
    let g_s = short.fit()?.g_hat();
    let g_l = long.fit()?.g_hat();
    let n = g_s.len() as f64;
    let dg: Vec<f64> = g_l.iter().zip(&g_s).map(|(a, b)| a - b).collect();
    let da: Vec<f64> = long.riesz.iter().zip(&short.riesz).map(|(a, b)| a - b).collect();
    let dg2 = dg.iter().map(|v| v * v).sum::<f64>() / n;
    let bias_product = dg.iter().zip(&da).map(|(g, a)| g * a).sum::<f64>() / n;
    let dnu = el_l.nu2 - el_s.nu2;
    let cf_y = dg2 / el_s.sigma2;
    let cf_d = dnu / el_l.nu2;
    let rho = if dg2 > 0.0 && dnu > 0.0 { (bias_product / (dg2 * dnu).sqrt()).clamp(-1.0, 1.0) } else { 0.0 };
    let b1 = (cf_y.max(0.0) * cd_from_bounded(cf_d.max(0.0)) * el_s.sigma2 * el_s.nu2).sqrt();
    let rho_backed_out = if b1 > 0.0 { (long.theta - short.theta) / b1 } else { 0.0 };
    Ok(OracleScenario {
        cf_y,
        cf_d,
        rho,
        rho_backed_out,
        s: el_s.s(),
        theta_short: short.theta,
        theta_long: long.theta,
        sigma2_short: el_s.sigma2,
        nu2_short: el_s.nu2,
        nu2_long: el_l.nu2,
        bias_product,
    })
}

/// Population sensitivity values of one configuration on a given draw.
pub fn oracle_values(raw: &RawDraw, cfg: &DgpConfig) -> Result<OracleScenario> {
    let sample = raw.realize(cfg);
    oracle_from(&sample, &propensities(&sample)?)
}

/// Finds `x ≥ 0` with `f(x) ≈ target` for increasing `f`, expanding the
/// bracket from `start` by doubling up to `cap`.
fn solve_increasing(
    mut f: impl FnMut(f64) -> Result<f64>,
    target: f64,
    tol: f64,
    start: f64,
    cap: f64,
) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    let f_lo = f(lo)?;
    if (f_lo - target).abs() <= tol {
        return Ok((lo, f_lo));
    }
    let mut hi = start;
    let mut f_hi = f(hi)?;
    while f_hi < target {
        if hi >= cap {
            return Ok((hi, f_hi));
        }
        lo = hi;
        hi = (hi * 2.0).min(cap);
        f_hi = f(hi)?;
    }
    let mut best = (hi, f_hi);
    for _ in 0..60 {
        if (best.1 - target).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        best = (mid, v);
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Calibrates `(γ_A, β_A)` so that the population `cf_d` and `cf_y` hit
/// `target` on a super-population draw.
///
/// `cf_d` only depends on `γ_A` through the treatment assignment, so each
/// outer pass solves `γ_A` first and then `β_A` given `γ_A`, both by
/// bisection. All evaluations reuse the same random numbers.
pub fn calibrate_confounding(
    target: f64,
    superpop_n: usize,
    tol: f64,
    seed: u64,
    base: &DgpConfig,
) -> Result<CalibrationResult> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target must lie in (0, 1), got {target}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let raw = RawDraw::new(superpop_n, seed);
    let mut cfg = DgpConfig { n: superpop_n, seed, ..base.clone() };
    let inner_tol = tol / 4.0;
    for outer in 1..=MAX_OUTER_ITERATIONS {
        let (gamma, _) = solve_increasing(
            |g| {
                let sample = raw.realize(&DgpConfig { gamma_a: g, ..cfg.clone() });
                Ok(oracle_from(&sample, &propensities(&sample)?)?.cf_d)
            },
            target,
            inner_tol,
            0.05,
            1.0,
        )?;
        cfg.gamma_a = gamma;
        let sample = raw.realize(&cfg);
        let props = propensities(&sample)?;
        let (beta, _) = solve_increasing(
            |b| {
                let sample = raw.realize(&DgpConfig { beta_a: b, ..cfg.clone() });
                Ok(oracle_from(&sample, &props)?.cf_y)
            },
            target,
            inner_tol,
            1.0,
            1e4,
        )?;
        cfg.beta_a = beta;
        let oracle = oracle_from(&raw.realize(&cfg), &props)?;
        if (oracle.cf_y - target).abs() <= tol && (oracle.cf_d - target).abs() <= tol {
            return Ok(CalibrationResult {
                gamma_a: cfg.gamma_a,
                beta_a: cfg.beta_a,
                oracle,
                outer_iterations: outer,
                superpop_n,
                target,
                tol,
            });
        }
    }
    Err(Error::CalibrationDiverged(MAX_OUTER_ITERATIONS))
}
