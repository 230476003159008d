use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::OracleScenario;
use super::dgp::{DgpConfig, RawDraw};
use crate::did::att_dml;
use crate::error::Result;
use crate::learners::{assign_folds, crossfit_with_folds, LearnerSpec};
use crate::sensitivity::{adjusted_bounds, elements, robustness_value, robustness_value_a, Scenario};
use crate::stats::{derive_seed, mean, normal_quantile, quantile_sorted, sd};

/// Per-replication quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: u64,
    pub theta_short: f64,
    pub se_short: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub theta_long: f64,
    pub se_long: f64,
    pub ell_short: f64,
    pub ell_minus: f64,
    pub ell_long: f64,
    pub rv: f64,
    pub rv_rho1: f64,
    pub rv_a: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Absent when fewer than two replications succeeded.
    pub sd: Option<f64>,
}

fn mean_sd(x: &[f64]) -> MeanSd {
    MeanSd { mean: mean(x), sd: if x.len() >= 2 { Some(sd(x)) } else { None } }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTable {
    pub theta_short: MeanSd,
    pub theta_minus: MeanSd,
    pub theta_plus: MeanSd,
    pub theta_long: MeanSd,
    /// Robustness value for `h0 = θ0` at the oracle `ρ`.
    pub rv: MeanSd,
    pub rv_rho1: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTable {
    pub ell_short: MeanSd,
    pub ell_minus: MeanSd,
    pub ell_long: MeanSd,
    /// Share of replications with `θ0 ≥ ℓ̂`.
    pub coverage_short: f64,
    pub coverage_minus: f64,
    pub coverage_long: f64,
    pub rv_a: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSettings {
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub learner: LearnerSpec,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTables {
    pub dgp: DgpConfig,
    pub oracle: OracleScenario,
    pub settings: MonteCarloSettings,
    pub n: usize,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub failures: Vec<String>,
    pub point: PointTable,
    pub intervals: IntervalTable,
    pub records: Vec<RepRecord>,
}

fn run_rep(
    cfg: &DgpConfig,
    oracle: &OracleScenario,
    settings: &MonteCarloSettings,
    rep: u64,
) -> Result<RepRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(rep);
    let sample = RawDraw::from_rng(cfg.n, &mut rng).realize(cfg);
    let short_view = sample.short_view()?;
    let long_view = short_view.with_hidden_confounder()?;
    let learner = settings.learner.with_seed(derive_seed(settings.seed, rep));
    let folds = assign_folds(&short_view.treat, learner.folds, learner.seed)?;
    let short = att_dml(&crossfit_with_folds(&short_view, &learner, &folds)?, settings.normalized)?;
    let long = att_dml(&crossfit_with_folds(&long_view, &learner, &folds)?, settings.normalized)?;
    let el = elements(&short)?;
    let sc = Scenario::new(oracle.cf_y, oracle.cf_d, oracle.rho, "oracle")?;
    let b = adjusted_bounds(&el, &sc, settings.level)?;
    let z = normal_quantile(settings.level);
    let rho = if oracle.rho == 0.0 { 1.0 } else { oracle.rho };
    Ok(RepRecord {
        rep,
        theta_short: short.theta,
        se_short: short.se,
        theta_minus: b.theta_minus,
        theta_plus: b.theta_plus,
        theta_long: long.theta,
        se_long: long.se,
        ell_short: short.theta - z * short.se,
        ell_minus: b.ell_minus,
        ell_long: long.theta - z * long.se,
        rv: robustness_value(&el, cfg.theta, rho)?,
        rv_rho1: robustness_value(&el, cfg.theta, 1.0)?,
        rv_a: robustness_value_a(&el, cfg.theta, rho, settings.level)?,
        bias: b.bias,
    })
}

/// Replication farm. Replication `r` draws from ChaCha stream `r` of `seed`,
/// so results do not depend on the number of worker threads.
pub fn run_monte_carlo(cfg: &DgpConfig, oracle: &OracleScenario, settings: &MonteCarloSettings) -> Result<SimTables> {
    cfg.validate()?;
    let outcomes: Vec<Result<RepRecord>> =
        (0..settings.reps as u64).into_par_iter().map(|r| run_rep(cfg, oracle, settings, r)).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(format!("rep {r}: {e}")),
        }
    }
    let col = |f: fn(&RepRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let cover = |f: fn(&RepRecord) -> f64| {
        records.iter().filter(|r| cfg.theta >= f(r)).count() as f64 / records.len() as f64
    };
    Ok(SimTables {
        dgp: cfg.clone(),
        oracle: oracle.clone(),
        settings: settings.clone(),
        n: cfg.n,
        reps_ok: records.len(),
        reps_failed: failures.len(),
        failures,
        point: PointTable {
            theta_short: mean_sd(&col(|r| r.theta_short)),
            theta_minus: mean_sd(&col(|r| r.theta_minus)),
            theta_plus: mean_sd(&col(|r| r.theta_plus)),
            theta_long: mean_sd(&col(|r| r.theta_long)),
            rv: mean_sd(&col(|r| r.rv)),
            rv_rho1: mean_sd(&col(|r| r.rv_rho1)),
        },
        intervals: IntervalTable {
            ell_short: mean_sd(&col(|r| r.ell_short)),
            ell_minus: mean_sd(&col(|r| r.ell_minus)),
            ell_long: mean_sd(&col(|r| r.ell_long)),
            coverage_short: cover(|r| r.ell_short),
            coverage_minus: cover(|r| r.ell_minus),
            coverage_long: cover(|r| r.ell_long),
            rv_a: mean_sd(&col(|r| r.rv_a)),
        },
        records,
    })
}

/// Histogram of standardized values `(x − mean)/sd` as `(bin centre, density)`.
pub fn standardized_histogram(x: &[f64], bins: usize, range: f64) -> Vec<(f64, f64)> {
    let m = mean(x);
    let s = sd(x);
    let width = 2.0 * range / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in x {
        let z = (v - m) / s;
        if z >= -range && z < range {
            counts[((z + range) / width) as usize] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (-range + (k as f64 + 0.5) * width, c as f64 / (x.len() as f64 * width)))
        .collect()
}

/// Gaussian kernel density with Silverman's bandwidth on an even grid
/// spanning the data plus three bandwidths.
pub fn kernel_density(x: &[f64], points: usize) -> Vec<(f64, f64)> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = sd(x);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    let h = 0.9 * spread * (x.len() as f64).powf(-0.2);
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[sorted.len() - 1] + 3.0 * h;
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|k| {
            let g = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            let d = x.iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>() * norm;
            (g, d)
        })
        .collect()
}

/// Two-column CSV with a leading `# config:` comment line.
pub fn write_xy_csv<W: Write>(mut w: W, config: &str, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "# config: {config}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record([header.0, header.1])?;
    for (a, b) in rows {
        out.write_record([a.to_string(), b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_integrates_to_one() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let h = standardized_histogram(&x, 40, 4.0);
        let total: f64 = h.iter().map(|(_, d)| d * 0.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_about_one() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 / 37.0).sin()).collect();
        let d = kernel_density(&x, 400);
        let step = d[1].0 - d[0].0;
        let total: f64 = d.iter().map(|(_, v)| v * step).sum();
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }
}
