//! Orthogonal-score ATT estimation in the 2x2 design.
//!
//! The score is affine in the target, so the estimate is solved in closed
//! form: `θ̂ = mean(α̂_i (ΔY_i − ĝ0_i))` with Riesz weights `α̂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::NuisanceFit;
use crate::panel::CellMeta;
use crate::stats::{normal_quantile, z_two_sided};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttEstimate {
    pub theta: f64,
    /// Standard error, already scaled by `1/sqrt(n)`.
    pub se: f64,
    pub n: usize,
    /// Influence values `ψ_i(θ̂)`; they average to zero.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub psi: Vec<f64>,
    /// Riesz representer values `α̂_i`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub riesz: Vec<f64>,
    pub normalized: bool,
    #[serde(skip)]
    pub nuisance: Option<NuisanceFit>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<CellMeta>,
}

impl AttEstimate {
    /// Copy without the per-observation vectors and nuisance fit.
    pub fn summary(&self) -> Self {
        Self { psi: Vec::new(), riesz: Vec::new(), nuisance: None, ..self.clone() }
    }

    pub fn fit(&self) -> Result<&NuisanceFit> {
        self.nuisance
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("estimate carries no nuisance fit".into()))
    }
}

fn group_check(fit: &NuisanceFit) -> Result<f64> {
    let n = fit.n();
    let n1 = fit.treat.iter().filter(|&&d| d).count();
    if n1 == 0 || n1 == n {
        return Err(Error::DegenerateGroups(format!("{n1} treated out of {n}")));
    }
    Ok(n1 as f64 / n as f64)
}

/// Riesz representer values.
///
/// Unnormalized: `α_i = D_i/p̂ − (1−D_i) m̂_i / (p̂ (1−m̂_i))`. Normalized: the
/// control odds weights `w_i = m̂_i (1−D_i)/(1−m̂_i)` are divided by their
/// sample mean, so that both groups carry the same total weight.
pub fn riesz_values(fit: &NuisanceFit, normalized: bool) -> Vec<f64> {
    let n = fit.n();
    let p = fit.treat.iter().filter(|&&d| d).count() as f64 / n as f64;
    let w: Vec<f64> = fit
        .treat
        .iter()
        .zip(&fit.m_hat)
        .map(|(&d, &m)| if d { 0.0 } else { m / (1.0 - m) })
        .collect();
    let scale = if normalized { w.iter().sum::<f64>() / n as f64 } else { p };
    fit.treat
        .iter()
        .zip(&w)
        .map(|(&d, &w)| if d { 1.0 / p } else { -w / scale })
        .collect()
}

pub fn att_dml(fit: &NuisanceFit, normalized: bool) -> Result<AttEstimate> {
    let p = group_check(fit)?;
    let n = fit.n();
    let riesz = riesz_values(fit, normalized);
    let score_b: Vec<f64> = riesz
        .iter()
        .zip(fit.delta_y.iter().zip(&fit.g0_hat))
        .map(|(a, (y, g0))| a * (y - g0))
        .collect();
    let theta = score_b.iter().sum::<f64>() / n as f64;
    let psi: Vec<f64> = score_b
        .iter()
        .zip(&fit.treat)
        .map(|(b, &d)| b - if d { theta / p } else { 0.0 })
        .collect();
    let se = (psi.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt() / (n as f64).sqrt();
    Ok(AttEstimate { theta, se, n, psi, riesz, normalized, nuisance: Some(fit.clone()), meta: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    Two,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Normal-approximation interval; one-sided variants are half-lines.
pub fn confidence_interval(est: &AttEstimate, level: f64, sides: Sides) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(match sides {
        Sides::Two => {
            let z = z_two_sided(level);
            Interval { lower: est.theta - z * est.se, upper: est.theta + z * est.se }
        }
        Sides::Lower => Interval { lower: est.theta - normal_quantile(level) * est.se, upper: f64::INFINITY },
        Sides::Upper => Interval { lower: f64::NEG_INFINITY, upper: est.theta + normal_quantile(level) * est.se },
    })
}
