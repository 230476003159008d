use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{FirstTreatment, PanelDataset, TwoByTwoView};
use crate::stats::logistic;

pub const N_COVARIATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub theta: f64,
    /// Loading of the confounder on the treatment probability.
    pub gamma_a: f64,
    /// Loading of the confounder on the second-period outcome.
    pub beta_a: f64,
    pub sigma_eps: f64,
    pub n: usize,
    pub seed: u64,
    /// Expose the transformed covariates `Z` (true) or the raw normals `X`.
    pub use_z_transform: bool,
    /// Standardize `Z` by the variance instead of the standard deviation.
    pub divide_by_variance: bool,
    pub clip: (f64, f64),
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            theta: 5.0,
            gamma_a: 0.0,
            beta_a: 0.0,
            sigma_eps: DEFAULT_SIGMA_EPS,
            n: 1000,
            seed: 0,
            use_z_transform: true,
            divide_by_variance: false,
            clip: (0.1, 0.9),
        }
    }
}

/// Noise scale of each period's outcome error.
pub const DEFAULT_SIGMA_EPS: f64 = 1.5;

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_eps must be positive, got {}", self.sigma_eps)));
        }
        let (lo, hi) = self.clip;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidArgument(format!("clip interval must satisfy 0 < lo < hi < 1, got {:?}", self.clip)));
        }
        if !self.theta.is_finite() || !self.gamma_a.is_finite() || !self.beta_a.is_finite() {
            return Err(Error::InvalidArgument("theta and confounder loadings must be finite".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument("sample size must be at least 2".into()));
        }
        Ok(())
    }
}

pub fn f_reg(v: &[f64]) -> f64 {
    210.0 + 27.4 * v[0] + 13.7 * (v[1] + v[2] + v[3])
}

pub fn f_ps(v: &[f64]) -> f64 {
    0.75 * (-v[0] + 0.5 * v[1] - 0.25 * v[2] - 0.1 * v[3])
}

fn transform(x: &[f64]) -> [f64; N_COVARIATES] {
    [
        (0.5 * x[0]).exp(),
        10.0 + x[1] / (1.0 + x[0].exp()),
        (0.6 + x[0] * x[2] / 25.0).powi(3),
        (20.0 + x[1] + x[3]).powi(2),
        x[4],
    ]
}

/// All random inputs of one sample. Realizing it under different confounder
/// loadings reuses the same numbers.
#[derive(Debug, Clone)]
pub struct RawDraw {
    pub x: DMatrix<f64>,
    pub a: Vec<f64>,
    pub u: Vec<f64>,
    pub eps0: Vec<f64>,
    pub eps1: Vec<f64>,
}

impl RawDraw {
    pub fn new(n: usize, seed: u64) -> Self {
        Self::from_rng(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut x = DMatrix::zeros(n, N_COVARIATES);
        let mut a = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let mut eps0 = Vec::with_capacity(n);
        let mut eps1 = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..N_COVARIATES {
                x[(i, j)] = rng.sample(StandardNormal);
            }
            a.push(rng.random_range(-1.0..1.0));
            u.push(rng.random::<f64>());
            eps0.push(rng.sample(StandardNormal));
            eps1.push(rng.sample(StandardNormal));
        }
        Self { x, a, u, eps0, eps1 }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Transformed covariates, standardized with sample moments.
    pub fn z(&self, divide_by_variance: bool) -> DMatrix<f64> {
        let n = self.n();
        let mut z = DMatrix::zeros(n, N_COVARIATES);
        for i in 0..n {
            let row: Vec<f64> = self.x.row(i).iter().copied().collect();
            for (j, v) in transform(&row).into_iter().enumerate() {
                z[(i, j)] = v;
            }
        }
        for mut col in z.column_iter_mut() {
            let m = col.mean();
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            let scale = if divide_by_variance { var } else { var.sqrt() };
            for v in col.iter_mut() {
                *v = (*v - m) / scale;
            }
        }
        z
    }

    pub fn realize(&self, cfg: &DgpConfig) -> SimSample {
        let z = self.z(cfg.divide_by_variance);
        let n = self.n();
        let (lo, hi) = cfg.clip;
        let mut d = Vec::with_capacity(n);
        let mut y_pre = Vec::with_capacity(n);
        let mut y_post = Vec::with_capacity(n);
        for i in 0..n {
            let zi: Vec<f64> = z.row(i).iter().copied().collect();
            let p = (logistic(f_ps(&zi)) + cfg.gamma_a * self.a[i]).clamp(lo, hi);
            let di = p >= self.u[i];
            let base = f_reg(&zi);
            let effect = if di { cfg.theta * (zi[4] + 1.0) } else { 0.0 };
            d.push(di);
            y_pre.push(base + cfg.sigma_eps * self.eps0[i]);
            y_post.push(effect + base + cfg.beta_a * self.a[i] + cfg.sigma_eps * self.eps1[i]);
        }
        let features = if cfg.use_z_transform { z.clone() } else { self.x.clone() };
        SimSample { z, features, a: self.a.clone(), d, y_pre, y_post }
    }
}

/// One realized sample.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub z: DMatrix<f64>,
    /// Covariates handed to the learners.
    pub features: DMatrix<f64>,
    pub a: Vec<f64>,
    pub d: Vec<bool>,
    pub y_pre: Vec<f64>,
    pub y_post: Vec<f64>,
}

impl SimSample {
    pub fn delta_y(&self) -> Vec<f64> {
        self.y_post.iter().zip(&self.y_pre).map(|(b, a)| b - a).collect()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        (1..=self.features.ncols()).map(|j| format!("Z{j}")).collect()
    }

    /// View on the observed covariates, carrying `A` as hidden confounder.
    pub fn short_view(&self) -> Result<TwoByTwoView> {
        let mut v = TwoByTwoView::new(self.delta_y(), self.d.clone(), self.features.clone(), self.covariate_names())?;
        v.hidden_confounder = Some(self.a.clone());
        Ok(v)
    }

    /// View on the observed covariates plus `A`.
    pub fn long_view(&self) -> Result<TwoByTwoView> {
        self.short_view()?.with_hidden_confounder()
    }

    pub fn to_panel(&self) -> Result<PanelDataset> {
        let n = self.d.len();
        let outcomes = DMatrix::from_fn(n, 2, |i, t| if t == 0 { self.y_pre[i] } else { self.y_post[i] });
        PanelDataset::new(
            (1..=n).map(|i| i.to_string()).collect(),
            vec![1, 2],
            outcomes,
            self.covariate_names(),
            self.features.clone(),
            self.d.iter().map(|&d| if d { FirstTreatment::At(2) } else { FirstTreatment::Never }).collect(),
            Some(self.a.clone()),
        )
    }
}

/// Draws a two-period panel with the hidden confounder attached.
pub fn draw_sample(cfg: &DgpConfig) -> Result<PanelDataset> {
    cfg.validate()?;
    RawDraw::new(cfg.n, cfg.seed).realize(cfg).to_panel()
}
