use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, OutcomeLearner, PropensityLearner};
use crate::panel::{ControlGroup, CsvSchema, TreatmentColumn};
use crate::sensitivity::ContourSide;
use crate::simulation::{DgpConfig, DEFAULT_CALIBRATION_TOL, DEFAULT_SIGMA_EPS, DEFAULT_SUPERPOP_N};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSource {
    Pretest,
    Benchmark,
}

/// Effective settings of one run, embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,

    pub data: Option<PathBuf>,
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    /// First-treated-period column.
    pub g_col: Option<String>,
    /// Per-row 0/1 treatment column, used when `g_col` is unset.
    pub d_col: Option<String>,

    pub learner: OutcomeLearner,
    pub ridge_lambda: f64,
    pub folds: usize,
    pub calibrate: bool,
    pub normalized: bool,

    pub delta: usize,
    pub control: ControlGroup,
    pub level: Option<f64>,
    pub g: Option<i64>,
    pub t_eval: Option<i64>,

    pub cf_y: Option<f64>,
    pub cf_d: Option<f64>,
    pub rho: f64,
    pub scenario_from: Option<ScenarioSource>,
    pub k: f64,
    pub leave_out: Vec<String>,
    pub h0: f64,

    pub cf_y_max: f64,
    pub cf_d_max: f64,
    pub n_grid: usize,
    pub side: ContourSide,
    /// Confidence level for contour bounds; plain bounds when absent.
    pub contour_level: Option<f64>,
    pub svg: bool,

    pub n: usize,
    pub reps: usize,
    pub theta: f64,
    pub sigma_eps: f64,
    pub gamma_a: Option<f64>,
    pub beta_a: Option<f64>,
    pub oracle: Option<PathBuf>,
    pub target: f64,
    pub superpop_n: usize,
    pub tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: 0,
            data: None,
            unit: "unit".into(),
            time: "time".into(),
            outcome: "y".into(),
            covariates: Vec::new(),
            g_col: None,
            d_col: None,
            learner: OutcomeLearner::Ols,
            ridge_lambda: 0.0,
            folds: 5,
            calibrate: false,
            normalized: true,
            delta: 0,
            control: ControlGroup::NeverTreated,
            level: None,
            g: None,
            t_eval: None,
            cf_y: None,
            cf_d: None,
            rho: 1.0,
            scenario_from: None,
            k: 1.0,
            leave_out: Vec::new(),
            h0: 0.0,
            cf_y_max: 0.2,
            cf_d_max: 0.2,
            n_grid: 21,
            side: ContourSide::Lower,
            contour_level: None,
            svg: false,
            n: 1000,
            reps: 500,
            theta: 5.0,
            sigma_eps: DEFAULT_SIGMA_EPS,
            gamma_a: None,
            beta_a: None,
            oracle: None,
            target: 0.1,
            superpop_n: DEFAULT_SUPERPOP_N,
            tol: DEFAULT_CALIBRATION_TOL,
        }
    }
}

fn in_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl RunConfig {
    pub fn learner_spec(&self) -> LearnerSpec {
        LearnerSpec {
            outcome: self.learner,
            propensity: PropensityLearner::Logit,
            ridge_lambda: self.ridge_lambda,
            folds: self.folds,
            calibrate: self.calibrate,
            seed: self.seed,
        }
    }

    pub fn schema(&self) -> CsvSchema {
        let treatment = match (&self.g_col, &self.d_col) {
            (Some(g), _) => TreatmentColumn::FirstTreated(g.clone()),
            (None, Some(d)) => TreatmentColumn::Indicator(d.clone()),
            (None, None) => TreatmentColumn::FirstTreated("g".into()),
        };
        CsvSchema {
            unit: self.unit.clone(),
            time: self.time.clone(),
            outcome: self.outcome.clone(),
            covariates: self.covariates.clone(),
            treatment,
            hidden_confounder: None,
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--data is required for this command".into()))
    }

    pub fn level_or(&self, default: f64) -> f64 {
        self.level.unwrap_or(default)
    }

    pub fn dgp(&self, n: usize) -> DgpConfig {
        DgpConfig {
            theta: self.theta,
            gamma_a: self.gamma_a.unwrap_or(0.0),
            beta_a: self.beta_a.unwrap_or(0.0),
            sigma_eps: self.sigma_eps,
            n,
            seed: self.seed,
            ..DgpConfig::default()
        }
    }

    /// Range checks run before any work starts.
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.level {
            in_unit("level", l)?;
        }
        if let Some(l) = self.contour_level {
            in_unit("contour_level", l)?;
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge_lambda must be nonnegative, got {}", self.ridge_lambda)));
        }
        for (name, v) in [("cf_y", self.cf_y), ("cf_d", self.cf_d)] {
            if let Some(v) = v {
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {v}")));
                }
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidArgument(format!("k must be positive, got {}", self.k)));
        }
        in_unit("cf_y_max", self.cf_y_max)?;
        in_unit("cf_d_max", self.cf_d_max)?;
        in_unit("target", self.target)?;
        if self.n_grid < 2 {
            return Err(Error::InvalidArgument(format!("n_grid must be at least 2, got {}", self.n_grid)));
        }
        if self.reps < 1 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_eps must be positive, got {}", self.sigma_eps)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Overlays `top` on `base`, key by key; nulls in `top` are ignored.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => {
            if !t.is_null() {
                *b = t;
            }
        }
    }
}

/// Reads a config file. Output files of earlier runs are accepted too; their
/// embedded `config` object is used.
pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    match value {
        Value::Object(mut map) => {
            if let Some(Value::Object(inner)) = map.remove("config") {
                Ok(Value::Object(inner))
            } else {
                Ok(Value::Object(map))
            }
        }
        _ => Err(Error::InvalidArgument(format!("config file {} must hold a JSON object", path.display()))),
    }
}

/// Builds the effective config: defaults, then the file, then the flags.
pub fn resolve(file: Option<Value>, flags: Value) -> Result<RunConfig> {
    let mut merged = Value::Object(Map::new());
    if let Some(f) = file {
        merge(&mut merged, f);
    }
    merge(&mut merged, flags);
    Ok(serde_json::from_value(merged)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_win_and_nulls_are_ignored() {
        let cfg = resolve(Some(json!({"seed": 3, "rho": 0.5, "level": 0.8})), json!({"seed": 9, "rho": null}))
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.rho, 0.5);
        assert_eq!(cfg.level, Some(0.8));
        assert_eq!(cfg.folds, 5);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let cfg = RunConfig { cf_y: Some(1.2), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
