use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::isotonic::isotonic_calibrate;
use super::linear::fit_ols;
use super::logistic::{fit_logistic, LogitModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::LearnerSpec;
use crate::error::{Error, Result};
use crate::panel::TwoByTwoView;

/// Propensity clip applied to every cross-fitted prediction.
pub const PROPENSITY_CLIP: f64 = 0.01;
const MAX_FOLD_DRAWS: usize = 20;

/// Out-of-fold nuisance predictions for one 2x2 view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceFit {
    /// Outcome-difference regression on controls, `ĝ(0, X_i)`.
    pub g0_hat: Vec<f64>,
    /// Outcome-difference regression on treated units, `ĝ(1, X_i)`.
    pub g1_hat: Vec<f64>,
    /// Clipped propensity score `m̂(X_i)`.
    pub m_hat: Vec<f64>,
    pub folds: Vec<usize>,
    pub p_hat: f64,
    pub spec: LearnerSpec,
    pub delta_y: Vec<f64>,
    pub treat: Vec<bool>,
    /// False if any fold's logistic fit hit the iteration cap.
    pub propensity_converged: bool,
}

impl NuisanceFit {
    pub fn n(&self) -> usize {
        self.delta_y.len()
    }

    /// `ĝ(D_i, X_i)`.
    pub fn g_hat(&self) -> Vec<f64> {
        self.treat
            .iter()
            .zip(self.g0_hat.iter().zip(&self.g1_hat))
            .map(|(&d, (&g0, &g1))| if d { g1 } else { g0 })
            .collect()
    }
}

fn has_both_classes(treat: &[bool], folds: &[usize], k: usize) -> bool {
    let mut seen = vec![(false, false); k];
    for (&d, &f) in treat.iter().zip(folds) {
        if d {
            seen[f].1 = true;
        } else {
            seen[f].0 = true;
        }
    }
    seen.iter().all(|&(c, t)| c && t)
}

/// Treatment-stratified fold labels: each class is shuffled and dealt
/// round-robin, the treated deal continuing where the controls stopped.
pub fn assign_folds(treat: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut controls: Vec<usize> = (0..treat.len()).filter(|&i| !treat[i]).collect();
    let mut treated: Vec<usize> = (0..treat.len()).filter(|&i| treat[i]).collect();
    for _ in 0..MAX_FOLD_DRAWS {
        controls.shuffle(&mut rng);
        treated.shuffle(&mut rng);
        let mut folds = vec![0; treat.len()];
        for (pos, &i) in controls.iter().chain(&treated).enumerate() {
            folds[i] = pos % k;
        }
        if has_both_classes(treat, &folds, k) {
            return Ok(folds);
        }
    }
    Err(Error::FoldDegenerate { attempts: MAX_FOLD_DRAWS })
}

/// Cross-fits the nuisances with folds drawn from `spec.seed`.
pub fn crossfit(view: &TwoByTwoView, spec: &LearnerSpec) -> Result<NuisanceFit> {
    let folds = assign_folds(&view.treat, spec.folds, spec.seed)?;
    crossfit_with_folds(view, spec, &folds)
}

fn fit_propensity(x: &DMatrix<f64>, d: &[bool], rows: &[usize]) -> Result<LogitModel> {
    let xs = x.select_rows(rows);
    let ds: Vec<bool> = rows.iter().map(|&i| d[i]).collect();
    fit_logistic(&xs, &ds, DEFAULT_MAX_ITER, DEFAULT_TOL)
}

struct FoldOutput {
    rows: Vec<usize>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    m: Vec<f64>,
    converged: bool,
}

fn fit_fold(view: &TwoByTwoView, spec: &LearnerSpec, folds: &[usize], k: usize, fold: usize) -> Result<FoldOutput> {
    let n = view.n();
    let test: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
    let train: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
    let x_test = view.xmat.select_rows(&test);
    let lambda = spec.lambda();

    let outcome = |treated: bool| -> Result<Vec<f64>> {
        let rows: Vec<usize> = train.iter().copied().filter(|&i| view.treat[i] == treated).collect();
        let y: Vec<f64> = rows.iter().map(|&i| view.delta_y[i]).collect();
        Ok(fit_ols(&view.xmat.select_rows(&rows), &y, lambda)?.predict(&x_test))
    };
    let g0 = outcome(false)?;
    let g1 = outcome(true)?;

    let model = fit_propensity(&view.xmat, &view.treat, &train)?;
    let mut converged = model.converged;
    let mut m = model.predict_proba(&x_test);

    if spec.calibrate {
        // Calibration scores for the training rows come from an inner
        // cross-fit over the remaining folds, so this fold's labels are never
        // seen by the map applied to it.
        let mut scores = Vec::with_capacity(train.len());
        let mut labels = Vec::with_capacity(train.len());
        for inner in (0..k).filter(|&j| j != fold) {
            let inner_test: Vec<usize> = train.iter().copied().filter(|&i| folds[i] == inner).collect();
            let inner_train: Vec<usize> = train.iter().copied().filter(|&i| folds[i] != inner).collect();
            let inner_model = fit_propensity(&view.xmat, &view.treat, &inner_train)?;
            converged &= inner_model.converged;
            scores.extend(inner_model.predict_proba(&view.xmat.select_rows(&inner_test)));
            labels.extend(inner_test.iter().map(|&i| if view.treat[i] { 1.0 } else { 0.0 }));
        }
        let map = isotonic_calibrate(&scores, &labels);
        m = map.apply(&m);
    }
    for v in &mut m {
        *v = v.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP);
    }
    Ok(FoldOutput { rows: test, g0, g1, m, converged })
}

/// Cross-fits the nuisances on caller-supplied fold labels `0..k`.
pub fn crossfit_with_folds(view: &TwoByTwoView, spec: &LearnerSpec, folds: &[usize]) -> Result<NuisanceFit> {
    let n = view.n();
    if folds.len() != n {
        return Err(Error::InvalidArgument("fold labels do not match the number of rows".into()));
    }
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::InvalidArgument("cross-fitting needs at least 2 folds".into()));
    }
    if !has_both_classes(&view.treat, folds, k) {
        return Err(Error::FoldDegenerate { attempts: 1 });
    }
    let outputs = (0..k)
        .into_par_iter()
        .map(|fold| fit_fold(view, spec, folds, k, fold))
        .collect::<Result<Vec<_>>>()?;

    let mut g0_hat = vec![0.0; n];
    let mut g1_hat = vec![0.0; n];
    let mut m_hat = vec![0.0; n];
    let mut converged = true;
    for out in outputs {
        converged &= out.converged;
        for (j, &i) in out.rows.iter().enumerate() {
            g0_hat[i] = out.g0[j];
            g1_hat[i] = out.g1[j];
            m_hat[i] = out.m[j];
        }
    }
    Ok(NuisanceFit {
        g0_hat,
        g1_hat,
        m_hat,
        folds: folds.to_vec(),
        p_hat: view.p_hat(),
        spec: spec.clone(),
        delta_y: view.delta_y.clone(),
        treat: view.treat.clone(),
        propensity_converged: converged,
    })
}
