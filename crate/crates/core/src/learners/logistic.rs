use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::with_intercept;
use crate::error::{Error, Result};
use crate::stats::logistic;

/// Ridge added to the IRLS Hessian so that separable data stays solvable.
pub const IRLS_RIDGE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Linear predictor clamp; keeps predictions strictly inside (0, 1).
const ETA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogitModel {
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        let mut eta = x * beta;
        eta.add_scalar_mut(self.intercept);
        eta.data.into()
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.linear_predictor(x)
            .into_iter()
            .map(|e| logistic(e.clamp(-ETA_CLAMP, ETA_CLAMP)))
            .collect()
    }
}

/// Bernoulli log-likelihood of probabilities `p` for labels `d`.
pub fn log_likelihood(p: &[f64], d: &[bool]) -> f64 {
    p.iter()
        .zip(d)
        .map(|(&p, &d)| if d { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

/// Log-likelihood as a function of the linear predictor, stable for large |eta|.
fn loglik_eta(eta: &DVector<f64>, d: &[bool]) -> f64 {
    eta.iter()
        .zip(d)
        .map(|(&e, &d)| {
            // log(1 + exp(e)) computed without overflow
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            if d { e - softplus } else { -softplus }
        })
        .sum()
}

/// Logistic regression by iteratively reweighted least squares.
///
/// Newton steps on the log-likelihood penalized by `IRLS_RIDGE/2 * |beta|^2`,
/// with step halving whenever the objective would decrease. Convergence means
/// the largest coefficient change fell below `tol` without any linear
/// predictor reaching the ±30 clamp; hitting `max_iter` or separation is not
/// an error and is reported through `converged`.
pub fn fit_logistic(x: &DMatrix<f64>, d: &[bool], max_iter: usize, tol: f64) -> Result<LogitModel> {
    let n = x.nrows();
    if d.len() != n {
        return Err(Error::InvalidArgument(format!("design has {n} rows but labels have {}", d.len())));
    }
    let n1 = d.iter().filter(|&&v| v).count();
    if n1 == 0 || n1 == n {
        return Err(Error::OneClassOnly);
    }
    let a = with_intercept(x);
    let p = a.ncols();
    let y = DVector::from_iterator(n, d.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    let mut beta = DVector::zeros(p);
    // Start the intercept at the log odds of the base rate.
    let rate = n1 as f64 / n as f64;
    beta[0] = (rate / (1.0 - rate)).ln();

    let objective = |beta: &DVector<f64>| -> f64 {
        let eta = &a * beta;
        loglik_eta(&eta, d) - 0.5 * IRLS_RIDGE * beta.norm_squared()
    };

    let mut current = objective(&beta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let eta = &a * &beta;
        let mu = eta.map(logistic);
        let w = mu.map(|m| m * (1.0 - m));
        let mut grad = a.tr_mul(&(&y - &mu));
        grad -= &beta * IRLS_RIDGE;
        let mut aw = a.clone();
        for mut col in aw.column_iter_mut() {
            col.component_mul_assign(&w);
        }
        let mut hess = a.tr_mul(&aw);
        for j in 0..p {
            hess[(j, j)] += IRLS_RIDGE;
        }
        let step = match hess.cholesky() {
            Some(c) => c.solve(&grad),
            None => break,
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * scale;
            let obj = objective(&cand);
            if obj >= current {
                accepted = Some((cand, obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, obj)) = accepted else { break };
        let change = (&next - &beta).amax();
        beta = next;
        current = obj;
        if change < tol {
            converged = true;
            break;
        }
    }
    // Saturated linear predictors mean the data are (quasi-)separated: the
    // unpenalized maximum does not exist and only the ridge keeps beta finite.
    if converged && (&a * &beta).amax() >= ETA_CLAMP {
        converged = false;
    }
    Ok(LogitModel {
        intercept: beta[0],
        coefficients: beta.rows(1, p - 1).iter().copied().collect(),
        converged,
        iterations,
    })
}
