use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal condition below which an unpenalized design is rejected.
pub const RCOND_MIN: f64 = 1e-12;

/// Affine predictor `intercept + x'coefficients`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub ridge_lambda: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        let mut out = x * beta;
        out.add_scalar_mut(self.intercept);
        out.data.into()
    }
}

/// `[1, X]`.
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// Reciprocal 2-norm condition of a symmetric PSD matrix after unit-diagonal
/// scaling.
pub(crate) fn equilibrated_rcond(gram: &DMatrix<f64>) -> f64 {
    let p = gram.nrows();
    if p == 0 {
        return 1.0;
    }
    let mut scaled = gram.clone();
    for j in 0..p {
        let d = gram[(j, j)];
        if d <= 0.0 || !d.is_finite() {
            return 0.0;
        }
    }
    for i in 0..p {
        for j in 0..p {
            scaled[(i, j)] /= (gram[(i, i)] * gram[(j, j)]).sqrt();
        }
    }
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if max <= 0.0 {
        0.0
    } else {
        (min / max).max(0.0)
    }
}

/// Least squares with an optional ridge penalty on the slopes only.
///
/// Solves `(A'A + λ·diag(0,1,..,1)) β = A'y` with `A = [1, X]` by Cholesky.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LinearModel> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("design has {n} rows but target has {}", y.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("least squares needs at least 2 rows".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge lambda must be finite and nonnegative, got {lambda}")));
    }
    let a = with_intercept(x);
    let yv = DVector::from_column_slice(y);
    let mut gram = a.tr_mul(&a);
    let rhs = a.tr_mul(&yv);
    if lambda == 0.0 {
        let rcond = equilibrated_rcond(&gram);
        if rcond < RCOND_MIN {
            return Err(Error::SingularDesign { rcond });
        }
    } else {
        for j in 1..gram.nrows() {
            gram[(j, j)] += lambda;
        }
    }
    let chol = gram.cholesky().ok_or(Error::SingularDesign { rcond: 0.0 })?;
    let beta = chol.solve(&rhs);
    Ok(LinearModel {
        intercept: beta[0],
        coefficients: beta.rows(1, beta.len() - 1).iter().copied().collect(),
        ridge_lambda: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = fit_ols(&x, &y, 0.0).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((m.intercept - 1.0).abs() < 1e-10);
    }

    #[test]
    fn infinite_shrinkage() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let mean = raw.iter().sum::<f64>() / 30.0;
        let x = DMatrix::from_iterator(30, 1, raw.iter().map(|v| v - mean));
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + rng.random::<f64>()).collect();
        let m = fit_ols(&x, &y, 1e12).unwrap();
        assert!(m.coefficients[0].abs() < 1e-6);
    }

    #[test]
    fn collinear_design_is_singular() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { i as f64 } else { 2.0 * i as f64 });
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_ols(&x, &y, 0.0), Err(Error::SingularDesign { .. })));
        assert!(fit_ols(&x, &y, 1.0).is_ok());
    }

    #[test]
    fn constant_column_is_singular() {
        let x = DMatrix::from_element(6, 1, 4.0);
        assert!(matches!(fit_ols(&x, &[1.0; 6], 0.0), Err(Error::SingularDesign { .. })));
    }
}
