//! Least squares and ridge regression with an unpenalized intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    /// One coefficient per input column; constant columns get zero.
    pub coefficients: Vec<f64>,
}

impl LinearFit {
    pub fn eval_row(&self, row: impl Iterator<Item = f64>) -> f64 {
        self.intercept + row.zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// Fits `targets ~ intercept + x * beta` minimizing
/// `||targets - intercept - x beta||^2 + ridge * ||beta||^2`.
///
/// Constant columns carry no information beyond the intercept and are given
/// a zero coefficient. With `ridge == 0` a collinear design is an error.
pub fn fit_linear(x: &DMatrix<f64>, targets: &[f64], ridge: f64) -> Result<LinearFit> {
    let n = x.nrows();
    let p = x.ncols();
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..p).map(|k| x.column(k).mean()).collect();
    let active: Vec<usize> = (0..p)
        .filter(|&k| {
            let col = x.column(k);
            let scale = col.amax().max(1.0);
            col.iter().any(|v| (v - col[0]).abs() > 1e-12 * scale)
        })
        .collect();
    let q = active.len();
    let mut coefficients = vec![0.0; p];
    if q > 0 {
        let xc = DMatrix::from_fn(n, q, |i, c| x[(i, active[c])] - means[active[c]]);
        let yc = DVector::from_iterator(n, targets.iter().map(|t| t - y_mean));
        let mut gram = xc.tr_mul(&xc);
        let max_diag = gram.diagonal().max();
        for c in 0..q {
            gram[(c, c)] += ridge;
        }
        let rhs = xc.tr_mul(&yc);
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Singular("least squares design is rank deficient".into()))?;
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if ridge == 0.0 && min_pivot <= 1e-11 * max_diag {
            return Err(Error::Singular("least squares design is rank deficient".into()));
        }
        let beta = chol.solve(&rhs);
        for (c, &k) in active.iter().enumerate() {
            coefficients[k] = beta[c];
        }
    }
    let intercept = y_mean - coefficients.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearFit {
        intercept,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line_with_explicit_ones_column() {
        let x = DMatrix::from_fn(8, 2, |i, c| if c == 0 { 1.0 } else { i as f64 * 0.7 - 1.0 });
        let y: Vec<f64> = (0..8).map(|i| 3.0 - 2.5 * (i as f64 * 0.7 - 1.0)).collect();
        let fit = fit_linear(&x, &y, 0.0).unwrap();
        assert!((fit.coefficients[1] + 2.5).abs() < 1e-10);
        assert!((fit.intercept + fit.coefficients[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn collinear_design_is_singular() {
        let x = DMatrix::from_fn(10, 2, |i, c| (i as f64) * if c == 0 { 1.0 } else { 2.0 });
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_linear(&x, &y, 0.0), Err(Error::Singular(_))));
        assert!(fit_linear(&x, &y, 1e-3).is_ok());
    }

    #[test]
    fn tiny_ridge_matches_least_squares() {
        let x = DMatrix::from_fn(30, 3, |i, c| ((i * (c + 2)) as f64).sin() + c as f64 * 0.1);
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let ols = fit_linear(&x, &y, 0.0).unwrap();
        let ridge = fit_linear(&x, &y, 1e-10).unwrap();
        for (a, b) in ols.coefficients.iter().zip(&ridge.coefficients) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
