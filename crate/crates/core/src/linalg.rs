//! Least-squares helpers shared by the model, discovery and effects code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Ridge penalty used when the unpenalized normal equations are singular.
pub const RIDGE_FALLBACK: f64 = 1e-6;

/// Relative pivot threshold below which a Gram matrix is declared singular.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Residual standard deviation with the n-1 divisor.
    pub residual_sd: f64,
    /// Classical standard errors of the coefficients (n-p-1 degrees of freedom).
    pub std_errors: Vec<f64>,
    /// Penalty actually applied.
    pub ridge: f64,
}

/// Cholesky factorization of a symmetric matrix with a scale-aware singularity check.
pub fn cholesky(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let max_diag = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let chol = Cholesky::new(a).ok_or_else(|| Error::Singular("matrix not positive definite".into()))?;
    let l = chol.l_dirty();
    for k in 0..l.nrows() {
        let pivot = l[(k, k)] * l[(k, k)];
        if !(pivot > PIVOT_TOL * max_diag.max(f64::MIN_POSITIVE)) {
            return Err(Error::Singular(format!("pivot {k} vanishes")));
        }
    }
    Ok(chol)
}

/// Ordinary (optionally ridge-penalized) least squares of `y` on `columns` with an
/// unpenalized intercept.
pub fn ols(columns: &[&[f64]], y: &[f64], ridge: f64) -> Result<OlsFit> {
    let n = y.len();
    let p = columns.len();
    if n == 0 {
        return Err(Error::InvalidArgument("regression on zero rows".into()));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "regressor has {} rows, response has {n}",
            c.len()
        )));
    }
    let y_mean = mean(y);
    if p == 0 {
        let residual_sd = sd_about(y, y_mean);
        return Ok(OlsFit {
            intercept: y_mean,
            coefficients: vec![],
            residual_sd,
            std_errors: vec![],
            ridge,
        });
    }
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let design = DMatrix::from_fn(n, p, |r, c| columns[c][r] - means[c]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = design.transpose() * &design;
    for k in 0..p {
        gram[(k, k)] += ridge;
    }
    let chol = cholesky(gram)?;
    let rhs = design.transpose() * &yc;
    let w = chol.solve(&rhs);
    let intercept = y_mean - w.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>();
    let resid = &yc - &design * &w;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let residual_sd = if n > 1 { (rss / (n - 1) as f64).sqrt() } else { 0.0 };
    let dof = n as f64 - p as f64 - 1.0;
    let sigma2 = if dof > 0.0 { rss / dof } else { f64::NAN };
    let inv = chol.inverse();
    let std_errors = (0..p).map(|k| (sigma2 * inv[(k, k)]).sqrt()).collect();
    Ok(OlsFit {
        intercept,
        coefficients: w.iter().copied().collect(),
        residual_sd,
        std_errors,
        ridge,
    })
}

/// OLS that retries with [`RIDGE_FALLBACK`] when the design is singular.
pub fn ols_with_fallback(columns: &[&[f64]], y: &[f64]) -> Result<OlsFit> {
    match ols(columns, y, 0.0) {
        Err(Error::Singular(_)) => ols(columns, y, RIDGE_FALLBACK),
        other => other,
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n-1 divisor); zero for fewer than two values.
pub fn sd(v: &[f64]) -> f64 {
    sd_about(v, mean(v))
}

fn sd_about(v: &[f64], m: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let fit = ols(&[&x], &y, 0.0).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.residual_sd < 1e-12);
    }

    #[test]
    fn collinear_design_falls_back_to_ridge() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x2 = [2.0, 4.0, 6.0, 8.0, 10.0];
        let y = [1.0, 2.0, 3.0, 4.0, 5.5];
        assert!(matches!(ols(&[&x, &x2], &y, 0.0), Err(Error::Singular(_))));
        let fit = ols_with_fallback(&[&x, &x2], &y).unwrap();
        assert_eq!(fit.ridge, RIDGE_FALLBACK);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn constant_regressor_is_singular() {
        let x = [3.0, 3.0, 3.0];
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(ols(&[&x], &y, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn sample_sd() {
        assert!((sd(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(sd(&[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(sd(&[5.0]), 0.0);
    }
}
