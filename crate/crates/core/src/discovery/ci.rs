//! Conditional-independence tests.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::graph::Dag;
use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::linalg;

const PCORR_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    pub pair: (usize, usize),
    pub conditioning_set: Vec<usize>,
    pub partial_correlation: f64,
    pub statistic: f64,
    pub independent: bool,
    /// The conditioning submatrix was singular; the pair is treated as dependent.
    pub degenerate: bool,
}

pub trait CiTest: Sync {
    fn n_nodes(&self) -> usize;
    fn test(&self, i: usize, j: usize, z: &[usize]) -> CiTestResult;
}

/// Pearson correlation matrix over all columns. Constant columns are
/// uncorrelated with everything else.
pub fn correlation_matrix(table: &DataTable) -> DMatrix<f64> {
    let cols = table.columns();
    let k = cols.len();
    let n = table.row_count();
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = linalg::mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut r = DMatrix::identity(k, k);
    for a in 0..k {
        for b in a + 1..k {
            let v = if norms[a] > 0.0 && norms[b] > 0.0 && n > 1 {
                let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
                (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    r
}

/// Partial correlation of `i` and `j` given `z`, from a correlation matrix.
/// Returns `None` when the conditioning submatrix is singular.
pub fn partial_correlation_from(corr: &DMatrix<f64>, i: usize, j: usize, z: &[usize]) -> Option<f64> {
    if z.is_empty() {
        return Some(corr[(i, j)].clamp(-PCORR_CLAMP, PCORR_CLAMP));
    }
    let idx: Vec<usize> = [i, j].iter().chain(z).copied().collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| corr[(idx[a], idx[b])]);
    let chol = linalg::cholesky(sub).ok()?;
    let p = chol.inverse();
    let r = -p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt();
    r.is_finite().then(|| r.clamp(-PCORR_CLAMP, PCORR_CLAMP))
}

/// Correlation of the residuals of `i` and `j` after projection onto `z`.
pub fn partial_correlation(table: &DataTable, i: usize, j: usize, z: &[usize]) -> Result<f64> {
    if i == j || z.contains(&i) || z.contains(&j) {
        return Err(Error::InvalidArgument("pair must be distinct and outside the conditioning set".into()));
    }
    if z.len() + 4 > table.row_count() {
        return Err(Error::InvalidArgument(format!(
            "conditioning set of size {} needs more than {} rows",
            z.len(),
            table.row_count()
        )));
    }
    let corr = correlation_matrix(table);
    partial_correlation_from(&corr, i, j, z)
        .ok_or_else(|| Error::Singular("conditioning submatrix is singular".into()))
}

/// Two-sided critical value `Φ⁻¹(1 − α/2)`.
pub fn critical_value(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

pub fn fisher_z_statistic(pcorr: f64, n: usize, z_size: usize) -> Result<f64> {
    if n < z_size + 4 {
        return Err(Error::InvalidArgument(format!(
            "fisher z needs n - |Z| - 3 >= 1 (n = {n}, |Z| = {z_size})"
        )));
    }
    let r = pcorr.clamp(-PCORR_CLAMP, PCORR_CLAMP);
    Ok(((n - z_size - 3) as f64).sqrt() * r.atanh())
}

pub fn fisher_z_test(pcorr: f64, n: usize, z_size: usize, alpha: f64) -> Result<CiTestResult> {
    let statistic = fisher_z_statistic(pcorr, n, z_size)?;
    Ok(CiTestResult {
        pair: (0, 0),
        conditioning_set: Vec::new(),
        partial_correlation: pcorr,
        statistic,
        independent: statistic.abs() <= critical_value(alpha),
        degenerate: false,
    })
}

/// Gaussian test on partial correlations.
#[derive(Debug, Clone)]
pub struct FisherZ {
    corr: DMatrix<f64>,
    n: usize,
    critical: f64,
}

impl FisherZ {
    pub fn new(table: &DataTable, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} must lie in (0, 1)")));
        }
        Ok(Self {
            corr: correlation_matrix(table),
            n: table.row_count(),
            critical: critical_value(alpha),
        })
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }
}

impl CiTest for FisherZ {
    fn n_nodes(&self) -> usize {
        self.corr.nrows()
    }

    fn test(&self, i: usize, j: usize, z: &[usize]) -> CiTestResult {
        let pair = (i, j);
        let conditioning_set = z.to_vec();
        match partial_correlation_from(&self.corr, i, j, z) {
            Some(r) => {
                let statistic = fisher_z_statistic(r, self.n, z.len()).unwrap_or(f64::INFINITY);
                CiTestResult {
                    pair,
                    conditioning_set,
                    partial_correlation: r,
                    statistic,
                    independent: statistic.abs() <= self.critical,
                    degenerate: false,
                }
            }
            None => CiTestResult {
                pair,
                conditioning_set,
                partial_correlation: f64::NAN,
                statistic: f64::INFINITY,
                independent: false,
                degenerate: true,
            },
        }
    }
}

/// Perfect test: independence iff d-separation in a known DAG.
#[derive(Debug, Clone)]
pub struct DSeparationOracle<'a> {
    pub dag: &'a Dag,
}

impl CiTest for DSeparationOracle<'_> {
    fn n_nodes(&self) -> usize {
        self.dag.n()
    }

    fn test(&self, i: usize, j: usize, z: &[usize]) -> CiTestResult {
        let independent = self.dag.d_separated(i, j, z);
        CiTestResult {
            pair: (i, j),
            conditioning_set: z.to_vec(),
            partial_correlation: if independent { 0.0 } else { 1.0 },
            statistic: if independent { 0.0 } else { f64::INFINITY },
            independent,
            degenerate: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_z_values() {
        let r = fisher_z_test(0.0, 50, 0, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.independent);
        let r = fisher_z_test(0.5, 103, 0, 0.05).unwrap();
        assert!((r.statistic - 5.493061443340549).abs() < 1e-9);
        assert!(!r.independent);
        let r = fisher_z_test(0.1, 28, 0, 0.05).unwrap();
        assert!((r.statistic - 0.5016767).abs() < 1e-6);
        assert!(r.independent);
        assert!(fisher_z_test(0.1, 4, 1, 0.05).is_err());
    }

    #[test]
    fn critical_value_matches_table() {
        assert!((critical_value(0.05) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn empty_conditioning_is_pearson() {
        let t = DataTable::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0, 3.0, 4.0, 6.0], vec![2.0, 1.0, 4.0, 3.0, 7.0]],
            1,
        )
        .unwrap();
        let r = partial_correlation(&t, 0, 1, &[]).unwrap();
        let (x, y) = (t.column(0), t.column(1));
        let (mx, my) = (linalg::mean(x), linalg::mean(y));
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        assert!((r - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
    }
}
