//! Out-of-coalition samplers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::discovery::Dag;
use crate::error::{Error, Result};
use crate::linalg;

/// Fitted conditional model of one graph node given its parents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeModel {
    /// Parentless node: resampled from its training column.
    Root { pool: Vec<f64> },
    Linear {
        parents: Vec<usize>,
        intercept: f64,
        coefficients: Vec<f64>,
        sigma: f64,
        ridge: f64,
    },
}

/// Per-node regressions on the parents of a DAG, indexed by table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCache {
    pub nodes: Vec<NodeModel>,
    /// Nodes whose parent matrix needed the ridge fallback.
    pub ridge_fallbacks: Vec<usize>,
}

pub fn fit_node_regressions(train: &DataTable, dag: &Dag) -> Result<RegressionCache> {
    if dag.names() != train.column_names() {
        return Err(Error::Attribution("graph nodes do not match the table columns".into()));
    }
    let mut nodes = Vec::with_capacity(dag.n());
    let mut ridge_fallbacks = Vec::new();
    for v in 0..dag.n() {
        let parents = dag.parents(v).to_vec();
        if parents.is_empty() {
            nodes.push(NodeModel::Root {
                pool: train.column(v).to_vec(),
            });
            continue;
        }
        let cols: Vec<&[f64]> = parents.iter().map(|&p| train.column(p)).collect();
        let fit = linalg::ols_with_fallback(&cols, train.column(v))?;
        if fit.ridge > 0.0 {
            log::warn!("regression for '{}' needed a ridge penalty", dag.names()[v]);
            ridge_fallbacks.push(v);
        }
        nodes.push(NodeModel::Linear {
            parents,
            intercept: fit.intercept,
            coefficients: fit.coefficients,
            sigma: fit.residual_sd,
            ridge: fit.ridge,
        });
    }
    Ok(RegressionCache { nodes, ridge_fallbacks })
}

/// Randomness for `m` out-of-coalition draws, fixed before any coalition is
/// chosen so that every coalition of one task sees the same draws.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    width: usize,
    picks: Vec<usize>,
    normals: Vec<f64>,
}

impl NoiseTable {
    pub fn samples(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.picks.len() / self.width
        }
    }
}

/// A way to complete a partially observed feature row.
pub trait CoalitionSampler: Sync {
    fn n_features(&self) -> usize;

    fn draw_noise(&self, samples: usize, rng: &mut impl Rng) -> NoiseTable;

    /// Writes one completed row per noise sample into `out` (row-major, samples × n_features).
    fn fill(&self, x: &[f64], coalition: &[bool], noise: &NoiseTable, out: &mut Vec<f64>);

    fn rows(&self, x: &[f64], coalition: &[bool], noise: &NoiseTable) -> DMatrix<f64> {
        let mut buf = Vec::with_capacity(noise.samples() * self.n_features());
        self.fill(x, coalition, noise, &mut buf);
        DMatrix::from_row_slice(noise.samples(), self.n_features(), &buf)
    }
}

/// Samples `do(X_S = x_S)` ancestrally through the fitted regressions.
#[derive(Debug, Clone)]
pub struct CausalSampler {
    dag: Dag,
    cache: RegressionCache,
    order: Vec<usize>,
    feature_columns: Vec<usize>,
    feature_of_column: Vec<Option<usize>>,
}

impl CausalSampler {
    pub fn new(train: &DataTable, dag: Dag) -> Result<Self> {
        let cache = fit_node_regressions(train, &dag)?;
        Self::from_cache(dag, cache, train.feature_indices())
    }

    pub fn from_cache(dag: Dag, cache: RegressionCache, feature_columns: Vec<usize>) -> Result<Self> {
        if cache.nodes.len() != dag.n() {
            return Err(Error::Attribution("regression cache does not cover the graph".into()));
        }
        for (v, node) in cache.nodes.iter().enumerate() {
            match node {
                NodeModel::Root { pool } if pool.is_empty() || !dag.parents(v).is_empty() => {
                    return Err(Error::Attribution(format!("cache entry for node {v} is inconsistent")))
                }
                NodeModel::Linear { parents, coefficients, sigma, .. }
                    if parents.as_slice() != dag.parents(v) || coefficients.len() != parents.len() || !(*sigma >= 0.0) =>
                {
                    return Err(Error::Attribution(format!("cache entry for node {v} is inconsistent")))
                }
                _ => {}
            }
        }
        let mut feature_of_column = vec![None; dag.n()];
        for (k, &c) in feature_columns.iter().enumerate() {
            if c >= dag.n() {
                return Err(Error::Attribution(format!("feature column {c} outside the graph")));
            }
            feature_of_column[c] = Some(k);
        }
        let order = dag.topological_order();
        Ok(Self {
            dag,
            cache,
            order,
            feature_columns,
            feature_of_column,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cache(&self) -> &RegressionCache {
        &self.cache
    }

    pub fn feature_columns(&self) -> &[usize] {
        &self.feature_columns
    }
}

impl CoalitionSampler for CausalSampler {
    fn n_features(&self) -> usize {
        self.feature_columns.len()
    }

    fn draw_noise(&self, samples: usize, rng: &mut impl Rng) -> NoiseTable {
        let width = self.dag.n();
        let mut picks = vec![0; samples * width];
        let mut normals = vec![0.0; samples * width];
        for m in 0..samples {
            for &v in &self.order {
                match &self.cache.nodes[v] {
                    NodeModel::Root { pool } => picks[m * width + v] = rng.random_range(0..pool.len()),
                    NodeModel::Linear { .. } => normals[m * width + v] = rng.sample(StandardNormal),
                }
            }
        }
        NoiseTable { width, picks, normals }
    }

    fn fill(&self, x: &[f64], coalition: &[bool], noise: &NoiseTable, out: &mut Vec<f64>) {
        let width = self.dag.n();
        let mut values = vec![0.0; width];
        for m in 0..noise.samples() {
            for &v in &self.order {
                values[v] = match self.feature_of_column[v] {
                    Some(k) if coalition[k] => x[k],
                    _ => match &self.cache.nodes[v] {
                        NodeModel::Root { pool } => pool[noise.picks[m * width + v]],
                        NodeModel::Linear {
                            parents,
                            intercept,
                            coefficients,
                            sigma,
                            ..
                        } => {
                            let mu = intercept
                                + parents
                                    .iter()
                                    .zip(coefficients)
                                    .map(|(&p, b)| b * values[p])
                                    .sum::<f64>();
                            mu + sigma * noise.normals[m * width + v]
                        }
                    },
                };
            }
            out.extend(self.feature_columns.iter().map(|&c| values[c]));
        }
    }
}

/// Draws each out-of-coalition feature independently from its training column.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    columns: Vec<Vec<f64>>,
}

impl MarginalSampler {
    pub fn new(train: &DataTable) -> Result<Self> {
        if train.row_count() == 0 {
            return Err(Error::Attribution("empty training table".into()));
        }
        Ok(Self {
            columns: train.feature_indices().iter().map(|&c| train.column(c).to_vec()).collect(),
        })
    }
}

impl CoalitionSampler for MarginalSampler {
    fn n_features(&self) -> usize {
        self.columns.len()
    }

    fn draw_noise(&self, samples: usize, rng: &mut impl Rng) -> NoiseTable {
        let width = self.columns.len();
        let picks = (0..samples * width)
            .map(|k| rng.random_range(0..self.columns[k % width].len()))
            .collect();
        NoiseTable {
            width,
            picks,
            normals: Vec::new(),
        }
    }

    fn fill(&self, x: &[f64], coalition: &[bool], noise: &NoiseTable, out: &mut Vec<f64>) {
        let width = self.columns.len();
        for m in 0..noise.samples() {
            for k in 0..width {
                out.push(if coalition[k] {
                    x[k]
                } else {
                    self.columns[k][noise.picks[m * width + k]]
                });
            }
        }
    }
}

/// Completes the row from whole background rows (joint, not per-feature, resampling).
#[derive(Debug, Clone)]
pub struct BackgroundSampler {
    rows: Vec<Vec<f64>>,
}

impl BackgroundSampler {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or_else(|| Error::Attribution("empty background".into()))?;
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Attribution("background rows differ in width".into()));
        }
        Ok(Self { rows })
    }

    pub fn from_table(train: &DataTable) -> Result<Self> {
        Self::new((0..train.row_count()).map(|r| train.feature_row(r)).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// A table visiting every background row once, in order.
    pub fn all_rows(&self) -> NoiseTable {
        NoiseTable {
            width: 1,
            picks: (0..self.rows.len()).collect(),
            normals: Vec::new(),
        }
    }
}

impl CoalitionSampler for BackgroundSampler {
    fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    fn draw_noise(&self, samples: usize, rng: &mut impl Rng) -> NoiseTable {
        NoiseTable {
            width: 1,
            picks: (0..samples).map(|_| rng.random_range(0..self.rows.len())).collect(),
            normals: Vec::new(),
        }
    }

    fn fill(&self, x: &[f64], coalition: &[bool], noise: &NoiseTable, out: &mut Vec<f64>) {
        for &r in &noise.picks {
            let b = &self.rows[r];
            out.extend((0..b.len()).map(|k| if coalition[k] { x[k] } else { b[k] }));
        }
    }
}
