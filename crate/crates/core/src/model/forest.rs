//! Bagged CART trees. One variance-reduction criterion serves both tasks: on 0/1
//! labels it is proportional to Gini impurity, and leaf means are class-1 fractions.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, PredictionMode, Predictor};
use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::rng::task_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means ⌈√p⌉.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 5,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Node array; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, rows: &DMatrix<f64>, r: usize) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if rows[(r, feature)] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    #[serde(skip, default = "regression")]
    pub(crate) mode: PredictionMode,
}

fn regression() -> PredictionMode {
    PredictionMode::Regression
}

impl RandomForest {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Model("forest has no trees".into()));
        }
        for tree in &self.trees {
            let n = tree.nodes.len();
            for (i, node) in tree.nodes.iter().enumerate() {
                if let Node::Split {
                    feature, left, right, ..
                } = *node
                {
                    // children strictly after parents rules out cycles
                    if feature >= self.n_features || left <= i || right <= i || left >= n || right >= n {
                        return Err(Error::Model(format!("malformed tree node {i}")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Predictor for RandomForest {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn prediction_mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(rows, self.n_features)?;
        let k = self.trees.len() as f64;
        Ok((0..rows.nrows())
            .map(|r| self.trees.iter().map(|t| t.predict(rows, r)).sum::<f64>() / k)
            .collect())
    }
}

/// Trains a forest; `mode` decides whether outputs are read as probabilities.
pub fn train_random_forest(train: &DataTable, params: ForestParams, mode: PredictionMode) -> Result<RandomForest> {
    let n = train.row_count();
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::InvalidArgument("forest needs n_trees >= 1 and min_leaf >= 1".into()));
    }
    if n == 0 || n < params.min_leaf {
        return Err(Error::InvalidArgument(format!(
            "{n} rows cannot fill a leaf of min_leaf = {}",
            params.min_leaf
        )));
    }
    let y = train.target();
    if mode == PredictionMode::Probability && y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("probability forests need targets in [0, 1]".into()));
    }
    let features = train.feature_indices();
    let p = features.len();
    let x: Vec<&[f64]> = features.iter().map(|&c| train.column(c)).collect();
    let mtry = params
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p.max(1));
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = task_rng(params.seed, &[t as u64]);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder {
                x: &x,
                y,
                params: &params,
                mtry,
                nodes: Vec::new(),
            }
            .build(sample, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        n_features: p,
        params,
        trees,
        mode,
    })
}

struct TreeBuilder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn build<R: Rng>(mut self, sample: Vec<usize>, rng: &mut R) -> Tree {
        self.grow(sample, 0, rng);
        Tree { nodes: self.nodes }
    }

    fn grow<R: Rng>(&mut self, idx: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value: mean });
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(&idx, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[split.feature][i] <= split.threshold);
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Tries `mtry` random features; if none admits a valid split, keeps trying the rest.
    fn best_split<R: Rng>(&self, idx: &[usize], rng: &mut R) -> Option<BestSplit> {
        let mut order: Vec<usize> = (0..self.x.len()).collect();
        order.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(f, idx) {
                if best.as_ref().is_none_or(|b| s.gain > b.gain) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_split_on(&self, f: usize, idx: &[usize]) -> Option<BestSplit> {
        let col = self.x[f];
        let mut sorted: Vec<usize> = idx.to_vec();
        sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        let n = sorted.len();
        let total: f64 = sorted.iter().map(|&i| self.y[i]).sum();
        let min_leaf = self.params.min_leaf;
        let mut left_sum = 0.0;
        let mut best: Option<BestSplit> = None;
        for k in 0..n - 1 {
            left_sum += self.y[sorted[k]];
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (a, b) = (col[sorted[k]], col[sorted[k + 1]]);
            if a == b {
                continue;
            }
            // SSE reduction up to a constant: Σ_L² / n_L + Σ_R² / n_R
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - total * total / n as f64;
            if best.as_ref().is_none_or(|s| gain > s.gain) {
                let mut threshold = 0.5 * (a + b);
                if threshold >= b {
                    threshold = a;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
        best.filter(|b| b.gain > 1e-12 * (1.0 + total.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<Vec<f64>>) -> DataTable {
        let names = (0..cols.len()).map(|i| format!("c{i}")).collect();
        let t = cols.len() - 1;
        DataTable::new(names, cols, t).unwrap()
    }

    #[test]
    fn constant_target() {
        let t = table(vec![(0..20).map(f64::from).collect(), vec![3.5; 20]]);
        let f = train_random_forest(&t, ForestParams::default(), PredictionMode::Regression).unwrap();
        let preds = f.predict_batch(&t.feature_matrix()).unwrap();
        assert!(preds.iter().all(|&p| p == 3.5));
    }

    #[test]
    fn stump_collapse_is_global_mean() {
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let t = table(vec![(0..10).map(f64::from).collect(), y.clone()]);
        let params = ForestParams {
            n_trees: 1,
            min_leaf: 10,
            bootstrap: false,
            ..Default::default()
        };
        let f = train_random_forest(&t, params, PredictionMode::Regression).unwrap();
        assert_eq!(f.trees[0].nodes.len(), 1);
        let mean = y.iter().sum::<f64>() / 10.0;
        assert_eq!(f.predict_row(&[3.0]).unwrap(), mean);
        assert!(train_random_forest(&t, ForestParams { min_leaf: 11, ..params }, PredictionMode::Regression).is_err());
    }

    #[test]
    fn single_unbagged_tree_memorizes() {
        let x1: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64).collect();
        let x2: Vec<f64> = (0..30).map(|i| ((i * 11) % 13) as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let t = table(vec![x1, x2, y.clone()]);
        let params = ForestParams {
            n_trees: 1,
            max_depth: usize::MAX,
            min_leaf: 1,
            bootstrap: false,
            ..Default::default()
        };
        let f = train_random_forest(&t, params, PredictionMode::Regression).unwrap();
        let preds = f.predict_batch(&t.feature_matrix()).unwrap();
        for (p, y) in preds.iter().zip(&y) {
            assert_eq!(p, y);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.3 + (v * 1.7).sin()).collect();
        let t = table(vec![x, y]);
        let a = train_random_forest(&t, ForestParams::default(), PredictionMode::Regression).unwrap();
        let b = train_random_forest(&t, ForestParams::default(), PredictionMode::Regression).unwrap();
        assert_eq!(a, b);
    }
}
