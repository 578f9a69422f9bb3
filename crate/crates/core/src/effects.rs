//! Local IDA edge effects, path products and causal weight factors.
//!
//! Every edge of a consistent DAG extension receives a multiset of possible
//! effects (one adjusted regression per admissible parent set of its source in
//! the CPDAG) summarized to a single weight. A feature's total effect is the sum
//! over directed simple paths to the target of the product of edge weights, and
//! the causal weight factors are the normalized absolute total effects.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::discovery::{consistent_dag_extension, Cpdag, Dag, GraphJson};
use crate::error::{Error, Result};
use crate::linalg;

/// How an edge's effect multiset becomes a single weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSummary {
    #[default]
    Mean,
    /// The entry of smallest magnitude (the conservative classic IDA bound).
    MinAbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedAdjustment {
    pub adjustment_set: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectMultiset {
    pub from: usize,
    pub to: usize,
    pub effects: Vec<f64>,
    pub skipped: Vec<SkippedAdjustment>,
}

/// Possible effects of `j` on its neighbour `k`, one per admissible parent set.
///
/// A subset `S` of the undirected neighbours of `j` is admissible when making
/// `S` parents of `j` creates no new collider: `S` is a clique and every member
/// is adjacent to every current parent of `j`. If `k` itself becomes a parent,
/// the effect is 0.
pub fn ida_effect_multiset(table: &DataTable, cpdag: &Cpdag, j: usize, k: usize) -> Result<EffectMultiset> {
    if j == k || !cpdag.adjacent(j, k) {
        return Err(Error::Effects(format!(
            "'{}' and '{}' are not adjacent",
            cpdag.names()[j],
            cpdag.names()[k.min(cpdag.n() - 1)]
        )));
    }
    let parents = cpdag.parents(j);
    let siblings = cpdag.undirected_neighbors(j);
    if siblings.len() > 20 {
        return Err(Error::Effects(format!("too many undirected neighbours of '{}'", cpdag.names()[j])));
    }
    let mut effects = Vec::new();
    let mut skipped = Vec::new();
    for mask in 0u32..(1 << siblings.len()) {
        let chosen: Vec<usize> = (0..siblings.len())
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| siblings[b])
            .collect();
        let clique = chosen
            .iter()
            .enumerate()
            .all(|(x, &a)| chosen[x + 1..].iter().all(|&b| cpdag.adjacent(a, b)));
        let shielded = chosen.iter().all(|&s| parents.iter().all(|&p| cpdag.adjacent(s, p)));
        if !clique || !shielded {
            continue;
        }
        let mut adjustment: Vec<usize> = parents.iter().chain(&chosen).copied().collect();
        adjustment.sort_unstable();
        if adjustment.contains(&k) {
            effects.push(0.0);
            continue;
        }
        let mut cols: Vec<&[f64]> = vec![table.column(j)];
        cols.extend(adjustment.iter().map(|&a| table.column(a)));
        match linalg::ols(&cols, table.column(k), 0.0) {
            Ok(fit) => effects.push(fit.coefficients[0]),
            Err(e) => skipped.push(SkippedAdjustment {
                adjustment_set: adjustment,
                reason: e.to_string(),
            }),
        }
    }
    Ok(EffectMultiset {
        from: j,
        to: k,
        effects,
        skipped,
    })
}

pub fn edge_weight(effects: &[f64], summary: EdgeSummary) -> Result<f64> {
    if effects.is_empty() {
        return Err(Error::Effects("empty effect multiset".into()));
    }
    Ok(match summary {
        EdgeSummary::Mean => effects.iter().sum::<f64>() / effects.len() as f64,
        EdgeSummary::MinAbs => effects
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .expect("nonempty"),
    })
}

/// A directed simple path as its sequence of edges.
pub type Path = Vec<(usize, usize)>;

/// All directed simple paths `source ⇝ target`, depth first with children in node order.
pub fn enumerate_paths(dag: &Dag, source: usize, target: usize) -> Vec<Path> {
    fn walk(dag: &Dag, v: usize, target: usize, stack: &mut Path, out: &mut Vec<Path>) {
        if v == target {
            out.push(stack.clone());
            return;
        }
        for &c in dag.children(v) {
            stack.push((v, c));
            walk(dag, c, target, stack, out);
            stack.pop();
        }
    }
    let mut out = Vec::new();
    if source != target {
        walk(dag, source, target, &mut Vec::new(), &mut out);
    }
    out
}

/// Edge weight lookup used by [`total_effect`].
pub trait WeightLookup {
    fn weight(&self, from: usize, to: usize) -> Option<f64>;
}

impl WeightLookup for std::collections::BTreeMap<(usize, usize), f64> {
    fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.get(&(from, to)).copied()
    }
}

/// Σ over paths of the product of edge weights along each path.
pub fn total_effect<W: WeightLookup + ?Sized>(weights: &W, paths: &[Path]) -> Result<f64> {
    let mut total = 0.0;
    for path in paths {
        let mut product = 1.0;
        for &(a, b) in path {
            product *= weights
                .weight(a, b)
                .ok_or_else(|| Error::Effects(format!("no weight for edge ({a}, {b})")))?;
        }
        total += product;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalWeights {
    pub gamma: Vec<f64>,
    /// Every total effect is zero; all factors are zero.
    pub no_causal_signal: bool,
}

/// `γ_i = |W_i| / Σ_j |W_j|`.
pub fn causal_weight_factors(total_effects: &[f64]) -> CausalWeights {
    let denom: f64 = total_effects.iter().map(|w| w.abs()).sum();
    if denom > 0.0 && denom.is_finite() {
        CausalWeights {
            gamma: total_effects.iter().map(|w| w.abs() / denom).collect(),
            no_causal_signal: false,
        }
    } else {
        CausalWeights {
            gamma: vec![0.0; total_effects.len()],
            no_causal_signal: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectsConfig {
    #[serde(default)]
    pub summary: EdgeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEffect {
    pub from: usize,
    pub to: usize,
    pub multiset: Vec<f64>,
    pub weight: f64,
    pub skipped: Vec<SkippedAdjustment>,
}

/// Everything downstream attribution needs from the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalEffects {
    pub dag: Dag,
    pub edges: Vec<EdgeEffect>,
    /// Column index of each feature, in feature order.
    pub feature_columns: Vec<usize>,
    pub target_column: usize,
    pub paths: Vec<Vec<Path>>,
    pub total_effects: Vec<f64>,
    pub weights: CausalWeights,
}

impl WeightLookup for [EdgeEffect] {
    fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.iter().find(|e| e.from == from && e.to == to).map(|e| e.weight)
    }
}

impl CausalEffects {
    pub fn gamma(&self) -> &[f64] {
        &self.weights.gamma
    }

    pub fn to_json(&self) -> serde_json::Value {
        let names = self.dag.names();
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "from": names[e.from],
                    "to": names[e.to],
                    "multiset": e.multiset,
                    "weight": e.weight,
                })
            })
            .collect();
        let mut total = serde_json::Map::new();
        let mut gamma = serde_json::Map::new();
        for (k, &c) in self.feature_columns.iter().enumerate() {
            total.insert(names[c].clone(), self.total_effects[k].into());
            gamma.insert(names[c].clone(), self.weights.gamma[k].into());
        }
        serde_json::json!({
            "edges": edges,
            "total_effects": total,
            "gamma": gamma,
            "no_causal_signal": self.weights.no_causal_signal,
            "dag_extension": self.dag.to_cpdag().to_json(),
        })
    }

    pub fn dag_json(&self) -> GraphJson {
        self.dag.to_cpdag().to_json()
    }
}

/// Extends `cpdag`, estimates every extension edge, and sums path products per feature.
pub fn estimate_effects(table: &DataTable, cpdag: &Cpdag, config: EffectsConfig) -> Result<CausalEffects> {
    if cpdag.names() != table.column_names() {
        return Err(Error::Effects("graph nodes do not match the table columns".into()));
    }
    let dag = consistent_dag_extension(cpdag)?;
    estimate_effects_on(table, cpdag, dag, config)
}

/// As [`estimate_effects`] with an explicit extension of `cpdag`.
pub fn estimate_effects_on(table: &DataTable, cpdag: &Cpdag, dag: Dag, config: EffectsConfig) -> Result<CausalEffects> {
    let edges: Vec<EdgeEffect> = dag
        .edges()
        .par_iter()
        .map(|&(j, k)| {
            let ms = ida_effect_multiset(table, cpdag, j, k)?;
            let weight = edge_weight(&ms.effects, config.summary).map_err(|_| {
                Error::Effects(format!(
                    "no estimable adjustment set for edge {} -> {}",
                    dag.names()[j],
                    dag.names()[k]
                ))
            })?;
            Ok(EdgeEffect {
                from: j,
                to: k,
                multiset: ms.effects,
                weight,
                skipped: ms.skipped,
            })
        })
        .collect::<Result<_>>()?;
    let target = table.target_index();
    let feature_columns = table.feature_indices();
    let paths: Vec<Vec<Path>> = feature_columns
        .iter()
        .map(|&c| enumerate_paths(&dag, c, target))
        .collect();
    let total_effects = paths
        .iter()
        .map(|p| total_effect(edges.as_slice(), p))
        .collect::<Result<Vec<_>>>()?;
    let weights = causal_weight_factors(&total_effects);
    Ok(CausalEffects {
        dag,
        edges,
        feature_columns,
        target_column: target,
        paths,
        total_effects,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn weights_and_gamma() {
        assert_eq!(edge_weight(&[2.0], EdgeSummary::Mean).unwrap(), 2.0);
        assert_eq!(edge_weight(&[1.0, 3.0], EdgeSummary::Mean).unwrap(), 2.0);
        assert_eq!(edge_weight(&[-1.0, 0.5, 3.0], EdgeSummary::MinAbs).unwrap(), 0.5);
        assert!(edge_weight(&[], EdgeSummary::Mean).is_err());

        assert_eq!(causal_weight_factors(&[2.0, 2.0]).gamma, vec![0.5, 0.5]);
        let g = causal_weight_factors(&[2.0, 1.2, 0.0]);
        assert!((g.gamma[0] - 0.625).abs() < 1e-15 && (g.gamma[1] - 0.375).abs() < 1e-15);
        assert_eq!(g.gamma[2], 0.0);
        let z = causal_weight_factors(&[0.0, 0.0]);
        assert!(z.no_causal_signal);
        assert_eq!(z.gamma, vec![0.0, 0.0]);
        assert_eq!(causal_weight_factors(&[-3.0, 1.0]).gamma, vec![0.75, 0.25]);
    }

    #[test]
    fn diamond_paths_and_totals() {
        // a→b→d, a→c→d
        let dag = Dag::new(names(4), &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let paths = enumerate_paths(&dag, 0, 3);
        assert_eq!(paths, vec![vec![(0, 1), (1, 3)], vec![(0, 2), (2, 3)]]);
        let w = BTreeMap::from([((0, 1), 2.0), ((1, 3), 3.0), ((0, 2), -1.0), ((2, 3), 0.5)]);
        assert_eq!(total_effect(&w, &paths).unwrap(), 5.5);
        assert!(enumerate_paths(&dag, 3, 0).is_empty());
        assert_eq!(total_effect(&w, &[]).unwrap(), 0.0);
        let missing = BTreeMap::from([((0, 1), 2.0)]);
        assert!(total_effect(&missing, &paths).is_err());
    }
}
