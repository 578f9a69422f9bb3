//! Skeleton search, collider orientation, Meek rules and DAG extension.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ci::{CiTest, FisherZ};
use super::graph::{Cpdag, Dag};
use crate::data::DataTable;
use crate::error::{Error, Result};

/// Separating sets keyed by `(min, max)` of the removed pair.
pub type SepsetTable = BTreeMap<(usize, usize), Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationConflict {
    /// The collider `(a, c, b)` whose arm could not be oriented.
    pub triple: (usize, usize, usize),
    /// The arm `from → to` that was requested.
    pub requested: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    pub graph: Cpdag,
    pub sepsets: SepsetTable,
    pub tests_run: usize,
}

#[derive(Debug, Clone)]
pub struct PcResult {
    pub cpdag: Cpdag,
    pub sepsets: SepsetTable,
    pub conflicts: Vec<OrientationConflict>,
    pub tests_run: usize,
}

/// Default conditioning-set cap: `min(n_features − 2, 3)`, floored at zero.
pub fn default_max_cond_size(n_features: usize) -> usize {
    n_features.saturating_sub(2).min(3)
}

/// Calls `f` on each `k`-subset of `items` in lexicographic order until it returns true.
fn first_subset<F: FnMut(&[usize]) -> bool>(items: &[usize], k: usize, mut f: F) -> Option<Vec<usize>> {
    let n = items.len();
    if k > n {
        return None;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let subset: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
        if f(&subset) {
            return Some(subset);
        }
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == pos - 1 + n - k {
            pos -= 1;
        }
        if pos == 0 {
            return None;
        }
        idx[pos - 1] += 1;
        for q in pos..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Order-independent ("stable") PC skeleton phase.
///
/// At each level ℓ the adjacency sets are frozen before testing, every adjacent
/// pair is tested against ℓ-subsets of `adj(i)\{j}` and then `adj(j)\{i}`, and
/// removals are applied together at the end of the level.
pub fn pc_skeleton(test: &dyn CiTest, names: Vec<String>, max_cond_size: usize) -> Skeleton {
    let n = test.n_nodes();
    assert_eq!(names.len(), n, "names must match the test's node count");
    let mut graph = Cpdag::complete(names);
    let mut sepsets = SepsetTable::new();
    let mut tests_run = 0;
    for level in 0..=max_cond_size {
        let adj: Vec<Vec<usize>> = (0..n).map(|i| graph.adjacents(i)).collect();
        let pairs = graph.skeleton_pairs();
        let enough = pairs
            .iter()
            .any(|&(i, j)| adj[i].len() > level || adj[j].len() > level);
        if !enough {
            break;
        }
        let outcomes: Vec<(usize, Option<Vec<usize>>)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut count = 0;
                let mut found = None;
                for (a, b) in [(i, j), (j, i)] {
                    let cands: Vec<usize> = adj[a].iter().copied().filter(|&v| v != b).collect();
                    found = first_subset(&cands, level, |s| {
                        count += 1;
                        test.test(i, j, s).independent
                    });
                    if found.is_some() {
                        break;
                    }
                }
                (count, found)
            })
            .collect();
        for (&(i, j), (count, found)) in pairs.iter().zip(outcomes) {
            tests_run += count;
            if let Some(s) = found {
                graph.remove_edge(i, j);
                sepsets.insert((i, j), s);
            }
        }
    }
    Skeleton {
        graph,
        sepsets,
        tests_run,
    }
}

/// Orients every unshielded triple `a − c − b` with `c ∉ sepset(a, b)` as `a → c ← b`.
/// An arm already pointing the other way keeps its first orientation and is
/// reported as a conflict.
pub fn orient_v_structures(skeleton: &Cpdag, sepsets: &SepsetTable) -> (Cpdag, Vec<OrientationConflict>) {
    let mut g = skeleton.clone();
    let mut conflicts = Vec::new();
    let n = g.n();
    for a in 0..n {
        for b in a + 1..n {
            if skeleton.adjacent(a, b) {
                continue;
            }
            let sep = sepsets.get(&(a, b)).map(Vec::as_slice).unwrap_or(&[]);
            for c in 0..n {
                if c == a || c == b || !skeleton.adjacent(a, c) || !skeleton.adjacent(b, c) || sep.contains(&c) {
                    continue;
                }
                for arm in [a, b] {
                    if g.is_undirected(arm, c) {
                        g.add_directed(arm, c);
                    } else if g.is_directed(c, arm) {
                        conflicts.push(OrientationConflict {
                            triple: (a, c, b),
                            requested: (arm, c),
                        });
                    }
                }
            }
        }
    }
    (g, conflicts)
}

/// Applies Meek's rules R1–R4 until no rule fires.
pub fn apply_meek_rules(cpdag: &Cpdag) -> Cpdag {
    let mut g = cpdag.clone();
    let n = g.n();
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if a == b || !g.is_undirected(a, b) {
                    continue;
                }
                if meek_r1(&g, a, b) || meek_r2(&g, a, b) || meek_r3(&g, a, b) || meek_r4(&g, a, b) {
                    g.add_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// R1: `c → a − b`, `c` and `b` non-adjacent.
fn meek_r1(g: &Cpdag, a: usize, b: usize) -> bool {
    g.parents(a).into_iter().any(|c| c != b && !g.adjacent(c, b))
}

/// R2: `a → c → b` with `a − b`.
fn meek_r2(g: &Cpdag, a: usize, b: usize) -> bool {
    g.children(a).into_iter().any(|c| g.is_directed(c, b))
}

/// R3: `a − c → b`, `a − d → b`, `c` and `d` non-adjacent.
fn meek_r3(g: &Cpdag, a: usize, b: usize) -> bool {
    let cands: Vec<usize> = g
        .undirected_neighbors(a)
        .into_iter()
        .filter(|&c| c != b && g.is_directed(c, b))
        .collect();
    cands
        .iter()
        .enumerate()
        .any(|(k, &c)| cands[k + 1..].iter().any(|&d| !g.adjacent(c, d)))
}

/// R4: `a − c → d → b` with `a` adjacent to `d` and `c`, `b` non-adjacent.
fn meek_r4(g: &Cpdag, a: usize, b: usize) -> bool {
    g.undirected_neighbors(a).into_iter().any(|c| {
        c != b
            && !g.adjacent(c, b)
            && g
                .children(c)
                .into_iter()
                .any(|d| d != a && g.adjacent(a, d) && g.is_directed(d, b))
    })
}

/// PC: skeleton, colliders, then Meek closure.
pub fn pc_with_test(test: &dyn CiTest, names: Vec<String>, max_cond_size: usize) -> PcResult {
    let skel = pc_skeleton(test, names, max_cond_size);
    let (oriented, conflicts) = orient_v_structures(&skel.graph, &skel.sepsets);
    PcResult {
        cpdag: apply_meek_rules(&oriented),
        sepsets: skel.sepsets,
        conflicts,
        tests_run: skel.tests_run,
    }
}

/// PC with the Fisher-z test over every column of `table` (features and target).
pub fn pc(table: &DataTable, alpha: f64, max_cond_size: usize) -> Result<PcResult> {
    if table.row_count() <= max_cond_size + 3 {
        return Err(Error::Discovery(format!(
            "{} rows cannot support conditioning sets of size {max_cond_size}",
            table.row_count()
        )));
    }
    let test = FisherZ::new(table, alpha)?;
    Ok(pc_with_test(&test, table.column_names().to_vec(), max_cond_size))
}

/// Dor–Tarsi extension: repeatedly removes a sink whose undirected neighbours are
/// adjacent to all its other neighbours, orienting those edges into it. Candidates
/// are taken from the highest index down.
pub fn consistent_dag_extension(cpdag: &Cpdag) -> Result<Dag> {
    let n = cpdag.n();
    let mut alive = vec![true; n];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (i, j) in cpdag.skeleton_pairs() {
        if cpdag.is_directed(i, j) {
            edges.push((i, j));
        } else if cpdag.is_directed(j, i) {
            edges.push((j, i));
        }
    }
    for _ in 0..n {
        let pick = (0..n).rev().find(|&x| {
            alive[x]
                && !(0..n).any(|y| alive[y] && cpdag.is_directed(x, y))
                && {
                    let nbrs: Vec<usize> = (0..n).filter(|&y| alive[y] && cpdag.adjacent(x, y)).collect();
                    nbrs.iter().filter(|&&y| cpdag.is_undirected(x, y)).all(|&y| {
                        nbrs.iter().all(|&z| z == y || cpdag.adjacent(y, z))
                    })
                }
        });
        let Some(x) = pick else {
            return Err(Error::Discovery("CPDAG admits no consistent DAG extension".into()));
        };
        for y in 0..n {
            if alive[y] && y != x && cpdag.is_undirected(x, y) {
                edges.push((y, x));
            }
        }
        alive[x] = false;
    }
    Dag::new(cpdag.names().to_vec(), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::ci::DSeparationOracle;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn subsets_in_lexicographic_order() {
        let mut seen = Vec::new();
        first_subset(&[1, 3, 5, 7], 2, |s| {
            seen.push(s.to_vec());
            false
        });
        assert_eq!(
            seen,
            vec![vec![1, 3], vec![1, 5], vec![1, 7], vec![3, 5], vec![3, 7], vec![5, 7]]
        );
        let mut count = 0;
        first_subset(&[4, 2], 0, |s| {
            assert!(s.is_empty());
            count += 1;
            false
        });
        assert_eq!(count, 1);
        assert!(first_subset(&[1], 2, |_| true).is_none());
    }

    #[test]
    fn oracle_chain_stays_undirected() {
        let dag = Dag::new(names(3), &[(0, 1), (1, 2)]).unwrap();
        let r = pc_with_test(&DSeparationOracle { dag: &dag }, names(3), 3);
        assert_eq!(r.cpdag.skeleton_pairs(), vec![(0, 1), (1, 2)]);
        assert!(r.cpdag.is_undirected(0, 1) && r.cpdag.is_undirected(1, 2));
        assert_eq!(r.sepsets[&(0, 2)], vec![1]);
    }

    #[test]
    fn oracle_collider_is_oriented() {
        let dag = Dag::new(names(3), &[(0, 2), (1, 2)]).unwrap();
        let r = pc_with_test(&DSeparationOracle { dag: &dag }, names(3), 3);
        assert!(r.cpdag.is_directed(0, 2) && r.cpdag.is_directed(1, 2));
        assert!(!r.cpdag.adjacent(0, 1));
    }

    #[test]
    fn triangle_has_no_collider() {
        let mut g = Cpdag::complete(names(3));
        let (o, c) = orient_v_structures(&g, &SepsetTable::new());
        assert_eq!(o, g);
        assert!(c.is_empty());
        g.remove_edge(0, 1);
        let (o, _) = orient_v_structures(&g, &SepsetTable::new());
        assert!(o.is_directed(0, 2) && o.is_directed(1, 2));
    }

    #[test]
    fn collider_conflict_keeps_first_orientation() {
        // 0 - 1 - 2 - 3 path with empty sepsets: colliders at 1 and at 2 disagree on 1 - 2
        let mut g = Cpdag::empty(names(4));
        g.add_undirected(0, 1);
        g.add_undirected(1, 2);
        g.add_undirected(2, 3);
        let sep = SepsetTable::from([((0, 2), vec![]), ((1, 3), vec![]), ((0, 3), vec![])]);
        let (o, conflicts) = orient_v_structures(&g, &sep);
        assert!(o.is_directed(0, 1) && o.is_directed(2, 1) && o.is_directed(3, 2));
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].requested, (1, 2));
    }

    #[test]
    fn meek_rules_literal() {
        // R1
        let mut g = Cpdag::empty(names(3));
        g.add_directed(0, 1);
        g.add_undirected(1, 2);
        assert!(apply_meek_rules(&g).is_directed(1, 2));
        // R2
        let mut g = Cpdag::empty(names(3));
        g.add_directed(0, 1);
        g.add_directed(1, 2);
        g.add_undirected(0, 2);
        assert!(apply_meek_rules(&g).is_directed(0, 2));
        // R3
        let mut g = Cpdag::empty(names(4));
        g.add_undirected(0, 1);
        g.add_undirected(0, 2);
        g.add_undirected(0, 3);
        g.add_directed(2, 1);
        g.add_directed(3, 1);
        assert!(apply_meek_rules(&g).is_directed(0, 1));
        // R4: 0 − 2 → 3 → 1, 0 − 1, 0 − 3, 2 and 1 non-adjacent
        let mut g = Cpdag::empty(names(4));
        g.add_undirected(0, 1);
        g.add_undirected(0, 2);
        g.add_undirected(0, 3);
        g.add_directed(2, 3);
        g.add_directed(3, 1);
        assert!(apply_meek_rules(&g).is_directed(0, 1));
        // undirected square: nothing fires
        let mut g = Cpdag::empty(names(4));
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            g.add_undirected(a, b);
        }
        assert_eq!(apply_meek_rules(&g), g);
    }

    #[test]
    fn extension_examples() {
        let dag = Dag::new(names(3), &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(consistent_dag_extension(&dag.to_cpdag()).unwrap(), dag);

        let mut chain = Cpdag::empty(names(3));
        chain.add_undirected(0, 1);
        chain.add_undirected(1, 2);
        let ext = consistent_dag_extension(&chain).unwrap();
        assert_eq!(ext.edges(), vec![(0, 1), (1, 2)]);

        let tri = Cpdag::complete(names(3));
        let ext = consistent_dag_extension(&tri).unwrap();
        assert_eq!(ext.skeleton().len(), 3);
        assert!(ext.v_structures().is_empty());

        // undirected 4-cycle has no extension without a new collider
        let mut sq = Cpdag::empty(names(4));
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            sq.add_undirected(a, b);
        }
        assert!(consistent_dag_extension(&sq).is_err());
    }

    #[test]
    fn default_cap() {
        assert_eq!(default_max_cond_size(3), 1);
        assert_eq!(default_max_cond_size(10), 3);
        assert_eq!(default_max_cond_size(1), 0);
    }
}
