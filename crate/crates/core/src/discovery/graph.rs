use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixed graph with directed and undirected edges.
///
/// Stored as an n×n mark matrix: `i → j` iff `m[i][j] && !m[j][i]`,
/// `i − j` iff both marks are set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    names: Vec<String>,
    marks: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMark {
    Directed,
    Undirected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub mark: EdgeMark,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

impl Cpdag {
    pub fn empty(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            marks: vec![false; n * n],
        }
    }

    /// Complete undirected graph.
    pub fn complete(names: Vec<String>) -> Self {
        let n = names.len();
        let mut g = Self::empty(names);
        for i in 0..n {
            for j in 0..n {
                g.marks[i * n + j] = i != j;
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn m(&self, i: usize, j: usize) -> bool {
        self.marks[i * self.n() + j]
    }

    fn set(&mut self, i: usize, j: usize, v: bool) {
        let n = self.n();
        self.marks[i * n + j] = v;
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.m(i, j) || self.m(j, i)
    }

    pub fn is_directed(&self, from: usize, to: usize) -> bool {
        self.m(from, to) && !self.m(to, from)
    }

    pub fn is_undirected(&self, i: usize, j: usize) -> bool {
        self.m(i, j) && self.m(j, i)
    }

    pub fn add_undirected(&mut self, i: usize, j: usize) {
        self.set(i, j, true);
        self.set(j, i, true);
    }

    pub fn add_directed(&mut self, from: usize, to: usize) {
        self.set(from, to, true);
        self.set(to, from, false);
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.set(i, j, false);
        self.set(j, i, false);
    }

    pub fn adjacents(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| j != i && self.adjacent(i, j)).collect()
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.is_directed(j, i)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.is_directed(i, j)).collect()
    }

    pub fn undirected_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| j != i && self.is_undirected(i, j)).collect()
    }

    pub fn n_edges(&self) -> usize {
        (0..self.n())
            .map(|i| (i + 1..self.n()).filter(|&j| self.adjacent(i, j)).count())
            .sum()
    }

    /// Unordered adjacent pairs `(i, j)` with `i < j`.
    pub fn skeleton_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacent(i, j))
            .collect()
    }

    /// Whether the directed edges alone form an acyclic graph.
    pub fn directed_part_is_acyclic(&self) -> bool {
        let n = self.n();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents(i).len()).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        seen == n
    }

    pub fn is_fully_directed(&self) -> bool {
        self.skeleton_pairs().iter().all(|&(i, j)| !self.is_undirected(i, j))
    }

    pub fn to_json(&self) -> GraphJson {
        let mut edges = Vec::new();
        for (i, j) in self.skeleton_pairs() {
            let (from, to, mark) = if self.is_undirected(i, j) {
                (i, j, EdgeMark::Undirected)
            } else if self.is_directed(i, j) {
                (i, j, EdgeMark::Directed)
            } else {
                (j, i, EdgeMark::Directed)
            };
            edges.push(EdgeRecord {
                from: self.names[from].clone(),
                to: self.names[to].clone(),
                mark,
            });
        }
        GraphJson {
            nodes: self.names.clone(),
            edges,
        }
    }

    pub fn from_json(g: &GraphJson) -> Result<Self> {
        let mut out = Cpdag::empty(g.nodes.clone());
        let idx = |name: &str| {
            g.nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Discovery(format!("edge references unknown node '{name}'")))
        };
        for e in &g.edges {
            let (a, b) = (idx(&e.from)?, idx(&e.to)?);
            if a == b || out.adjacent(a, b) {
                return Err(Error::Discovery(format!("invalid or repeated edge {} - {}", e.from, e.to)));
            }
            match e.mark {
                EdgeMark::Directed => out.add_directed(a, b),
                EdgeMark::Undirected => out.add_undirected(a, b),
            }
        }
        if !out.directed_part_is_acyclic() {
            return Err(Error::Discovery("directed part contains a cycle".into()));
        }
        Ok(out)
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph cpdag {\n");
        for name in &self.names {
            let _ = writeln!(s, "  \"{name}\";");
        }
        for e in self.to_json().edges {
            match e.mark {
                EdgeMark::Directed => {
                    let _ = writeln!(s, "  \"{}\" -> \"{}\";", e.from, e.to);
                }
                EdgeMark::Undirected => {
                    let _ = writeln!(s, "  \"{}\" -> \"{}\" [dir=none];", e.from, e.to);
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Builds from `(from, to)` pairs; fails on cycles, self loops or duplicates.
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n || a == b || !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Discovery(format!("invalid edge ({a}, {b})")));
            }
            parents[b].push(a);
            children[a].push(b);
        }
        for v in parents.iter_mut().chain(children.iter_mut()) {
            v.sort_unstable();
        }
        let dag = Self {
            names,
            parents,
            children,
        };
        if dag.topological_order().len() != n {
            return Err(Error::Discovery("graph contains a directed cycle".into()));
        }
        Ok(dag)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].binary_search(&to).is_ok()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|a| self.children[a].iter().map(move |&b| (a, b)))
            .collect()
    }

    /// Kahn's algorithm, always releasing the smallest ready index first.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.n();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    pub fn to_cpdag(&self) -> Cpdag {
        let mut g = Cpdag::empty(self.names.clone());
        for (a, b) in self.edges() {
            g.add_directed(a, b);
        }
        g
    }

    /// Colliders `a → c ← b` with `a < b` non-adjacent, as `(a, c, b)`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.n() {
            let pa = &self.parents[c];
            for (x, &a) in pa.iter().enumerate() {
                for &b in &pa[x + 1..] {
                    if !self.has_edge(a, b) && !self.has_edge(b, a) {
                        out.insert((a, c, b));
                    }
                }
            }
        }
        out
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect()
    }

    /// Ancestors of `nodes`, including the nodes themselves.
    pub fn ancestors_of(&self, nodes: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.n()];
        let mut stack: Vec<usize> = nodes.to_vec();
        while let Some(v) = stack.pop() {
            if !mark[v] {
                mark[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        mark
    }

    /// Whether `x` and `y` are d-separated by `z` (moralized ancestral graph criterion).
    pub fn d_separated(&self, x: usize, y: usize, z: &[usize]) -> bool {
        let mut focus = vec![x, y];
        focus.extend_from_slice(z);
        let anc = self.ancestors_of(&focus);
        let n = self.n();
        let mut adj = vec![Vec::new(); n];
        for v in (0..n).filter(|&v| anc[v]) {
            let pa = &self.parents[v];
            for &p in pa {
                adj[p].push(v);
                adj[v].push(p);
            }
            for (k, &a) in pa.iter().enumerate() {
                for &b in &pa[k + 1..] {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        let mut blocked = vec![false; n];
        for &v in z {
            blocked[v] = true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![x];
        seen[x] = true;
        while let Some(v) = stack.pop() {
            if v == y {
                return false;
            }
            for &w in &adj[v] {
                if anc[w] && !blocked[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        true
    }
}
