//! Partially directed graphs over `p` nodes (DAGs, skeletons, CPDAGs).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense mark matrix: `m[i][j] && m[j][i]` is `i - j`, `m[i][j] && !m[j][i]`
/// is `i -> j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedGraph {
    p: usize,
    marks: Vec<bool>,
}

impl MixedGraph {
    pub fn empty(p: usize) -> Self {
        MixedGraph {
            p,
            marks: vec![false; p * p],
        }
    }

    pub fn complete_undirected(p: usize) -> Self {
        let mut g = MixedGraph::empty(p);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    g.marks[i * p + j] = true;
                }
            }
        }
        g
    }

    pub fn from_edges(p: usize, directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> Result<Self> {
        let mut g = MixedGraph::empty(p);
        for &(a, b) in directed {
            g.check_new_pair(a, b)?;
            g.marks[a * p + b] = true;
        }
        for &(a, b) in undirected {
            g.check_new_pair(a, b)?;
            g.marks[a * p + b] = true;
            g.marks[b * p + a] = true;
        }
        Ok(g)
    }

    fn check_new_pair(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.p || b >= self.p {
            return Err(Error::Validation(format!("edge ({a}, {b}) out of range for p = {}", self.p)));
        }
        if a == b {
            return Err(Error::Validation(format!("self-loop on node {a}")));
        }
        if self.is_adjacent(a, b) {
            return Err(Error::Validation(format!("pair ({a}, {b}) listed twice")));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    fn mark(&self, i: usize, j: usize) -> bool {
        self.marks[i * self.p + j]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) || self.mark(j, i)
    }

    pub fn has_directed(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) && !self.mark(j, i)
    }

    pub fn has_undirected(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) && self.mark(j, i)
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.marks[i * self.p + j] = false;
        self.marks[j * self.p + i] = false;
    }

    pub fn set_directed(&mut self, i: usize, j: usize) {
        assert_ne!(i, j);
        self.marks[i * self.p + j] = true;
        self.marks[j * self.p + i] = false;
    }

    pub fn set_undirected(&mut self, i: usize, j: usize) {
        assert_ne!(i, j);
        self.marks[i * self.p + j] = true;
        self.marks[j * self.p + i] = true;
    }

    /// Adjacent nodes in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| j != i && self.is_adjacent(i, j)).collect()
    }

    pub fn undirected_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| j != i && self.has_undirected(i, j)).collect()
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.has_directed(j, i)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.has_directed(i, j)).collect()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in 0..self.p {
                if self.has_directed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Undirected edges as `(i, j)` with `i < j`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in i + 1..self.p {
                if self.has_undirected(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Adjacent pairs as `(i, j)` with `i < j`.
    pub fn skeleton_pairs(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for i in 0..self.p {
            for j in i + 1..self.p {
                if self.is_adjacent(i, j) {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    pub fn skeleton(&self) -> MixedGraph {
        let mut g = MixedGraph::empty(self.p);
        for (i, j) in self.skeleton_pairs() {
            g.set_undirected(i, j);
        }
        g
    }

    pub fn n_edges(&self) -> usize {
        self.skeleton_pairs().len()
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected_edges().is_empty()
    }

    /// Topological order of the directed part, or `None` if it has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = (0..self.p).map(|i| self.parents(i).len()).collect();
        let mut queue: VecDeque<usize> = (0..self.p).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.p);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for c in self.children(i) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == self.p).then_some(order)
    }

    pub fn has_directed_cycle(&self) -> bool {
        self.topological_order().is_none()
    }

    /// Whether a directed path `from ~> to` exists.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.p];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            if i == to {
                return true;
            }
            for c in self.children(i) {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Whether adding or orienting `i -> j` would close a directed cycle.
    pub fn would_create_cycle(&self, i: usize, j: usize) -> bool {
        self.has_directed_path(j, i)
    }

    /// A DAG is fully directed and acyclic.
    pub fn is_dag(&self) -> bool {
        self.is_fully_directed() && !self.has_directed_cycle()
    }

    pub fn to_json(&self, names: Option<&[String]>) -> GraphJson {
        GraphJson {
            p: self.p,
            names: names.map(|n| n.to_vec()).unwrap_or_else(|| (0..self.p).map(|i| format!("X{i}")).collect()),
            directed: self.directed_edges().into_iter().map(|(a, b)| [a, b]).collect(),
            undirected: self.undirected_edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        if json.names.len() != json.p {
            return Err(Error::Validation("names length differs from p".into()));
        }
        let d: Vec<(usize, usize)> = json.directed.iter().map(|e| (e[0], e[1])).collect();
        let u: Vec<(usize, usize)> = json.undirected.iter().map(|e| (e[0], e[1])).collect();
        MixedGraph::from_edges(json.p, &d, &u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub p: usize,
    pub names: Vec<String>,
    pub directed: Vec<[usize; 2]>,
    pub undirected: Vec<[usize; 2]>,
}

/// Separating sets keyed by unordered pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepSetMap {
    sets: BTreeMap<(usize, usize), Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl SepSetMap {
    pub fn new() -> Self {
        SepSetMap::default()
    }

    /// Records `set` for the pair unless one is already present.
    pub fn insert_first(&mut self, a: usize, b: usize, set: Vec<usize>) {
        debug_assert!(!set.contains(&a) && !set.contains(&b));
        self.sets.entry(key(a, b)).or_insert(set);
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sets.get(&key(a, b)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<usize>)> {
        self.sets.iter()
    }
}
