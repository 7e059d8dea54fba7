//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use paircd::graph::MixedGraph;

/// Edge mark between `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    None,
    Forward,
    Backward,
    Undirected,
}

pub fn mark(g: &MixedGraph, i: usize, j: usize) -> Mark {
    if g.has_undirected(i, j) {
        Mark::Undirected
    } else if g.has_directed(i, j) {
        Mark::Forward
    } else if g.has_directed(j, i) {
        Mark::Backward
    } else {
        Mark::None
    }
}

pub fn marks(g: &MixedGraph) -> Vec<Mark> {
    let p = g.p();
    let mut out = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            out.push(mark(g, i, j));
        }
    }
    out
}

fn descendants(dag: &MixedGraph, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for w in 0..dag.p() {
            if dag.has_directed(u, w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

fn all_paths(dag: &MixedGraph, at: usize, to: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if at == to {
        out.push(path.clone());
        return;
    }
    for w in 0..dag.p() {
        if dag.is_adjacent(at, w) && !path.contains(&w) {
            path.push(w);
            all_paths(dag, w, to, path, out);
            path.pop();
        }
    }
}

/// d-separation by enumerating every simple path between `x` and `y`.
pub fn d_separated_brute(dag: &MixedGraph, x: usize, y: usize, cond: &[usize]) -> bool {
    let mut paths = Vec::new();
    all_paths(dag, x, y, &mut vec![x], &mut paths);
    let cond: BTreeSet<usize> = cond.iter().copied().collect();
    paths.iter().all(|path| {
        path.windows(3).any(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let collider = dag.has_directed(a, b) && dag.has_directed(c, b);
            if collider {
                descendants(dag, b).is_disjoint(&cond)
            } else {
                cond.contains(&b)
            }
        })
    })
}

fn acyclic(g: &MixedGraph) -> bool {
    let p = g.p();
    let mut indeg: Vec<usize> = (0..p).map(|v| (0..p).filter(|&u| g.has_directed(u, v)).count()).collect();
    let mut ready: Vec<usize> = (0..p).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = ready.pop() {
        seen += 1;
        for v in 0..p {
            if g.has_directed(u, v) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(v);
                }
            }
        }
    }
    seen == p
}

/// `(a, b, c)` with `a < c`, `a -> b <- c` and `a`, `c` non-adjacent.
pub fn v_structures(dag: &MixedGraph) -> BTreeSet<(usize, usize, usize)> {
    let p = dag.p();
    let mut out = BTreeSet::new();
    for b in 0..p {
        for a in 0..p {
            for c in a + 1..p {
                if a != b && c != b && dag.has_directed(a, b) && dag.has_directed(c, b) && !dag.is_adjacent(a, c) {
                    out.insert((a, b, c));
                }
            }
        }
    }
    out
}

/// Every DAG with the skeleton and v-structures of `dag`.
pub fn markov_equivalents(dag: &MixedGraph) -> Vec<MixedGraph> {
    let p = dag.p();
    let edges: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .filter(|&(i, j)| dag.is_adjacent(i, j))
        .collect();
    assert!(edges.len() < 24, "too many edges to enumerate");
    let target = v_structures(dag);
    (0u32..1 << edges.len())
        .filter_map(|bits| {
            let directed: Vec<(usize, usize)> = edges
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| if bits >> k & 1 == 1 { (j, i) } else { (i, j) })
                .collect();
            let g = MixedGraph::from_edges(p, &directed, &[]).unwrap();
            (acyclic(&g) && v_structures(&g) == target).then_some(g)
        })
        .collect()
}

/// CPDAG as the union of the equivalence class: an edge is directed iff
/// every member orients it the same way.
pub fn cpdag_brute(dag: &MixedGraph) -> MixedGraph {
    let class = markov_equivalents(dag);
    let p = dag.p();
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if !dag.is_adjacent(i, j) {
                continue;
            }
            let fwd = class.iter().filter(|g| g.has_directed(i, j)).count();
            if fwd == class.len() {
                directed.push((i, j));
            } else if fwd == 0 {
                directed.push((j, i));
            } else {
                undirected.push((i, j));
            }
        }
    }
    MixedGraph::from_edges(p, &directed, &undirected).unwrap()
}

/// Every DAG on `p` nodes (feasible for p <= 4).
pub fn all_dags(p: usize) -> Vec<MixedGraph> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    let mut choice = vec![0u8; pairs.len()];
    loop {
        let directed: Vec<(usize, usize)> = pairs
            .iter()
            .zip(&choice)
            .filter_map(|(&(i, j), &c)| match c {
                1 => Some((i, j)),
                2 => Some((j, i)),
                _ => None,
            })
            .collect();
        let g = MixedGraph::from_edges(p, &directed, &[]).unwrap();
        if acyclic(&g) {
            out.push(g);
        }
        let mut k = 0;
        while k < choice.len() && choice[k] == 2 {
            choice[k] = 0;
            k += 1;
        }
        if k == choice.len() {
            return out;
        }
        choice[k] += 1;
    }
}

/// Skeleton and total SHD from pairwise marks.
pub fn shd_brute(truth: &MixedGraph, est: &MixedGraph) -> (usize, usize) {
    let (t, e) = (marks(truth), marks(est));
    let mut skeleton = 0;
    let mut orient = 0;
    for (a, b) in t.iter().zip(&e) {
        match ((*a == Mark::None), (*b == Mark::None)) {
            (true, true) => {}
            (true, false) | (false, true) => skeleton += 1,
            (false, false) => orient += usize::from(a != b),
        }
    }
    (skeleton, skeleton + orient)
}

pub fn same_graph(a: &MixedGraph, b: &MixedGraph) -> bool {
    a.p() == b.p() && marks(a) == marks(b)
}
