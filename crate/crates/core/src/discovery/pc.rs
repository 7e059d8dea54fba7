use crate::discovery::oracles::CiOracle;
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, SepSetMap};

/// Lexicographic k-subsets of `items`.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for i in pos + 1..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonResult {
    pub skeleton: MixedGraph,
    pub sepsets: SepSetMap,
    pub n_tests: usize,
    pub max_depth: usize,
}

/// Classic PC adjacency search.
///
/// Ordered pairs `(i, j)` are visited in ascending order at each depth and
/// conditioning sets are drawn from the current `adj(i) \ {j}`, so an edge
/// removed earlier in a depth immediately shrinks later candidate sets.
pub fn pc_skeleton(oracle: &dyn CiOracle, p: usize, alpha: f64) -> Result<SkeletonResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut g = MixedGraph::complete_undirected(p);
    let mut sepsets = SepSetMap::new();
    let mut n_tests = 0;
    let mut depth = 0;
    loop {
        let mut testable = false;
        for i in 0..p {
            for j in 0..p {
                if i == j || !g.is_adjacent(i, j) {
                    continue;
                }
                let others: Vec<usize> = g.neighbors(i).into_iter().filter(|&k| k != j).collect();
                if others.len() < depth {
                    continue;
                }
                testable = true;
                for s in combinations(&others, depth) {
                    n_tests += 1;
                    let pv = oracle.p_value(i, j, &s).map_err(|e| Error::Oracle {
                        x: i,
                        y: j,
                        cond: s.clone(),
                        source: Box::new(e),
                    })?;
                    if pv > alpha {
                        g.remove_edge(i, j);
                        sepsets.insert_first(i, j, s);
                        break;
                    }
                }
            }
        }
        if !testable {
            break;
        }
        depth += 1;
    }
    Ok(SkeletonResult {
        skeleton: g,
        sepsets,
        n_tests,
        max_depth: depth,
    })
}
