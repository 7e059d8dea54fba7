use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MixedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub shd_total: usize,
    pub shd_skeleton: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Forward,
    Backward,
    Undirected,
}

fn mark(g: &MixedGraph, i: usize, j: usize) -> Mark {
    if g.has_directed(i, j) {
        Mark::Forward
    } else if g.has_directed(j, i) {
        Mark::Backward
    } else {
        Mark::Undirected
    }
}

/// Skeleton SHD plus one unit per shared edge whose mark differs.
///
/// Precision (recall) of an empty estimate (truth) is 1 when the other
/// graph is empty too, else 0.
pub fn graph_metrics(truth: &MixedGraph, estimate: &MixedGraph) -> Result<GraphMetrics> {
    if truth.p() != estimate.p() {
        return Err(Error::Validation(format!(
            "graphs have {} and {} nodes",
            truth.p(),
            estimate.p()
        )));
    }
    let t = truth.skeleton_pairs();
    let e = estimate.skeleton_pairs();
    let shared: Vec<_> = t.intersection(&e).copied().collect();
    let tp = shared.len();
    let shd_skeleton = t.len() + e.len() - 2 * tp;
    let orientation = shared
        .iter()
        .filter(|&&(i, j)| mark(truth, i, j) != mark(estimate, i, j))
        .count();
    let ratio = |num: usize, den: usize, other_empty: bool| {
        if den > 0 {
            num as f64 / den as f64
        } else if other_empty {
            1.0
        } else {
            0.0
        }
    };
    let precision = ratio(tp, e.len(), t.is_empty());
    let recall = ratio(tp, t.len(), e.is_empty());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(GraphMetrics {
        shd_total: shd_skeleton + orientation,
        shd_skeleton,
        precision,
        recall,
        f1,
    })
}
