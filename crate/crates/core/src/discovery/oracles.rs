//! CI oracles for the skeleton search. Tests that cannot be run (too few
//! rows, singular designs) report p = 0 so the edge is kept.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::baselines::{fisher_z, fz_rubin, testwise_fisher_z};
use crate::ci_test::{pair_ci, CITestConfig};
use crate::data::{ImputedStack, IncompleteDataset, Matrix};
use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::rng::derive_seed;

pub trait CiOracle: Sync {
    /// p-value for `z _||_ y | cond`; large means independent.
    fn p_value(&self, z: usize, y: usize, cond: &[usize]) -> Result<f64>;

    fn tag(&self) -> &'static str;
}

/// Maps "cannot test" outcomes to p = 0.
fn keep_on_untestable(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::InsufficientData(_)) => Ok(0.0),
        other => other,
    }
}

pub struct PairCiOracle<'a> {
    stack: &'a ImputedStack,
    config: CITestConfig,
    calls: AtomicUsize,
}

impl<'a> PairCiOracle<'a> {
    pub fn new(stack: &'a ImputedStack, config: CITestConfig) -> Self {
        PairCiOracle {
            stack,
            config,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Per-query seed: a function of the master seed and the query only.
    pub fn query_seed(&self, z: usize, y: usize, cond: &[usize]) -> u64 {
        let mut path = vec![4u64, z as u64, y as u64, cond.len() as u64];
        path.extend(cond.iter().map(|&c| c as u64));
        derive_seed(self.config.seed, &path)
    }
}

impl CiOracle for PairCiOracle<'_> {
    fn p_value(&self, z: usize, y: usize, cond: &[usize]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let config = CITestConfig {
            seed: self.query_seed(z, y, cond),
            ..self.config
        };
        Ok(pair_ci(self.stack, z, y, cond, &config)?.p_value)
    }

    fn tag(&self) -> &'static str {
        "pairci"
    }
}

/// Fisher-Z on a complete matrix.
pub struct FisherZOracle<'a> {
    pub rows: &'a Matrix,
}

impl CiOracle for FisherZOracle<'_> {
    fn p_value(&self, z: usize, y: usize, cond: &[usize]) -> Result<f64> {
        keep_on_untestable(fisher_z(self.rows, z, y, cond).map(|r| if r.singular { 0.0 } else { r.p_value }))
    }

    fn tag(&self) -> &'static str {
        "fisher_z"
    }
}

/// Fisher-Z on the rows complete for each query.
pub struct TestwiseOracle<'a> {
    pub data: &'a IncompleteDataset,
}

impl CiOracle for TestwiseOracle<'_> {
    fn p_value(&self, z: usize, y: usize, cond: &[usize]) -> Result<f64> {
        keep_on_untestable(testwise_fisher_z(self.data, z, y, cond).map(|r| if r.singular { 0.0 } else { r.p_value }))
    }

    fn tag(&self) -> &'static str {
        "testwise"
    }
}

pub struct FzRubinOracle<'a> {
    pub stack: &'a ImputedStack,
}

impl CiOracle for FzRubinOracle<'_> {
    fn p_value(&self, z: usize, y: usize, cond: &[usize]) -> Result<f64> {
        keep_on_untestable(fz_rubin(self.stack, z, y, cond).map(|r| if r.singular { 0.0 } else { r.p_value }))
    }

    fn tag(&self) -> &'static str {
        "fz_rubin"
    }
}

/// Exact oracle from a known DAG: p = 1 when d-separated, else 0.
pub struct DSeparationOracle<'a> {
    pub dag: &'a MixedGraph,
}

impl CiOracle for DSeparationOracle<'_> {
    fn p_value(&self, z: usize, y: usize, cond: &[usize]) -> Result<f64> {
        Ok(if d_separated(self.dag, z, y, cond) { 1.0 } else { 0.0 })
    }

    fn tag(&self) -> &'static str {
        "d_separation"
    }
}

/// Reachability ("Bayes ball") test of `x _||_ y | cond` in a DAG.
pub fn d_separated(dag: &MixedGraph, x: usize, y: usize, cond: &[usize]) -> bool {
    let p = dag.p();
    let mut in_cond = vec![false; p];
    for &c in cond {
        in_cond[c] = true;
    }
    // ancestors of the conditioning set (including itself)
    let mut anc = in_cond.clone();
    let mut stack: Vec<usize> = cond.to_vec();
    while let Some(v) = stack.pop() {
        for u in dag.parents(v) {
            if !anc[u] {
                anc[u] = true;
                stack.push(u);
            }
        }
    }
    // states: (node, arrived from child = going up)
    let mut seen = vec![[false; 2]; p];
    let mut queue = vec![(x, true)];
    while let Some((v, up)) = queue.pop() {
        if seen[v][up as usize] {
            continue;
        }
        seen[v][up as usize] = true;
        if v == y && !in_cond[v] {
            return false;
        }
        if up && !in_cond[v] {
            queue.extend(dag.parents(v).into_iter().map(|u| (u, true)));
            queue.extend(dag.children(v).into_iter().map(|c| (c, false)));
        } else if !up {
            if !in_cond[v] {
                queue.extend(dag.children(v).into_iter().map(|c| (c, false)));
            }
            if anc[v] {
                queue.extend(dag.parents(v).into_iter().map(|u| (u, true)));
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_d_separation() {
        // 0 -> 1 -> 2, 3 -> 1
        let g = MixedGraph::from_edges(4, &[(0, 1), (1, 2), (3, 1)], &[]).unwrap();
        assert!(!d_separated(&g, 0, 2, &[]));
        assert!(d_separated(&g, 0, 2, &[1]));
        assert!(d_separated(&g, 0, 3, &[]));
        assert!(!d_separated(&g, 0, 3, &[1]));
        assert!(!d_separated(&g, 0, 3, &[2]));
    }
}
