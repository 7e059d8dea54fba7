use crate::error::{Error, Result};
use crate::graph::{MixedGraph, SepSetMap};

/// Orients unshielded colliders `x -> z <- y` when `z` is not in the
/// separating set of `(x, y)`.
pub fn orient_v_structures(skeleton: &MixedGraph, sepsets: &SepSetMap) -> MixedGraph {
    orient_v_structures_with(skeleton, |x, z, y| sepsets.get(x, y).is_some_and(|s| !s.contains(&z)))
}

/// As [`orient_v_structures`] with an arbitrary collider predicate, called
/// once per unshielded triple `x - z - y` with `x < y`.
///
/// An edge demanded in both directions stays undirected, and an orientation
/// that would close a directed cycle is skipped.
pub fn orient_v_structures_with(skeleton: &MixedGraph, mut is_collider: impl FnMut(usize, usize, usize) -> bool) -> MixedGraph {
    let p = skeleton.p();
    let mut demand = vec![false; p * p];
    for z in 0..p {
        let nb = skeleton.neighbors(z);
        for (a, &x) in nb.iter().enumerate() {
            for &y in &nb[a + 1..] {
                if skeleton.is_adjacent(x, y) {
                    continue;
                }
                if is_collider(x, z, y) {
                    demand[x * p + z] = true;
                    demand[y * p + z] = true;
                }
            }
        }
    }
    let mut g = skeleton.skeleton();
    for a in 0..p {
        for b in 0..p {
            if demand[a * p + b] && !demand[b * p + a] && !g.would_create_cycle(a, b) {
                g.set_directed(a, b);
            }
        }
    }
    g
}

/// Applies Meek's rules R1-R4 until nothing changes.
pub fn meek_rules(graph: &MixedGraph) -> Result<MixedGraph> {
    if graph.has_directed_cycle() {
        return Err(Error::Contract("directed cycle in input to Meek rules".into()));
    }
    let mut g = graph.clone();
    let p = g.p();
    loop {
        let mut changed = false;
        for (i, j) in g.undirected_edges() {
            for (a, b) in [(i, j), (j, i)] {
                if !g.has_undirected(a, b) {
                    continue;
                }
                if fires(&g, a, b) && !g.would_create_cycle(a, b) {
                    g.set_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    debug_assert_eq!(g.p(), p);
    Ok(g)
}

/// Whether some rule orients the undirected edge `a - b` as `a -> b`.
fn fires(g: &MixedGraph, a: usize, b: usize) -> bool {
    let p = g.p();
    // R1: c -> a - b, c and b non-adjacent
    if (0..p).any(|c| c != b && g.has_directed(c, a) && !g.is_adjacent(c, b)) {
        return true;
    }
    // R2: a -> c -> b
    if (0..p).any(|c| g.has_directed(a, c) && g.has_directed(c, b)) {
        return true;
    }
    // R3: a - c -> b, a - d -> b, c and d non-adjacent
    let feeders: Vec<usize> = (0..p).filter(|&c| g.has_undirected(a, c) && g.has_directed(c, b)).collect();
    for (x, &c) in feeders.iter().enumerate() {
        if feeders[x + 1..].iter().any(|&d| !g.is_adjacent(c, d)) {
            return true;
        }
    }
    // R4: a - d -> c -> b, a adjacent to c, d and b non-adjacent
    for c in 0..p {
        if c == a || !g.has_directed(c, b) || !g.is_adjacent(a, c) {
            continue;
        }
        if (0..p).any(|d| d != b && g.has_undirected(a, d) && g.has_directed(d, c) && !g.is_adjacent(d, b)) {
            return true;
        }
    }
    false
}

/// CPDAG of a DAG: its skeleton, its v-structures, then Meek closure.
pub fn dag_to_cpdag(dag: &MixedGraph) -> Result<MixedGraph> {
    if !dag.is_dag() {
        return Err(Error::Contract("expected a DAG".into()));
    }
    let p = dag.p();
    let mut g = dag.skeleton();
    for z in 0..p {
        let pa = dag.parents(z);
        for (k, &x) in pa.iter().enumerate() {
            for &y in &pa[k + 1..] {
                if !dag.is_adjacent(x, y) {
                    g.set_directed(x, z);
                    g.set_directed(y, z);
                }
            }
        }
    }
    meek_rules(&g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn und(p: usize, e: &[(usize, usize)]) -> MixedGraph {
        MixedGraph::from_edges(p, &[], e).unwrap()
    }

    #[test]
    fn collider_is_oriented() {
        let s = und(3, &[(0, 2), (1, 2)]);
        let mut sep = SepSetMap::new();
        sep.insert_first(0, 1, vec![]);
        let g = orient_v_structures(&s, &sep);
        assert!(g.has_directed(0, 2) && g.has_directed(1, 2));
    }

    #[test]
    fn chain_is_left_alone() {
        let s = und(3, &[(0, 1), (1, 2)]);
        let mut sep = SepSetMap::new();
        sep.insert_first(0, 2, vec![1]);
        assert_eq!(orient_v_structures(&s, &sep), s);
    }

    #[test]
    fn conflicting_colliders_leave_shared_edge_undirected() {
        // 0 - 1 - 2 - 3 path: colliders at 1 (0,2) and at 2 (1,3) both claim 1 - 2
        let s = und(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut sep = SepSetMap::new();
        sep.insert_first(0, 2, vec![]);
        sep.insert_first(1, 3, vec![]);
        sep.insert_first(0, 3, vec![]);
        let g = orient_v_structures(&s, &sep);
        assert!(g.has_directed(0, 1));
        assert!(g.has_directed(3, 2));
        assert!(g.has_undirected(1, 2));
    }

    #[test]
    fn r1_propagates() {
        let g = MixedGraph::from_edges(3, &[(0, 1)], &[(1, 2)]).unwrap();
        let m = meek_rules(&g).unwrap();
        assert!(m.has_directed(1, 2));
    }

    #[test]
    fn undirected_triangle_unchanged() {
        let g = und(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(meek_rules(&g).unwrap(), g);
    }

    #[test]
    fn r2_avoids_cycle() {
        let g = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[(0, 2)]).unwrap();
        assert!(meek_rules(&g).unwrap().has_directed(0, 2));
    }

    #[test]
    fn r3_fires() {
        // 0 - 1, 0 - 2, 0 - 3, 1 -> 3 <- 2, 1 and 2 non-adjacent
        let g = MixedGraph::from_edges(4, &[(1, 3), (2, 3)], &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let m = meek_rules(&g).unwrap();
        assert!(m.has_directed(0, 3));
        assert!(m.has_undirected(0, 1));
    }

    #[test]
    fn r4_fires() {
        // a=0, b=1, c=2, d=3: 0 - 3 -> 2 -> 1, 0 - 2, 0 - 1, 3 and 1 non-adjacent
        let g = MixedGraph::from_edges(4, &[(3, 2), (2, 1)], &[(0, 3), (0, 2), (0, 1)]).unwrap();
        let m = meek_rules(&g).unwrap();
        assert!(m.has_directed(0, 1));
    }

    #[test]
    fn cyclic_input_is_contract_error() {
        let g = MixedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        assert!(matches!(meek_rules(&g), Err(Error::Contract(_))));
    }

    #[test]
    fn cpdag_of_collider_and_chain() {
        let collider = MixedGraph::from_edges(3, &[(0, 2), (1, 2)], &[]).unwrap();
        assert_eq!(dag_to_cpdag(&collider).unwrap(), collider);
        let chain = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[]).unwrap();
        assert_eq!(dag_to_cpdag(&chain).unwrap(), chain.skeleton());
    }
}
