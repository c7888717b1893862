use rand::Rng;

use super::louvain::Accumulator;
use super::{shuffled, Partition, WorkGraph};
use crate::exec::rng_for;
use crate::graph::TrajectoryGraph;

const MAX_PASSES: usize = 100;

/// Asynchronous weighted label propagation.
///
/// Each pass visits nodes in a fresh seeded order; a node adopts the label
/// with the largest incident weight. A node whose current label is among the
/// maxima keeps it; otherwise ties are broken uniformly at random. Stops
/// after a pass without changes or after 100 passes.
pub fn label_propagation(g: &TrajectoryGraph, seed: u64) -> Partition {
    let n = g.node_count();
    let wg = WorkGraph::from_graph(g);
    let mut rng = rng_for(&[seed]);
    let mut labels: Vec<usize> = (0..n).collect();
    let mut acc = Accumulator::new(n);
    let mut ties = Vec::new();
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for v in shuffled(n, &mut rng) {
            if wg.adj[v].is_empty() {
                continue;
            }
            acc.load_neighbors(&wg, &labels, v);
            let max = acc.seen.iter().map(|&l| acc.weights[l]).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * max.abs();
            ties.clear();
            ties.extend(acc.seen.iter().copied().filter(|&l| acc.weights[l] >= max - tol));
            if ties.contains(&labels[v]) {
                continue;
            }
            ties.sort_unstable();
            labels[v] = ties[rng.gen_range(0..ties.len())];
            changed = true;
        }
        if !changed {
            break;
        }
    }
    Partition::from_labels(&labels)
}

#[cfg(test)]
mod tests {
    use super::super::test_graphs;
    use super::*;

    #[test]
    fn labels_stay_within_components() {
        let g = test_graphs::from(6, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 2.0)]);
        for seed in 0..20 {
            let p = label_propagation(&g, seed);
            assert!(p.count() >= 2);
            assert!(p.labels()[..3].iter().all(|&l| !p.labels()[3..].contains(&l)));
        }
    }

    #[test]
    fn complete_graph_collapses() {
        let n = 12;
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j, 1.0));
            }
        }
        let g = test_graphs::from(n, &e);
        let single = (0..100).filter(|&s| label_propagation(&g, s).count() == 1).count();
        assert!(single >= 99, "{single}/100 runs converged to one label");
    }

    #[test]
    fn seeded_runs_repeat() {
        let g = test_graphs::two_cliques();
        assert_eq!(label_propagation(&g, 42), label_propagation(&g, 42));
    }
}
