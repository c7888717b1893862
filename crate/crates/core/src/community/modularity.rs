use super::Partition;
use crate::error::{Error, Result};
use crate::graph::TrajectoryGraph;

/// Weighted Newman modularity at resolution 1.
pub fn modularity(g: &TrajectoryGraph, part: &Partition) -> Result<f64> {
    modularity_with_resolution(g, part, 1.0)
}

/// `Q = Σ_c [ in_c / 2m - γ (tot_c / 2m)^2 ]`.
pub fn modularity_with_resolution(g: &TrajectoryGraph, part: &Partition, gamma: f64) -> Result<f64> {
    if g.edge_count() == 0 {
        return Err(Error::Validation("modularity is undefined on a graph without edges".into()));
    }
    if part.len() != g.node_count() {
        return Err(Error::Validation(format!("partition covers {} of {} nodes", part.len(), g.node_count())));
    }
    let labels = part.labels();
    let mut inside = vec![0.0; part.count()];
    let mut tot = vec![0.0; part.count()];
    let mut m2 = 0.0;
    for e in g.edges() {
        let (cu, cv) = (labels[e.u], labels[e.v]);
        if cu == cv {
            inside[cu] += 2.0 * e.weight;
        }
        tot[cu] += e.weight;
        tot[cv] += e.weight;
        m2 += 2.0 * e.weight;
    }
    Ok(inside.iter().zip(&tot).map(|(i, t)| i / m2 - gamma * (t / m2) * (t / m2)).sum())
}

#[cfg(test)]
mod tests {
    use super::super::test_graphs;
    use super::*;

    /// Direct double sum over node pairs.
    fn brute(g: &TrajectoryGraph, labels: &[usize]) -> f64 {
        let n = g.node_count();
        let m2: f64 = 2.0 * g.total_weight();
        let k: Vec<f64> = (0..n).map(|v| g.strength(v)).collect();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    q += g.weight(i, j).unwrap_or(0.0) - k[i] * k[j] / m2;
                }
            }
        }
        q / m2
    }

    #[test]
    fn matches_double_sum() {
        let g = test_graphs::from(6, &[(0, 1, 2.0), (1, 2, 0.5), (0, 2, 1.0), (3, 4, 1.5), (4, 5, 1.0), (2, 3, 0.25)]);
        for labels in [vec![0, 0, 0, 1, 1, 1], vec![0, 1, 0, 1, 2, 2], vec![0; 6]] {
            let q = modularity(&g, &Partition::from_labels(&labels)).unwrap();
            assert!((q - brute(&g, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn singletons_formula() {
        let g = test_graphs::two_cliques();
        let m2 = 2.0 * g.total_weight();
        let expect: f64 = -(0..10).map(|v| (g.strength(v) / m2).powi(2)).sum::<f64>();
        let q = modularity(&g, &Partition::singletons(10)).unwrap();
        assert!((q - expect).abs() < 1e-12);
    }

    #[test]
    fn relabel_invariant_and_empty_graph_error() {
        let g = test_graphs::two_cliques();
        let a: Vec<usize> = (0..10).map(|v| v / 5).collect();
        let b: Vec<usize> = a.iter().map(|&c| 7 - c).collect();
        assert_eq!(modularity(&g, &Partition::from_labels(&a)).unwrap(), modularity(&g, &Partition::from_labels(&b)).unwrap());
        let empty = test_graphs::from(3, &[]);
        assert!(modularity(&empty, &Partition::singletons(3)).is_err());
    }
}
