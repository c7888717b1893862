use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use super::Partition;
use crate::graph::TrajectoryGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    gain: f64,
    a: usize,
    b: usize,
    ver_a: u32,
    ver_b: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // max gain first, then the smallest (a, b)
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| Reverse((self.a, self.b)).cmp(&Reverse((other.a, other.b))))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Clauset-Newman-Moore greedy agglomeration.
///
/// Starting from singletons, repeatedly merges the adjacent pair with the
/// largest modularity gain `2 (e_ab - a_a a_b)` while that gain is positive.
/// Equal gains go to the smallest community-id pair; the merged community
/// keeps the smaller id.
pub fn fast_greedy(g: &TrajectoryGraph) -> Partition {
    let n = g.node_count();
    let m2 = 2.0 * g.total_weight();
    if m2 == 0.0 {
        return Partition::singletons(n);
    }
    let mut a: Vec<f64> = (0..n).map(|v| g.strength(v) / m2).collect();
    let mut e: Vec<BTreeMap<usize, f64>> =
        (0..n).map(|v| g.neighbors(v).iter().map(|&(u, w)| (u, w / m2)).collect()).collect();
    let mut ver = vec![0u32; n];
    let mut alive = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();

    let mut heap = BinaryHeap::new();
    for edge in g.edges() {
        let (i, j) = (edge.u, edge.v);
        heap.push(Candidate { gain: 2.0 * (e[i][&j] - a[i] * a[j]), a: i, b: j, ver_a: 0, ver_b: 0 });
    }
    while let Some(c) = heap.pop() {
        if !alive[c.a] || !alive[c.b] || ver[c.a] != c.ver_a || ver[c.b] != c.ver_b {
            continue;
        }
        if c.gain <= 0.0 {
            break;
        }
        let (keep, gone) = (c.a, c.b);
        let moved = std::mem::take(&mut e[gone]);
        for (k, w) in moved {
            if k == keep {
                continue;
            }
            *e[keep].entry(k).or_insert(0.0) += w;
            e[k].remove(&gone);
            *e[k].entry(keep).or_insert(0.0) += w;
        }
        e[keep].remove(&gone);
        a[keep] += a[gone];
        alive[gone] = false;
        ver[keep] += 1;
        owner[gone] = keep;
        for (&k, &w) in &e[keep] {
            let (x, y) = (keep.min(k), keep.max(k));
            heap.push(Candidate { gain: 2.0 * (w - a[keep] * a[k]), a: x, b: y, ver_a: ver[x], ver_b: ver[y] });
        }
    }
    let root = |mut v: usize| {
        while owner[v] != v {
            v = owner[v];
        }
        v
    };
    Partition::from_labels(&(0..n).map(root).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::super::{modularity, test_graphs};
    use super::*;

    #[test]
    fn two_cliques() {
        let p = fast_greedy(&test_graphs::two_cliques());
        assert_eq!(p.labels(), &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn single_edge_merges() {
        let g = test_graphs::from(2, &[(0, 1, 3.0)]);
        let before = modularity(&g, &Partition::singletons(2)).unwrap();
        let p = fast_greedy(&g);
        assert_eq!(p.count(), 1);
        let after = modularity(&g, &p).unwrap();
        assert!((after - before - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let g = test_graphs::from(7, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 6, 1.0), (6, 3, 1.0), (2, 3, 1.0)]);
        assert_eq!(fast_greedy(&g), fast_greedy(&g));
    }
}
