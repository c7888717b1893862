use super::{dense, shuffled, Partition, WorkGraph};
use crate::exec::rng_for;
use crate::graph::TrajectoryGraph;

const RESOLUTION: f64 = 1.0;
const MAX_LEVELS: usize = 64;

/// Gains below this (relative to the node strength) are treated as ties.
pub(crate) const GAIN_EPS: f64 = 1e-12;

/// Sparse accumulator of weights per community.
pub(crate) struct Accumulator {
    pub weights: Vec<f64>,
    present: Vec<bool>,
    /// Touched keys in first-seen order.
    pub seen: Vec<usize>,
}

impl Accumulator {
    pub fn new(n: usize) -> Self {
        Accumulator { weights: vec![0.0; n], present: vec![false; n], seen: Vec::new() }
    }

    pub fn clear(&mut self) {
        for &c in &self.seen {
            self.weights[c] = 0.0;
            self.present[c] = false;
        }
        self.seen.clear();
    }

    pub fn add(&mut self, c: usize, w: f64) {
        if !self.present[c] {
            self.present[c] = true;
            self.seen.push(c);
        }
        self.weights[c] += w;
    }

    /// Neighbor-community weights of `v` (self-loops excluded).
    pub fn load_neighbors(&mut self, wg: &WorkGraph, comm: &[usize], v: usize) {
        self.clear();
        for &(u, w) in &wg.adj[v] {
            self.add(comm[u], w);
        }
    }
}

/// One level of greedy local moving. Returns true if any node moved.
fn move_nodes(wg: &WorkGraph, comm: &mut [usize], rng: &mut impl rand::Rng) -> bool {
    let n = wg.len();
    let mut tot = vec![0.0; n];
    for v in 0..n {
        tot[comm[v]] += wg.strength[v];
    }
    let order = shuffled(n, rng);
    let mut acc = Accumulator::new(n);
    let mut any = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let k = wg.strength[v];
            if k == 0.0 {
                continue;
            }
            acc.load_neighbors(wg, comm, v);
            let cur = comm[v];
            tot[cur] -= k;
            let gain = |c: usize| acc.weights[c] - RESOLUTION * tot[c] * k / wg.m2;
            let (mut best, mut best_gain) = (cur, gain(cur));
            for &c in &acc.seen {
                let g = gain(c);
                if g > best_gain + GAIN_EPS * k {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k;
            if best != cur {
                comm[v] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        any = true;
    }
    any
}

/// Multi-level Louvain modularity optimization. Node visit order at every
/// level is shuffled with a seeded RNG.
pub fn louvain(g: &TrajectoryGraph, seed: u64) -> Partition {
    let mut rng = rng_for(&[seed]);
    let mut wg = WorkGraph::from_graph(g);
    let mut membership: Vec<usize> = (0..g.node_count()).collect();
    if wg.m2 == 0.0 {
        return Partition::singletons(g.node_count());
    }
    for _ in 0..MAX_LEVELS {
        let mut comm: Vec<usize> = (0..wg.len()).collect();
        if !move_nodes(&wg, &mut comm, &mut rng) {
            break;
        }
        let (comm, count) = dense(&comm);
        for m in membership.iter_mut() {
            *m = comm[*m];
        }
        if count == wg.len() {
            break;
        }
        wg = wg.aggregate(&comm, count);
    }
    Partition::from_labels(&membership)
}
