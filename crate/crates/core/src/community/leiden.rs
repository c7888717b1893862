use std::collections::VecDeque;

use rand::Rng;

use super::louvain::{Accumulator, GAIN_EPS};
use super::{dense, shuffled, split_disconnected, Partition, WorkGraph};
use crate::exec::rng_for;
use crate::graph::TrajectoryGraph;

const RESOLUTION: f64 = 1.0;
/// Randomness of the refinement merge choice (on the modularity scale).
const THETA: f64 = 0.01;
const MAX_LEVELS: usize = 64;

/// Queue-based local moving: only neighbors of moved nodes are revisited.
fn move_nodes_fast(wg: &WorkGraph, comm: &mut [usize], rng: &mut impl Rng) {
    let n = wg.len();
    let mut tot = vec![0.0; n];
    for v in 0..n {
        tot[comm[v]] += wg.strength[v];
    }
    let mut queue: VecDeque<usize> = shuffled(n, rng).into();
    let mut queued = vec![true; n];
    let mut acc = Accumulator::new(n);
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
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
            for &(u, _) in &wg.adj[v] {
                if comm[u] != best && !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
}

/// Refine each community by merging singletons into well-connected
/// subcommunities. Merges only follow edges, so every refined community
/// induces a connected subgraph.
fn refine(wg: &WorkGraph, comm: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let n = wg.len();
    let mut comm_tot = vec![0.0; n];
    for v in 0..n {
        comm_tot[comm[v]] += wg.strength[v];
    }
    let mut refined: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut sub_tot = wg.strength.clone();
    // weight from each subcommunity to the rest of its community
    let mut sub_ext: Vec<f64> =
        (0..n).map(|v| wg.adj[v].iter().filter(|&&(u, _)| comm[u] == comm[v]).map(|e| e.1).sum()).collect();

    let mut acc = Accumulator::new(n);
    for v in shuffled(n, rng) {
        if refined[v] != v || size[v] != 1 {
            continue;
        }
        let (c, k) = (comm[v], wg.strength[v]);
        if sub_ext[v] < RESOLUTION * k * (comm_tot[c] - k) / wg.m2 {
            continue;
        }
        // weights to neighboring subcommunities inside the same community
        acc.clear();
        for &(u, w) in &wg.adj[v] {
            if comm[u] == c && refined[u] != v {
                acc.add(refined[u], w);
            }
        }
        let candidates: Vec<(usize, f64)> = acc
            .seen
            .iter()
            .filter(|&&s| sub_ext[s] >= RESOLUTION * sub_tot[s] * (comm_tot[c] - sub_tot[s]) / wg.m2)
            .map(|&s| (s, acc.weights[s] - RESOLUTION * k * sub_tot[s] / wg.m2))
            .filter(|&(_, gain)| gain >= 0.0)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let max_gain = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = candidates.iter().map(|c| ((c.1 - max_gain) * 2.0 / wg.m2 / THETA).exp()).collect();
        let mut u = rng.gen::<f64>() * probs.iter().sum::<f64>();
        let mut target = candidates[candidates.len() - 1].0;
        for (cand, p) in candidates.iter().zip(&probs) {
            if u < *p {
                target = cand.0;
                break;
            }
            u -= p;
        }
        let w_vs = acc.weights[target];
        refined[v] = target;
        size[target] += 1;
        size[v] = 0;
        sub_tot[target] += k;
        sub_ext[target] = sub_ext[target] + sub_ext[v] - 2.0 * w_vs;
    }
    refined
}

/// Leiden: fast local moving, refinement, and aggregation on the refined
/// partition. Every returned community is internally connected.
pub fn leiden(g: &TrajectoryGraph, seed: u64) -> Partition {
    let n = g.node_count();
    let mut rng = rng_for(&[seed]);
    let mut wg = WorkGraph::from_graph(g);
    if wg.m2 == 0.0 {
        return Partition::singletons(n);
    }
    let mut membership: Vec<usize> = (0..n).collect();
    let mut part: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_LEVELS {
        move_nodes_fast(&wg, &mut part, &mut rng);
        let (p, count) = dense(&part);
        part = p;
        if count == wg.len() {
            break;
        }
        let (mut refined, mut refined_count) = dense(&refine(&wg, &part, &mut rng));
        if refined_count == wg.len() {
            // refinement merged nothing; aggregate on the moved partition
            refined = part.clone();
            refined_count = count;
        }
        let mut next_part = vec![0; refined_count];
        for v in 0..wg.len() {
            next_part[refined[v]] = part[v];
        }
        for m in membership.iter_mut() {
            *m = refined[*m];
        }
        wg = wg.aggregate(&refined, refined_count);
        part = next_part;
    }
    let labels: Vec<usize> = membership.iter().map(|&m| part[m]).collect();
    split_disconnected(g, &labels)
}
