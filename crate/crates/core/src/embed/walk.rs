use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range_init, rng_for, Exec};
use crate::graph::TrajectoryGraph;
use crate::ingest::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub walks_per_node: usize,
    /// Nodes per walk, start included.
    pub walk_length: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig { p: 1.0, q: 1.0, walks_per_node: 10, walk_length: 80, seed: 0, exec: Exec::default() }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) || !self.p.is_finite() || !self.q.is_finite() {
            return Err(Error::Config(format!("walk p and q must be positive (p={}, q={})", self.p, self.q)));
        }
        if self.walks_per_node == 0 || self.walk_length == 0 {
            return Err(Error::Config("walks_per_node and walk_length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Unnormalized second-order bias of stepping to `next` from `cur` when the
/// walker arrived from `prev`.
fn bias(g: &TrajectoryGraph, prev: Option<NodeId>, next: NodeId, p: f64, q: f64) -> f64 {
    match prev {
        None => 1.0,
        Some(t) if t == next => 1.0 / p,
        Some(t) if g.has_edge(t, next) => 1.0,
        Some(_) => 1.0 / q,
    }
}

/// Exact transition distribution from `cur` (arrived from `prev`).
pub fn transition_probabilities(
    g: &TrajectoryGraph,
    prev: Option<NodeId>,
    cur: NodeId,
    p: f64,
    q: f64,
) -> Vec<(NodeId, f64)> {
    let raw: Vec<(NodeId, f64)> = g.neighbors(cur).iter().map(|&(x, w)| (x, w * bias(g, prev, x, p, q))).collect();
    let total: f64 = raw.iter().map(|r| r.1).sum();
    raw.into_iter().map(|(x, w)| (x, w / total)).collect()
}

/// Lazily built cumulative transition tables keyed by `(prev, cur)`.
struct TransitionCache<'g> {
    g: &'g TrajectoryGraph,
    p: f64,
    q: f64,
    tables: HashMap<(u32, u32), Box<[f64]>>,
}

const NO_PREV: u32 = u32::MAX;
const CACHE_LIMIT: usize = 1 << 20;

impl<'g> TransitionCache<'g> {
    fn next(&mut self, prev: Option<NodeId>, cur: NodeId, rng: &mut impl Rng) -> NodeId {
        let neighbors = self.g.neighbors(cur);
        let key = (prev.map_or(NO_PREV, |t| t as u32), cur as u32);
        if self.tables.len() >= CACHE_LIMIT && !self.tables.contains_key(&key) {
            self.tables.clear();
        }
        let (g, p, q) = (self.g, self.p, self.q);
        let cum = self.tables.entry(key).or_insert_with(|| {
            let mut acc = 0.0;
            neighbors
                .iter()
                .map(|&(x, w)| {
                    acc += w * bias(g, prev, x, p, q);
                    acc
                })
                .collect()
        });
        let total = *cum.last().expect("caller checks for neighbors");
        let u = rng.gen::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        neighbors[idx].0
    }
}

/// `walks_per_node` walks from every node. Walk `r` from node `s` lands at
/// index `r * n + s` and uses its own RNG stream seeded by `(seed, s, r)`.
pub fn generate_walks(g: &TrajectoryGraph, cfg: &WalkConfig) -> Result<Vec<Vec<NodeId>>> {
    cfg.validate()?;
    let n = g.node_count();
    if n >= NO_PREV as usize {
        return Err(Error::Validation(format!("graph too large for walk tables ({n} nodes)")));
    }
    let walks = map_range_init(
        cfg.exec,
        n * cfg.walks_per_node,
        || TransitionCache { g, p: cfg.p, q: cfg.q, tables: HashMap::new() },
        |cache, idx| {
            let (round, start) = (idx / n, idx % n);
            let mut rng = rng_for(&[cfg.seed, start as u64, round as u64]);
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            let mut prev = None;
            while walk.len() < cfg.walk_length {
                let cur = *walk.last().unwrap();
                if g.neighbors(cur).is_empty() {
                    break;
                }
                let next = cache.next(prev, cur, &mut rng);
                prev = Some(cur);
                walk.push(next);
            }
            walk
        },
    );
    Ok(walks)
}

/// One walk per line, node ids separated by spaces.
pub fn write_walks(walks: &[Vec<NodeId>], path: &Path) -> Result<()> {
    let mut s = String::new();
    for w in walks {
        for (i, v) in w.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeKind};

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> TrajectoryGraph {
        TrajectoryGraph::from_edges(n, edges.iter().map(|&(u, v, weight)| Edge { u, v, weight, kind: EdgeKind::Step }))
            .unwrap()
    }

    #[test]
    fn walk_count_and_edges_valid() {
        let g = graph(5, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.0), (1, 3, 1.0)]);
        let cfg = WalkConfig { walks_per_node: 3, walk_length: 12, p: 0.5, q: 2.0, seed: 9, ..Default::default() };
        let walks = generate_walks(&g, &cfg).unwrap();
        assert_eq!(walks.len(), 3 * 5);
        for w in &walks {
            for pair in w.windows(2) {
                assert!(g.has_edge(pair[0], pair[1]));
            }
        }
        // node 4 is isolated
        assert!(walks.iter().filter(|w| w[0] == 4).all(|w| w.len() == 1));
        assert_eq!(walks, generate_walks(&g, &WalkConfig { exec: Exec::Sequential, ..cfg }).unwrap());
    }

    #[test]
    fn unit_bias_is_first_order_walk() {
        // from node 0 with weights 1, 2, 5
        let g = graph(4, &[(0, 1, 1.0), (0, 2, 2.0), (0, 3, 5.0), (1, 2, 1.0)]);
        let mut cache = TransitionCache { g: &g, p: 1.0, q: 1.0, tables: HashMap::new() };
        let mut rng = rng_for(&[1]);
        let mut counts = [0usize; 4];
        let steps = 100_000;
        for i in 0..steps {
            let prev = [None, Some(1), Some(2), Some(3)][i % 4];
            counts[cache.next(prev, 0, &mut rng)] += 1;
        }
        for (x, expect) in [(1, 1.0 / 8.0), (2, 2.0 / 8.0), (3, 5.0 / 8.0)] {
            let freq = counts[x] as f64 / steps as f64;
            assert!((freq - expect).abs() < 0.02, "node {x}: {freq} vs {expect}");
        }
    }

    #[test]
    fn extreme_p_q_on_a_path_moves_forward() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let probs = transition_probabilities(&g, Some(0), 1, 1e12, 1e6);
        assert!(probs.iter().find(|p| p.0 == 2).unwrap().1 > 0.999_99);
        let mut cache = TransitionCache { g: &g, p: 1e12, q: 1e6, tables: HashMap::new() };
        let mut rng = rng_for(&[2]);
        assert!((0..1000).all(|_| cache.next(Some(0), 1, &mut rng) == 2));
    }

    #[test]
    fn sampler_matches_exact_distribution() {
        // triangle 0-1-2 plus pendant 3 on node 1; walker at 1 arrived from 0
        let g = graph(4, &[(0, 1, 1.0), (1, 2, 3.0), (0, 2, 1.0), (1, 3, 2.0)]);
        let (p, q) = (2.0, 0.5);
        let exact = transition_probabilities(&g, Some(0), 1, p, q);
        // hand values: 0 -> 1/p * 1 = 0.5, 2 -> 1 * 3 = 3, 3 -> 1/q * 2 = 4
        let hand = [(0, 0.5 / 7.5), (2, 3.0 / 7.5), (3, 4.0 / 7.5)];
        for ((x, pr), (hx, hp)) in exact.iter().zip(hand) {
            assert_eq!(*x, hx);
            assert!((pr - hp).abs() < 1e-15);
        }
        let mut cache = TransitionCache { g: &g, p, q, tables: HashMap::new() };
        let mut rng = rng_for(&[3]);
        let draws = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[cache.next(Some(0), 1, &mut rng)] += 1;
        }
        for (x, pr) in exact {
            assert!((counts[x] as f64 / draws as f64 - pr).abs() < 1e-3);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let g = graph(2, &[(0, 1, 1.0)]);
        assert!(generate_walks(&g, &WalkConfig { p: 0.0, ..Default::default() }).is_err());
        assert!(generate_walks(&g, &WalkConfig { walk_length: 0, ..Default::default() }).is_err());
    }
}
