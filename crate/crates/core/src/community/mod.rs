//! Community-detection baselines that work directly on the trajectory graph.

mod fast_greedy;
mod leiden;
mod louvain;
mod lpa;
mod modularity;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TrajectoryGraph;
use crate::ingest::NodeId;

pub use fast_greedy::fast_greedy;
pub use leiden::leiden;
pub use louvain::louvain;
pub use lpa::label_propagation;
pub use modularity::{modularity, modularity_with_resolution};

/// Dense node → community labelling; ids are `0..count`, numbered by first
/// appearance in node order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    count: usize,
}

impl Partition {
    pub fn from_labels(labels: &[usize]) -> Self {
        let labels = crate::cluster::canonical_labels(labels);
        let count = labels.iter().max().map_or(0, |m| m + 1);
        Partition { labels, count }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { labels: (0..n).collect(), count: n }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn communities(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.count];
        for (v, &c) in self.labels.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// `node_id,community_id` with a header, sorted by node id.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,community_id\n");
        for (v, c) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "{v},{c}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("node_id")) {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::parse(&name, i + 1, "expected node_id,community_id"))?;
            let v = a.trim().parse().map_err(|_| Error::parse(&name, i + 1, "bad node id"))?;
            let c = b.trim().parse().map_err(|_| Error::parse(&name, i + 1, "bad community id"))?;
            rows.push((v, c));
        }
        rows.sort_unstable();
        if rows.iter().enumerate().any(|(i, &(v, _))| v != i) {
            return Err(Error::Format { file: name, msg: "node ids must cover 0..n exactly once".into() });
        }
        Ok(Partition::from_labels(&rows.into_iter().map(|(_, c)| c).collect::<Vec<_>>()))
    }
}

/// Split every community into its connected components (within `g`).
pub(crate) fn split_disconnected(g: &TrajectoryGraph, labels: &[usize]) -> Partition {
    let n = g.node_count();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if out[s] != usize::MAX {
            continue;
        }
        out[s] = next;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &(w, _) in g.neighbors(v) {
                if out[w] == usize::MAX && labels[w] == labels[v] {
                    out[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    Partition::from_labels(&out)
}

/// Weighted graph with self-loops used by the multi-level optimizers.
/// `strength[i]` counts a self-loop of weight `s` as `2s`.
#[derive(Debug, Clone)]
pub(crate) struct WorkGraph {
    pub adj: Vec<Vec<(usize, f64)>>,
    pub self_loop: Vec<f64>,
    pub strength: Vec<f64>,
    /// Sum of strengths, i.e. twice the total edge weight.
    pub m2: f64,
}

impl WorkGraph {
    pub fn from_graph(g: &TrajectoryGraph) -> Self {
        let n = g.node_count();
        let adj: Vec<Vec<(usize, f64)>> = (0..n).map(|v| g.neighbors(v).to_vec()).collect();
        let strength: Vec<f64> = adj.iter().map(|l| l.iter().map(|e| e.1).sum()).collect();
        let m2 = strength.iter().sum();
        WorkGraph { adj, self_loop: vec![0.0; n], strength, m2 }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapse nodes by `comm` (dense, `0..count`).
    pub fn aggregate(&self, comm: &[usize], count: usize) -> WorkGraph {
        let mut self_loop = vec![0.0; count];
        let mut strength = vec![0.0; count];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for v in 0..self.len() {
            let cv = comm[v];
            self_loop[cv] += self.self_loop[v];
            strength[cv] += self.strength[v];
            for &(u, w) in &self.adj[v] {
                let cu = comm[u];
                if cu == cv {
                    // each internal edge is seen from both ends
                    self_loop[cv] += 0.5 * w;
                } else {
                    *maps[cv].entry(cu).or_insert(0.0) += w;
                }
            }
        }
        WorkGraph { adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(), self_loop, strength, m2: self.m2 }
    }
}

pub(crate) fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let d = crate::cluster::canonical_labels(labels);
    let count = d.iter().max().map_or(0, |m| m + 1);
    (d, count)
}

pub(crate) fn shuffled(n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use crate::graph::{Edge, EdgeKind, TrajectoryGraph};

    pub fn from(n: usize, edges: &[(usize, usize, f64)]) -> TrajectoryGraph {
        TrajectoryGraph::from_edges(n, edges.iter().map(|&(u, v, weight)| Edge { u, v, weight, kind: EdgeKind::Step }))
            .unwrap()
    }

    /// Two 5-cliques {0..5} and {5..10} joined by the edge 4-5.
    pub fn two_cliques() -> TrajectoryGraph {
        let mut e = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    e.push((base + i, base + j, 1.0));
                }
            }
        }
        e.push((4, 5, 1.0));
        from(10, &e)
    }

    pub fn is_connected_within(g: &TrajectoryGraph, members: &[usize]) -> bool {
        let set: std::collections::HashSet<usize> = members.iter().copied().collect();
        let mut seen = std::collections::HashSet::from([members[0]]);
        let mut stack = vec![members[0]];
        while let Some(v) = stack.pop() {
            for &(w, _) in g.neighbors(v) {
                if set.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == members.len()
    }
}
