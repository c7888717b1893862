//! The trajectory graph: one node per fingerprint, typed weighted edges.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::{DistanceProvider, DistanceRecord};
use crate::error::{Error, Result};
use crate::exec::{map_range, Exec};
use crate::ingest::{NodeId, RawDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Step,
    Distance,
    Elevation,
    Synthetic,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [EdgeKind::Step, EdgeKind::Distance, EdgeKind::Elevation, EdgeKind::Synthetic];

    fn precedence(self) -> u8 {
        match self {
            EdgeKind::Step => 3,
            EdgeKind::Elevation => 2,
            EdgeKind::Distance => 1,
            EdgeKind::Synthetic => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Step => "step",
            EdgeKind::Distance => "distance",
            EdgeKind::Elevation => "elevation",
            EdgeKind::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EdgeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// Undirected simple graph. Edges are stored with `u < v`, sorted by `(u, v)`;
/// adjacency lists are sorted by neighbor id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGraph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(NodeId, f64)>>,
}

impl TrajectoryGraph {
    /// Build from edges that are already simple (no loops, no duplicates).
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| Edge { u: e.u.min(e.v), v: e.u.max(e.v), ..e })
            .collect();
        edges.sort_by_key(|e| (e.u, e.v));
        for e in &edges {
            if e.v >= n {
                return Err(Error::Integrity(format!("edge ({}, {}) references a node beyond {n}", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(Error::Integrity(format!("self-loop on node {}", e.u)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::Integrity(format!("edge ({}, {}) has weight {}", e.u, e.v, e.weight)));
            }
        }
        if let Some(w) = edges.windows(2).find(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::Integrity(format!("parallel edges between {} and {}", w[0].u, w[0].v)));
        }
        let mut adj = vec![Vec::new(); n];
        for e in &edges {
            adj[e.u].push((e.v, e.weight));
            adj[e.v].push((e.u, e.weight));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(w, _)| w);
        }
        Ok(TrajectoryGraph { n, edges, adj })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, f64)] {
        &self.adj[v]
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let list = &self.adj[u];
        list.binary_search_by_key(&v, |&(w, _)| w).ok().map(|i| list[i].1)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.weight(u, v).is_some()
    }

    pub fn strength(&self, v: NodeId) -> f64 {
        self.adj[v].iter().map(|&(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Component label per node; labels are numbered by lowest member id.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }
}

/// `exp(-meters / sigma)`, in `(0, 1]` and decreasing in `meters`.
pub fn distance_to_weight(meters: f64, sigma: f64) -> Result<f64> {
    if !meters.is_finite() || !sigma.is_finite() {
        return Err(Error::Validation(format!("non-finite kernel input: meters={meters}, sigma={sigma}")));
    }
    if meters < 0.0 || sigma <= 0.0 {
        return Err(Error::Validation(format!("kernel needs meters >= 0 and sigma > 0 (got {meters}, {sigma})")));
    }
    // never let an edge underflow to weight zero
    Ok((-meters / sigma).exp().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationPolicy {
    /// Drop elevation pairs and cut the step chain between them.
    #[default]
    ExcludeSplit,
    /// Drop elevation pairs, keep step chains intact.
    Exclude,
    /// Add elevation pairs as edges of weight `elevation_weight`.
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    /// Kernel bandwidth; the median input distance when unset.
    pub sigma: Option<f64>,
    pub step_default_weight: f64,
    pub elevation_policy: ElevationPolicy,
    pub elevation_weight: f64,
    pub synthetic_weight: f64,
    /// Distances are clamped to this before weighting.
    pub d_max: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            sigma: None,
            step_default_weight: 1.0,
            elevation_policy: ElevationPolicy::ExcludeSplit,
            elevation_weight: 1.0,
            synthetic_weight: 0.01,
            d_max: 50.0,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(s) = self.sigma {
            positive("sigma", s)?;
        }
        positive("step_default_weight", self.step_default_weight)?;
        positive("elevation_weight", self.elevation_weight)?;
        positive("synthetic_weight", self.synthetic_weight)?;
        positive("d_max", self.d_max)
    }
}

/// Median of the clamped distances, falling back to 1.0 when it is zero or
/// there are no distances.
pub fn median_sigma(dists: &[DistanceRecord], d_max: f64) -> f64 {
    let mut v: Vec<f64> = dists.iter().map(|d| d.meters.min(d_max)).collect();
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 0 { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

pub fn build_graph(ds: &RawDataset, dists: &[DistanceRecord], cfg: &BuildConfig) -> Result<TrajectoryGraph> {
    cfg.validate()?;
    let n = ds.len();
    for d in dists {
        if d.id_a >= n || d.id_b >= n {
            return Err(Error::Integrity(format!("distance ({}, {}) references unknown fingerprint", d.id_a, d.id_b)));
        }
        if !(d.meters >= 0.0) {
            return Err(Error::Validation(format!("distance ({}, {}) is negative", d.id_a, d.id_b)));
        }
    }
    for &(a, b) in &ds.elevation_pairs {
        if a >= n || b >= n {
            return Err(Error::Integrity(format!("elevation pair ({a}, {b}) references unknown fingerprint")));
        }
    }
    let sigma = cfg.sigma.unwrap_or_else(|| median_sigma(dists, cfg.d_max));

    // shortest distance per unordered pair
    let mut pair_dist: HashMap<(NodeId, NodeId), f64> = HashMap::with_capacity(dists.len());
    for d in dists.iter().filter(|d| d.id_a != d.id_b) {
        let m = d.meters.min(cfg.d_max);
        pair_dist.entry(key(d.id_a, d.id_b)).and_modify(|x| *x = x.min(m)).or_insert(m);
    }

    let mut edges: BTreeMap<(NodeId, NodeId), (f64, EdgeKind)> = BTreeMap::new();
    let mut insert = |k: (NodeId, NodeId), weight: f64, kind: EdgeKind| {
        edges
            .entry(k)
            .and_modify(|(w, old)| {
                let kind = if kind.precedence() > old.precedence() { kind } else { *old };
                *w = if kind == EdgeKind::Elevation { cfg.elevation_weight } else { w.max(weight) };
                *old = kind;
            })
            .or_insert((weight, kind));
    };

    let cuts: std::collections::HashSet<(NodeId, NodeId)> = match cfg.elevation_policy {
        ElevationPolicy::ExcludeSplit => ds.elevation_pairs.iter().map(|&(a, b)| key(a, b)).collect(),
        _ => Default::default(),
    };
    for (a, b) in ds.consecutive_pairs() {
        let k = key(a, b);
        if a == b || cuts.contains(&k) {
            continue;
        }
        let w = match pair_dist.get(&k) {
            Some(&m) => distance_to_weight(m, sigma)?,
            None => cfg.step_default_weight,
        };
        insert(k, w, EdgeKind::Step);
    }
    let mut dist_pairs: Vec<_> = pair_dist.iter().collect();
    dist_pairs.sort_by_key(|(k, _)| **k);
    for (&k, &m) in dist_pairs {
        insert(k, distance_to_weight(m, sigma)?, EdgeKind::Distance);
    }
    if cfg.elevation_policy == ElevationPolicy::Include {
        for &(a, b) in &ds.elevation_pairs {
            if a != b {
                insert(key(a, b), cfg.elevation_weight, EdgeKind::Elevation);
            }
        }
    }

    TrajectoryGraph::from_edges(n, edges.into_iter().map(|((u, v), (weight, kind))| Edge { u, v, weight, kind }))
}

/// Join components with synthetic edges until the graph is connected.
///
/// Each round links the two largest components (ties: lowest member id) at
/// their closest pair under `provider`, ties broken by the lowest `(a, b)`.
/// The synthetic weight is `cfg.synthetic_weight`, lowered if needed to stay
/// below half of the weakest step edge.
pub fn ensure_connected(
    g: &TrajectoryGraph,
    ds: &RawDataset,
    provider: &dyn DistanceProvider,
    cfg: &BuildConfig,
    exec: Exec,
) -> Result<TrajectoryGraph> {
    if g.node_count() != ds.len() {
        return Err(Error::Integrity(format!("graph has {} nodes, dataset {}", g.node_count(), ds.len())));
    }
    let labels = g.components();
    let count = labels.iter().max().map_or(0, |m| m + 1);
    if count <= 1 {
        return Ok(g.clone());
    }
    let min_step = g.edges().iter().filter(|e| e.kind == EdgeKind::Step).map(|e| e.weight).fold(f64::INFINITY, f64::min);
    let weight = cfg.synthetic_weight.min(0.5 * min_step);

    // members are kept sorted so ties resolve to the lowest ids
    let mut comps: Vec<Vec<NodeId>> = vec![Vec::new(); count];
    for (v, &c) in labels.iter().enumerate() {
        comps[c].push(v);
    }
    let mut edges: Vec<Edge> = g.edges().to_vec();
    while comps.len() > 1 {
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        let b_comp = comps.swap_remove(1);
        let a_comp = comps.swap_remove(0);
        let best = map_range(exec, a_comp.len(), |i| {
            let a = a_comp[i];
            let mut best: Option<(f64, NodeId, NodeId)> = None;
            for &b in &b_comp {
                let d = provider.distance(&ds.fingerprints[a], &ds.fingerprints[b])?;
                let cand = (d, a.min(b), a.max(b));
                if best.map_or(true, |cur| closer(cand, cur)) {
                    best = Some(cand);
                }
            }
            Ok(best)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .reduce(|x, y| if closer(y, x) { y } else { x })
        .expect("components are non-empty");
        edges.push(Edge { u: best.1, v: best.2, weight, kind: EdgeKind::Synthetic });
        let mut merged = a_comp;
        merged.extend(b_comp);
        merged.sort_unstable();
        comps.push(merged);
    }
    TrajectoryGraph::from_edges(g.node_count(), edges)
}

fn closer(a: (f64, NodeId, NodeId), b: (f64, NodeId, NodeId)) -> bool {
    a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))).is_lt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    /// Ten equal-width bins over `(0, 1]`; heavier weights land in the last bin.
    pub weight_histogram: [usize; 10],
    pub kind_counts: BTreeMap<EdgeKind, usize>,
}

pub fn graph_stats(g: &TrajectoryGraph) -> GraphStats {
    let mut hist = [0usize; 10];
    let mut kinds = BTreeMap::new();
    for e in g.edges() {
        let bin = ((e.weight * 10.0).ceil() as usize).clamp(1, 10) - 1;
        hist[bin] += 1;
        *kinds.entry(e.kind).or_insert(0) += 1;
    }
    GraphStats {
        nodes: g.node_count(),
        edges: g.edge_count(),
        components: g.component_count(),
        weight_histogram: hist,
        kind_counts: kinds,
    }
}

/// Edge-list text: a `# nodes N` header, then `u v weight kind` per edge in
/// `(u, v)` order. Weights use shortest round-trip formatting.
pub fn write_edge_list(g: &TrajectoryGraph, path: &Path) -> Result<()> {
    fs::write(path, edge_list_string(g)).map_err(|e| Error::io(path, e))
}

pub fn edge_list_string(g: &TrajectoryGraph) -> String {
    let mut s = format!("# nodes {}\n", g.node_count());
    for e in g.edges() {
        let _ = writeln!(s, "{} {} {} {}", e.u, e.v, e.weight, e.kind.as_str());
    }
    s
}

pub fn read_edge_list(path: &Path) -> Result<TrajectoryGraph> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut n = None;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(count) = rest.trim().strip_prefix("nodes") {
                n = Some(count.trim().parse::<usize>().map_err(|_| Error::parse(&name, i + 1, "bad node count"))?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(&name, i + 1, format!("expected `u v weight kind`, got {line:?}"));
        if f.len() != 4 {
            return Err(bad());
        }
        edges.push(Edge {
            u: f[0].parse().map_err(|_| bad())?,
            v: f[1].parse().map_err(|_| bad())?,
            weight: f[2].parse().map_err(|_| bad())?,
            kind: EdgeKind::parse(f[3]).ok_or_else(bad)?,
        });
    }
    let n = n.unwrap_or_else(|| edges.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0));
    TrajectoryGraph::from_edges(n, edges)
}
