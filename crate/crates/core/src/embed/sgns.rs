use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::exec::{map_range, rng_for, Exec};
use crate::ingest::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Single worker; identical seeds give identical matrices.
    #[default]
    Deterministic,
    /// Lock-free shared updates over walk chunks. Not bit-reproducible.
    Hogwild,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 32,
            window: 10,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            seed: 0,
            mode: TrainMode::Deterministic,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 {
            return Err(Error::Config("dim, window and negatives must be at least 1".into()));
        }
        if !(self.initial_lr > 0.0 && self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return Err(Error::Config(format!(
                "learning rates must satisfy 0 < min_lr <= initial_lr (got {} and {})",
                self.min_lr, self.initial_lr
            )));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Four independent partial sums so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Loss and gradients of one skip-gram pair with negatives:
/// `-ln σ(u_c·v) - Σ ln σ(-u_n·v)`, where `v` is the center's input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_loss_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let s_pos = dot(context, center);
    let g_pos = sigmoid(s_pos) - 1.0;
    let mut loss = softplus(-s_pos);
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context = center.iter().map(|v| g_pos * v).collect();
    let mut d_neg = Vec::with_capacity(negatives.len());
    for u in negatives {
        let s = dot(u, center);
        let g = sigmoid(s);
        loss += softplus(s);
        for (d, x) in d_center.iter_mut().zip(*u) {
            *d += g * x;
        }
        d_neg.push(center.iter().map(|v| g * v).collect());
    }
    SgnsGradient { loss, center: d_center, context: d_context, negatives: d_neg }
}

/// One logistic update of output row `u` against input row `v`; the input
/// gradient is accumulated into `grad`.
#[inline]
fn update_target(v: &[f64], u: &mut [f64], label: f64, lr: f64, grad: &mut [f64]) {
    let g = (label - sigmoid(dot(v, u))) * lr;
    for ((gj, uj), vj) in grad.iter_mut().zip(u.iter_mut()).zip(v) {
        *gj += g * *uj;
        *uj += g * vj;
    }
}

/// One SGD step on a (center, context) pair. Equivalent to subtracting
/// `lr` times [`sgns_loss_grad`] when the negatives are distinct.
#[allow(clippy::too_many_arguments)]
fn sgd_pair(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    grad: &mut [f64],
) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let v = &input[center * dim..(center + 1) * dim];
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        update_target(v, &mut output[target * dim..(target + 1) * dim], label, lr, grad);
    }
    for (x, g) in input[center * dim..(center + 1) * dim].iter_mut().zip(grad.iter()) {
        *x += g;
    }
}

/// Hogwild counterpart of [`sgd_pair`]: rows are copied out of the shared
/// atomics, updated locally and stored back without locking.
#[allow(clippy::too_many_arguments)]
fn sgd_pair_shared(
    input: &[AtomicU64],
    output: &[AtomicU64],
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut [f64],
) {
    let (v, rest) = scratch.split_at_mut(dim);
    let (u, grad) = rest.split_at_mut(dim);
    let load = |m: &[AtomicU64], row: usize, buf: &mut [f64]| {
        for (b, a) in buf.iter_mut().zip(&m[row * dim..(row + 1) * dim]) {
            *b = f64::from_bits(a.load(Ordering::Relaxed));
        }
    };
    let store = |m: &[AtomicU64], row: usize, buf: &[f64]| {
        for (b, a) in buf.iter().zip(&m[row * dim..(row + 1) * dim]) {
            a.store(b.to_bits(), Ordering::Relaxed);
        }
    };
    load(input, center, v);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        load(output, target, u);
        update_target(v, u, label, lr, grad);
        store(output, target, u);
    }
    for (x, g) in v.iter_mut().zip(grad.iter()) {
        *x += g;
    }
    store(input, center, v);
}

/// Unigram counts raised to 0.75, sampled in O(1) with Vose's alias method.
struct NoiseTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let n = counts.len();
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        NoiseTable { prob, alias }
    }

    #[inline]
    fn sample(&self, rng: &mut impl Rng) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

fn contexts_in(len: usize, window: usize) -> u64 {
    (0..len).map(|i| (i.min(window) + (len - 1 - i).min(window)) as u64).sum()
}

/// Train skip-gram with negative sampling over the walk corpus and return the
/// input vectors, one row per node in `0..n_nodes`.
///
/// Input vectors start uniform in `±0.5/dim`, output vectors at zero. The
/// learning rate decays linearly in processed pairs from `initial_lr` to
/// `min_lr`. Zero epochs returns the initialization.
pub fn train_sgns(walks: &[Vec<NodeId>], n_nodes: usize, cfg: &SgnsConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if walks.iter().all(Vec::is_empty) {
        return Err(Error::Precondition("cannot train on an empty walk corpus".into()));
    }
    let mut counts = vec![0u64; n_nodes];
    for &v in walks.iter().flatten() {
        if v >= n_nodes {
            return Err(Error::Validation(format!("walk visits node {v} but only {n_nodes} nodes exist")));
        }
        counts[v] += 1;
    }
    let dim = cfg.dim;
    let mut init_rng = rng_for(&[cfg.seed, 0]);
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..n_nodes * dim).map(|_| init_rng.gen_range(-bound..bound)).collect();
    let mut output = vec![0.0; n_nodes * dim];
    if cfg.epochs == 0 {
        return EmbeddingMatrix::new(n_nodes, dim, input);
    }

    let noise = NoiseTable::new(&counts);
    let per_epoch: u64 = walks.iter().map(|w| contexts_in(w.len(), cfg.window)).sum();
    let total = (per_epoch * cfg.epochs as u64).max(1) as f64;
    let lr_at = |done: u64| cfg.initial_lr - (cfg.initial_lr - cfg.min_lr) * (done as f64 / total).min(1.0);

    match cfg.mode {
        TrainMode::Deterministic => {
            let mut rng = rng_for(&[cfg.seed, 1]);
            let mut grad = vec![0.0; dim];
            let mut negs = Vec::with_capacity(cfg.negatives);
            let mut done = 0u64;
            for _ in 0..cfg.epochs {
                for walk in walks {
                    for (i, &center) in walk.iter().enumerate() {
                        let lo = i.saturating_sub(cfg.window);
                        let hi = (i + cfg.window).min(walk.len() - 1);
                        for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                            if j == i {
                                continue;
                            }
                            negs.clear();
                            for _ in 0..cfg.negatives {
                                let s = noise.sample(&mut rng);
                                if s != context {
                                    negs.push(s);
                                }
                            }
                            sgd_pair(&mut input, &mut output, dim, center, context, &negs, lr_at(done), &mut grad);
                            done += 1;
                        }
                    }
                }
            }
        }
        TrainMode::Hogwild => {
            let inp: Vec<AtomicU64> = input.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
            let out: Vec<AtomicU64> = output.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
            let done = AtomicUsize::new(0);
            let chunk = 256;
            let jobs = walks.len().div_ceil(chunk) * cfg.epochs;
            let per_epoch_chunks = walks.len().div_ceil(chunk);
            map_range(Exec::Parallel, jobs, |job| {
                let (epoch, c) = (job / per_epoch_chunks, job % per_epoch_chunks);
                let mut rng = rng_for(&[cfg.seed, 2, epoch as u64, c as u64]);
                let mut scratch = vec![0.0; 3 * dim];
                let mut negs = Vec::with_capacity(cfg.negatives);
                for walk in &walks[c * chunk..((c + 1) * chunk).min(walks.len())] {
                    for (i, &center) in walk.iter().enumerate() {
                        let lo = i.saturating_sub(cfg.window);
                        let hi = (i + cfg.window).min(walk.len() - 1);
                        let lr = lr_at(done.load(Ordering::Relaxed) as u64);
                        for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                            if j == i {
                                continue;
                            }
                            negs.clear();
                            for _ in 0..cfg.negatives {
                                let s = noise.sample(&mut rng);
                                if s != context {
                                    negs.push(s);
                                }
                            }
                            sgd_pair_shared(&inp, &out, dim, center, context, &negs, lr, &mut scratch);
                        }
                        done.fetch_add(hi - lo, Ordering::Relaxed);
                    }
                }
            });
            input = inp.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        }
    }
    EmbeddingMatrix::new(n_nodes, dim, input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epochs_returns_initialization() {
        let walks = vec![vec![0, 1, 2, 1, 0]];
        let cfg = SgnsConfig { dim: 4, epochs: 0, seed: 11, ..Default::default() };
        let a = train_sgns(&walks, 3, &cfg).unwrap();
        let mut rng = rng_for(&[11, 0]);
        let expect: Vec<f64> = (0..12).map(|_| rng.gen_range(-0.125..0.125)).collect();
        assert_eq!(a.values(), &expect[..]);
        let trained = train_sgns(&walks, 3, &SgnsConfig { epochs: 1, ..cfg }).unwrap();
        assert_ne!(trained, a);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(train_sgns(&[], 3, &SgnsConfig::default()).is_err());
        assert!(train_sgns(&[vec![]], 3, &SgnsConfig::default()).is_err());
        assert!(train_sgns(&[vec![5]], 3, &SgnsConfig::default()).is_err());
    }

    #[test]
    fn deterministic_mode_repeats() {
        let walks: Vec<Vec<usize>> = (0..20).map(|i| (0..15).map(|j| (i * 7 + j * 3) % 10).collect()).collect();
        let cfg = SgnsConfig { dim: 8, epochs: 2, seed: 5, ..Default::default() };
        assert_eq!(train_sgns(&walks, 10, &cfg).unwrap(), train_sgns(&walks, 10, &cfg).unwrap());
    }

    #[test]
    fn sgd_step_follows_analytic_gradient() {
        let dim = 3;
        let mut rng = rng_for(&[99]);
        let mut input: Vec<f64> = (0..4 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut output: Vec<f64> = (0..4 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (center, context, negs) = (0usize, 1usize, [2usize, 3]);
        let row = |m: &[f64], i: usize| m[i * dim..(i + 1) * dim].to_vec();
        let (v, u_c, u_a, u_b) = (row(&input, center), row(&output, context), row(&output, 2), row(&output, 3));
        let grad = sgns_loss_grad(&v, &u_c, &[&u_a, &u_b]);
        let lr = 0.1;
        let mut scratch = vec![0.0; dim];
        sgd_pair(
            &mut input,
            &mut output,
            dim,
            center,
            context,
            &negs,
            lr,
            &mut scratch,
        );
        let close = |a: &[f64], b: Vec<f64>| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&row(&input, center), v.iter().zip(&grad.center).map(|(p, g)| p - lr * g).collect()));
        assert!(close(&row(&output, context), u_c.iter().zip(&grad.context).map(|(p, g)| p - lr * g).collect()));
        assert!(close(&row(&output, 3), u_b.iter().zip(&grad.negatives[1]).map(|(p, g)| p - lr * g).collect()));
    }

    #[test]
    fn hogwild_produces_finite_matrix() {
        let walks: Vec<Vec<usize>> = (0..600).map(|i| (0..10).map(|j| (i + j) % 12).collect()).collect();
        let cfg = SgnsConfig { dim: 4, epochs: 1, mode: TrainMode::Hogwild, ..Default::default() };
        let m = train_sgns(&walks, 12, &cfg).unwrap();
        assert_eq!(m.rows(), 12);
    }

    #[test]
    fn alias_table_matches_unigram_power() {
        let counts = [1u64, 16, 0, 81, 2];
        let table = NoiseTable::new(&counts);
        let mut rng = rng_for(&[4]);
        let mut hits = [0usize; 5];
        let draws = 200_000;
        for _ in 0..draws {
            hits[table.sample(&mut rng)] += 1;
        }
        let w: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = w.iter().sum();
        for (h, w) in hits.iter().zip(&w) {
            assert!((*h as f64 / draws as f64 - w / total).abs() < 0.005, "{hits:?}");
        }
        assert_eq!(hits[2], 0);
    }

    #[test]
    fn context_counting() {
        assert_eq!(contexts_in(1, 3), 0);
        assert_eq!(contexts_in(3, 1), 4);
        assert_eq!(contexts_in(4, 10), 12);
    }
}
