//! Execution strategy and seeded RNG streams.
//!
//! Every data-parallel loop in the crate goes through [`map_range`], which
//! runs on rayon when the `parallel` feature is enabled and `Exec::Parallel`
//! is requested, and on a plain iterator otherwise. Each work item derives its
//! own RNG from `(seed, index)`, so both strategies produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Like [`map_range`] but hands each worker a reusable scratch value.
pub fn map_range_init<T, S, I, F>(exec: Exec, n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect();
    }
    let _ = exec;
    let mut scratch = init();
    (0..n).map(|i| f(&mut scratch, i)).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a list of integers into a seed. Stable across platforms.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of a named substream (e.g. "walks", "kmeans") of a top-level seed.
pub fn named_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name
    let h = name
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3));
    mix_seed(&[seed, h])
}

pub fn rng_for(parts: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn strategies_agree() {
        let f = |i: usize| rng_for(&[7, i as u64]).gen::<u64>();
        assert_eq!(map_range(Exec::Sequential, 100, f), map_range(Exec::Parallel, 100, f));
    }

    #[test]
    fn named_streams_differ() {
        assert_ne!(named_seed(1, "walks"), named_seed(1, "sgns"));
        assert_eq!(named_seed(1, "walks"), named_seed(1, "walks"));
    }
}
