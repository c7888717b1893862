use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, rng_for, Exec};

/// What a bootstrap resample draws with replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    #[default]
    Fingerprint,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { resamples: 1000, level: 0.95, seed: 0, exec: Exec::default() }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::Config("bootstrap needs at least one resample".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    /// Metric on the original sample.
    pub estimate: f64,
    /// Mean of the metric over resamples.
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Percentile bootstrap of `metric` over resampled units.
///
/// Each unit is a group of sample indices; a resample draws `units.len()`
/// units with replacement and passes the concatenated indices to `metric`.
/// Resample `b` uses its own RNG stream `(seed, b)`.
pub fn bootstrap<F>(units: &[Vec<usize>], cfg: &BootstrapConfig, metric: F) -> Result<BootstrapCi>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    cfg.validate()?;
    if units.is_empty() || units.iter().all(|u| u.is_empty()) {
        return Err(Error::Precondition("bootstrap over an empty sample".into()));
    }
    let all: Vec<usize> = units.iter().flatten().copied().collect();
    let estimate = metric(&all);
    let mut stats = map_range(cfg.exec, cfg.resamples, |b| {
        let mut rng = rng_for(&[cfg.seed, b as u64]);
        let mut idx = Vec::with_capacity(all.len());
        for _ in 0..units.len() {
            idx.extend_from_slice(&units[rng.gen_range(0..units.len())]);
        }
        metric(&idx)
    });
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - cfg.level;
    Ok(BootstrapCi { estimate, mean, lo: quantile(&stats, alpha / 2.0), hi: quantile(&stats, 1.0 - alpha / 2.0) })
}

/// Bootstrap interval of the fraction of `true` flags, resampling flags.
pub fn bootstrap_ci(flags: &[bool], cfg: &BootstrapConfig) -> Result<BootstrapCi> {
    let units: Vec<Vec<usize>> = (0..flags.len()).map(|i| vec![i]).collect();
    bootstrap(&units, cfg, |idx| idx.iter().filter(|&&i| flags[i]).count() as f64 / idx.len() as f64)
}

/// Exact two-sided McNemar test on paired correctness flags.
///
/// With `b` = A right/B wrong and `c` = A wrong/B right, returns
/// `min(1, 2 P(X <= min(b, c)))` for `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Precondition(format!("McNemar on {} vs {} paired samples", a.len(), b.len())));
    }
    let only_a = a.iter().zip(b).filter(|&(&x, &y)| x && !y).count() as u64;
    let only_b = a.iter().zip(b).filter(|&(&x, &y)| !x && y).count() as u64;
    let n = only_a + only_b;
    if n == 0 {
        return Ok(1.0);
    }
    let k = only_a.min(only_b);
    // log-space pmf recursion keeps large n from underflowing
    let mut log_pmf = n as f64 * 0.5f64.ln();
    let mut terms = vec![log_pmf];
    for i in 0..k {
        log_pmf += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        terms.push(log_pmf);
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = top.exp() * terms.iter().map(|t| (t - top).exp()).sum::<f64>();
    Ok((2.0 * tail).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(resamples: usize, seed: u64) -> BootstrapConfig {
        BootstrapConfig { resamples, seed, ..Default::default() }
    }

    #[test]
    fn degenerate_flags() {
        let ci = bootstrap_ci(&[true; 50], &cfg(200, 1)).unwrap();
        assert_eq!((ci.mean, ci.lo, ci.hi), (1.0, 1.0, 1.0));
        let ci = bootstrap_ci(&[false; 50], &cfg(200, 1)).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(bootstrap_ci(&[], &cfg(10, 0)).is_err());
    }

    #[test]
    fn seeded_and_strategy_independent() {
        let flags: Vec<bool> = (0..300).map(|i| i % 3 != 0).collect();
        let a = bootstrap_ci(&flags, &cfg(500, 9)).unwrap();
        let b = bootstrap_ci(&flags, &BootstrapConfig { exec: Exec::Sequential, ..cfg(500, 9) }).unwrap();
        assert_eq!(a, b);
        assert!(a.lo <= a.estimate && a.estimate <= a.hi);
    }

    #[test]
    fn resample_mean_converges() {
        let flags: Vec<bool> = (0..400).map(|i| (i * 7919) % 13 < 5).collect();
        let ci = bootstrap_ci(&flags, &cfg(10_000, 3)).unwrap();
        assert!((ci.mean - ci.estimate).abs() < 0.005, "{ci:?}");
    }

    #[test]
    fn trajectory_units_keep_groups_together() {
        // two units with opposite outcomes: every resample is 0, 0.5 or 1
        let flags = [true, true, false, false];
        let units = vec![vec![0, 1], vec![2, 3]];
        let ci = bootstrap(&units, &cfg(100, 0), |idx| idx.iter().filter(|&&i| flags[i]).count() as f64 / idx.len() as f64)
            .unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 1.0));
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 10.0, 20.0];
        assert_eq!(quantile(&xs, 0.25), 5.0);
        assert_eq!(quantile(&xs, 1.0), 20.0);
    }

    #[test]
    fn mcnemar_exact_tail() {
        let a = [true; 10];
        let b = [false; 10];
        let p = mcnemar(&a, &b).unwrap();
        assert!((p - 2.0 * 0.5f64.powi(10)).abs() < 1e-15);
        assert_eq!(mcnemar(&b, &a).unwrap(), p);
        assert_eq!(mcnemar(&a, &a).unwrap(), 1.0);
        assert!(mcnemar(&a, &b[..3]).is_err());
    }

    #[test]
    fn mcnemar_balanced_caps_at_one() {
        let a = [true, false, true, false];
        let b = [false, true, false, true];
        assert_eq!(mcnemar(&a, &b).unwrap(), 1.0);
    }
}
