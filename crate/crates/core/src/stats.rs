//! Paired bootstrap significance testing and domain-improvement metrics.
//!
//! Resampling is over items: each replicate draws `n` paired differences
//! with replacement and records their mean. The confidence interval is the
//! percentile interval of the replicate means (linear interpolation between
//! order statistics). The two-sided p-value is
//! `2 * min(P(mean* <= 0), P(mean* >= 0))`, left unclamped by default so a
//! comparison of identical runs reports `2.0000`.
//!
//! Replicates are generated in fixed chunks of [`CHUNK`] resamples, chunk
//! `c` drawing from ChaCha8 stream `c` of the configured seed. Results are
//! therefore bit-identical whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluation::RunSummary;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub ci_level: f64,
    /// Clamp the doubled one-sided p-value at 1.
    pub clamp_p: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: DEFAULT_RESAMPLES,
            seed: 42,
            ci_level: DEFAULT_CI_LEVEL,
            clamp_p: false,
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapConfig {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// `100 * (mean(a) - mean(b))`.
    pub delta_pp: f64,
    pub ci_low_pp: f64,
    pub ci_high_pp: f64,
    /// May reach 2 unless clamping is requested.
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired samples are empty")]
    EmptyInput,
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
    #[error("domain sets differ between runs: {0}")]
    DomainSetMismatch(String),
}

/// Paired bootstrap over binary correctness, reported in percentage points.
pub fn paired_bootstrap(
    a: &[bool],
    b: &[bool],
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult, StatsError> {
    let to_f = |v: &[bool]| {
        v.iter()
            .map(|&x| f64::from(u8::from(x)))
            .collect::<Vec<_>>()
    };
    paired_bootstrap_scores(&to_f(a), &to_f(b), cfg)
}

/// Paired bootstrap over per-item scores in `[0, 1]` (partial credit
/// allowed), reported in percentage points.
pub fn paired_bootstrap_scores(
    a: &[f64],
    b: &[f64],
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if cfg.resamples == 0 {
        return Err(StatsError::InvalidConfig("resamples must be >= 1".into()));
    }
    if !(cfg.ci_level > 0.0 && cfg.ci_level < 1.0) {
        return Err(StatsError::InvalidConfig(format!(
            "ci_level must be in (0, 1), got {}",
            cfg.ci_level
        )));
    }

    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let delta = diffs.iter().sum::<f64>() / n as f64;

    let mut means = resample_means(&diffs, cfg.resamples, cfg.seed);

    // Binary differences make every replicate mean k/n exactly, so ties at
    // zero are counted exactly.
    let at_or_below = means.iter().filter(|&&m| m <= 0.0).count();
    let at_or_above = means.iter().filter(|&&m| m >= 0.0).count();
    let b_f = cfg.resamples as f64;
    let mut p_value = 2.0 * (at_or_below as f64 / b_f).min(at_or_above as f64 / b_f);
    if cfg.clamp_p {
        p_value = p_value.min(1.0);
    }

    means.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.ci_level) / 2.0;
    let ci_low = percentile_sorted(&means, tail);
    let ci_high = percentile_sorted(&means, 1.0 - tail);

    Ok(BootstrapResult {
        delta_pp: delta * 100.0,
        ci_low_pp: ci_low * 100.0,
        ci_high_pp: ci_high * 100.0,
        p_value,
        significant: p_value < SIGNIFICANCE_LEVEL,
    })
}

/// Replicate means in generation order.
pub fn resample_means(diffs: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let n = diffs.len();
    let mut out = vec![0.0; resamples];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk, slot)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            for m in slot.iter_mut() {
                let mut sum = 0.0;
                for _ in 0..n {
                    sum += diffs[rng.gen_range(0..n)];
                }
                *m = sum / n as f64;
            }
        });
    out
}

/// Linear-interpolation percentile (`q` in [0, 1]) of sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainImprovement {
    /// Share of domains whose gain reaches the threshold.
    pub proportion: f64,
    pub mean_gain_pp: f64,
    pub domains: usize,
}

/// Tolerance when comparing a gain against the threshold, so that a gain
/// computed as `80.52 - 79.52` still counts as one full point.
const GAIN_EPS: f64 = 1e-9;

pub fn domain_improvement_from_gains(gains_pp: &[f64], threshold_pp: f64) -> DomainImprovement {
    let k = gains_pp.len();
    if k == 0 {
        return DomainImprovement {
            proportion: 0.0,
            mean_gain_pp: 0.0,
            domains: 0,
        };
    }
    let improved = gains_pp
        .iter()
        .filter(|&&g| g >= threshold_pp - GAIN_EPS)
        .count();
    DomainImprovement {
        proportion: improved as f64 / k as f64,
        mean_gain_pp: gains_pp.iter().sum::<f64>() / k as f64,
        domains: k,
    }
}

/// Per-domain gains of `run` over `baseline`.
pub fn domain_improvement_metrics(
    run: &RunSummary,
    baseline: &RunSummary,
    threshold_pp: f64,
) -> Result<DomainImprovement, StatsError> {
    let run_domains: Vec<_> = run.per_domain.keys().collect();
    let base_domains: Vec<_> = baseline.per_domain.keys().collect();
    if run_domains != base_domains {
        return Err(StatsError::DomainSetMismatch(format!(
            "{run_domains:?} vs {base_domains:?}"
        )));
    }
    let gains: Vec<f64> = run
        .per_domain
        .iter()
        .map(|(d, s)| s.accuracy_pct - baseline.per_domain[d].accuracy_pct)
        .collect();
    Ok(domain_improvement_from_gains(&gains, threshold_pp))
}
