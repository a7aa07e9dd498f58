//! Evaluation metrics: mean asymptotic reward, convergence pace, unsafe
//! percentages, confidence intervals over seeds, Pareto labels across
//! methods, and exploration summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::non_dominated_sort;
use crate::policy::BehaviorSpace;
use crate::trace::Trace;

/// z-score of the two-sided 90% Gaussian interval.
pub const Z90: f64 = 1.645;

pub const REWARD_BUCKETS: usize = 10;

/// Per-epoch summaries of the planned epochs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSeries {
    /// Mean per-step reward of each epoch.
    pub mr: Vec<f64>,
    /// Percentage of unsafe steps in each epoch.
    pub p_unsafe: Vec<f64>,
    pub episode_len: usize,
    /// Real-system steps spent before the first planned epoch.
    pub initial_steps: usize,
}

impl EpochSeries {
    /// Series over every epoch of `trace` after the first (the random
    /// warm-up episode).
    pub fn from_trace(trace: &Trace, episode_len: usize) -> Self {
        let initial_steps = if trace.n_epochs() > 0 { trace.epoch(0).len() } else { 0 };
        let mut mr = Vec::new();
        let mut p = Vec::new();
        for ep in trace.epochs().skip(1) {
            let n = ep.len().max(1) as f64;
            mr.push(ep.iter().map(|t| t.r).sum::<f64>() / n);
            let costs: Vec<u8> = ep.iter().map(|t| t.c).collect();
            p.push(p_unsafe(&costs));
        }
        Self {
            mr,
            p_unsafe: p,
            episode_len,
            initial_steps,
        }
    }

    pub fn len(&self) -> usize {
        self.mr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mr.is_empty()
    }
}

/// Mean of the last `⌈N/2⌉` epochs.
pub fn mar(mr: &[f64]) -> Result<f64> {
    if mr.is_empty() {
        return Err(Error::EmptySeries("mean asymptotic reward"));
    }
    let tail = &mr[mr.len() / 2..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Real-system steps until the first epoch whose mean reward reaches
/// `threshold`: `τ·T + T₀` for 0-based epoch `τ`.
pub fn mrcp(mr: &[f64], threshold: f64, episode_len: usize, initial_steps: usize) -> Option<usize> {
    mr.iter()
        .position(|&r| r >= threshold)
        .map(|tau| tau * episode_len + initial_steps)
}

/// Percentage of unsafe steps in one epoch.
pub fn p_unsafe(costs: &[u8]) -> f64 {
    if costs.is_empty() {
        return 0.0;
    }
    100.0 * costs.iter().map(|&c| f64::from(c)).sum::<f64>() / costs.len() as f64
}

/// Run-level unsafe percentage: mean over epochs.
pub fn p_unsafe_run(per_epoch: &[f64]) -> Result<f64> {
    if per_epoch.is_empty() {
        return Err(Error::EmptySeries("p(unsafe)"));
    }
    Ok(per_epoch.iter().sum::<f64>() / per_epoch.len() as f64)
}

/// Mean unsafe percentage over the first `⌈0.15·N⌉` epochs.
pub fn p_unsafe_transient(per_epoch: &[f64]) -> Result<f64> {
    if per_epoch.is_empty() {
        return Err(Error::EmptySeries("transient p(unsafe)"));
    }
    // 0.15 is not exact in binary; compute the ceiling in integers.
    let n = per_epoch.len();
    let k = (15 * n).div_ceil(100).max(1);
    p_unsafe_run(&per_epoch[..k])
}

/// Front index per method for `(MAR, p_unsafe)` pairs, maximizing MAR and
/// minimizing p_unsafe. 0 is the best front.
pub fn method_pareto_labels(summaries: &[(f64, f64)]) -> Vec<usize> {
    let points: Vec<(f64, f64)> = summaries.iter().map(|&(mar, p)| (p, mar)).collect();
    let mut labels = vec![0; summaries.len()];
    for (front, members) in non_dominated_sort(&points).into_iter().enumerate() {
        for i in members {
            labels[i] = front;
        }
    }
    labels
}

/// `mean ± half_width` with `half_width = 1.645·s/√n` (sample std; zero for
/// a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
}

pub fn ci90(values: &[f64]) -> Option<Interval> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let half_width = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Z90 * var.sqrt() / n.sqrt()
    };
    Some(Interval { mean, half_width })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub epochs: usize,
    pub mar: Option<f64>,
    pub mrcp: Option<usize>,
    pub p_unsafe: Option<f64>,
    pub p_unsafe_transient: Option<f64>,
}

impl SeedMetrics {
    pub fn compute(seed: u64, series: &EpochSeries, reward_threshold: f64) -> Self {
        Self {
            seed,
            epochs: series.len(),
            mar: mar(&series.mr).ok(),
            mrcp: mrcp(&series.mr, reward_threshold, series.episode_len, series.initial_steps),
            p_unsafe: p_unsafe_run(&series.p_unsafe).ok(),
            p_unsafe_transient: p_unsafe_transient(&series.p_unsafe).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrcpSummary {
    /// Over the seeds that reached the threshold.
    pub steps: Option<Interval>,
    pub reached: usize,
    pub not_reached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_seeds: usize,
    pub reward_threshold: f64,
    pub mar: Option<Interval>,
    pub mrcp: MrcpSummary,
    pub p_unsafe: Option<Interval>,
    pub p_unsafe_transient: Option<Interval>,
    pub per_seed: Vec<SeedMetrics>,
}

impl MetricsReport {
    pub fn aggregate(per_seed: Vec<SeedMetrics>, reward_threshold: f64) -> Self {
        let collect = |f: fn(&SeedMetrics) -> Option<f64>| -> Vec<f64> { per_seed.iter().filter_map(f).collect() };
        let mrcp_steps: Vec<f64> = per_seed.iter().filter_map(|s| s.mrcp.map(|v| v as f64)).collect();
        Self {
            n_seeds: per_seed.len(),
            reward_threshold,
            mar: ci90(&collect(|s| s.mar)),
            mrcp: MrcpSummary {
                steps: ci90(&mrcp_steps),
                reached: mrcp_steps.len(),
                not_reached: per_seed.len() - mrcp_steps.len(),
            },
            p_unsafe: ci90(&collect(|s| s.p_unsafe)),
            p_unsafe_transient: ci90(&collect(|s| s.p_unsafe_transient)),
            per_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSummary {
    pub grid: usize,
    /// Visit counts, row-major `grid × grid`.
    pub coverage: Vec<u64>,
    pub reward_bins: [u64; REWARD_BUCKETS],
    pub reward_bounds: (f64, f64),
}

pub fn reward_bucket(r: f64, (lo, hi): (f64, f64)) -> usize {
    let r = if r.is_nan() { lo } else { r.clamp(lo, hi) };
    let idx = (REWARD_BUCKETS as f64 * (r - lo) / (hi - lo)).floor() as usize;
    idx.min(REWARD_BUCKETS - 1)
}

/// Visit counts of every reached real state over the behavior grid, and a
/// histogram of the rewards received there.
pub fn exploration_summary(trace: &Trace, space: &BehaviorSpace, reward_bounds: (f64, f64)) -> ExplorationSummary {
    let mut coverage = vec![0u64; space.n_cells()];
    let mut reward_bins = [0u64; REWARD_BUCKETS];
    for t in trace.transitions() {
        let b = space.clamp(space.project(&t.s_next));
        coverage[space.flat(space.cell(b))] += 1;
        reward_bins[reward_bucket(t.r, reward_bounds)] += 1;
    }
    ExplorationSummary {
        grid: space.grid,
        coverage,
        reward_bins,
        reward_bounds,
    }
}
