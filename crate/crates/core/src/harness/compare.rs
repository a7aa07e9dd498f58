//! Loading finished runs back from disk, and the comparison and exploration
//! reports built from them without re-simulating.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, Profile};
use super::persist::{read_trace, CONFIG_FILE, STATUS_FILE, TRACE_FILE};
use super::run::{seed_dir, SeedStatus};
use crate::error::{Error, Result};
use crate::metrics::{
    exploration_summary, method_pareto_labels, EpochSeries, ExplorationSummary, Interval, MetricsReport, SeedMetrics,
};
use crate::trace::Trace;

#[derive(Debug, Clone)]
pub struct LoadedSeed {
    pub seed: u64,
    pub dir: PathBuf,
    pub trace: Trace,
}

/// A run directory read back from disk: either an experiment directory with
/// `seed-<S>` subdirectories or a single seed directory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub seeds: Vec<LoadedSeed>,
    /// Seeds that are configured but absent or failed, with the reason.
    pub missing: Vec<(u64, String)>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let config_path = dir.join(CONFIG_FILE);
    if !config_path.exists() {
        return Err(Error::Missing(config_path));
    }
    let config = ExperimentConfig::load(&config_path, Profile::Desk)?;
    let mut seeds = Vec::new();
    let mut missing = Vec::new();
    if dir.join(TRACE_FILE).exists() {
        let seed = config.seeds[0];
        seeds.push(LoadedSeed {
            seed,
            dir: dir.to_path_buf(),
            trace: read_trace(&dir.join(TRACE_FILE))?,
        });
        return Ok(LoadedRun {
            dir: dir.to_path_buf(),
            config,
            seeds,
            missing,
        });
    }
    for &seed in &config.seeds {
        let sdir = seed_dir(dir, seed);
        let status_path = sdir.join(STATUS_FILE);
        if let Ok(text) = std::fs::read_to_string(&status_path) {
            let status: SeedStatus = serde_json::from_str(&text)?;
            if !status.ok {
                missing.push((seed, status.error.unwrap_or_else(|| "failed".into())));
                continue;
            }
        }
        match read_trace(&sdir.join(TRACE_FILE)) {
            Ok(trace) => seeds.push(LoadedSeed { seed, dir: sdir, trace }),
            Err(e) => missing.push((seed, e.to_string())),
        }
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config,
        seeds,
        missing,
    })
}

impl LoadedRun {
    pub fn seed_metrics(&self) -> Vec<SeedMetrics> {
        let spec = self.config.env.build().spec().clone();
        let threshold = self.config.reward_threshold(&spec);
        self.seeds
            .iter()
            .map(|s| SeedMetrics::compute(s.seed, &EpochSeries::from_trace(&s.trace, spec.episode_len), threshold))
            .collect()
    }

    pub fn metrics(&self) -> MetricsReport {
        let spec = self.config.env.build().spec().clone();
        MetricsReport::aggregate(self.seed_metrics(), self.config.reward_threshold(&spec))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub run: String,
    pub env: String,
    pub method: String,
    pub report: MetricsReport,
    /// Optimality front within the same environment; 0 is best.
    pub front: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<MethodSummary>,
    /// Directories or seeds that could not be used, with the reason.
    pub missing: Vec<(String, String)>,
}

/// Aggregates every run directory; unreadable ones are listed as missing.
pub fn compare(dirs: &[PathBuf]) -> Comparison {
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for dir in dirs {
        let name = dir.display().to_string();
        match load_run(dir) {
            Ok(run) => {
                for (seed, why) in &run.missing {
                    missing.push((format!("{name} seed {seed}"), why.clone()));
                }
                if run.seeds.is_empty() {
                    missing.push((name, "no completed seeds".into()));
                    continue;
                }
                rows.push(MethodSummary {
                    run: name,
                    env: run.config.env.name().to_string(),
                    method: run.config.planner.kind.name().to_string(),
                    report: run.metrics(),
                    front: None,
                });
            }
            Err(e) => missing.push((name, e.to_string())),
        }
    }
    let mut by_env: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row.report.mar.is_some() && row.report.p_unsafe.is_some() {
            by_env.entry(row.env.clone()).or_default().push(i);
        }
    }
    for members in by_env.values() {
        let points: Vec<(f64, f64)> = members
            .iter()
            .map(|&i| {
                let r = &rows[i].report;
                (r.mar.expect("filtered").mean, r.p_unsafe.expect("filtered").mean)
            })
            .collect();
        for (&i, label) in members.iter().zip(method_pareto_labels(&points)) {
            rows[i].front = Some(label);
        }
    }
    Comparison { rows, missing }
}

fn mean(i: Option<Interval>) -> String {
    i.map(|v| format!("{}", v.mean)).unwrap_or_default()
}

fn half(i: Option<Interval>) -> String {
    i.map(|v| format!("{}", v.half_width)).unwrap_or_default()
}

fn pm(i: Option<Interval>, digits: usize) -> String {
    match i {
        Some(v) => format!("{:.*} ± {:.*}", digits, v.mean, digits, v.half_width),
        None => "n/a".into(),
    }
}

impl Comparison {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record([
            "run",
            "env",
            "method",
            "n_seeds",
            "mar",
            "mar_ci",
            "mrcp",
            "mrcp_ci",
            "mrcp_reached",
            "p_unsafe",
            "p_unsafe_ci",
            "p_unsafe_transient",
            "p_unsafe_transient_ci",
            "front",
        ])?;
        for row in &self.rows {
            let r = &row.report;
            out.write_record([
                row.run.clone(),
                row.env.clone(),
                row.method.clone(),
                r.n_seeds.to_string(),
                mean(r.mar),
                half(r.mar),
                mean(r.mrcp.steps),
                half(r.mrcp.steps),
                r.mrcp.reached.to_string(),
                mean(r.p_unsafe),
                half(r.p_unsafe),
                mean(r.p_unsafe_transient),
                half(r.p_unsafe_transient),
                row.front.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:<8} {:>5} {:>18} {:>22} {:>16} {:>16} {:>5}",
            "env", "method", "seeds", "MAR", "MRCP (steps)", "p(unsafe) %", "transient %", "front"
        );
        for row in &self.rows {
            let r = &row.report;
            let mrcp = match r.mrcp.steps {
                Some(_) if r.mrcp.not_reached > 0 => {
                    format!("{} ({} n/r)", pm(r.mrcp.steps, 0), r.mrcp.not_reached)
                }
                Some(_) => pm(r.mrcp.steps, 0),
                None => "not reached".into(),
            };
            let _ = writeln!(
                s,
                "{:<16} {:<8} {:>5} {:>18} {:>22} {:>16} {:>16} {:>5}",
                row.env,
                row.method,
                r.n_seeds,
                pm(r.mar, 3),
                mrcp,
                pm(r.p_unsafe, 2),
                pm(r.p_unsafe_transient, 2),
                row.front.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
            );
        }
        for (what, why) in &self.missing {
            let _ = writeln!(s, "missing: {what}: {why}");
        }
        s
    }
}

/// Coverage and reward histogram over every seed of the run, plus one per
/// seed.
pub fn explore(run: &LoadedRun) -> (ExplorationSummary, Vec<(u64, ExplorationSummary)>) {
    let spec = run.config.env.build().spec().clone();
    let per_seed: Vec<(u64, ExplorationSummary)> = run
        .seeds
        .iter()
        .map(|s| {
            (
                s.seed,
                exploration_summary(&s.trace, &spec.behavior, spec.reward_bounds),
            )
        })
        .collect();
    let mut total = ExplorationSummary {
        grid: spec.behavior.grid,
        coverage: vec![0; spec.behavior.n_cells()],
        reward_bins: Default::default(),
        reward_bounds: spec.reward_bounds,
    };
    for (_, e) in &per_seed {
        for (t, v) in total.coverage.iter_mut().zip(&e.coverage) {
            *t += v;
        }
        for (t, v) in total.reward_bins.iter_mut().zip(&e.reward_bins) {
            *t += v;
        }
    }
    (total, per_seed)
}
