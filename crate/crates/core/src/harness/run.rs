//! The iterated-batch loop: random warm-up episode, then alternate model
//! training and one planned episode per epoch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::persist::{
    write_json, write_text, EpochsWriter, PlanningWriter, TraceWriter, CONFIG_FILE, EPOCHS_FILE, METRICS_FILE,
    PLANNING_FILE, STATUS_FILE, TIMINGS_FILE, TRACE_FILE,
};
use crate::env::Environment;
use crate::error::Result;
use crate::metrics::{p_unsafe, EpochSeries, MetricsReport, SeedMetrics};
use crate::model::DynamicsModel;
use crate::planner::{plan, PlanContext};
use crate::rng::{stream, Concern};
use crate::trace::{Trace, Transition};

/// One episode of uniformly random actions from a fresh reset.
pub fn run_episode_random<R: Rng>(env: &dyn Environment, rng: &mut R) -> Result<Vec<Transition>> {
    let spec = env.spec();
    let mut state = env.reset_with(rng);
    let mut out = Vec::with_capacity(spec.episode_len);
    for _ in 0..spec.episode_len {
        let a = spec.action_space.sample(rng);
        let step = env.step(&state, a)?;
        out.push(Transition {
            s: state.observation.clone(),
            a,
            r: step.reward,
            c: step.cost,
            s_next: step.next_state.observation.clone(),
        });
        state = step.next_state;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub train_s: Vec<f64>,
    pub plan_s: Vec<f64>,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub trace: Trace,
    pub series: EpochSeries,
    pub metrics: SeedMetrics,
    pub timings: Timings,
    pub train_calls: usize,
    pub planner_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStatus {
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
}

struct Sinks {
    dir: PathBuf,
    trace: TraceWriter,
    epochs: EpochsWriter,
    planning: PlanningWriter,
}

impl Sinks {
    fn create(dir: &Path, cfg: &ExperimentConfig, obs_dim: usize) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        write_text(&dir.join(CONFIG_FILE), &cfg.to_toml()?)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            trace: TraceWriter::create(&dir.join(TRACE_FILE), obs_dim)?,
            epochs: EpochsWriter::create(&dir.join(EPOCHS_FILE))?,
            planning: PlanningWriter::create(&dir.join(PLANNING_FILE))?,
        })
    }
}

/// Runs one seed. With `dir`, every file is flushed after each epoch.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: Option<&Path>) -> Result<RunRecord> {
    let snapshot = cfg.for_seed(seed);
    let env = cfg.env.build();
    let spec = env.spec().clone();
    let behavior = cfg.behavior_space(&spec);
    let arch = cfg.policy_arch(&spec);
    let threshold = cfg.reward_threshold(&spec);
    let mut sinks = dir
        .map(|d| Sinks::create(d, &snapshot, spec.observation_dim))
        .transpose()?;
    let started = Instant::now();

    let mut trace = Trace::new();
    let warmup = run_episode_random(env.as_ref(), &mut stream(seed, Concern::RandomPolicy, 0, 0))?;
    if let Some(s) = sinks.as_mut() {
        s.trace.write_epoch(0, &warmup)?;
    }
    trace.extend_epoch(warmup);

    let mut model = DynamicsModel::new(
        spec.observation_dim,
        spec.action_space.clone(),
        &cfg.train,
        &mut stream(seed, Concern::ModelInit, 0, 0),
    );
    let mut timings = Timings::default();
    let mut planner_calls = 0;
    for epoch in 1..=cfg.epochs {
        let t = Instant::now();
        if !cfg.train.warm_start && model.is_trained() {
            model.reinitialize(&cfg.train, &mut stream(seed, Concern::ModelInit, epoch as u64, 0));
        }
        let report = model.train(
            trace.transitions(),
            &cfg.train,
            &mut stream(seed, Concern::ModelShuffle, epoch as u64, 0),
        )?;
        timings.train_s.push(t.elapsed().as_secs_f64());

        let t = Instant::now();
        let ctx = PlanContext {
            dynamics: &model,
            objective: env.as_ref(),
            action_space: &spec.action_space,
            behavior: &behavior,
            policy_arch: &arch,
        };
        let mut state = env.reset_with(&mut stream(seed, Concern::EnvReset, epoch as u64, 0));
        let mut episode = Vec::with_capacity(spec.episode_len);
        for step in 0..spec.episode_len {
            let mut rng = stream(seed, Concern::Planner, epoch as u64, step as u64);
            let outcome = plan(&ctx, &state.observation, &cfg.planner, &mut rng)?;
            planner_calls += 1;
            let next = env.step(&state, outcome.action)?;
            if let Some(s) = sinks.as_mut() {
                s.planning.write(epoch, step, &outcome)?;
            }
            episode.push(Transition {
                s: state.observation.clone(),
                a: outcome.action,
                r: next.reward,
                c: next.cost,
                s_next: next.next_state.observation.clone(),
            });
            state = next.next_state;
        }
        timings.plan_s.push(t.elapsed().as_secs_f64());

        let mr = episode.iter().map(|t| t.r).sum::<f64>() / episode.len().max(1) as f64;
        let costs: Vec<u8> = episode.iter().map(|t| t.c).collect();
        log::info!(
            "seed {seed} epoch {epoch}/{}: mr {mr:.4} p_unsafe {:.2}",
            cfg.epochs,
            p_unsafe(&costs)
        );
        if let Some(s) = sinks.as_mut() {
            s.trace.write_epoch(epoch, &episode)?;
            s.epochs
                .write(epoch, mr, p_unsafe(&costs), report.train_mse, report.holdout_mse)?;
            s.planning.flush()?;
        }
        trace.extend_epoch(episode);
        if let Some(s) = sinks.as_ref() {
            let series = EpochSeries::from_trace(&trace, spec.episode_len);
            write_json(
                &s.dir.join(METRICS_FILE),
                &SeedMetrics::compute(seed, &series, threshold),
            )?;
            timings.total_s = started.elapsed().as_secs_f64();
            write_json(&s.dir.join(TIMINGS_FILE), &timings)?;
        }
    }

    let series = EpochSeries::from_trace(&trace, spec.episode_len);
    let metrics = SeedMetrics::compute(seed, &series, threshold);
    timings.total_s = started.elapsed().as_secs_f64();
    if let Some(s) = sinks.as_ref() {
        write_json(&s.dir.join(METRICS_FILE), &metrics)?;
        write_json(&s.dir.join(TIMINGS_FILE), &timings)?;
    }
    Ok(RunRecord {
        seed,
        config: snapshot,
        trace,
        series,
        metrics,
        timings,
        train_calls: cfg.epochs,
        planner_calls,
    })
}

pub fn seed_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed-{seed}"))
}

/// Experiment-level summary written next to the seed directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub env: String,
    pub planner: String,
    pub epochs: usize,
    pub failed_seeds: Vec<u64>,
    pub report: MetricsReport,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<SeedStatus>,
    pub summary: ExperimentSummary,
}

impl ExperimentOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every configured seed in parallel under `cfg.output_dir`. A seed that
/// fails (for instance a diverged model) is recorded and the rest continue.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)?;
    write_text(&out.join(CONFIG_FILE), &cfg.to_toml()?)?;

    let results: Vec<(u64, Result<RunRecord>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| (seed, run_seed(cfg, seed, Some(&seed_dir(out, seed)))))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        let status = match result {
            Ok(record) => {
                records.push(record);
                SeedStatus {
                    seed,
                    ok: true,
                    error: None,
                }
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                let status = SeedStatus {
                    seed,
                    ok: false,
                    error: Some(e.to_string()),
                };
                failures.push(status.clone());
                status
            }
        };
        let dir = seed_dir(out, seed);
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join(STATUS_FILE), &status)?;
    }

    let threshold = cfg.reward_threshold(cfg.env.build().spec());
    let summary = ExperimentSummary {
        env: cfg.env.name().to_string(),
        planner: cfg.planner.kind.name().to_string(),
        epochs: cfg.epochs,
        failed_seeds: failures.iter().map(|f| f.seed).collect(),
        report: MetricsReport::aggregate(records.iter().map(|r| r.metrics.clone()).collect(), threshold),
    };
    write_json(&out.join(METRICS_FILE), &summary)?;
    Ok(ExperimentOutcome {
        records,
        failures,
        summary,
    })
}
