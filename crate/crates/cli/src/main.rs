use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use safeplan_core::harness::{
    self, compare, explore, load_run, run_experiment, ExperimentConfig, Profile, COMPARISON_FILE, COVERAGE_FILE,
    REWARD_BINS_FILE,
};
use safeplan_core::selftest;

#[derive(Parser)]
#[command(name = "safeplan", version, about = "Safe model-based planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: one random episode, then train-and-plan epochs per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "desk", value_parser = ["desk", "full"])]
        profile: String,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the metrics of a finished run from its traces.
    Metrics { run_dir: PathBuf },
    /// Summary table and optimality fronts across runs.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coverage grid and reward histogram of the visited states.
    Explore { run_dir: PathBuf },
    /// Run the built-in oracle and invariant checks.
    Selftest,
}

fn run(config: &Path, seed: Option<u64>, profile: &str, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let profile = Profile::parse(profile)?;
    let mut cfg = ExperimentConfig::load(config, profile).with_context(|| format!("loading {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let outcome = run_experiment(&cfg)?;
    for f in &outcome.failures {
        eprintln!(
            "seed {} failed: {}",
            f.seed,
            f.error.as_deref().unwrap_or("unknown error")
        );
    }
    println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
    println!("results written to {}", cfg.output_dir.display());
    Ok(outcome.all_succeeded())
}

fn metrics(dir: &Path) -> anyhow::Result<bool> {
    let run = load_run(dir)?;
    println!("{}", serde_json::to_string_pretty(&run.metrics())?);
    for (seed, why) in &run.missing {
        eprintln!("seed {seed} unavailable: {why}");
    }
    Ok(run.missing.is_empty())
}

fn compare_cmd(dirs: &[PathBuf], out: &Path) -> anyhow::Result<bool> {
    let comparison = compare(dirs);
    if comparison.rows.is_empty() {
        bail!("no usable runs among {} directories", dirs.len());
    }
    std::fs::create_dir_all(out)?;
    comparison.write_csv(&out.join(COMPARISON_FILE))?;
    let text = comparison.to_text();
    std::fs::write(out.join("comparison.txt"), &text)?;
    print!("{text}");
    Ok(true)
}

fn explore_cmd(dir: &Path) -> anyhow::Result<bool> {
    let run = load_run(dir)?;
    let (total, per_seed) = explore(&run);
    harness::write_coverage(&dir.join(COVERAGE_FILE), &total)?;
    harness::write_reward_bins(&dir.join(REWARD_BINS_FILE), &total)?;
    for ((seed, summary), loaded) in per_seed.iter().zip(&run.seeds) {
        if loaded.dir != dir {
            harness::write_coverage(&loaded.dir.join(COVERAGE_FILE), summary)?;
            harness::write_reward_bins(&loaded.dir.join(REWARD_BINS_FILE), summary)?;
        }
        log::info!(
            "seed {seed}: {} cells visited",
            summary.coverage.iter().filter(|&&c| c > 0).count()
        );
    }
    let visited = total.coverage.iter().filter(|&&c| c > 0).count();
    println!(
        "{visited} of {} cells visited; wrote {} and {} in {}",
        total.coverage.len(),
        COVERAGE_FILE,
        REWARD_BINS_FILE,
        dir.display()
    );
    Ok(true)
}

fn selftest_cmd() -> bool {
    let mut ok = true;
    for c in selftest::run_all() {
        ok &= c.passed;
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark}  {}", c.name);
        } else {
            println!("{mark}  {} ({})", c.name, c.detail);
        }
    }
    ok
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            profile,
            out,
        } => run(&config, seed, &profile, out),
        Command::Metrics { run_dir } => metrics(&run_dir),
        Command::Compare { dirs, out } => compare_cmd(&dirs, &out),
        Command::Explore { run_dir } => explore_cmd(&run_dir),
        Command::Selftest => Ok(selftest_cmd()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
