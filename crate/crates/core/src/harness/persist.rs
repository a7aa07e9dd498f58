//! On-disk formats of a run: CSV series and JSON summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::ExplorationSummary;
use crate::planner::PlanOutcome;
use crate::trace::{Trace, Transition};

pub const TRACE_FILE: &str = "trace.csv";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const PLANNING_FILE: &str = "planning.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const STATUS_FILE: &str = "status.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const REWARD_BINS_FILE: &str = "reward_bins.csv";

fn num(x: f64) -> String {
    format!("{x}")
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

/// `epoch, step, s_0.., a, r, c, s_next_0..`, one row per real transition.
pub struct TraceWriter {
    out: csv::Writer<File>,
}

impl TraceWriter {
    pub fn create(path: &Path, obs_dim: usize) -> Result<Self> {
        let mut out = create(path)?;
        let mut header = vec!["epoch".to_string(), "step".to_string()];
        header.extend((0..obs_dim).map(|i| format!("s_{i}")));
        header.extend(["a", "r", "c"].map(String::from));
        header.extend((0..obs_dim).map(|i| format!("s_next_{i}")));
        out.write_record(&header)?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write_epoch(&mut self, epoch: usize, transitions: &[Transition]) -> Result<()> {
        for (step, t) in transitions.iter().enumerate() {
            let mut row = vec![epoch.to_string(), step.to_string()];
            row.extend(t.s.iter().map(|&x| num(x)));
            row.extend([num(t.a), num(t.r), t.c.to_string()]);
            row.extend(t.s_next.iter().map(|&x| num(x)));
            self.out.write_record(&row)?;
        }
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    if !path.exists() {
        return Err(Error::Missing(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let obs_dim = header
        .iter()
        .filter(|h| h.starts_with("s_") && !h.starts_with("s_next_"))
        .count();
    let expected = 5 + 2 * obs_dim;
    if header.len() != expected {
        return Err(Error::Malformed {
            what: path.display().to_string(),
            detail: format!("expected {expected} columns, found {}", header.len()),
        });
    }
    let bad = |detail: String| Error::Malformed {
        what: path.display().to_string(),
        detail,
    };
    let mut trace = Trace::new();
    let mut current: Option<usize> = None;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: column {i}: {e}", line + 1)))
        };
        let epoch: usize = record[0]
            .parse()
            .map_err(|e| bad(format!("row {}: epoch: {e}", line + 1)))?;
        if current != Some(epoch) {
            trace.begin_epoch();
            current = Some(epoch);
        }
        let s = (0..obs_dim).map(|i| field(2 + i)).collect::<Result<Vec<_>>>()?;
        let a = field(2 + obs_dim)?;
        let r = field(3 + obs_dim)?;
        let c: u8 = record[4 + obs_dim]
            .parse()
            .map_err(|e| bad(format!("row {}: cost: {e}", line + 1)))?;
        let s_next = (0..obs_dim)
            .map(|i| field(5 + obs_dim + i))
            .collect::<Result<Vec<_>>>()?;
        trace.push(Transition { s, a, r, c, s_next });
    }
    Ok(trace)
}

/// Per-epoch rows: `epoch, mr, p_unsafe, train_mse, holdout_mse`.
pub struct EpochsWriter {
    out: csv::Writer<File>,
}

impl EpochsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = create(path)?;
        out.write_record(["epoch", "mr", "p_unsafe", "train_mse", "holdout_mse"])?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write(
        &mut self,
        epoch: usize,
        mr: f64,
        p_unsafe: f64,
        train_mse: f64,
        holdout_mse: Option<f64>,
    ) -> Result<()> {
        self.out.write_record([
            epoch.to_string(),
            num(mr),
            num(p_unsafe),
            num(train_mse),
            holdout_mse.map(num).unwrap_or_default(),
        ])?;
        self.out.flush()?;
        Ok(())
    }
}

/// Per planning call: `epoch, step, action, best_return, best_cost, archive_fill`.
pub struct PlanningWriter {
    out: csv::Writer<File>,
}

impl PlanningWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = create(path)?;
        out.write_record(["epoch", "step", "action", "best_return", "best_cost", "archive_fill"])?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write(&mut self, epoch: usize, step: usize, o: &PlanOutcome) -> Result<()> {
        self.out.write_record([
            epoch.to_string(),
            step.to_string(),
            num(o.action),
            num(o.best_return),
            num(o.best_cost),
            o.archive_fill.map(num).unwrap_or_default(),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        Ok(self.out.flush()?)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// `i, j, count` for every cell, row-major.
pub fn write_coverage(path: &Path, summary: &ExplorationSummary) -> Result<()> {
    let mut out = create(path)?;
    out.write_record(["i", "j", "count"])?;
    let g = summary.grid;
    for (k, count) in summary.coverage.iter().enumerate() {
        out.write_record([(k / g).to_string(), (k % g).to_string(), count.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `bucket, lo, hi, count`.
pub fn write_reward_bins(path: &Path, summary: &ExplorationSummary) -> Result<()> {
    let mut out = create(path)?;
    out.write_record(["bucket", "lo", "hi", "count"])?;
    let (lo, hi) = summary.reward_bounds;
    let n = summary.reward_bins.len();
    let width = (hi - lo) / n as f64;
    for (b, count) in summary.reward_bins.iter().enumerate() {
        let upper = if b + 1 == n { hi } else { lo + width * (b + 1) as f64 };
        out.write_record([b.to_string(), num(lo + width * b as f64), num(upper), count.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRACE_FILE);
        let mk = |x: f64| Transition {
            s: vec![x, 1.0 / 3.0],
            a: -x,
            r: x * std::f64::consts::PI,
            c: u8::from(x > 0.5),
            s_next: vec![x + 0.1, 2.0 / 7.0],
        };
        let mut w = TraceWriter::create(&path, 2).unwrap();
        w.write_epoch(0, &[mk(0.1), mk(0.2)]).unwrap();
        w.write_epoch(1, &[mk(0.7)]).unwrap();
        drop(w);
        let trace = read_trace(&path).unwrap();
        assert_eq!(trace.n_epochs(), 2);
        assert_eq!(trace.epoch(0), &[mk(0.1), mk(0.2)]);
        assert_eq!(trace.epoch(1), &[mk(0.7)]);
    }

    #[test]
    fn missing_trace_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_trace(&dir.path().join("nope.csv")),
            Err(Error::Missing(_))
        ));
    }

    #[test]
    fn malformed_trace_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRACE_FILE);
        std::fs::write(&path, "epoch,step,s_0,a,r,c,s_next_0\n0,0,x,1,1,0,1\n").unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Malformed { .. })));
    }
}
