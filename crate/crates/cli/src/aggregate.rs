//! Cross-run aggregation: IQM and a stratified bootstrap interval of one
//! metric at every evaluation step, with runs stratified by environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hredq_core::metrics::{iqm_bootstrap_ci, AggregateResult, RunRecord};
use hredq_core::rng::{stream, Stream};
use serde::Serialize;

use crate::config::RunPaths;
use crate::records::{format_real, read_records_file};

pub const DEFAULT_BOOTSTRAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub task: String,
    pub records: Vec<RunRecord>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let paths = RunPaths::new(dir);
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(paths.metadata())
            .with_context(|| format!("reading {}", paths.metadata().display()))?,
    )?;
    let task = meta["env"]
        .as_str()
        .ok_or_else(|| anyhow!("{}: metadata has no env", dir.display()))?
        .to_string();
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        task,
        records: read_records_file(&paths.metrics())?,
    })
}

/// Aggregate of one evaluation step.
#[derive(Debug, Clone, Serialize)]
pub struct StepAggregate {
    pub env_step: u64,
    pub iqm: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub num_bootstrap: usize,
    pub degenerate: bool,
    pub scores_by_task: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub metric: String,
    pub runs: Vec<String>,
    pub steps: Vec<StepAggregate>,
}

pub fn metric_value(r: &RunRecord, metric: &str) -> Result<f64> {
    let i = RunRecord::COLUMNS
        .iter()
        .position(|c| *c == metric)
        .filter(|&i| i > 0)
        .ok_or_else(|| anyhow!("unknown metric {metric:?}"))?;
    Ok(r.values()[i - 1])
}

/// Aligns runs on their evaluation steps and aggregates `metric` at each.
/// The same directory given twice counts once.
pub fn aggregate_runs(
    runs: &[LoadedRun],
    metric: &str,
    confidence: f64,
    num_bootstrap: usize,
) -> Result<Aggregate> {
    let mut unique: Vec<&LoadedRun> = Vec::new();
    for r in runs {
        let key = r.dir.canonicalize().unwrap_or_else(|_| r.dir.clone());
        if unique
            .iter()
            .any(|u| u.dir.canonicalize().unwrap_or_else(|_| u.dir.clone()) == key)
        {
            log::warn!("{} listed more than once; counted once", r.dir.display());
            continue;
        }
        unique.push(r);
    }
    let first = unique
        .first()
        .ok_or_else(|| anyhow!("no runs to aggregate"))?;
    let grid: Vec<u64> = first.records.iter().map(|r| r.env_step).collect();
    let offenders: Vec<String> = unique
        .iter()
        .filter(|r| {
            r.records
                .iter()
                .map(|x| x.env_step)
                .ne(grid.iter().copied())
        })
        .map(|r| r.dir.display().to_string())
        .collect();
    if !offenders.is_empty() {
        bail!(
            "evaluation steps differ from {}: {}",
            first.dir.display(),
            offenders.join(", ")
        );
    }
    let mut steps = Vec::with_capacity(grid.len());
    for (i, &env_step) in grid.iter().enumerate() {
        let mut by_task: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &unique {
            by_task
                .entry(r.task.clone())
                .or_default()
                .push(metric_value(&r.records[i], metric)?);
        }
        let scores: Vec<Vec<f64>> = by_task.values().cloned().collect();
        let mut rng = stream(env_step, Stream::Bootstrap);
        let AggregateResult {
            iqm,
            ci_low,
            ci_high,
            confidence,
            num_bootstrap,
            degenerate,
            ..
        } = iqm_bootstrap_ci(&scores, num_bootstrap, confidence, &mut rng)
            .map_err(|e| anyhow!("step {env_step}: {e}"))?;
        steps.push(StepAggregate {
            env_step,
            iqm,
            ci_low,
            ci_high,
            confidence,
            num_bootstrap,
            degenerate,
            scores_by_task: by_task,
        });
    }
    Ok(Aggregate {
        metric: metric.into(),
        runs: unique.iter().map(|r| r.dir.display().to_string()).collect(),
        steps,
    })
}

/// Writes `<out>` as JSON and the plot-ready table next to it with a `.csv`
/// extension.
pub fn write_aggregate(agg: &Aggregate, out: &Path) -> Result<PathBuf> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, serde_json::to_string_pretty(agg)? + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    let csv_path = out.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "env_step",
        "iqm",
        "ci_low",
        "ci_high",
        "degenerate",
        "num_runs",
    ])?;
    for s in &agg.steps {
        let n: usize = s.scores_by_task.values().map(Vec::len).sum();
        w.write_record([
            s.env_step.to_string(),
            format_real(s.iqm),
            format_real(s.ci_low),
            format_real(s.ci_high),
            s.degenerate.to_string(),
            n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(csv_path)
}
