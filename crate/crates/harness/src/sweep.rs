//! Cartesian parameter sweeps over independent scenario runs, executed on a
//! small worker pool with single-threaded aggregation.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Result};

use crate::config::{Config, Kind};
use crate::csvio::write_text;
use crate::record::RunRecord;
use crate::scenario::run_scenario;

pub struct SweepOutcome {
    pub records: Vec<(Vec<f64>, Result<RunRecord>)>,
    pub aggregate_csv: std::path::PathBuf,
}

/// Run the Cartesian product of the sweep axes. Partial failures are
/// aggregated, not fatal; the overall sweep passes when every run passed.
pub fn run_sweep(cfg: &Config, out_dir: &Path, seed: u64, threads: usize) -> Result<SweepOutcome> {
    let inner_kind = match &cfg.sweep.inner {
        Some(k) => k.clone(),
        None => bail!("sweep requires sweep.inner"),
    };
    // Cartesian product of axis values; no axes → a single run
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &cfg.sweep.axes {
        let mut next = Vec::new();
        for p in &points {
            for &v in &axis.values {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }

    let jobs: Vec<(usize, Vec<f64>)> = points.into_iter().enumerate().collect();
    let results: Mutex<Vec<(usize, Vec<f64>, Result<RunRecord>)>> = Mutex::new(Vec::new());
    let cursor = AtomicUsize::new(0);
    let workers = threads.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::SeqCst);
                if idx >= jobs.len() {
                    break;
                }
                let (run_idx, values) = &jobs[idx];
                let run = (|| -> Result<RunRecord> {
                    let mut run_cfg = cfg.clone();
                    run_cfg.kind = inner_kind.clone();
                    for (axis, &v) in cfg.sweep.axes.iter().zip(values.iter()) {
                        run_cfg.set_path(&axis.path, v)?;
                    }
                    run_scenario(
                        &run_cfg,
                        &out_dir.join(format!("run_{run_idx:03}")),
                        seed,
                    )
                })();
                results.lock().unwrap().push((*run_idx, values.clone(), run));
            });
        }
    });
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(i, _, _)| *i);
    let records: Vec<(Vec<f64>, Result<RunRecord>)> = collected
        .into_iter()
        .map(|(_, v, r)| (v, r))
        .collect();
    let aggregate_csv = aggregate(cfg, out_dir, &records)?;
    Ok(SweepOutcome {
        records,
        aggregate_csv,
    })
}

fn aggregate(
    cfg: &Config,
    out_dir: &Path,
    records: &[(Vec<f64>, Result<RunRecord>)],
) -> Result<std::path::PathBuf> {
    // union of metric names across successful runs, in sorted order
    let mut metric_names: Vec<String> = Vec::new();
    for (_, r) in records {
        if let Ok(rec) = r {
            for k in rec.metrics.keys() {
                if !metric_names.contains(k) {
                    metric_names.push(k.clone());
                }
            }
        }
    }
    metric_names.sort();
    let mut header: Vec<String> = cfg.sweep.axes.iter().map(|a| a.path.clone()).collect();
    header.push("passed".into());
    header.extend(metric_names.iter().cloned());
    let mut text = header.join(",");
    text.push('\n');
    for (values, r) in records {
        let mut cells: Vec<String> = values.iter().map(|v| crate::csvio::fmt(*v)).collect();
        match r {
            Ok(rec) => {
                cells.push(if rec.passed() { "1".into() } else { "0".into() });
                for name in &metric_names {
                    cells.push(
                        rec.metrics
                            .get(name)
                            .map(|v| crate::csvio::fmt(*v))
                            .unwrap_or_default(),
                    );
                }
            }
            Err(e) => {
                cells.push("0".into());
                for _ in &metric_names {
                    cells.push(String::new());
                }
                cells.push(format!("error: {e}"));
            }
        }
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    let path = out_dir.join("sweep_aggregate.csv");
    write_text(&path, &text)?;
    Ok(path)
}

/// True when every run of the sweep completed and passed its checks.
pub fn sweep_passed(outcome: &SweepOutcome) -> bool {
    outcome
        .records
        .iter()
        .all(|(_, r)| r.as_ref().map(|rec| rec.passed()).unwrap_or(false))
}

#[allow(unused)]
fn kind_name(kind: &Kind) -> String {
    format!("{kind:?}").to_lowercase()
}
