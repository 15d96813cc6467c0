//! Long-format CSV trajectories and summary tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::config::Metric;
use super::run::{median, ExperimentResult, RepeatResult, RepeatSummary, SweepResult};

pub const TRAJECTORY_HEADER: &str = "iteration,seed,metric,value";

pub const SUMMARY_HEADER: &str = "name,param,value,seed,iterations_run,diverged,diverged_at,skipped,\
convergence_iteration,alignment_iteration,orthonormal_iteration,final_max_defect,\
final_orthonormality,final_principal_angle,final_js1m_cost,final_subspace_entropy,final_alignment";

const SUMMARY_METRICS: [Metric; 5] = [
    Metric::Orthonormality,
    Metric::PrincipalAngle,
    Metric::Js1mCost,
    Metric::SubspaceEntropy,
    Metric::Alignment,
];

pub fn trajectory_csv(repeat: &RepeatResult) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for r in &repeat.trajectory {
        for (m, v) in &r.values {
            writeln!(s, "{},{},{},{}", r.iteration, r.seed, m, v).unwrap();
        }
    }
    s
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_row(out: &mut String, name: &str, param: Option<(&str, f64)>, s: &RepeatSummary) {
    let (p, v) = match param {
        Some((p, v)) => (p.to_string(), v.to_string()),
        None => (String::new(), String::new()),
    };
    write!(
        out,
        "{name},{p},{v},{},{},{},{},{},{},{},{},{}",
        s.seed,
        s.iterations_run,
        s.diverged(),
        opt(s.diverged_at),
        s.skipped,
        opt(s.convergence_iteration),
        opt(s.alignment_iteration),
        opt(s.orthonormal_iteration),
        s.final_max_defect,
    )
    .unwrap();
    for m in SUMMARY_METRICS {
        out.push(',');
        out.push_str(&opt(s.final_metrics.get(&m)));
    }
    out.push('\n');
}

pub fn experiment_summary_csv(result: &ExperimentResult) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in result.summaries() {
        summary_row(&mut s, &result.config.name, None, r);
    }
    s
}

pub fn sweep_summary_csv(sweep: &SweepResult) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for cell in &sweep.cells {
        for r in cell.result.summaries() {
            summary_row(&mut s, &sweep.name, Some((sweep.param.name(), cell.value)), r);
        }
    }
    s
}

fn write(dir: &Path, file: String, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(file);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_trajectories(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    result
        .repeats
        .iter()
        .map(|r| {
            write(
                dir,
                format!("{}_{}.csv", result.config.name, r.summary.seed),
                &trajectory_csv(r),
            )
        })
        .collect()
}

/// Writes `<name>_<seed>.csv` per repeat and `<name>_summary.csv`.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    let mut paths = write_trajectories(dir, result)?;
    paths.push(write(
        dir,
        format!("{}_summary.csv", result.config.name),
        &experiment_summary_csv(result),
    )?);
    Ok(paths)
}

/// Writes every cell's trajectories and one `<name>_summary.csv` for the grid.
pub fn write_sweep(dir: &Path, sweep: &SweepResult) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for cell in &sweep.cells {
        paths.extend(write_trajectories(dir, &cell.result)?);
    }
    paths.push(write(dir, format!("{}_summary.csv", sweep.name), &sweep_summary_csv(sweep))?);
    Ok(paths)
}

fn fmt_median(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into())
}

fn table_row(label: &str, result: &ExperimentResult) -> String {
    let conv = median(
        result
            .summaries()
            .filter_map(|s| s.convergence_iteration.or(s.orthonormal_iteration))
            .map(|i| i as f64),
    );
    let diverged = result.summaries().filter(|s| s.diverged()).count();
    let defect = median(result.summaries().map(|s| s.final_max_defect));
    let angle = median(
        result
            .summaries()
            .filter_map(|s| s.final_metrics.get(&Metric::PrincipalAngle).copied()),
    );
    format!(
        "{label:<28} {:>8} {:>12} {:>12} {:>12}",
        format!("{diverged}/{}", result.repeats.len()),
        conv.map(|c| format!("{c}")).unwrap_or_else(|| "-".into()),
        fmt_median(defect),
        fmt_median(angle),
    )
}

const TABLE_HEADER: &str = "cell                         diverged  median_conv   max_defect  final_angle";

/// Human-readable per-experiment medians.
pub fn experiment_table(result: &ExperimentResult) -> String {
    format!("{TABLE_HEADER}\n{}\n", table_row(&result.config.name, result))
}

/// Human-readable comparison of sweep cells.
pub fn sweep_table(sweep: &SweepResult) -> String {
    let mut s = format!("{TABLE_HEADER}\n");
    for cell in &sweep.cells {
        let label = format!("{}={}", sweep.param, cell.value);
        s.push_str(&table_row(&label, &cell.result));
        s.push('\n');
    }
    s
}
