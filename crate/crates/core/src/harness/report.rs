use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Algorithm, RunRecord};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "iteration,best_il";
pub const SUMMARY_HEADER: &str =
    "scenario,algorithm,k,dimension,runs,best_il,median_il,worst_il,rank_pass_fraction,mean_wall_s";
const RUNS_HEADER: &str =
    "scenario,algorithm,run,seed,final_il,iterations,evaluations,rank_pass,ranks,wall_s,trace_path";
const PLOT_HEADER: &str = "iteration,median_il,min_il,max_il";

/// 17 significant digits, round-trippable.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub dimension: usize,
    pub runs: usize,
    pub best_il: f64,
    pub median_il: f64,
    pub worst_il: f64,
    pub rank_pass_fraction: f64,
    pub mean_wall_s: f64,
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Groups records by (scenario, algorithm) in order of first appearance.
fn groups(records: &[RunRecord]) -> Vec<Vec<&RunRecord>> {
    let mut out: Vec<Vec<&RunRecord>> = Vec::new();
    for r in records {
        match out
            .iter_mut()
            .find(|g| g[0].scenario == r.scenario && g[0].algorithm == r.algorithm)
        {
            Some(g) => g.push(r),
            None => out.push(vec![r]),
        }
    }
    out
}

pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(groups(records)
        .into_iter()
        .map(|g| {
            let mut il: Vec<f64> = g.iter().map(|r| r.final_il).collect();
            il.sort_by(f64::total_cmp);
            let runs = g.len();
            SummaryRow {
                scenario: g[0].scenario.clone(),
                algorithm: g[0].algorithm,
                k: g[0].k,
                dimension: g[0].dimension,
                runs,
                best_il: il[0],
                median_il: median_sorted(&il),
                worst_il: il[runs - 1],
                rank_pass_fraction: g.iter().filter(|r| r.rank_pass).count() as f64 / runs as f64,
                mean_wall_s: g.iter().map(|r| r.wall_s).sum::<f64>() / runs as f64,
            }
        })
        .collect())
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6}",
            r.scenario,
            r.algorithm,
            r.k,
            r.dimension,
            r.runs,
            format_float(r.best_il),
            format_float(r.median_il),
            format_float(r.worst_il),
            r.rank_pass_fraction,
            r.mean_wall_s
        );
    }
    out
}

pub fn render_summary_table(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<16} {:<5} {:>3} {:>9} {:>4} {:>12} {:>12} {:>12} {:>9} {:>10}\n",
        "scenario", "algo", "K", "dimension", "runs", "best IL", "median IL", "worst IL", "rank ok", "wall s"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<5} {:>3} {:>9} {:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.2} {:>10.2}",
            r.scenario,
            r.algorithm.to_string(),
            r.k,
            r.dimension,
            r.runs,
            r.best_il,
            r.median_il,
            r.worst_il,
            r.rank_pass_fraction,
            r.mean_wall_s
        );
    }
    out
}

pub fn render_runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RUNS_HEADER);
    out.push('\n');
    for r in records {
        let ranks: Vec<String> = r.ranks.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6},{}",
            r.scenario,
            r.algorithm,
            r.run,
            r.seed,
            format_float(r.final_il),
            r.iterations,
            r.evaluations,
            r.rank_pass,
            ranks.join(";"),
            r.wall_s,
            r.trace_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        );
    }
    out
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::with_capacity(32 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, format_float(*v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes one `plot_<scenario>_<algorithm>.csv` per campaign with the
/// pointwise median, minimum and maximum of the runs' traces. Shorter traces
/// are extended with their final value.
pub fn emit_plot_data(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for g in groups(records) {
        let len = g.iter().map(|r| r.trace.len()).max().unwrap_or(0);
        if len == 0 {
            return Err(Error::EmptyInput);
        }
        let mut out = String::with_capacity(80 * (len + 1));
        out.push_str(PLOT_HEADER);
        out.push('\n');
        let mut column = Vec::with_capacity(g.len());
        for it in 0..len {
            column.clear();
            column.extend(g.iter().map(|r| r.trace[it.min(r.trace.len() - 1)]));
            column.sort_by(f64::total_cmp);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                it + 1,
                format_float(median_sorted(&column)),
                format_float(column[0]),
                format_float(column[column.len() - 1])
            );
        }
        let path = out_dir.join(format!("plot_{}_{}.csv", g[0].scenario, g[0].algorithm));
        fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

/// Traces, `runs.csv`, `summary.csv`, `summary.txt` and plot data.
pub fn write_outputs(records: &[RunRecord], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    for r in records {
        if let Some(rel) = &r.trace_path {
            write_trace(&out_dir.join(rel), &r.trace)?;
        }
    }
    let rows = summarize(records)?;
    fs::write(out_dir.join("summary.csv"), render_summary_csv(&rows))?;
    fs::write(out_dir.join("summary.txt"), render_summary_table(&rows))?;
    fs::write(out_dir.join("runs.csv"), render_runs_csv(records))?;
    emit_plot_data(records, out_dir)?;
    Ok(())
}
