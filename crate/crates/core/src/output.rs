//! Result files: the CSV time series, per-snapshot field files and the run
//! log. Nothing time- or host-dependent is written, so a fixed configuration
//! reproduces every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::coupled::{SimulationResult, StepRecord};
use crate::error::Result;
use crate::heat::TemperatureField;
use crate::mesh::Mesh;
use crate::params::ValidationReport;
use crate::potentials::PotentialPair;

pub const TIMESERIES_HEADER: &str =
    "t,min_u,max_u,mean_u,sup_phis,sup_phie,picard_iters,truncation_active,mean_sum,energy_residual";

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const RUN_LOG_FILE: &str = "run.log";
pub const FIELDS_DIR: &str = "fields";

pub fn format_timeseries(records: &[StepRecord]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.min_u,
            r.max_u,
            r.mean_u,
            r.sup_phis,
            r.sup_phie,
            r.picard_iters,
            u8::from(r.truncation_active),
            r.mean_sum,
            r.energy_residual
        );
    }
    out
}

/// One snapshot: `cell_index,x[,y],region,u,phis,phie`, with `phis` left
/// blank on separator cells.
pub fn format_field(mesh: &Mesh, u: &TemperatureField, pot: &PotentialPair) -> String {
    let two_d = mesh.dimension() == 2;
    let mut out = String::from(if two_d {
        "cell_index,x,y,region,u,phis,phie\n"
    } else {
        "cell_index,x,region,u,phis,phie\n"
    });
    for (i, c) in mesh.cells().iter().enumerate() {
        let phis = pot.phis_at(mesh, i).map(|v| v.to_string()).unwrap_or_default();
        let y = if two_d { format!("{},", c.centroid[1]) } else { String::new() };
        let _ = writeln!(
            out,
            "{i},{},{y}{},{},{phis},{}",
            c.centroid[0],
            c.region.name(),
            u.values[i],
            pot.phie[i]
        );
    }
    out
}

pub fn field_file_name(snapshot: usize) -> String {
    format!("field_{snapshot:05}.csv")
}

/// Run log: effective configuration, validation report (plain and
/// `key = value`), per-step diagnostics and the summary.
pub fn format_run_log(
    config: &RunConfig,
    mesh: &Mesh,
    report: &ValidationReport,
    result: &SimulationResult,
    failure: Option<&str>,
) -> String {
    let mut out = String::new();
    out.push_str("[config]\n");
    out.push_str(&config.echo());
    let _ = writeln!(out, "\n[mesh]\n{}", mesh.summary());
    let _ = writeln!(out, "\n[validation]\n{report}");
    out.push_str("\n[validation.machine]\n");
    for c in &report.checks {
        let _ = writeln!(out, "{} = {}", c.hypothesis, if c.passed { "pass" } else { "fail" });
    }
    out.push_str("\n[steps]\n");
    out.push_str("t picard_iters decay_ratio certificate max_deviation potential_residual newton_iters saturated");
    if config.output.linf {
        out.push_str(" sup_u linf_bound linf_ratio");
    }
    out.push('\n');
    for r in &result.records {
        let _ = write!(
            out,
            "{} {} {} {} {} {} {} {}",
            r.t,
            r.picard_iters,
            r.decay_ratio,
            r.certificate,
            r.max_deviation,
            r.potential_residual,
            r.newton_iters,
            u8::from(r.saturated)
        );
        if config.output.linf {
            let _ = write!(out, " {} {} {}", r.linf.sup_u, r.linf.bound_estimate, r.linf.ratio);
        }
        out.push('\n');
        if config.output.picard_history && !r.picard_history.is_empty() {
            let h: Vec<String> = r.picard_history.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "  picard_history {}", h.join(" "));
        }
        if r.positivity_violated {
            let _ = writeln!(out, "  warning: temperature left (0, inf) at t = {}", r.t);
        }
    }
    out.push_str("\n[summary]\n");
    out.push_str(&format_summary(result));
    if let Some(msg) = failure {
        let _ = writeln!(out, "failure = {msg}");
    }
    out
}

pub fn format_summary(result: &SimulationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "snapshots = {}", result.times.len());
    let _ = writeln!(out, "eps = {}", result.eps);
    let _ = writeln!(out, "t_star = {}", result.t_star);
    if result.trajectory_iters > 0 {
        let _ = writeln!(out, "trajectory_iters = {}", result.trajectory_iters);
    }
    if let Some(last) = result.records.last() {
        let _ = writeln!(out, "final_max_u = {}", last.max_u);
        let _ = writeln!(out, "final_min_u = {}", last.min_u);
    }
    out
}

/// Writes the time series, field snapshots and run log into `dir`; returns
/// the written paths. Stale snapshot files from earlier runs are removed.
pub fn write_outputs(
    dir: &Path,
    config: &RunConfig,
    mesh: &Mesh,
    report: &ValidationReport,
    result: &SimulationResult,
    failure: Option<&str>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let ts = dir.join(TIMESERIES_FILE);
    fs::write(&ts, format_timeseries(&result.records))?;
    written.push(ts);

    let fields = dir.join(FIELDS_DIR);
    if fields.exists() {
        for entry in fs::read_dir(&fields)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                fs::remove_file(path)?;
            }
        }
    }
    let stride = config.output.snapshot_stride;
    if stride > 0 {
        fs::create_dir_all(&fields)?;
        let last = result.temperatures.len().saturating_sub(1);
        for (k, (u, pot)) in result.temperatures.iter().zip(&result.potentials).enumerate() {
            if k % stride == 0 || k == last {
                let path = fields.join(field_file_name(k));
                fs::write(&path, format_field(mesh, u, pot))?;
                written.push(path);
            }
        }
    }
    let log = dir.join(RUN_LOG_FILE);
    fs::write(&log, format_run_log(config, mesh, report, result, failure))?;
    written.push(log);
    Ok(written)
}
