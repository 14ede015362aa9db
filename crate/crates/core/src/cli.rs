//! Command-line front end. Exit status: 0 success, 1 validation failure,
//! 2 solver failure, 3 configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::butler_volmer::ButlerVolmerContext;
use crate::config::{parse_config, RunConfig};
use crate::coupled::{apply_j, run_simulation};
use crate::error::Error;
use crate::heat::TemperatureField;
use crate::mesh::Mesh;
use crate::oracle::{
    brute_force_solve, convergence_rate, mms_case, monolithic_step, MmsCase, OracleReport, MMS_CASES,
};
use crate::output::{format_summary, write_outputs};
use crate::params::{validate_hypotheses, PhysicalParams, ValidationReport};
use crate::potentials::{solve_continuation, solve_limit, solve_regularized};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Expected MMS orders and the accepted deviation.
const SPATIAL_ORDER: f64 = 2.0;
const TEMPORAL_ORDER: f64 = 1.0;
const ORDER_TOL: f64 = 0.2;
const COMPATIBILITY_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-8;
/// Fine mesh used by the temporal MMS study.
const TEMPORAL_REFINEMENT: usize = 40;

#[derive(Parser, Debug)]
#[command(name = "tecell", version, about = "Truncated thermal-electrochemical cell solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full simulation with CSV, field and log output
    Run(RunArgs),
    /// Hypothesis report only
    Validate(ConfigArgs),
    /// Manufactured-solution refinement studies
    Mms(ConfigArgs),
    /// Potential solves along a decreasing tau sequence
    SweepTau(ConfigArgs),
    /// Main solvers against the brute-force oracles
    OracleCompare(ConfigArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.directory`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::OracleRefused(_) => EXIT_CONFIG,
        Error::Structural(_) => EXIT_VALIDATION,
        Error::Solver { .. } | Error::Io(_) => EXIT_SOLVER,
    }
}

struct Loaded {
    config: RunConfig,
    mesh: Mesh,
    params: PhysicalParams,
}

fn load(path: &Path) -> Result<Loaded, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    let mesh = config.mesh.build()?;
    let params = config.params.discretize(&mesh);
    Ok(Loaded { config, mesh, params })
}

/// Runs the CLI on `argv` (program name first), writing reports to `out`
/// and diagnostics to `err`. Returns the exit status.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let path = match &cli.command {
        Command::Run(a) => &a.config,
        Command::Validate(a) | Command::Mms(a) | Command::SweepTau(a) | Command::OracleCompare(a) => {
            &a.config
        }
    };
    let loaded = match load(path) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return error_code(&e);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(&loaded, a.output_dir.as_deref(), out, err),
        Command::Validate(_) => cmd_validate(&loaded, out, err),
        Command::Mms(_) => cmd_mms(&loaded.config, out),
        Command::SweepTau(_) => cmd_sweep_tau(&loaded, out),
        Command::OracleCompare(_) => cmd_oracle(&loaded, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            error_code(&e)
        }
    }
}

fn hypotheses(l: &Loaded, err: &mut dyn Write) -> Result<ValidationReport, Error> {
    let report = validate_hypotheses(&l.params, &l.mesh)?;
    for c in report.failures() {
        let _ = writeln!(err, "{} violated: {}", c.hypothesis, c.detail);
    }
    Ok(report)
}

fn cmd_validate(l: &Loaded, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let report = hypotheses(l, err)?;
    writeln!(out, "{report}")?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_run(
    l: &Loaded,
    output_dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Error> {
    let report = hypotheses(l, err)?;
    if !report.passed() {
        writeln!(out, "{report}")?;
        return Ok(EXIT_VALIDATION);
    }
    let dir = output_dir.unwrap_or(&l.config.output.directory);
    match run_simulation(&l.mesh, &l.params, &l.config.solver) {
        Ok(result) => {
            write_outputs(dir, &l.config, &l.mesh, &report, &result, None)?;
            write!(out, "{}", format_summary(&result))?;
            Ok(EXIT_OK)
        }
        Err(failure) => {
            let msg = failure.error.to_string();
            if !failure.partial.times.is_empty() {
                write_outputs(dir, &l.config, &l.mesh, &report, &failure.partial, Some(&msg))?;
            }
            Err(failure.error)
        }
    }
}

fn rate_row(out: &mut dyn Write, label: f64, h: f64, e: f64, prev: Option<(f64, f64)>) -> std::io::Result<()> {
    match prev {
        Some((ph, pe)) => writeln!(out, "{label:<10} {h:<12.4e} {e:<12.4e} {:.3}", (pe / e).ln() / (ph / h).ln()),
        None => writeln!(out, "{label:<10} {h:<12.4e} {e:<12.4e} -"),
    }
}

fn study_rate(out: &mut dyn Write, name: &str, hs: &[f64], es: &[f64], expected: f64) -> Result<bool, Error> {
    let rate = convergence_rate(es, hs)?;
    let ok = (rate - expected).abs() <= ORDER_TOL;
    writeln!(
        out,
        "{name}: fitted rate {rate:.3} (expected {expected} +/- {ORDER_TOL}) {}\n",
        if ok { "pass" } else { "FAIL" }
    )?;
    Ok(ok)
}

fn cmd_mms(config: &RunConfig, out: &mut dyn Write) -> Result<i32, Error> {
    let study = &config.study;
    let ids: Vec<&str> = if study.mms_case == "all" {
        MMS_CASES.to_vec()
    } else {
        vec![study.mms_case.as_str()]
    };
    let mut all_ok = true;
    for id in ids {
        match mms_case(id)? {
            MmsCase::Heat(case) if case.frequency.is_none() => {
                writeln!(out, "[{id}] spatial refinement, dt = 0.1, t = 0.5")?;
                writeln!(out, "{:<10} {:<12} {:<12} rate", "r", "h", "error")?;
                let (mut hs, mut es) = (Vec::new(), Vec::new());
                for &r in &study.refinements {
                    let (h, e) = case.error(r, 0.1, 0.5)?;
                    rate_row(out, r as f64, h, e, hs.last().copied().zip(es.last().copied()))?;
                    hs.push(h);
                    es.push(e);
                }
                all_ok &= study_rate(out, id, &hs, &es, SPATIAL_ORDER)?;
            }
            MmsCase::Heat(case) => {
                writeln!(out, "[{id}] time refinement, r = {TEMPORAL_REFINEMENT}, t = 1")?;
                writeln!(out, "{:<10} {:<12} {:<12} rate", "dt", "dt", "error")?;
                let (mut hs, mut es) = (Vec::new(), Vec::new());
                for &dt in &study.time_steps {
                    let (_, e) = case.error(TEMPORAL_REFINEMENT, dt, 1.0)?;
                    rate_row(out, dt, dt, e, hs.last().copied().zip(es.last().copied()))?;
                    hs.push(dt);
                    es.push(e);
                }
                all_ok &= study_rate(out, id, &hs, &es, TEMPORAL_ORDER)?;
            }
            MmsCase::Potential(case) => {
                writeln!(out, "[{id}] per-volume residual of the exact fields")?;
                writeln!(out, "{:<10} {:<12} {:<12} rate", "r", "h", "error")?;
                let (mut hs, mut es) = (Vec::new(), Vec::new());
                for &r in &study.refinements {
                    let (h, e) = case.residual_error(r)?;
                    rate_row(out, r as f64, h, e, hs.last().copied().zip(es.last().copied()))?;
                    hs.push(h);
                    es.push(e);
                }
                let compat = case.compatibility_residual(32);
                let ok = compat <= COMPATIBILITY_TOL;
                writeln!(
                    out,
                    "compatibility residual {compat:.3e} (tolerance {COMPATIBILITY_TOL:e}) {}",
                    if ok { "pass" } else { "FAIL" }
                )?;
                all_ok &= ok;
                all_ok &= study_rate(out, id, &hs, &es, SPATIAL_ORDER)?;
            }
        }
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_sweep_tau(l: &Loaded, out: &mut dyn Write) -> Result<i32, Error> {
    let s = &l.config.solver;
    let ctx = ButlerVolmerContext::new(&l.params, s.eps)?;
    let taus = &l.config.study.taus;
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("study.taus must be positive".into()));
    }
    let u = &l.params.u0;
    let sweep = solve_continuation(u, taus, s.delta, &ctx, &l.mesh, &s.nonlinear, None)?;
    let limit = solve_limit(u, s.delta, &ctx, &l.mesh, &s.nonlinear)?;
    writeln!(
        out,
        "{:<10} {:<12} {:<12} {:<12} {:<12} {:<12} newton",
        "tau", "sup_phis", "sup_phie", "gap", "mean_sum", "residual"
    )?;
    let mut gaps = Vec::with_capacity(taus.len());
    for (tau, pot) in taus.iter().zip(&sweep).chain([(&0.0, &limit)]) {
        let gap = pot.max_diff(&limit);
        if *tau > 0.0 {
            gaps.push(gap);
        }
        writeln!(
            out,
            "{tau:<10.1e} {:<12.4e} {:<12.4e} {gap:<12.4e} {:<12.4e} {:<12.4e} {}",
            pot.sup_phis, pot.sup_phie, pot.mean_sum, pot.residual_norm, pot.newton_iters
        )?;
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    writeln!(out, "gaps monotone: {}", if monotone { "yes" } else { "no" })?;
    Ok(EXIT_OK)
}

fn cmd_oracle(l: &Loaded, out: &mut dyn Write) -> Result<i32, Error> {
    let s = &l.config.solver;
    let ctx = ButlerVolmerContext::new(&l.params, s.eps)?;
    let tau = l.config.study.oracle_tau;
    let mut reports = Vec::new();
    for seed in 0..l.config.study.oracle_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = l
            .params
            .u0
            .iter()
            .map(|v| v + rng.random_range(-0.5..0.5) * s.eps)
            .collect();
        let case = format!("seed {seed}");
        let oracle0 = brute_force_solve(&l.mesh, &u, 0.0, s.delta, &ctx)?;
        let main0 = solve_limit(&u, s.delta, &ctx, &l.mesh, &s.nonlinear)?;
        reports.push(pair_report(&case, "solve_limit", &main0, &oracle0));
        if tau > 0.0 {
            let oracle = brute_force_solve(&l.mesh, &u, tau, s.delta, &ctx)?;
            let main = solve_regularized(&u, tau, s.delta, &ctx, &l.mesh, &s.nonlinear)?;
            reports.push(pair_report(&case, "solve_reg", &main, &oracle));
        }
        let prev = TemperatureField::initial(&l.params);
        let main = apply_j(&u, &prev, s.dt, &ctx, &l.mesh, s, None)?;
        let (oracle_u, _) = monolithic_step(&u, &prev.values, s.dt, s.delta, &ctx, &l.mesh)?;
        reports.push(OracleReport::compare(case, "apply_j", main.u.values, oracle_u, ORACLE_TOL));
    }
    writeln!(out, "{}", OracleReport::header())?;
    for r in &reports {
        writeln!(out, "{r}")?;
    }
    Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_VALIDATION })
}

fn pair_report(
    case: &str,
    quantity: &str,
    main: &crate::potentials::PotentialPair,
    oracle: &crate::potentials::PotentialPair,
) -> OracleReport {
    let flat = |p: &crate::potentials::PotentialPair| p.phis.iter().chain(&p.phie).copied().collect();
    OracleReport::compare(case, quantity, flat(main), flat(oracle), ORACLE_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut argv = vec!["tecell"];
        argv.extend_from_slice(args);
        let code = run_cli(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn cfg(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const OK: &str = "mesh.lengths = 1, 0.4, 1\nmesh.cells = 3, 2, 3\n";

    #[test]
    fn validate_ok() {
        let f = cfg(OK);
        let (code, out, _) = invoke(&["validate", "--config", f.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert!(out.trim_end().ends_with("H1..H7 pass"));
    }

    #[test]
    fn help_and_usage() {
        let (code, out, _) = invoke(&["validate", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("--config"));
        let (code, _, err) = invoke(&["validate"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--config"));
    }

    #[test]
    fn config_errors_exit_3() {
        let f = cfg(&format!("{OK}params.sigmas = 1\n"));
        let (code, _, err) = invoke(&["run", "--config", f.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("line 3"));
        let (code, _, _) = invoke(&["run", "--config", "/nonexistent/x.cfg"]);
        assert_eq!(code, EXIT_CONFIG);
    }

    #[test]
    fn oracle_compare_passes_on_small_mesh() {
        let f = cfg(&format!("{OK}params.current_anode = 0.3\nparams.f_amplitude = 0.2\nsolver.eps = 0.5\n"));
        let (code, out, err) = invoke(&["oracle-compare", "--config", f.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{out}{err}");
        assert_eq!(out.lines().count(), 1 + 9);
    }

    #[test]
    fn oracle_refuses_large_mesh() {
        let f = cfg("mesh.lengths = 1, 0.4, 1\nmesh.cells = 10, 2, 10\n");
        let (code, _, err) = invoke(&["oracle-compare", "--config", f.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("oracle refused"));
    }

    #[test]
    fn sweep_tau_table() {
        let f = cfg(&format!("{OK}params.ocp = 0.2, -0.1\nparams.current_anode = 0.2\n"));
        let (code, out, _) = invoke(&["sweep-tau", "--config", f.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("gaps monotone: yes"), "{out}");
    }
}
