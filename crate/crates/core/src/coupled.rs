//! Outer coupling: the step map `J`, its Picard iteration, the time march and
//! the existence horizon `T*`.

use std::fmt;

use crate::butler_volmer::{source_q_eps, ButlerVolmerContext, Truncation};
use crate::error::{Error, Result, Stage};
use crate::heat::{
    boundary_effective_temperature, linf_monitor, source_norm, step_temperature, LinfRecord,
    TemperatureField,
};
use crate::mesh::Mesh;
use crate::params::PhysicalParams;
use crate::potentials::{
    cell_gradients, energy_identity_residual, solve_continuation, solve_potentials,
    NonlinearSettings, PotentialPair,
};

#[derive(Debug, Clone, PartialEq)]
pub enum TauMode {
    /// `tau = 0` with the mean constraint.
    ConstrainedZero,
    /// Solve along the listed `tau` values and keep the last solve.
    Continuation(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterMode {
    /// Picard iteration inside every time step.
    PerStep,
    /// Iterate the whole time march to a trajectory fixed point.
    Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub tau_mode: TauMode,
    pub delta: f64,
    pub nonlinear: NonlinearSettings,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Initial relaxation; halved on residual increase down to 1/64.
    pub picard_relaxation: f64,
    pub dt: f64,
    pub horizon: f64,
    pub eps: f64,
    /// `sup |u|` above which the run is declared divergent.
    pub overflow_ceiling: f64,
    pub outer_mode: OuterMode,
    /// Bisection levels used to refine `T*` inside the first active step
    /// (0 keeps step granularity).
    pub tstar_bisection: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tau_mode: TauMode::ConstrainedZero,
            delta: 1.0,
            nonlinear: NonlinearSettings::default(),
            picard_tol: 1e-10,
            picard_max_iters: 200,
            picard_relaxation: 1.0,
            dt: 0.1,
            horizon: 1.0,
            eps: 1.0,
            overflow_ceiling: 1e6,
            outer_mode: OuterMode::PerStep,
            tstar_bisection: 0,
        }
    }
}

pub const MIN_RELAXATION: f64 = 1.0 / 64.0;

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.nonlinear_tol", self.nonlinear.tol),
            ("solver.picard_tol", self.picard_tol),
            ("solver.dt", self.dt),
            ("solver.horizon", self.horizon),
            ("solver.eps", self.eps),
            ("solver.overflow_ceiling", self.overflow_ceiling),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config("solver.delta must lie in (0, 1]"));
        }
        if !(self.picard_relaxation > 0.0 && self.picard_relaxation <= 1.0) {
            return Err(Error::config("solver.picard_relaxation must lie in (0, 1]"));
        }
        if self.picard_max_iters == 0 {
            return Err(Error::config("solver.picard_max_iters must be positive"));
        }
        if let TauMode::Continuation(taus) = &self.tau_mode {
            if taus.is_empty() || taus.iter().any(|t| !(*t >= 0.0)) {
                return Err(Error::config("solver.tau_sequence must be non-empty and non-negative"));
            }
        }
        Ok(())
    }

    /// Number of steps covering the horizon (the last step may be shortened).
    pub fn num_steps(&self) -> usize {
        let n = (self.horizon / self.dt - 1e-9).ceil();
        n.max(1.0) as usize
    }

    fn step_times(&self) -> Vec<f64> {
        let n = self.num_steps();
        (0..=n)
            .map(|k| (k as f64 * self.dt).min(self.horizon))
            .collect()
    }
}

/// Output of one application of the step map.
#[derive(Debug, Clone)]
pub struct StepMap {
    pub u: TemperatureField,
    /// Potentials solved at the frozen input temperature.
    pub potentials: PotentialPair,
    pub q: Vec<f64>,
}

/// Potentials at frozen temperature `v`, per the configured `tau` mode.
pub fn solve_frozen_potentials(
    v: &[f64],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &SolverSettings,
    warm: Option<&PotentialPair>,
) -> Result<PotentialPair> {
    match &settings.tau_mode {
        TauMode::ConstrainedZero => solve_potentials(
            v,
            0.0,
            settings.delta,
            ctx,
            mesh,
            &settings.nonlinear,
            warm,
        ),
        TauMode::Continuation(taus) => {
            let mut all =
                solve_continuation(v, taus, settings.delta, ctx, mesh, &settings.nonlinear, warm)?;
            Ok(all.pop().expect("validated non-empty tau sequence"))
        }
    }
}

/// Heat source at frozen temperature `v` with the given potentials.
pub fn heat_source(
    v: &[f64],
    pot: &PotentialPair,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Result<Vec<f64>> {
    let (gs, ge) = cell_gradients(pot, ctx, mesh);
    source_q_eps(v, &pot.phis, &pot.phie, &gs, &ge, ctx, mesh)
}

/// The step map: potentials at frozen `v`, the source `Q`, then one implicit
/// heat step from `u_prev` with Robin data from `v`. With `delta < 1` the
/// source and the Robin flux are scaled by `delta`.
pub fn apply_j(
    v: &[f64],
    u_prev: &TemperatureField,
    dt: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &SolverSettings,
    warm: Option<&PotentialPair>,
) -> Result<StepMap> {
    let p = ctx.params();
    let potentials = solve_frozen_potentials(v, ctx, mesh, settings, warm)?;
    let mut q = heat_source(v, &potentials, ctx, mesh)?;
    let delta = settings.delta;
    let mut w = boundary_effective_temperature(v, ctx, mesh);
    if delta != 1.0 {
        q.iter_mut().for_each(|x| *x *= delta);
        w.iter_mut()
            .for_each(|x| *x = p.t_ambient + delta * (*x - p.t_ambient));
    }
    let u = step_temperature(u_prev, &q, &w, dt, mesh, p)?;
    Ok(StepMap { u, potentials, q })
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Accepted field at the end of the step.
    pub u: TemperatureField,
    /// Potentials solved at the accepted field.
    pub potentials: PotentialPair,
    pub q: Vec<f64>,
    /// Applications of the step map before acceptance.
    pub iterations: usize,
    /// `||J(u_k) - u_k||_inf` per iteration.
    pub history: Vec<f64>,
    /// Geometric mean of successive residual ratios (NaN with < 2 entries).
    pub decay_ratio: f64,
    /// `||J(u*) - u*||_inf` at the accepted field.
    pub certificate: f64,
    pub relaxation: f64,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn check_ceiling(u: &TemperatureField, settings: &SolverSettings, history: &[f64]) -> Result<()> {
    let sup = u.sup();
    if !(sup <= settings.overflow_ceiling) {
        return Err(Error::solver(
            Stage::Picard,
            format!(
                "divergence tripwire: sup|u| = {sup:e} exceeds the ceiling {:e}",
                settings.overflow_ceiling
            ),
            history.to_vec(),
        ));
    }
    Ok(())
}

/// Relaxed fixed-point iteration of the step map from `u_prev` over `dt`.
pub fn picard_step(
    u_prev: &TemperatureField,
    dt: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &SolverSettings,
    warm: Option<&PotentialPair>,
) -> Result<PicardOutcome> {
    let mut omega = settings.picard_relaxation;
    let mut u = u_prev.values.clone();
    let mut warm = warm.cloned();
    let mut history = Vec::new();
    for k in 1..=settings.picard_max_iters {
        let image = apply_j(&u, u_prev, dt, ctx, mesh, settings, warm.as_ref())?;
        check_ceiling(&image.u, settings, &history)?;
        let r = max_diff(&image.u.values, &u);
        if let Some(&last) = history.last() {
            if r > last && omega > MIN_RELAXATION {
                omega = (omega * 0.5).max(MIN_RELAXATION);
            }
        }
        history.push(r);
        warm = Some(image.potentials.clone());
        if r <= settings.picard_tol {
            let accepted = image.u;
            let check = apply_j(&accepted.values, u_prev, dt, ctx, mesh, settings, warm.as_ref())?;
            let certificate = max_diff(&check.u.values, &accepted.values);
            if certificate > 2.0 * settings.picard_tol {
                return Err(Error::solver(
                    Stage::Picard,
                    format!("fixed-point certificate {certificate:e} exceeds twice the tolerance"),
                    history,
                ));
            }
            let decay_ratio = decay_ratio(&history);
            return Ok(PicardOutcome {
                u: accepted,
                potentials: check.potentials,
                q: check.q,
                iterations: k,
                history,
                decay_ratio,
                certificate,
                relaxation: omega,
            });
        }
        for (ui, ji) in u.iter_mut().zip(&image.u.values) {
            *ui = (1.0 - omega) * *ui + omega * ji;
        }
    }
    Err(Error::solver(
        Stage::Picard,
        format!(
            "no fixed point within {} iterations (last update {:e})",
            settings.picard_max_iters,
            history.last().copied().unwrap_or(f64::NAN)
        ),
        history,
    ))
}

fn decay_ratio(history: &[f64]) -> f64 {
    let ratios: Vec<f64> = history
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    if ratios.is_empty() {
        f64::NAN
    } else {
        (ratios.iter().sum::<f64>() / ratios.len() as f64).exp()
    }
}

/// Per-snapshot diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub mean_u: f64,
    pub sup_phis: f64,
    pub sup_phie: f64,
    pub picard_iters: usize,
    pub picard_history: Vec<f64>,
    pub decay_ratio: f64,
    pub certificate: f64,
    /// `max |u0 - u| > eps` somewhere.
    pub truncation_active: bool,
    pub max_deviation: f64,
    pub mean_sum: f64,
    /// Energy identity residual relative to its largest term.
    pub energy_residual: f64,
    pub potential_residual: f64,
    pub newton_iters: usize,
    pub saturated: bool,
    pub positivity_violated: bool,
    pub linf: LinfRecord,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TStar {
    Time(f64),
    /// The band holds over the whole run.
    Horizon,
}

impl fmt::Display for TStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TStar::Time(t) => write!(f, "{t}"),
            TStar::Horizon => f.write_str("horizon"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    pub temperatures: Vec<TemperatureField>,
    pub potentials: Vec<PotentialPair>,
    pub records: Vec<StepRecord>,
    pub t_star: TStar,
    pub eps: f64,
    /// Trajectory-mode outer iterations (0 in per-step mode).
    pub trajectory_iters: usize,
}

impl SimulationResult {
    fn empty(eps: f64) -> Self {
        SimulationResult {
            times: Vec::new(),
            temperatures: Vec::new(),
            potentials: Vec::new(),
            records: Vec::new(),
            t_star: TStar::Horizon,
            eps,
            trajectory_iters: 0,
        }
    }
}

/// A failed run with everything computed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: SimulationResult,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} snapshots)",
            self.error,
            self.partial.times.len()
        )
    }
}

impl std::error::Error for RunFailure {}

fn max_deviation(u: &[f64], params: &PhysicalParams) -> f64 {
    max_diff(u, &params.u0)
}

#[allow(clippy::too_many_arguments)]
fn record(
    t: f64,
    u: &TemperatureField,
    pot: &PotentialPair,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    picard: Option<&PicardOutcome>,
    q_norm: f64,
) -> Result<StepRecord> {
    let p = ctx.params();
    let energy = energy_identity_residual(pot, &u.values, ctx, mesh)?;
    let dev = max_deviation(&u.values, p);
    Ok(StepRecord {
        t,
        min_u: u.min(),
        max_u: u.max(),
        mean_u: u.mean(mesh),
        sup_phis: pot.sup_phis,
        sup_phie: pot.sup_phie,
        picard_iters: picard.map_or(0, |o| o.iterations),
        picard_history: picard.map_or_else(Vec::new, |o| o.history.clone()),
        decay_ratio: picard.map_or(f64::NAN, |o| o.decay_ratio),
        certificate: picard.map_or(0.0, |o| o.certificate),
        truncation_active: dev > ctx.eps(),
        max_deviation: dev,
        mean_sum: pot.mean_sum,
        energy_residual: energy.relative(),
        potential_residual: pot.residual_norm,
        newton_iters: pot.newton_iters,
        saturated: pot.saturated,
        positivity_violated: u.min() <= 0.0,
        linf: linf_monitor(u, q_norm, p),
    })
}

fn ctx_at<'a>(base: &ButlerVolmerContext<'a>, t: f64) -> ButlerVolmerContext<'a> {
    base.clone().with_ocp_offset(base.params().ocp_offset(t))
}

/// Marches from `t = 0` to the horizon. On a stage failure the snapshots
/// computed so far are returned inside the error.
pub fn run_simulation(
    mesh: &Mesh,
    params: &PhysicalParams,
    settings: &SolverSettings,
) -> std::result::Result<SimulationResult, Box<RunFailure>> {
    let mut result = SimulationResult::empty(settings.eps);
    let fail = |error: Error, partial: SimulationResult| Box::new(RunFailure { error, partial });
    if let Err(e) = settings.validate() {
        return Err(fail(e, result));
    }
    let base = match ButlerVolmerContext::new(params, settings.eps) {
        Ok(c) => c,
        Err(e) => return Err(fail(e, result)),
    };
    let outcome = match settings.outer_mode {
        OuterMode::PerStep => march_per_step(mesh, &base, settings, &mut result),
        OuterMode::Trajectory => march_trajectory(mesh, &base, settings, &mut result),
    };
    if let Err(e) = outcome {
        result.t_star = detect_tstar(&result, settings.eps);
        return Err(fail(e, result));
    }
    result.t_star = detect_tstar(&result, settings.eps);
    if settings.tstar_bisection > 0 {
        if let TStar::Time(t) = result.t_star {
            match refine_tstar(mesh, &base, settings, &result, t) {
                Ok(refined) => result.t_star = TStar::Time(refined),
                Err(e) => return Err(fail(e, result)),
            }
        }
    }
    Ok(result)
}

fn initial_snapshot(
    mesh: &Mesh,
    base: &ButlerVolmerContext<'_>,
    settings: &SolverSettings,
    result: &mut SimulationResult,
) -> Result<()> {
    let u = TemperatureField::initial(base.params());
    let ctx = ctx_at(base, 0.0);
    let pot = solve_frozen_potentials(&u.values, &ctx, mesh, settings, None)?;
    let rec = record(0.0, &u, &pot, &ctx, mesh, None, 0.0)?;
    result.times.push(0.0);
    result.temperatures.push(u);
    result.potentials.push(pot);
    result.records.push(rec);
    Ok(())
}

fn march_per_step(
    mesh: &Mesh,
    base: &ButlerVolmerContext<'_>,
    settings: &SolverSettings,
    result: &mut SimulationResult,
) -> Result<()> {
    initial_snapshot(mesh, base, settings, result)?;
    let times = settings.step_times();
    let mut q_norm = 0.0;
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let ctx = ctx_at(base, t1);
        let prev = result.temperatures.last().unwrap();
        let warm = result.potentials.last();
        let out = picard_step(prev, t1 - t0, &ctx, mesh, settings, warm)?;
        q_norm += (t1 - t0) * source_norm(&out.q, mesh, 2.0);
        let rec = record(t1, &out.u, &out.potentials, &ctx, mesh, Some(&out), q_norm)?;
        result.times.push(t1);
        result.temperatures.push(out.u);
        result.potentials.push(out.potentials);
        result.records.push(rec);
    }
    Ok(())
}

/// Whole-trajectory fixed point: march the heat equation with coefficients
/// frozen at the previous trajectory iterate, relax, repeat.
fn march_trajectory(
    mesh: &Mesh,
    base: &ButlerVolmerContext<'_>,
    settings: &SolverSettings,
    result: &mut SimulationResult,
) -> Result<()> {
    let times = settings.step_times();
    let u0 = TemperatureField::initial(base.params());
    let mut v: Vec<Vec<f64>> = vec![u0.values.clone(); times.len()];
    let mut omega = settings.picard_relaxation;
    let mut history: Vec<f64> = Vec::new();
    let mut warm: Vec<Option<PotentialPair>> = vec![None; times.len()];
    for k in 1..=settings.picard_max_iters {
        let mut u = vec![u0.clone()];
        for (n, w) in times.windows(2).enumerate() {
            let ctx = ctx_at(base, w[1]);
            let image = apply_j(&v[n + 1], &u[n], w[1] - w[0], &ctx, mesh, settings, warm[n + 1].as_ref())?;
            check_ceiling(&image.u, settings, &history)?;
            warm[n + 1] = Some(image.potentials);
            u.push(image.u);
        }
        let r = u
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (a, b)| m.max(max_diff(&a.values, b)));
        if let Some(&last) = history.last() {
            if r > last {
                omega = (omega * 0.5).max(MIN_RELAXATION);
            }
        }
        history.push(r);
        if r <= settings.picard_tol {
            result.trajectory_iters = k;
            let mut q_norm = 0.0;
            for (n, field) in u.into_iter().enumerate() {
                let t = times[n];
                let ctx = ctx_at(base, t);
                let pot = solve_frozen_potentials(&field.values, &ctx, mesh, settings, warm[n].as_ref())?;
                if n > 0 {
                    let q = heat_source(&field.values, &pot, &ctx, mesh)?;
                    q_norm += (t - times[n - 1]) * source_norm(&q, mesh, 2.0);
                }
                let mut rec = record(t, &field, &pot, &ctx, mesh, None, q_norm)?;
                rec.picard_iters = if n == 0 { 0 } else { k };
                result.times.push(t);
                result.temperatures.push(field);
                result.potentials.push(pot);
                result.records.push(rec);
            }
            return Ok(());
        }
        for (vn, un) in v.iter_mut().zip(&u) {
            for (a, b) in vn.iter_mut().zip(&un.values) {
                *a = (1.0 - omega) * *a + omega * b;
            }
        }
    }
    Err(Error::solver(
        Stage::Picard,
        format!("no trajectory fixed point within {} iterations", settings.picard_max_iters),
        history,
    ))
}

/// Last snapshot time before the first one with `max |u0 - u| > eps`, or
/// [`TStar::Horizon`] when the band is never left.
pub fn detect_tstar(result: &SimulationResult, eps: f64) -> TStar {
    let Some(first) = result.temperatures.first() else {
        return TStar::Horizon;
    };
    let u0 = &first.values;
    let mut last_inside = None;
    for (t, u) in result.times.iter().zip(&result.temperatures) {
        if max_diff(&u.values, u0) > eps {
            return match last_inside {
                Some(t) => TStar::Time(t),
                None => TStar::Time(0.0),
            };
        }
        last_inside = Some(*t);
    }
    TStar::Horizon
}

/// Bisects inside the first step that leaves the band.
fn refine_tstar(
    mesh: &Mesh,
    base: &ButlerVolmerContext<'_>,
    settings: &SolverSettings,
    result: &SimulationResult,
    t_star: f64,
) -> Result<f64> {
    let k = result
        .times
        .iter()
        .position(|&t| t == t_star)
        .expect("t_star is a snapshot time");
    let Some(&t_next) = result.times.get(k + 1) else {
        return Ok(t_star);
    };
    let params = base.params();
    let (mut lo, mut hi) = (0.0, t_next - t_star);
    for _ in 0..settings.tstar_bisection {
        let mid = 0.5 * (lo + hi);
        let ctx = ctx_at(base, t_star + mid);
        let out = picard_step(
            &result.temperatures[k],
            mid,
            &ctx,
            mesh,
            settings,
            Some(&result.potentials[k]),
        )?;
        if max_deviation(&out.u.values, params) > settings.eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(t_star + lo)
}

/// Largest change in the potentials or the heat source when every snapshot up
/// to `T*` is recomputed with the raw temperature in place of the effective
/// one. Also checks that `w = u` holds exactly there.
pub fn truncation_transparency(
    result: &SimulationResult,
    mesh: &Mesh,
    params: &PhysicalParams,
    settings: &SolverSettings,
) -> Result<f64> {
    let base = ButlerVolmerContext::new(params, settings.eps)?;
    let limit = match result.t_star {
        TStar::Time(t) => t,
        TStar::Horizon => f64::INFINITY,
    };
    let mut worst = 0.0f64;
    for ((t, u), pot) in result
        .times
        .iter()
        .zip(&result.temperatures)
        .zip(&result.potentials)
    {
        if *t > limit {
            break;
        }
        let ctx = ctx_at(&base, *t);
        for (i, &ui) in u.values.iter().enumerate() {
            assert_eq!(
                ctx.effective_temperature(ui, i),
                ui,
                "effective temperature differs from u inside the band"
            );
        }
        let raw = ctx.clone().with_truncation(Truncation::Disabled);
        let q = heat_source(&u.values, pot, &ctx, mesh)?;
        let pot_raw = solve_frozen_potentials(&u.values, &raw, mesh, settings, None)?;
        let q_raw = heat_source(&u.values, &pot_raw, &raw, mesh)?;
        let pot_trunc = solve_frozen_potentials(&u.values, &ctx, mesh, settings, None)?;
        worst = worst
            .max(pot_raw.max_diff(&pot_trunc))
            .max(max_diff(&q, &q_raw));
    }
    Ok(worst)
}

/// Runs `picard_step` from several initial potential guesses and reports the
/// largest disagreement of the accepted temperatures. Uniqueness of the
/// coupled fixed point is not guaranteed, so this is a diagnostic.
pub fn coupled_uniqueness_spread(
    u_prev: &TemperatureField,
    dt: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &SolverSettings,
    guesses: &[PotentialPair],
) -> Result<f64> {
    let mut fields = Vec::with_capacity(guesses.len());
    for g in guesses {
        fields.push(picard_step(u_prev, dt, ctx, mesh, settings, Some(g))?.u);
    }
    let mut spread = 0.0f64;
    for a in &fields {
        for b in &fields {
            spread = spread.max(a.max_diff(b));
        }
    }
    Ok(spread)
}
