//! Finite-volume solves for the solid and electrolyte potentials at a frozen
//! temperature.
//!
//! The discrete system, written per cell in integrated form, is
//!
//! ```text
//! solid (electrode cells):
//!   sum_f T_s (ps_a - ps_b) + tau |K| ps_a + delta A_s |K| i(u, ps - pe) - delta sum_contact I |f| = 0
//! electrolyte (all cells):
//!   sum_f T_e (pe_i - pe_j) + tau |K| pe_i + delta sum_f F_f - delta A_s |K| i(u, ps - pe) chi = 0
//! ```
//!
//! with harmonic two-point transmissibilities `T` and the drift flux
//! `F_f = mean(sigma_e d1 w) (f.n) |f|`. Fluxes are computed once per face and
//! added with opposite signs to the two cells, so summing all rows gives
//! `tau (int pe + int ps) - delta sum I |f|` exactly.
//!
//! Every solve works on the bordered system
//!
//! ```text
//! [ J  m ] [dx]   [-(R + lambda m)]
//! [ m' 0 ] [dl] = [-(m'x - C)     ]
//! ```
//!
//! where `m` holds cell measures. For `tau = 0` the constraint
//! `int pe + int ps = 0` fixes the constant nullspace direction; for `tau > 0`
//! the target `C = delta sum I |f| / tau` is the value every solution has
//! anyway (sum of all rows), so the multiplier vanishes and the bordered
//! problem is equivalent to the plain one while staying well conditioned
//! as `tau -> 0`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::butler_volmer::{ButlerVolmerContext, Truncation};
use crate::error::{Error, Result, Stage};
use crate::linalg::{max_abs, solve_dense};
use crate::mesh::{BoundaryTag, Domain, FaceCells, Mesh};

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSettings {
    /// Max-norm of the per-volume residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Smallest Armijo step before Newton is declared stalled.
    pub damping_floor: f64,
    /// Iterations of the frozen-kernel fixed-point map used when Newton stalls
    /// (`tau > 0` only).
    pub picard_fallback_iters: usize,
    pub picard_fallback_relaxation: f64,
}

impl Default for NonlinearSettings {
    fn default() -> Self {
        NonlinearSettings {
            tol: 1e-10,
            max_iters: 100,
            damping_floor: 2f64.powi(-20),
            picard_fallback_iters: 400,
            picard_fallback_relaxation: 0.5,
        }
    }
}

/// Solid potential on the electrodes (electrode numbering) and electrolyte
/// potential on every cell, with solve metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub phis: Vec<f64>,
    pub phie: Vec<f64>,
    pub tau: f64,
    pub delta: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub sup_phis: f64,
    pub sup_phie: f64,
    /// `int_Omega phie + int_Omega' phis`.
    pub mean_sum: f64,
    /// Lagrange multiplier of the mean constraint (zero at a true solution).
    pub multiplier: f64,
    /// The exponent cap was hit at the returned point.
    pub saturated: bool,
    pub used_fallback: bool,
}

impl PotentialPair {
    /// Bare fields with empty metadata, e.g. to evaluate a residual.
    pub fn from_fields(mesh: &Mesh, phis: Vec<f64>, phie: Vec<f64>, tau: f64, delta: f64) -> Self {
        let mut p = PotentialPair {
            phis,
            phie,
            tau,
            delta,
            residual_norm: f64::NAN,
            newton_iters: 0,
            sup_phis: 0.0,
            sup_phie: 0.0,
            mean_sum: 0.0,
            multiplier: 0.0,
            saturated: false,
            used_fallback: false,
        };
        p.refresh_norms(mesh);
        p
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::from_fields(
            mesh,
            vec![0.0; mesh.electrode_cells().len()],
            vec![0.0; mesh.num_cells()],
            0.0,
            1.0,
        )
    }

    fn refresh_norms(&mut self, mesh: &Mesh) {
        self.sup_phis = max_abs(&self.phis);
        self.sup_phie = max_abs(&self.phie);
        self.mean_sum = mean_sum(mesh, &self.phis, &self.phie);
    }

    /// Solid potential at a global cell index, `None` on the separator.
    pub fn phis_at(&self, mesh: &Mesh, cell: usize) -> Option<f64> {
        mesh.solid_index(cell).map(|s| self.phis[s])
    }

    /// Max-norm distance between two pairs over both fields.
    pub fn max_diff(&self, other: &PotentialPair) -> f64 {
        let a = self
            .phis
            .iter()
            .zip(&other.phis)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        self.phie
            .iter()
            .zip(&other.phie)
            .fold(a, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Tolerance scale used for the zero-mean identity.
    pub fn mean_scale(&self, mesh: &Mesh) -> f64 {
        (mesh.region_measure(Domain::Whole) + mesh.region_measure(Domain::Electrodes))
            * 1f64.max(self.sup_phis).max(self.sup_phie)
    }
}

fn mean_sum(mesh: &Mesh, phis: &[f64], phie: &[f64]) -> f64 {
    let cells = mesh.cells();
    let e: f64 = phie.iter().zip(cells).map(|(p, c)| p * c.measure).sum();
    let s: f64 = mesh
        .electrode_cells()
        .iter()
        .zip(phis)
        .map(|(&i, p)| p * cells[i].measure)
        .sum();
    e + s
}

/// Face data of the discrete operator, precomputed for one frozen temperature.
struct Operator<'c, 'p> {
    ctx: &'c ButlerVolmerContext<'p>,
    u: &'c [f64],
    tau: f64,
    delta: f64,
    ns: usize,
    n: usize,
    solid_cell: Vec<usize>,
    /// (solid a, solid b, T_s)
    solid_links: Vec<(usize, usize, f64)>,
    /// (cell i, cell j, T_e)
    electrolyte_links: Vec<(usize, usize, f64)>,
    /// (solid index, I |f|)
    contacts: Vec<(usize, f64)>,
    /// (owner, neighbour, F_f outward from owner)
    drift: Vec<(usize, Option<usize>, f64)>,
    measure: Vec<f64>,
}

impl<'c, 'p> Operator<'c, 'p> {
    fn new(
        mesh: &Mesh,
        ctx: &'c ButlerVolmerContext<'p>,
        u: &'c [f64],
        tau: f64,
        delta: f64,
    ) -> Result<Self> {
        let p = ctx.params();
        let n = mesh.num_cells();
        if u.len() != n {
            return Err(Error::structural(format!(
                "temperature has {} entries, mesh has {n} cells",
                u.len()
            )));
        }
        if !(tau >= 0.0) {
            return Err(Error::config("tau must be non-negative"));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::config("delta must lie in (0, 1]"));
        }
        let sigma_s = p.sigma_s.dense(f64::NAN);
        let mut solid_links = Vec::new();
        let mut electrolyte_links = Vec::new();
        let mut contacts = Vec::new();
        let mut drift = Vec::new();
        let weight = |i: usize| p.sigma_e[i] * p.d1 * ctx.effective_temperature(u[i], i);
        for (fi, face) in mesh.faces().iter().enumerate() {
            let fn_area = p.f.face_normal[fi] * face.measure;
            match face.cells {
                FaceCells::Interior { owner, neighbour } => {
                    electrolyte_links.push((owner, neighbour, mesh.transmissibility(fi, &p.sigma_e)));
                    if mesh.is_solid_interior(fi) {
                        let a = mesh.solid_index(owner).unwrap();
                        let b = mesh.solid_index(neighbour).unwrap();
                        solid_links.push((a, b, mesh.transmissibility(fi, &sigma_s)));
                    }
                    if fn_area != 0.0 {
                        let flux = 0.5 * (weight(owner) + weight(neighbour)) * fn_area;
                        drift.push((owner, Some(neighbour), flux));
                    }
                }
                FaceCells::Boundary { cell } => {
                    if matches!(
                        face.tag,
                        Some(BoundaryTag::AnodeContact | BoundaryTag::CathodeContact)
                    ) {
                        let s = mesh.solid_index(cell).ok_or_else(|| {
                            Error::structural("contact face on a separator cell")
                        })?;
                        contacts.push((s, p.current[fi] * face.measure));
                    }
                    if fn_area != 0.0 {
                        drift.push((cell, None, weight(cell) * fn_area));
                    }
                }
            }
        }
        Ok(Operator {
            ctx,
            u,
            tau,
            delta,
            ns: mesh.electrode_cells().len(),
            n,
            solid_cell: mesh.electrode_cells().to_vec(),
            solid_links,
            electrolyte_links,
            contacts,
            drift,
            measure: mesh.cells().iter().map(|c| c.measure).collect(),
        })
    }

    fn dim(&self) -> usize {
        self.ns + self.n
    }

    /// Measures in unknown ordering (solid block, then electrolyte block).
    fn weights(&self) -> Vec<f64> {
        self.solid_cell
            .iter()
            .map(|&i| self.measure[i])
            .chain(self.measure.iter().copied())
            .collect()
    }

    /// Integrated residual of `x = (phis, phie)`, with the kernel held at
    /// `frozen` when given (the frozen-kernel map).
    fn residual(&self, x: &[f64], frozen: Option<&[f64]>) -> (Vec<f64>, bool) {
        let (ns, delta) = (self.ns, self.delta);
        let a_s = self.ctx.params().a_s;
        let mut r = vec![0.0; self.dim()];
        for &(a, b, t) in &self.solid_links {
            let flux = t * (x[a] - x[b]);
            r[a] += flux;
            r[b] -= flux;
        }
        for &(i, j, t) in &self.electrolyte_links {
            let flux = t * (x[ns + i] - x[ns + j]);
            r[ns + i] += flux;
            r[ns + j] -= flux;
        }
        for &(owner, neighbour, flux) in &self.drift {
            r[ns + owner] += delta * flux;
            if let Some(j) = neighbour {
                r[ns + j] -= delta * flux;
            }
        }
        for &(s, current) in &self.contacts {
            r[s] -= delta * current;
        }
        let mut saturated = false;
        for (s, &i) in self.solid_cell.iter().enumerate() {
            let src = frozen.unwrap_or(x);
            let y2 = src[s] - src[ns + i];
            let k = self.ctx.i_fara(self.u[i], y2, i);
            saturated |= k.saturated;
            let coupling = delta * a_s * self.measure[i] * k.value;
            r[s] += coupling;
            r[ns + i] -= coupling;
        }
        if self.tau > 0.0 {
            for (s, &i) in self.solid_cell.iter().enumerate() {
                r[s] += self.tau * self.measure[i] * x[s];
            }
            for i in 0..self.n {
                r[ns + i] += self.tau * self.measure[i] * x[ns + i];
            }
        }
        (r, saturated)
    }

    /// Linear part of the operator (fluxes and tau terms), without the kernel.
    fn linear_matrix(&self, size: usize) -> DMatrix<f64> {
        let ns = self.ns;
        let mut jac = DMatrix::zeros(size, size);
        for &(a, b, t) in &self.solid_links {
            jac[(a, a)] += t;
            jac[(b, b)] += t;
            jac[(a, b)] -= t;
            jac[(b, a)] -= t;
        }
        for &(i, j, t) in &self.electrolyte_links {
            let (i, j) = (ns + i, ns + j);
            jac[(i, i)] += t;
            jac[(j, j)] += t;
            jac[(i, j)] -= t;
            jac[(j, i)] -= t;
        }
        for (s, &i) in self.solid_cell.iter().enumerate() {
            jac[(s, s)] += self.tau * self.measure[i];
        }
        for i in 0..self.n {
            jac[(ns + i, ns + i)] += self.tau * self.measure[i];
        }
        jac
    }

    /// Jacobian of the residual, padded to `size` rows and columns.
    fn jacobian(&self, x: &[f64], size: usize) -> DMatrix<f64> {
        let ns = self.ns;
        let a_s = self.ctx.params().a_s;
        let mut jac = self.linear_matrix(size);
        let check = self.ctx.truncation() == Truncation::Enabled;
        for (s, &i) in self.solid_cell.iter().enumerate() {
            let y2 = x[s] - x[ns + i];
            let d = self.ctx.d_ifara_dy2(self.u[i], y2, i).value;
            let c = self.delta * a_s * self.measure[i] * d;
            debug_assert!(
                !check || c >= self.delta * a_s * self.ctx.coercivity() * self.measure[i] * (1.0 - 1e-12),
                "kernel coupling below the coercivity bound at cell {i}"
            );
            let e = ns + i;
            jac[(s, s)] += c;
            jac[(s, e)] -= c;
            jac[(e, s)] -= c;
            jac[(e, e)] += c;
        }
        jac
    }

    fn net_current(&self) -> f64 {
        self.contacts.iter().map(|(_, c)| c).sum()
    }

    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (x[..self.ns].to_vec(), x[self.ns..self.ns + self.n].to_vec())
    }

    fn per_volume_norm(&self, r: &[f64], weights: &[f64]) -> f64 {
        r.iter()
            .zip(weights)
            .fold(0.0f64, |m, (ri, w)| m.max((ri / w).abs()))
    }
}

struct Bordered<'o, 'c, 'p> {
    op: &'o Operator<'c, 'p>,
    weights: Vec<f64>,
    total: f64,
    target: f64,
}

impl Bordered<'_, '_, '_> {
    fn eval(&self, z: &[f64]) -> (Vec<f64>, bool) {
        let n = self.op.dim();
        let lambda = z[n];
        let (mut r, sat) = self.op.residual(&z[..n], None);
        for (ri, w) in r.iter_mut().zip(&self.weights) {
            *ri += lambda * w;
        }
        let c: f64 = z[..n].iter().zip(&self.weights).map(|(x, w)| x * w).sum();
        r.push(c - self.target);
        (r, sat)
    }

    fn norm(&self, f: &[f64]) -> f64 {
        let n = self.op.dim();
        self.op
            .per_volume_norm(&f[..n], &self.weights)
            .max((f[n] / self.total).abs())
    }

    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.op.dim();
        let mut jac = self.op.jacobian(&z[..n], n + 1);
        for (k, &w) in self.weights.iter().enumerate() {
            jac[(k, n)] = w;
            jac[(n, k)] = w;
        }
        jac
    }
}

/// Integrated residual over (electrode cells, then all cells).
pub fn assemble_residual(
    pot: &PotentialPair,
    u: &[f64],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    tau: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    let op = Operator::new(mesh, ctx, u, tau, delta)?;
    if pot.phis.len() != op.ns || pot.phie.len() != op.n {
        return Err(Error::structural("potential fields do not match the mesh"));
    }
    let x: Vec<f64> = pot.phis.iter().chain(&pot.phie).copied().collect();
    Ok(op.residual(&x, None).0)
}

/// Dense Jacobian of [`assemble_residual`] with respect to (phis, phie).
pub fn assemble_jacobian(
    pot: &PotentialPair,
    u: &[f64],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    tau: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let op = Operator::new(mesh, ctx, u, tau, delta)?;
    let x: Vec<f64> = pot.phis.iter().chain(&pot.phie).copied().collect();
    Ok(op.jacobian(&x, op.dim()))
}

/// Per-volume max-norm of an integrated residual.
pub fn residual_norm(residual: &[f64], mesh: &Mesh) -> f64 {
    let cells = mesh.cells();
    let ns = mesh.electrode_cells().len();
    let mut m = 0.0f64;
    for (s, &i) in mesh.electrode_cells().iter().enumerate() {
        m = m.max((residual[s] / cells[i].measure).abs());
    }
    for (i, c) in cells.iter().enumerate() {
        m = m.max((residual[ns + i] / c.measure).abs());
    }
    m
}

/// One application of the frozen-kernel map: the kernel is evaluated at
/// `frozen` and the two linear problems are solved. Requires `tau > 0`.
pub fn apply_b(
    frozen: &PotentialPair,
    u: &[f64],
    tau: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Result<PotentialPair> {
    if !(tau > 0.0) {
        return Err(Error::config("the frozen-kernel map needs tau > 0"));
    }
    let op = Operator::new(mesh, ctx, u, tau, delta)?;
    let z: Vec<f64> = frozen.phis.iter().chain(&frozen.phie).copied().collect();
    let x = frozen_solve(&op, &z)?;
    let (phis, phie) = op.split(&x);
    Ok(PotentialPair::from_fields(mesh, phis, phie, tau, delta))
}

fn frozen_solve(op: &Operator<'_, '_>, frozen: &[f64]) -> Result<Vec<f64>> {
    let n = op.dim();
    let zero = vec![0.0; n];
    // residual at x = 0 with the kernel frozen gives minus the right-hand side
    let (r0, _) = op.residual(&zero, Some(frozen));
    let rhs: Vec<f64> = r0.iter().map(|v| -v).collect();
    solve_dense(op.linear_matrix(n), &rhs)
        .ok_or_else(|| Error::solver(Stage::Potential, "singular frozen-kernel system", vec![]))
}

/// Solves the potential system at frozen temperature `u` for any `tau >= 0`,
/// starting from `initial` (zeros when absent).
#[allow(clippy::too_many_arguments)]
pub fn solve_potentials(
    u: &[f64],
    tau: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &NonlinearSettings,
    initial: Option<&PotentialPair>,
) -> Result<PotentialPair> {
    let op = Operator::new(mesh, ctx, u, tau, delta)?;
    let n = op.dim();
    let weights = op.weights();
    let total: f64 = weights.iter().sum();
    let target = if tau > 0.0 {
        delta * op.net_current() / tau
    } else {
        0.0
    };
    let system = Bordered {
        op: &op,
        weights,
        total,
        target,
    };

    let mut z = vec![0.0; n + 1];
    if let Some(init) = initial {
        if init.phis.len() != op.ns || init.phie.len() != op.n {
            return Err(Error::structural("initial guess does not match the mesh"));
        }
        z[..op.ns].copy_from_slice(&init.phis);
        z[op.ns..n].copy_from_slice(&init.phie);
    }

    let mut history = Vec::new();
    let mut used_fallback = false;
    let mut iters = 0;
    let outcome = match newton(&system, &mut z, settings, &mut history, &mut iters) {
        Ok(()) => Ok(()),
        Err(msg) if tau > 0.0 && settings.picard_fallback_iters > 0 => {
            used_fallback = true;
            let mut x = z[..n].to_vec();
            let omega = settings.picard_fallback_relaxation;
            for _ in 0..settings.picard_fallback_iters {
                let next = frozen_solve(&op, &x)?;
                let change = next
                    .iter()
                    .zip(&x)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                for (xi, ni) in x.iter_mut().zip(&next) {
                    *xi = (1.0 - omega) * *xi + omega * ni;
                }
                if change < settings.tol {
                    break;
                }
            }
            z[..n].copy_from_slice(&x);
            z[n] = 0.0;
            newton(&system, &mut z, settings, &mut history, &mut iters)
                .map_err(|m2| format!("{msg}; after fixed-point fallback: {m2}"))
        }
        Err(msg) => Err(msg),
    };
    if let Err(msg) = outcome {
        return Err(Error::solver(Stage::Potential, msg, history));
    }

    let (r, saturated) = op.residual(&z[..n], None);
    let residual = op.per_volume_norm(&r, &system.weights);
    let lambda = z[n];
    if tau == 0.0 && residual > settings.tol {
        return Err(Error::solver(
            Stage::Potential,
            format!(
                "mean constraint could not be enforced (multiplier {lambda:e}, residual {residual:e}); \
                 check the contact currents balance"
            ),
            history,
        ));
    }
    let (phis, phie) = op.split(&z[..n]);
    let mut pair = PotentialPair::from_fields(mesh, phis, phie, tau, delta);
    pair.residual_norm = residual;
    pair.newton_iters = iters;
    pair.multiplier = lambda;
    pair.saturated = saturated;
    pair.used_fallback = used_fallback;
    Ok(pair)
}

fn newton(
    system: &Bordered<'_, '_, '_>,
    z: &mut Vec<f64>,
    settings: &NonlinearSettings,
    history: &mut Vec<f64>,
    iters: &mut usize,
) -> std::result::Result<(), String> {
    let (mut f, _) = system.eval(z);
    let mut norm = system.norm(&f);
    history.push(norm);
    let mut converged = norm <= settings.tol;
    let mut polished = false;
    while !(converged && polished) {
        if *iters >= settings.max_iters {
            return if converged {
                Ok(())
            } else {
                Err(format!("no convergence in {} Newton iterations (residual {norm:e})", settings.max_iters))
            };
        }
        let jac = system.jacobian(z);
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dz = solve_dense(jac, &rhs).ok_or_else(|| "singular Newton matrix".to_string())?;
        *iters += 1;
        if converged {
            // one extra full step to land well below the tolerance
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
            let (ft, _) = system.eval(&trial);
            let nt = system.norm(&ft);
            if nt <= norm {
                *z = trial;
                f = ft;
                norm = nt;
                history.push(norm);
            }
            polished = true;
            continue;
        }
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
            let (ft, _) = system.eval(&trial);
            let nt = system.norm(&ft);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * step) * norm {
                *z = trial;
                f = ft;
                norm = nt;
                break;
            }
            step *= 0.5;
            if step < settings.damping_floor {
                return Err(format!("Newton damping exhausted at residual {norm:e}"));
            }
        }
        history.push(norm);
        converged = norm <= settings.tol;
    }
    let _ = f;
    Ok(())
}

/// Unique solution of the `tau`-regularized system (`tau > 0`).
pub fn solve_regularized(
    u: &[f64],
    tau: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &NonlinearSettings,
) -> Result<PotentialPair> {
    if !(tau > 0.0) {
        return Err(Error::config("tau must be positive for the regularized solve"));
    }
    solve_potentials(u, tau, delta, ctx, mesh, settings, None)
}

/// Solution of the unregularized system normalised by `int pe + int ps = 0`.
pub fn solve_limit(
    u: &[f64],
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &NonlinearSettings,
) -> Result<PotentialPair> {
    solve_potentials(u, 0.0, delta, ctx, mesh, settings, None)
}

/// Solves along a sequence of `tau` values, warm-starting each solve from
/// the previous one.
pub fn solve_continuation(
    u: &[f64],
    taus: &[f64],
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
    settings: &NonlinearSettings,
    initial: Option<&PotentialPair>,
) -> Result<Vec<PotentialPair>> {
    let mut out: Vec<PotentialPair> = Vec::with_capacity(taus.len());
    for &tau in taus {
        let start = out.last().or(initial);
        out.push(solve_potentials(u, tau, delta, ctx, mesh, settings, start)?);
    }
    Ok(out)
}

/// Terms of the discrete energy identity obtained by testing the solid rows
/// with `phis` and the electrolyte rows with `phie`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyIdentity {
    pub grad_solid: f64,
    pub grad_electrolyte: f64,
    pub tau_solid: f64,
    pub tau_electrolyte: f64,
    pub kernel: f64,
    pub drift: f64,
    pub boundary: f64,
    /// |left side - right side|
    pub residual: f64,
    /// Largest term magnitude.
    pub scale: f64,
}

impl EnergyIdentity {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

pub fn energy_identity_residual(
    pot: &PotentialPair,
    u: &[f64],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Result<EnergyIdentity> {
    let op = Operator::new(mesh, ctx, u, pot.tau, pot.delta)?;
    let (ps, pe) = (&pot.phis, &pot.phie);
    let a_s = ctx.params().a_s;
    let delta = pot.delta;
    let grad_solid: f64 = op
        .solid_links
        .iter()
        .map(|&(a, b, t)| t * (ps[a] - ps[b]).powi(2))
        .sum();
    let grad_electrolyte: f64 = op
        .electrolyte_links
        .iter()
        .map(|&(i, j, t)| t * (pe[i] - pe[j]).powi(2))
        .sum();
    let tau_solid: f64 = pot.tau
        * op.solid_cell
            .iter()
            .enumerate()
            .map(|(s, &i)| op.measure[i] * ps[s] * ps[s])
            .sum::<f64>();
    let tau_electrolyte: f64 =
        pot.tau * pe.iter().zip(&op.measure).map(|(p, m)| m * p * p).sum::<f64>();
    let kernel: f64 = delta
        * a_s
        * op.solid_cell
            .iter()
            .enumerate()
            .map(|(s, &i)| {
                let y2 = ps[s] - pe[i];
                op.measure[i] * ctx.i_fara(u[i], y2, i).value * y2
            })
            .sum::<f64>();
    // discrete analogue of int sigma_e d1 w f . grad phie
    let drift: f64 = delta
        * op.drift
            .iter()
            .map(|&(i, j, flux)| match j {
                Some(j) => flux * (pe[j] - pe[i]),
                None => -flux * pe[i],
            })
            .sum::<f64>();
    let boundary: f64 = delta * op.contacts.iter().map(|&(s, c)| c * ps[s]).sum::<f64>();
    let lhs = grad_solid + grad_electrolyte + tau_solid + tau_electrolyte + kernel;
    let rhs = drift + boundary;
    let scale = [grad_solid, grad_electrolyte, tau_solid, tau_electrolyte, kernel, drift, boundary]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(EnergyIdentity {
        grad_solid,
        grad_electrolyte,
        tau_solid,
        tau_electrolyte,
        kernel,
        drift,
        boundary,
        residual: (lhs - rhs).abs(),
        scale,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriDiagnostics {
    pub l2_phis: f64,
    pub l2_phie: f64,
    pub sup_phis: f64,
    pub sup_phie: f64,
    pub mean_sum: f64,
    /// `int_Omega' i_fara`.
    pub ifara_integral: f64,
}

pub fn apriori_diagnostics(
    pot: &PotentialPair,
    u: &[f64],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> AprioriDiagnostics {
    let cells = mesh.cells();
    let mut l2s = 0.0;
    let mut ifara = 0.0;
    for (s, &i) in mesh.electrode_cells().iter().enumerate() {
        l2s += cells[i].measure * pot.phis[s] * pot.phis[s];
        ifara += cells[i].measure * ctx.i_fara(u[i], pot.phis[s] - pot.phie[i], i).value;
    }
    let l2e: f64 = pot
        .phie
        .iter()
        .zip(cells)
        .map(|(p, c)| c.measure * p * p)
        .sum();
    AprioriDiagnostics {
        l2_phis: l2s.sqrt(),
        l2_phie: l2e.sqrt(),
        sup_phis: max_abs(&pot.phis),
        sup_phie: max_abs(&pot.phie),
        mean_sum: mean_sum(mesh, &pot.phis, &pot.phie),
        ifara_integral: ifara,
    }
}

/// Green-Gauss cell gradients of both potentials.
///
/// Face values: flux-weighted interpolation on interior faces; on the
/// boundary of each field's domain the prescribed normal flux is used
/// (`delta I / sigma_s` on contacts, zero elsewhere, including the
/// electrode/separator faces for the solid phase).
pub fn cell_gradients(
    pot: &PotentialPair,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let p = ctx.params();
    let sigma_s = p.sigma_s.dense(f64::NAN);
    let n = mesh.num_cells();
    let mut grad_e = vec![[0.0; 2]; n];
    let mut grad_s_global = vec![[0.0; 2]; n];
    let solid_value = |i: usize| pot.phis[mesh.solid_index(i).unwrap()];

    for (fi, face) in mesh.faces().iter().enumerate() {
        let add = |g: &mut [f64; 2], value: f64, sign: f64| {
            g[0] += sign * value * face.normal[0] * face.measure;
            g[1] += sign * value * face.normal[1] * face.measure;
        };
        match face.cells {
            FaceCells::Interior { owner, neighbour } => {
                let di = mesh.face_distance(fi, owner);
                let dj = mesh.face_distance(fi, neighbour);
                let (wi, wj) = (p.sigma_e[owner] / di, p.sigma_e[neighbour] / dj);
                let value = (wi * pot.phie[owner] + wj * pot.phie[neighbour]) / (wi + wj);
                add(&mut grad_e[owner], value, 1.0);
                add(&mut grad_e[neighbour], value, -1.0);

                let eo = mesh.cells()[owner].region.is_electrode();
                let en = mesh.cells()[neighbour].region.is_electrode();
                match (eo, en) {
                    (true, true) => {
                        let (wi, wj) = (sigma_s[owner] / di, sigma_s[neighbour] / dj);
                        let value =
                            (wi * solid_value(owner) + wj * solid_value(neighbour)) / (wi + wj);
                        add(&mut grad_s_global[owner], value, 1.0);
                        add(&mut grad_s_global[neighbour], value, -1.0);
                    }
                    (true, false) => add(&mut grad_s_global[owner], solid_value(owner), 1.0),
                    (false, true) => {
                        add(&mut grad_s_global[neighbour], solid_value(neighbour), -1.0)
                    }
                    (false, false) => {}
                }
            }
            FaceCells::Boundary { cell } => {
                add(&mut grad_e[cell], pot.phie[cell], 1.0);
                if mesh.cells()[cell].region.is_electrode() {
                    let d = mesh.face_distance(fi, cell);
                    let flux = pot.delta * p.current[fi];
                    let value = solid_value(cell) + flux * d / sigma_s[cell];
                    add(&mut grad_s_global[cell], value, 1.0);
                }
            }
        }
    }
    for (g, c) in grad_e.iter_mut().zip(mesh.cells()) {
        g[0] /= c.measure;
        g[1] /= c.measure;
    }
    let grad_s = mesh
        .electrode_cells()
        .iter()
        .map(|&i| {
            let m = mesh.cells()[i].measure;
            [grad_s_global[i][0] / m, grad_s_global[i][1] / m]
        })
        .collect();
    (grad_s, grad_e)
}

/// Plain-text field table: cell index, centroid, region, phis (blank on the
/// separator), phie.
pub fn format_potential_field(pot: &PotentialPair, mesh: &Mesh) -> String {
    let mut out = String::new();
    let two_d = mesh.dimension() == 2;
    out.push_str(if two_d {
        "cell_index x y region phis phie\n"
    } else {
        "cell_index x region phis phie\n"
    });
    for (i, c) in mesh.cells().iter().enumerate() {
        let phis = pot.phis_at(mesh, i).map(|v| v.to_string()).unwrap_or_default();
        if two_d {
            let _ = writeln!(
                out,
                "{i} {} {} {} {phis} {}",
                c.centroid[0],
                c.centroid[1],
                c.region.name(),
                pot.phie[i]
            );
        } else {
            let _ = writeln!(out, "{i} {} {} {phis} {}", c.centroid[0], c.region.name(), pot.phie[i]);
        }
    }
    out
}
