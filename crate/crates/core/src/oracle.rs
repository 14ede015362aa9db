//! Reference computations kept deliberately naive and separate from the
//! production assembly: geometry is rebuilt from the layer lengths and cell
//! counts, every residual is assembled with plain loops, Jacobians are
//! differenced numerically and linear systems go through a hand-written
//! Gaussian elimination.
//!
//! Also home to the manufactured-solution catalog, derivative checks and
//! convergence-rate fitting.

use std::f64::consts::PI;
use std::fmt;

use crate::butler_volmer::{
    source_q_cell, source_q_cell_partials, ButlerVolmerContext, Truncation,
};
use crate::error::{Error, Result, Stage};
use crate::heat::{step_temperature, TemperatureField};
use crate::mesh::{build_sandwich_mesh, BoundaryTag, FaceCells, Mesh, Region};
use crate::params::{FluxProfile, ParamSpec, PhysicalParams, RobinSign, SourceForm};
use crate::potentials::{assemble_residual, PotentialPair};

pub const MAX_ORACLE_CELLS: usize = 16;
pub const MAX_ORACLE_UNKNOWNS: usize = 64;
const FD_STEP: f64 = 1e-7;
const ORACLE_TOL: f64 = 1e-11;
const ORACLE_MAX_ITERS: usize = 60;

/// Gaussian elimination with partial pivoting on a row-major dense matrix.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Tensor geometry rebuilt from the layer data alone.
struct Grid {
    nx: usize,
    ny: usize,
    dx: Vec<f64>,
    dy: f64,
    /// Face area of x-faces (1 in 1D).
    x_area: f64,
    region: Vec<Region>,
    two_d: bool,
}

impl Grid {
    fn from_mesh(mesh: &Mesh) -> Self {
        let (nx, ny) = mesh.shape();
        let lengths = mesh.lengths();
        let mut counts = [0usize; 3];
        let mut region = vec![Region::Anode; nx];
        for c in mesh.cells().iter().filter(|c| c.iy == 0) {
            let r = match c.region {
                Region::Anode => 0,
                Region::Separator => 1,
                Region::Cathode => 2,
            };
            counts[r] += 1;
            region[c.ix] = c.region;
        }
        let mut dx = Vec::with_capacity(nx);
        for r in 0..3 {
            for _ in 0..counts[r] {
                dx.push(lengths[r] / counts[r] as f64);
            }
        }
        let two_d = mesh.dimension() == 2;
        let dy = if two_d { mesh.width() / ny as f64 } else { 1.0 };
        Grid {
            nx,
            ny,
            dx,
            dy,
            x_area: dy,
            region,
            two_d,
        }
    }

    fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    fn measure(&self, ix: usize) -> f64 {
        self.dx[ix] * self.dy
    }

    fn electrode(&self, ix: usize) -> bool {
        self.region[ix] != Region::Separator
    }

    /// Neighbour links `(a, b, area, dist_a, dist_b)` with `b` to the right of
    /// or above `a`.
    fn links(&self) -> Vec<(usize, usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if ix + 1 < self.nx {
                    out.push((
                        self.idx(ix, iy),
                        self.idx(ix + 1, iy),
                        self.x_area,
                        0.5 * self.dx[ix],
                        0.5 * self.dx[ix + 1],
                    ));
                }
                if self.two_d && iy + 1 < self.ny {
                    out.push((
                        self.idx(ix, iy),
                        self.idx(ix, iy + 1),
                        self.dx[ix],
                        0.5 * self.dy,
                        0.5 * self.dy,
                    ));
                }
            }
        }
        out
    }

    /// Boundary faces `(cell, area, dist, outward normal)`.
    fn boundary(&self) -> Vec<(usize, f64, f64, [f64; 2])> {
        let mut out = Vec::new();
        for iy in 0..self.ny {
            out.push((self.idx(0, iy), self.x_area, 0.5 * self.dx[0], [-1.0, 0.0]));
            let last = self.nx - 1;
            out.push((self.idx(last, iy), self.x_area, 0.5 * self.dx[last], [1.0, 0.0]));
        }
        if self.two_d {
            for ix in 0..self.nx {
                out.push((self.idx(ix, 0), self.dx[ix], 0.5 * self.dy, [0.0, -1.0]));
                out.push((self.idx(ix, self.ny - 1), self.dx[ix], 0.5 * self.dy, [0.0, 1.0]));
            }
        }
        out
    }
}

fn oracle_w(ctx: &ButlerVolmerContext<'_>, u: f64, cell: usize) -> f64 {
    let p = ctx.params();
    if ctx.truncation() == Truncation::Disabled {
        return u;
    }
    let d = p.u0[cell] - u;
    let eps = ctx.eps();
    if d.abs() <= eps {
        u
    } else {
        p.u0[cell] - d.signum() * eps
    }
}

fn oracle_kernel(ctx: &ButlerVolmerContext<'_>, u: f64, y2: f64, cell: usize) -> f64 {
    let p = ctx.params();
    let w = oracle_w(ctx, u, cell);
    let g1 = p.g1.at(cell);
    let a = p.alpha;
    let u_ocp = p.ocp.at(cell) + ctx.ocp_offset();
    g1 * (a * y2 / w).exp() * (-a * u_ocp / w).exp() - g1 * (-a * y2 / w).exp() * (a * u_ocp / w).exp()
}

/// Problem data gathered once per oracle call.
struct PotentialProblem<'a, 'p> {
    grid: Grid,
    ctx: &'a ButlerVolmerContext<'p>,
    u: &'a [f64],
    tau: f64,
    delta: f64,
    /// Global cell index of every electrode cell, in mesh order.
    solid: Vec<usize>,
    solid_of: Vec<Option<usize>>,
    /// (cell, I |f|)
    contacts: Vec<(usize, f64)>,
    /// f.n on each link, oriented from a to b.
    link_fn: Vec<f64>,
    links: Vec<(usize, usize, f64, f64, f64)>,
}

impl<'a, 'p> PotentialProblem<'a, 'p> {
    fn new(
        mesh: &Mesh,
        u: &'a [f64],
        tau: f64,
        delta: f64,
        ctx: &'a ButlerVolmerContext<'p>,
    ) -> Result<Self> {
        let grid = Grid::from_mesh(mesh);
        let n = grid.nx * grid.ny;
        let p = ctx.params();
        let mut solid = Vec::new();
        let mut solid_of = vec![None; n];
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                if grid.electrode(ix) {
                    solid_of[grid.idx(ix, iy)] = Some(solid.len());
                    solid.push(grid.idx(ix, iy));
                }
            }
        }
        let mut contacts = Vec::new();
        let mut face_of = std::collections::HashMap::new();
        for (fi, face) in mesh.faces().iter().enumerate() {
            match face.cells {
                FaceCells::Interior { owner, neighbour } => {
                    face_of.insert((owner.min(neighbour), owner.max(neighbour)), fi);
                }
                FaceCells::Boundary { cell } => {
                    if p.f.face_normal[fi] != 0.0 {
                        return Err(Error::OracleRefused(
                            "f . n must vanish on the boundary".into(),
                        ));
                    }
                    if matches!(
                        face.tag,
                        Some(BoundaryTag::AnodeContact | BoundaryTag::CathodeContact)
                    ) {
                        contacts.push((cell, p.current[fi] * face.measure));
                    }
                }
            }
        }
        let links = grid.links();
        let cells = mesh.cells();
        let mut link_fn = Vec::with_capacity(links.len());
        for &(a, b, ..) in &links {
            let fi = face_of[&(a.min(b), a.max(b))];
            let face = &mesh.faces()[fi];
            let dir = [
                cells[b].centroid[0] - cells[a].centroid[0],
                cells[b].centroid[1] - cells[a].centroid[1],
            ];
            let s = (dir[0] * face.normal[0] + dir[1] * face.normal[1]).signum();
            link_fn.push(s * p.f.face_normal[fi]);
        }
        Ok(PotentialProblem {
            grid,
            ctx,
            u,
            tau,
            delta,
            solid,
            solid_of,
            contacts,
            link_fn,
            links,
        })
    }

    fn n(&self) -> usize {
        self.grid.nx * self.grid.ny
    }

    fn dim(&self) -> usize {
        self.solid.len() + self.n()
    }

    fn measure(&self, cell: usize) -> f64 {
        self.grid.measure(cell % self.grid.nx)
    }

    /// Residual in the natural ordering (solid block, then electrolyte).
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let p = self.ctx.params();
        let ns = self.solid.len();
        let n = self.n();
        let mut r = vec![0.0; ns + n];
        let phis = |c: usize| x[self.solid_of[c].unwrap()];
        let phie = |c: usize| x[ns + c];
        for (k, &(a, b, area, da, db)) in self.links.iter().enumerate() {
            let te = area / (da / p.sigma_e[a] + db / p.sigma_e[b]);
            r[ns + a] += te * (phie(a) - phie(b));
            r[ns + b] += te * (phie(b) - phie(a));
            let wa = p.sigma_e[a] * p.d1 * oracle_w(self.ctx, self.u[a], a);
            let wb = p.sigma_e[b] * p.d1 * oracle_w(self.ctx, self.u[b], b);
            let flux = 0.5 * (wa + wb) * self.link_fn[k] * area;
            r[ns + a] += self.delta * flux;
            r[ns + b] -= self.delta * flux;
            if let (Some(sa), Some(sb)) = (self.solid_of[a], self.solid_of[b]) {
                let ts = area / (da / p.sigma_s.at(a) + db / p.sigma_s.at(b));
                r[sa] += ts * (phis(a) - phis(b));
                r[sb] += ts * (phis(b) - phis(a));
            }
        }
        for &(c, current) in &self.contacts {
            r[self.solid_of[c].unwrap()] -= self.delta * current;
        }
        for c in 0..n {
            let m = self.measure(c);
            r[ns + c] += self.tau * m * phie(c);
            if let Some(s) = self.solid_of[c] {
                r[s] += self.tau * m * phis(c);
                let i = oracle_kernel(self.ctx, self.u[c], phis(c) - phie(c), c);
                r[s] += self.delta * p.a_s * m * i;
                r[ns + c] -= self.delta * p.a_s * m * i;
            }
        }
        r
    }

    fn weights(&self) -> Vec<f64> {
        self.solid
            .iter()
            .map(|&c| self.measure(c))
            .chain((0..self.n()).map(|c| self.measure(c)))
            .collect()
    }
}

/// Solves the potential system by undamped Newton with a central-difference
/// Jacobian. Unknowns are visited in the order given by `order` (a
/// permutation of `0..dim`); at `tau = 0` the last unknown in that order is
/// eliminated through the mean constraint and its equation dropped.
pub fn brute_force_solve_ordered(
    mesh: &Mesh,
    u: &[f64],
    tau: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    order: &[usize],
) -> Result<PotentialPair> {
    if mesh.num_cells() > MAX_ORACLE_CELLS {
        return Err(Error::OracleRefused(format!(
            "{} cells exceed the oracle cap of {MAX_ORACLE_CELLS}",
            mesh.num_cells()
        )));
    }
    let prob = PotentialProblem::new(mesh, u, tau, delta, ctx)?;
    let dim = prob.dim();
    if dim > MAX_ORACLE_UNKNOWNS {
        return Err(Error::OracleRefused(format!("{dim} unknowns exceed the cap")));
    }
    let mut seen = vec![false; dim];
    if order.len() != dim || order.iter().any(|&k| k >= dim || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::OracleRefused("ordering is not a permutation".into()));
    }
    let weights = prob.weights();
    let constrained = tau == 0.0;
    let free = if constrained { dim - 1 } else { dim };
    let eliminated = order[dim - 1];

    let expand = |z: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (k, &var) in order[..free].iter().enumerate() {
            x[var] = z[k];
        }
        if constrained {
            let s: f64 = order[..free].iter().map(|&v| weights[v] * x[v]).sum();
            x[eliminated] = -s / weights[eliminated];
        }
        x
    };
    let reduced = |z: &[f64]| -> Vec<f64> {
        let r = prob.residual(&expand(z));
        order[..free].iter().map(|&v| r[v]).collect()
    };

    let mut z = vec![0.0; free];
    let mut f = reduced(&z);
    let mut iters = 0;
    let norm = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    while norm(&f) > ORACLE_TOL {
        if iters == ORACLE_MAX_ITERS {
            return Err(Error::solver(
                Stage::Oracle,
                format!("oracle Newton did not reach {ORACLE_TOL:e} (residual {:e})", norm(&f)),
                vec![],
            ));
        }
        let mut jac = vec![vec![0.0; free]; free];
        for col in 0..free {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[col] += FD_STEP;
            zm[col] -= FD_STEP;
            let (fp, fm) = (reduced(&zp), reduced(&zm));
            for row in 0..free {
                jac[row][col] = (fp[row] - fm[row]) / (2.0 * FD_STEP);
            }
        }
        let dz = gauss_solve(jac, f.iter().map(|v| -v).collect())
            .ok_or_else(|| Error::solver(Stage::Oracle, "singular oracle Jacobian", vec![]))?;
        for (a, b) in z.iter_mut().zip(&dz) {
            *a += b;
        }
        f = reduced(&z);
        iters += 1;
    }
    let x = expand(&z);
    let ns = prob.solid.len();
    let mut pair = PotentialPair::from_fields(mesh, x[..ns].to_vec(), x[ns..].to_vec(), tau, delta);
    pair.residual_norm = norm(&prob.residual(&x));
    pair.newton_iters = iters;
    Ok(pair)
}

pub fn brute_force_solve(
    mesh: &Mesh,
    u: &[f64],
    tau: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
) -> Result<PotentialPair> {
    let dim = mesh.electrode_cells().len() + mesh.num_cells();
    let order: Vec<usize> = (0..dim).collect();
    brute_force_solve_ordered(mesh, u, tau, delta, ctx, &order)
}

/// Independently assembled residual (same ordering as the production one).
pub fn oracle_residual(
    pot: &PotentialPair,
    u: &[f64],
    tau: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Result<Vec<f64>> {
    let prob = PotentialProblem::new(mesh, u, tau, delta, ctx)?;
    let x: Vec<f64> = pot.phis.iter().chain(&pot.phie).copied().collect();
    Ok(prob.residual(&x))
}

/// One application of the step map computed from scratch: brute-force
/// potentials at `v` (`tau = 0`), Green-Gauss gradients, the source, and a
/// dense implicit heat step.
pub fn monolithic_step(
    v: &[f64],
    u_prev: &[f64],
    dt: f64,
    delta: f64,
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Result<(Vec<f64>, PotentialPair)> {
    let pot = brute_force_solve(mesh, v, 0.0, delta, ctx)?;
    let prob = PotentialProblem::new(mesh, v, 0.0, delta, ctx)?;
    let p = ctx.params();
    let grid = &prob.grid;
    let n = prob.n();
    let phis = |c: usize| pot.phis[prob.solid_of[c].unwrap()];

    let mut ge = vec![[0.0; 2]; n];
    let mut gs = vec![[0.0; 2]; n];
    let dir = |a: usize, b: usize| -> [f64; 2] {
        if b == a + 1 && b % grid.nx != 0 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    };
    for &(a, b, area, da, db) in &prob.links {
        let d = dir(a, b);
        let (wa, wb) = (p.sigma_e[a] / da, p.sigma_e[b] / db);
        let face = (wa * pot.phie[a] + wb * pot.phie[b]) / (wa + wb);
        for k in 0..2 {
            ge[a][k] += face * d[k] * area;
            ge[b][k] -= face * d[k] * area;
        }
        match (prob.solid_of[a].is_some(), prob.solid_of[b].is_some()) {
            (true, true) => {
                let (wa, wb) = (p.sigma_s.at(a) / da, p.sigma_s.at(b) / db);
                let face = (wa * phis(a) + wb * phis(b)) / (wa + wb);
                for k in 0..2 {
                    gs[a][k] += face * d[k] * area;
                    gs[b][k] -= face * d[k] * area;
                }
            }
            (true, false) => {
                for k in 0..2 {
                    gs[a][k] += phis(a) * d[k] * area;
                }
            }
            (false, true) => {
                for k in 0..2 {
                    gs[b][k] -= phis(b) * d[k] * area;
                }
            }
            (false, false) => {}
        }
    }
    let contact_of = |c: usize, normal: [f64; 2]| -> f64 {
        // contact faces are the x-ends of the electrode columns
        if normal[1] != 0.0 {
            return 0.0;
        }
        prob.contacts
            .iter()
            .find(|(cell, _)| *cell == c)
            .map_or(0.0, |(_, current)| current / grid.x_area)
    };
    for &(c, area, dist, normal) in &grid.boundary() {
        for k in 0..2 {
            ge[c][k] += pot.phie[c] * normal[k] * area;
        }
        if prob.solid_of[c].is_some() {
            let value = phis(c) + delta * contact_of(c, normal) * dist / p.sigma_s.at(c);
            for k in 0..2 {
                gs[c][k] += value * normal[k] * area;
            }
        }
    }
    let mut q = vec![0.0; n];
    for c in 0..n {
        let m = prob.measure(c);
        for k in 0..2 {
            ge[c][k] /= m;
            gs[c][k] /= m;
        }
        let w = oracle_w(ctx, v[c], c);
        let f = p.f.cell[c];
        let mut value = p.sigma_e[c] * (ge[c][0].powi(2) + ge[c][1].powi(2))
            + p.d1 * p.sigma_e[c] * w * (f[0] * ge[c][0] + f[1] * ge[c][1]);
        if prob.solid_of[c].is_some() {
            let y2 = phis(c) - pot.phie[c];
            let factor = match p.source_form {
                SourceForm::Reduced => y2,
                SourceForm::Overpotential => y2 - (p.ocp.at(c) + ctx.ocp_offset()),
            };
            value += p.a_s * oracle_kernel(ctx, v[c], y2, c) * factor
                + p.sigma_s.at(c) * (gs[c][0].powi(2) + gs[c][1].powi(2));
        }
        q[c] = delta * value;
    }

    let sign = match p.robin_sign {
        RobinSign::Cooling => 1.0,
        RobinSign::Literal => -1.0,
    };
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for c in 0..n {
        let m = prob.measure(c);
        a[c][c] += p.rho_cp * m / dt;
        b[c] = p.rho_cp * m / dt * u_prev[c] + q[c] * m;
    }
    for &(i, j, area, di, dj) in &prob.links {
        let t = area / (di / p.k[i] + dj / p.k[j]);
        a[i][i] += t;
        a[j][j] += t;
        a[i][j] -= t;
        a[j][i] -= t;
    }
    for &(c, area, ..) in &grid.boundary() {
        let w = oracle_w(ctx, v[c], c);
        b[c] -= sign * delta * p.k1 * area * (w - p.t_ambient);
    }
    let u = gauss_solve(a, b)
        .ok_or_else(|| Error::solver(Stage::Oracle, "singular oracle heat matrix", vec![]))?;
    Ok((u, pot))
}

/// Comparison of a main-solver quantity against an oracle value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub case: String,
    pub quantity: String,
    pub main: Vec<f64>,
    pub oracle: Vec<f64>,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    /// Judged on the max-norm difference.
    pub fn compare(
        case: impl Into<String>,
        quantity: impl Into<String>,
        main: Vec<f64>,
        oracle: Vec<f64>,
        tolerance: f64,
    ) -> Self {
        let mut max_abs = if main.len() == oracle.len() { 0.0f64 } else { f64::INFINITY };
        let mut max_rel = max_abs;
        for (a, b) in main.iter().zip(&oracle) {
            let d = (a - b).abs();
            max_abs = max_abs.max(d);
            max_rel = max_rel.max(d / b.abs().max(f64::MIN_POSITIVE));
        }
        OracleReport {
            case: case.into(),
            quantity: quantity.into(),
            passed: max_abs <= tolerance,
            main,
            oracle,
            max_abs,
            max_rel,
            tolerance,
        }
    }

    pub fn header() -> &'static str {
        "case                 quantity        max_abs      max_rel      tolerance  result"
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} {:<15} {:<12.3e} {:<12.3e} {:<10.1e} {}",
            self.case,
            self.quantity,
            self.max_abs,
            self.max_rel,
            self.tolerance,
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

/// Heat problem with a closed-form solution `T_a + g(t) cos(pi x / L)` and
/// zero boundary exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMms {
    pub spec: ParamSpec,
    pub lengths: [f64; 3],
    /// `None`: `g(t) = t`; `Some(w)`: `g(t) = sin(w t)`.
    pub frequency: Option<f64>,
}

impl HeatMms {
    fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    fn g(&self, t: f64) -> (f64, f64) {
        match self.frequency {
            None => (t, 1.0),
            Some(w) => ((w * t).sin(), w * (w * t).cos()),
        }
    }

    pub fn exact(&self, x: f64, t: f64) -> f64 {
        self.spec.t_ambient + self.g(t).0 * (PI * x / self.length()).cos()
    }

    pub fn forcing(&self, x: f64, t: f64) -> f64 {
        let (g, dg) = self.g(t);
        let kx = PI / self.length();
        let c = (kx * x).cos();
        self.spec.rho_cp * dg * c + self.spec.k[0] * kx * kx * g * c
    }

    pub fn mesh(&self, refinement: usize) -> Result<Mesh> {
        build_sandwich_mesh(self.lengths, [5 * refinement, 2 * refinement, 5 * refinement], None)
    }

    /// Max-norm error at `t_end` after implicit steps of size `dt`, and the
    /// mesh width.
    pub fn error(&self, refinement: usize, dt: f64, t_end: f64) -> Result<(f64, f64)> {
        let mesh = self.mesh(refinement)?;
        let params = self.spec.discretize(&mesh);
        let xs: Vec<f64> = mesh.cells().iter().map(|c| c.centroid[0]).collect();
        let w = vec![self.spec.t_ambient; mesh.faces().len()];
        let mut u = TemperatureField {
            values: xs.iter().map(|&x| self.exact(x, 0.0)).collect(),
            time: 0.0,
        };
        let steps = (t_end / dt).round() as usize;
        for k in 1..=steps {
            let t = k as f64 * dt;
            let q: Vec<f64> = xs.iter().map(|&x| self.forcing(x, t)).collect();
            u = step_temperature(&u, &q, &w, dt, &mesh, &params)?;
        }
        let err = xs
            .iter()
            .zip(&u.values)
            .fold(0.0f64, |m, (&x, v)| m.max((v - self.exact(x, t_end)).abs()));
        Ok((self.lengths[0] / (5 * refinement) as f64, err))
    }
}

/// Potential problem with closed-form fields on the 1D sandwich; the kernel
/// enters the forcing through its pointwise value.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMms {
    pub spec: ParamSpec,
    pub lengths: [f64; 3],
    /// Quadratic coefficient of the anode solid potential.
    pub c: f64,
    pub temperature_amplitude: f64,
    pub tau: f64,
    pub delta: f64,
    pub eps: f64,
}

impl PotentialMms {
    fn total(&self) -> f64 {
        self.lengths.iter().sum()
    }

    fn cathode_start(&self) -> f64 {
        self.lengths[0] + self.lengths[1]
    }

    fn c_cathode(&self) -> f64 {
        -self.c * self.lengths[0] / self.lengths[2]
    }

    pub fn region(&self, x: f64) -> Region {
        if x < self.lengths[0] {
            Region::Anode
        } else if x < self.cathode_start() {
            Region::Separator
        } else {
            Region::Cathode
        }
    }

    pub fn temperature(&self, x: f64) -> f64 {
        self.spec.u0 + self.temperature_amplitude * (PI * x / self.total()).sin()
    }

    fn temperature_dx(&self, x: f64) -> f64 {
        let k = PI / self.total();
        self.temperature_amplitude * k * (k * x).cos()
    }

    pub fn phie(&self, x: f64) -> f64 {
        (PI * x / self.total()).cos()
    }

    fn phie_xx(&self, x: f64) -> f64 {
        let k = PI / self.total();
        -k * k * (k * x).cos()
    }

    /// Solid potential (electrodes only).
    pub fn phis(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::Anode => {
                let la = self.lengths[0];
                (PI * x / la).cos() + self.c * (x - la).powi(2)
            }
            _ => {
                let (x0, lc) = (self.cathode_start(), self.lengths[2]);
                (PI * (x - x0) / lc).cos() + self.c_cathode() * (x - x0).powi(2)
            }
        }
    }

    fn phis_xx(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::Anode => {
                let k = PI / self.lengths[0];
                -k * k * (k * x).cos() + 2.0 * self.c
            }
            _ => {
                let k = PI / self.lengths[2];
                -k * k * (k * (x - self.cathode_start())).cos() + 2.0 * self.c_cathode()
            }
        }
    }

    /// Contact current densities `(I_a, I_c)` matching the solid field.
    pub fn currents(&self) -> (f64, f64) {
        let s = self.spec.sigma_s[0];
        (
            2.0 * self.c * s * self.lengths[0] / self.delta,
            2.0 * self.c_cathode() * s * self.lengths[2] / self.delta,
        )
    }

    fn kernel(&self, x: f64) -> f64 {
        let r = if self.region(x) == Region::Anode { 0 } else { 1 };
        let w = self.temperature(x);
        let a = self.spec.alpha;
        let arg = a * (self.phis(x) - self.phie(x) - self.spec.ocp[r]) / w;
        2.0 * self.spec.g1[r] * arg.sinh()
    }

    pub fn solid_forcing(&self, x: f64) -> f64 {
        -self.spec.sigma_s[0] * self.phis_xx(x)
            + self.tau * self.phis(x)
            + self.delta * self.spec.a_s * self.kernel(x)
    }

    pub fn electrolyte_forcing(&self, x: f64) -> f64 {
        let s = &self.spec;
        let k = PI / self.total();
        let f = s.f_amplitude * (k * x).sin();
        let df = s.f_amplitude * k * (k * x).cos();
        let drift = s.sigma_e[0] * s.d1 * (self.temperature_dx(x) * f + self.temperature(x) * df);
        let mut g = -s.sigma_e[0] * self.phie_xx(x) + self.tau * self.phie(x) + self.delta * drift;
        if self.region(x) != Region::Separator {
            g -= self.delta * s.a_s * self.kernel(x);
        }
        g
    }

    pub fn mesh(&self, refinement: usize) -> Result<Mesh> {
        build_sandwich_mesh(self.lengths, [5 * refinement, 2 * refinement, 5 * refinement], None)
    }

    pub fn params(&self, mesh: &Mesh) -> PhysicalParams {
        let (ia, ic) = self.currents();
        ParamSpec {
            current_anode: ia,
            current_cathode: Some(ic),
            ..self.spec.clone()
        }
        .discretize(mesh)
    }

    /// Max per-volume residual of the exact fields against the forcing, with
    /// the mesh width.
    pub fn residual_error(&self, refinement: usize) -> Result<(f64, f64)> {
        let mesh = self.mesh(refinement)?;
        let params = self.params(&mesh);
        let ctx = ButlerVolmerContext::new(&params, self.eps)?;
        let cells = mesh.cells();
        let u: Vec<f64> = cells.iter().map(|c| self.temperature(c.centroid[0])).collect();
        let phis: Vec<f64> = mesh
            .electrode_cells()
            .iter()
            .map(|&i| self.phis(cells[i].centroid[0]))
            .collect();
        let phie: Vec<f64> = cells.iter().map(|c| self.phie(c.centroid[0])).collect();
        let pair = PotentialPair::from_fields(&mesh, phis, phie, self.tau, self.delta);
        let r = assemble_residual(&pair, &u, &ctx, &mesh, self.tau, self.delta)?;
        let mut err = 0.0f64;
        for (s, &i) in mesh.electrode_cells().iter().enumerate() {
            let c = &cells[i];
            err = err.max((r[s] / c.measure - self.solid_forcing(c.centroid[0])).abs());
        }
        let ns = mesh.electrode_cells().len();
        for (i, c) in cells.iter().enumerate() {
            err = err.max((r[ns + i] / c.measure - self.electrolyte_forcing(c.centroid[0])).abs());
        }
        Ok((self.lengths[0] / (5 * refinement) as f64, err))
    }

    /// `|int g_s + int g_e - tau (int phis + int phie) + delta (I_a + I_c)|`
    /// by composite Gauss-Legendre quadrature.
    pub fn compatibility_residual(&self, panels: usize) -> f64 {
        let (ia, ic) = self.currents();
        let x0 = [0.0, self.lengths[0], self.cathode_start()];
        let mut total = 0.0;
        for r in 0..3 {
            let (a, b) = (x0[r], x0[r] + self.lengths[r]);
            total += gauss_legendre(a, b, panels, |x| {
                let mut v = self.electrolyte_forcing(x) - self.tau * self.phie(x);
                if r != 1 {
                    v += self.solid_forcing(x) - self.tau * self.phis(x);
                }
                v
            });
        }
        (total + self.delta * (ia + ic)).abs()
    }
}

/// Composite 5-point Gauss-Legendre rule.
pub fn gauss_legendre(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in NODES.iter().zip(&WEIGHTS) {
            s += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

#[derive(Debug, Clone, PartialEq)]
pub enum MmsCase {
    Heat(HeatMms),
    Potential(PotentialMms),
}

pub const MMS_CASES: [&str; 3] = ["heat", "heat-temporal", "potential"];

/// Registered manufactured-solution cases.
pub fn mms_case(id: &str) -> Result<MmsCase> {
    let lengths = [1.0, 0.4, 1.0];
    match id {
        "heat" | "heat-temporal" => Ok(MmsCase::Heat(HeatMms {
            spec: ParamSpec {
                rho_cp: 1.0,
                k: [1.0; 3],
                k1: 1.0,
                t_ambient: 2.0,
                ..ParamSpec::default()
            },
            lengths,
            frequency: if id == "heat" { None } else { Some(2.0) },
        })),
        "potential" => Ok(MmsCase::Potential(PotentialMms {
            spec: ParamSpec {
                sigma_s: [1.0; 2],
                sigma_e: [1.0; 3],
                g1: [1.0; 2],
                ocp: [0.1, -0.1],
                f_amplitude: 0.5,
                f_profile: FluxProfile::Sine,
                u0: 2.0,
                ..ParamSpec::default()
            },
            lengths,
            c: 0.3,
            temperature_amplitude: 0.3,
            tau: 0.0,
            delta: 1.0,
            eps: 1.0,
        })),
        other => Err(Error::config(format!(
            "unknown MMS case '{other}' (known: {})",
            MMS_CASES.join(", ")
        ))),
    }
}

/// Least-squares slope of `log error` against `log h`.
pub fn convergence_rate(errors: &[f64], hs: &[f64]) -> Result<f64> {
    if errors.len() != hs.len() || hs.len() < 3 {
        return Err(Error::config("need at least 3 (h, error) pairs"));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("h must be strictly decreasing"));
    }
    if errors.iter().chain(hs).any(|v| !(*v > 0.0)) {
        return Err(Error::config("errors and h must be positive"));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Derivative registered for finite-difference checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdFunction {
    IfaraDy2,
    IfaraDu,
    SourceU,
    SourcePhis,
    SourcePhie,
    SourceGradS(usize),
    SourceGradE(usize),
}

/// Evaluation point; kernel checks read `cell`, `u`, `phis - phie`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdPoint {
    pub cell: usize,
    pub u: f64,
    pub phis: f64,
    pub phie: f64,
    pub grad_s: [f64; 2],
    pub grad_e: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// Worst `|fd - exact| / max(|exact|, 1e-8)` over the checked points.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Points on or within one step of the truncation kink.
    pub excluded: Vec<usize>,
}

pub fn fd_check(
    function: FdFunction,
    points: &[FdPoint],
    step: f64,
    ctx: &ButlerVolmerContext<'_>,
) -> FdReport {
    let p = ctx.params();
    let mut report = FdReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: Vec::new(),
    };
    let depends_on_u = matches!(function, FdFunction::IfaraDu | FdFunction::SourceU);
    for (k, pt) in points.iter().enumerate() {
        let electrode = p.sigma_s.0[pt.cell].is_some();
        if depends_on_u && ctx.truncation() == Truncation::Enabled {
            let dist = (p.u0[pt.cell] - pt.u).abs();
            if (dist - ctx.eps()).abs() <= step {
                report.excluded.push(k);
                continue;
            }
        }
        let q = |pt: &FdPoint| {
            source_q_cell(pt.cell, pt.u, pt.phis, pt.phie, pt.grad_s, pt.grad_e, ctx, electrode)
        };
        let shifted = |h: f64| -> FdPoint {
            let mut s = *pt;
            match function {
                FdFunction::IfaraDy2 | FdFunction::SourcePhis => s.phis += h,
                FdFunction::IfaraDu | FdFunction::SourceU => s.u += h,
                FdFunction::SourcePhie => s.phie += h,
                FdFunction::SourceGradS(i) => s.grad_s[i] += h,
                FdFunction::SourceGradE(i) => s.grad_e[i] += h,
            }
            s
        };
        let value = |s: &FdPoint| match function {
            FdFunction::IfaraDy2 | FdFunction::IfaraDu => {
                ctx.i_fara(s.u, s.phis - s.phie, s.cell).value
            }
            _ => q(s),
        };
        let fd = (value(&shifted(step)) - value(&shifted(-step))) / (2.0 * step);
        let y2 = pt.phis - pt.phie;
        let exact = match function {
            FdFunction::IfaraDy2 => ctx.d_ifara_dy2(pt.u, y2, pt.cell).value,
            FdFunction::IfaraDu => ctx.d_ifara_du(pt.u, y2, pt.cell).value,
            _ => {
                let d = source_q_cell_partials(
                    pt.cell, pt.u, pt.phis, pt.phie, pt.grad_s, pt.grad_e, ctx, electrode,
                );
                match function {
                    FdFunction::SourceU => d.du,
                    FdFunction::SourcePhis => d.dphis,
                    FdFunction::SourcePhie => d.dphie,
                    FdFunction::SourceGradS(i) => d.dgrad_s[i],
                    FdFunction::SourceGradE(i) => d.dgrad_e[i],
                    _ => unreachable!(),
                }
            }
        };
        let rel = (fd - exact).abs() / exact.abs().max(1e-8);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    report
}
