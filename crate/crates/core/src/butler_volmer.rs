//! Temperature-truncated Butler-Volmer kernel and the heat source it drives.
//!
//! The kernel sees the temperature only through the effective temperature
//! `w = u0 - theta_eps(u0 - u)`, which is clamped to `[u0 - eps, u0 + eps]`
//! and therefore bounded away from zero. Inside the band `w == u` bit for bit.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::params::{epsilon_bounds, PhysicalParams, SourceForm};

/// Largest magnitude of `alpha (y2 - U) / w` passed to the exponentials.
pub const EXPONENT_CAP: f64 = 350.0;

/// Clamp of `s` to `[-eps, eps]`.
pub fn theta_eps(s: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::config("eps must be positive"));
    }
    Ok(clamp_band(s, eps))
}

#[inline]
fn clamp_band(s: f64, eps: f64) -> f64 {
    if s > eps {
        eps
    } else if s < -eps {
        -eps
    } else {
        s
    }
}

/// `u0 - theta_eps(u0 - u)`, returning `u` itself whenever `|u0 - u| <= eps`.
#[inline]
pub fn effective_temperature(u: f64, u0: f64, eps: f64) -> f64 {
    let d = u0 - u;
    if d.abs() <= eps {
        u
    } else {
        u0 - clamp_band(d, eps)
    }
}

/// Kernel value with a flag raised when the exponent cap was hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub value: f64,
    pub saturated: bool,
}

/// Temperature derivative of the kernel; `at_kink` marks the one-sided value
/// returned exactly on the truncation band edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuEval {
    pub value: f64,
    pub saturated: bool,
    pub at_kink: bool,
}

#[inline]
fn capped_argument(alpha: f64, ocp: f64, w: f64, y2: f64) -> (f64, bool) {
    let x = alpha * (y2 - ocp) / w;
    if x.abs() > EXPONENT_CAP {
        (EXPONENT_CAP.copysign(x), true)
    } else {
        (x, false)
    }
}

/// `2 g1 sinh(alpha (y2 - U) / w)`.
pub fn bv_current(g1: f64, alpha: f64, ocp: f64, w: f64, y2: f64) -> KernelEval {
    let (x, saturated) = capped_argument(alpha, ocp, w, y2);
    KernelEval {
        value: 2.0 * g1 * x.sinh(),
        saturated,
    }
}

/// The kernel written as the four exponential factors
/// `g1 [e^{a y2/w} e^{-a U/w} - e^{-a y2/w} e^{a U/w}]`, without capping.
pub fn bv_current_exponentials(g1: f64, alpha: f64, ocp: f64, w: f64, y2: f64) -> f64 {
    let a = alpha / w;
    g1 * ((a * y2).exp() * (-a * ocp).exp() - (-a * y2).exp() * (a * ocp).exp())
}

/// `2 g1 alpha cosh(alpha (y2 - U) / w) / w`.
pub fn bv_current_dy2(g1: f64, alpha: f64, ocp: f64, w: f64, y2: f64) -> KernelEval {
    let (x, saturated) = capped_argument(alpha, ocp, w, y2);
    KernelEval {
        value: 2.0 * g1 * alpha * x.cosh() / w,
        saturated,
    }
}

/// Derivative of the kernel with respect to `w`.
pub fn bv_current_dw(g1: f64, alpha: f64, ocp: f64, w: f64, y2: f64) -> KernelEval {
    let (x, saturated) = capped_argument(alpha, ocp, w, y2);
    KernelEval {
        value: -2.0 * g1 * x.cosh() * alpha * (y2 - ocp) / (w * w),
        saturated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Enabled,
    /// Kernel uses the raw temperature. Only meaningful inside the band;
    /// used to certify that truncation was inactive.
    Disabled,
}

/// Truncation radius, its admissibility data and the kernel coefficients.
#[derive(Debug, Clone)]
pub struct ButlerVolmerContext<'a> {
    params: &'a PhysicalParams,
    eps: f64,
    l0: f64,
    u0_max: f64,
    c0: f64,
    coercivity: f64,
    ocp_offset: f64,
    truncation: Truncation,
}

impl<'a> ButlerVolmerContext<'a> {
    pub fn new(params: &'a PhysicalParams, eps: f64) -> Result<Self> {
        let bounds = epsilon_bounds(&params.u0)?;
        let u0_max = params.u0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut ctx = ButlerVolmerContext {
            params,
            eps,
            l0: bounds.l0,
            u0_max,
            c0: 0.0,
            coercivity: 0.0,
            ocp_offset: 0.0,
            truncation: Truncation::Enabled,
        };
        ctx.set_eps(eps)?;
        Ok(ctx)
    }

    pub fn set_eps(&mut self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps < self.l0) {
            return Err(Error::config(format!(
                "eps must lie in (0, {}), got {eps}",
                self.l0
            )));
        }
        self.eps = eps;
        self.c0 = 2.0 * self.params.g0 * self.params.alpha / (self.l0 - eps);
        self.coercivity = 2.0 * self.params.g0 * self.params.alpha / (self.u0_max + eps);
        Ok(())
    }

    pub fn params(&self) -> &'a PhysicalParams {
        self.params
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    /// `2 g0 alpha / (L0 - eps)`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `2 g0 alpha / (max u0 + eps)`, a lower bound of the `y2`-derivative
    /// that holds for every effective temperature in the band.
    pub fn coercivity(&self) -> f64 {
        self.coercivity
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn ocp_offset(&self) -> f64 {
        self.ocp_offset
    }

    /// Shifts every open-circuit potential by `offset` (time-dependent `U`).
    pub fn with_ocp_offset(mut self, offset: f64) -> Self {
        self.ocp_offset = offset;
        self
    }

    #[inline]
    pub fn ocp(&self, cell: usize) -> f64 {
        self.params.ocp.at(cell) + self.ocp_offset
    }

    #[inline]
    pub fn effective_temperature(&self, u: f64, cell: usize) -> f64 {
        match self.truncation {
            Truncation::Enabled => effective_temperature(u, self.params.u0[cell], self.eps),
            Truncation::Disabled => u,
        }
    }

    /// True when `u` lies strictly outside the band around `u0` at `cell`.
    pub fn is_clamped(&self, u: f64, cell: usize) -> bool {
        (self.params.u0[cell] - u).abs() > self.eps
    }

    #[inline]
    pub fn i_fara(&self, u: f64, y2: f64, cell: usize) -> KernelEval {
        let w = self.effective_temperature(u, cell);
        bv_current(self.params.g1.at(cell), self.params.alpha, self.ocp(cell), w, y2)
    }

    #[inline]
    pub fn d_ifara_dy2(&self, u: f64, y2: f64, cell: usize) -> KernelEval {
        let w = self.effective_temperature(u, cell);
        bv_current_dy2(self.params.g1.at(cell), self.params.alpha, self.ocp(cell), w, y2)
    }

    pub fn d_ifara_du(&self, u: f64, y2: f64, cell: usize) -> DuEval {
        let dist = (self.params.u0[cell] - u).abs();
        let (inside, at_kink) = match self.truncation {
            Truncation::Disabled => (true, false),
            Truncation::Enabled => (dist <= self.eps, dist == self.eps),
        };
        if !inside {
            return DuEval {
                value: 0.0,
                saturated: false,
                at_kink: false,
            };
        }
        let d = bv_current_dw(self.params.g1.at(cell), self.params.alpha, self.ocp(cell), u, y2);
        DuEval {
            value: d.value,
            saturated: d.saturated,
            at_kink,
        }
    }
}

/// Cellwise heat source `Q^eps`.
///
/// `phis` and `grad_phis` are indexed by the electrode numbering of
/// [`Mesh::electrode_cells`]; the remaining fields by global cell index.
pub fn source_q_eps(
    u: &[f64],
    phis: &[f64],
    phie: &[f64],
    grad_phis: &[[f64; 2]],
    grad_phie: &[[f64; 2]],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Result<Vec<f64>> {
    let n = mesh.num_cells();
    let ns = mesh.electrode_cells().len();
    if u.len() != n || phie.len() != n || grad_phie.len() != n {
        return Err(Error::structural("Q source: global field length does not match the mesh"));
    }
    if phis.len() != ns || grad_phis.len() != ns {
        return Err(Error::structural(
            "Q source: electrode field length does not match the mesh",
        ));
    }
    let p = ctx.params();
    let mut q = vec![0.0; n];
    for (i, qi) in q.iter_mut().enumerate() {
        let w = ctx.effective_temperature(u[i], i);
        let ge = grad_phie[i];
        let f = p.f.cell[i];
        let mut value = p.sigma_e[i] * (ge[0] * ge[0] + ge[1] * ge[1])
            + p.d1 * p.sigma_e[i] * w * (f[0] * ge[0] + f[1] * ge[1]);
        if let Some(s) = mesh.solid_index(i) {
            let y2 = phis[s] - phie[i];
            let factor = match p.source_form {
                SourceForm::Reduced => y2,
                SourceForm::Overpotential => y2 - ctx.ocp(i),
            };
            let gs = grad_phis[s];
            value += p.a_s * ctx.i_fara(u[i], y2, i).value * factor
                + p.sigma_s.at(i) * (gs[0] * gs[0] + gs[1] * gs[1]);
        }
        *qi = value;
    }
    Ok(q)
}

/// Partial derivatives of the cellwise source with respect to its local
/// arguments, for derivative checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePartials {
    pub du: f64,
    pub dphis: f64,
    pub dphie: f64,
    pub dgrad_s: [f64; 2],
    pub dgrad_e: [f64; 2],
}

/// Local source value at one cell from scalar arguments.
#[allow(clippy::too_many_arguments)]
pub fn source_q_cell(
    cell: usize,
    u: f64,
    phis: f64,
    phie: f64,
    gs: [f64; 2],
    ge: [f64; 2],
    ctx: &ButlerVolmerContext<'_>,
    electrode: bool,
) -> f64 {
    let p = ctx.params();
    let w = ctx.effective_temperature(u, cell);
    let f = p.f.cell[cell];
    let mut value = p.sigma_e[cell] * (ge[0] * ge[0] + ge[1] * ge[1])
        + p.d1 * p.sigma_e[cell] * w * (f[0] * ge[0] + f[1] * ge[1]);
    if electrode {
        let y2 = phis - phie;
        let factor = match p.source_form {
            SourceForm::Reduced => y2,
            SourceForm::Overpotential => y2 - ctx.ocp(cell),
        };
        value += p.a_s * ctx.i_fara(u, y2, cell).value * factor
            + p.sigma_s.at(cell) * (gs[0] * gs[0] + gs[1] * gs[1]);
    }
    value
}

#[allow(clippy::too_many_arguments)]
pub fn source_q_cell_partials(
    cell: usize,
    u: f64,
    phis: f64,
    phie: f64,
    gs: [f64; 2],
    ge: [f64; 2],
    ctx: &ButlerVolmerContext<'_>,
    electrode: bool,
) -> SourcePartials {
    let p = ctx.params();
    let w = ctx.effective_temperature(u, cell);
    let f = p.f.cell[cell];
    let dw_du = match ctx.truncation() {
        Truncation::Disabled => 1.0,
        Truncation::Enabled => {
            if ctx.is_clamped(u, cell) {
                0.0
            } else {
                1.0
            }
        }
    };
    let f_dot_ge = f[0] * ge[0] + f[1] * ge[1];
    let mut out = SourcePartials {
        du: p.d1 * p.sigma_e[cell] * f_dot_ge * dw_du,
        dphis: 0.0,
        dphie: 0.0,
        dgrad_s: [0.0; 2],
        dgrad_e: [
            2.0 * p.sigma_e[cell] * ge[0] + p.d1 * p.sigma_e[cell] * w * f[0],
            2.0 * p.sigma_e[cell] * ge[1] + p.d1 * p.sigma_e[cell] * w * f[1],
        ],
    };
    if electrode {
        let y2 = phis - phie;
        let factor = match p.source_form {
            SourceForm::Reduced => y2,
            SourceForm::Overpotential => y2 - ctx.ocp(cell),
        };
        let i = ctx.i_fara(u, y2, cell).value;
        let di = ctx.d_ifara_dy2(u, y2, cell).value;
        let dy2 = p.a_s * (di * factor + i);
        out.dphis = dy2;
        out.dphie = -dy2;
        out.du += p.a_s * ctx.d_ifara_du(u, y2, cell).value * factor;
        let ss = p.sigma_s.at(cell);
        out.dgrad_s = [2.0 * ss * gs[0], 2.0 * ss * gs[1]];
    }
    out
}
