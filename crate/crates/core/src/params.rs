//! Coefficient data of the reduced thermal-electrochemical system and the
//! hypothesis checks (H1)-(H7) it must satisfy.

use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Domain, Mesh, Region};

/// Cellwise field that only exists on the electrodes.
///
/// Entries are `Some` on anode/cathode cells and `None` on separator cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeField(pub Vec<Option<f64>>);

impl ElectrodeField {
    pub fn from_regions(mesh: &Mesh, anode: f64, cathode: f64) -> Self {
        Self::from_fn(mesh, |region, _| match region {
            Region::Anode => anode,
            _ => cathode,
        })
    }

    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(Region, [f64; 2]) -> f64) -> Self {
        ElectrodeField(
            mesh.cells()
                .iter()
                .map(|c| c.region.is_electrode().then(|| f(c.region, c.centroid)))
                .collect(),
        )
    }

    /// Value on an electrode cell. Panics on separator cells; supports are
    /// checked by [`validate_hypotheses`].
    #[inline]
    pub fn at(&self, cell: usize) -> f64 {
        self.0[cell].expect("electrode field evaluated on a separator cell")
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }

    /// Dense copy with separator cells filled by `fill`.
    pub fn dense(&self, fill: f64) -> Vec<f64> {
        self.0.iter().map(|v| v.unwrap_or(fill)).collect()
    }
}

/// Prescribed vector field `f`: cell-centred values for the source term and
/// face-normal components for the divergence term.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub cell: Vec<[f64; 2]>,
    pub face_normal: Vec<f64>,
}

impl FluxField {
    pub fn zero(mesh: &Mesh) -> Self {
        FluxField {
            cell: vec![[0.0; 2]; mesh.num_cells()],
            face_normal: vec![0.0; mesh.faces().len()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let cell = mesh.cells().iter().map(|c| f(c.centroid)).collect();
        let face_normal = mesh
            .faces()
            .iter()
            .map(|face| {
                let v = f(face.centroid);
                v[0] * face.normal[0] + v[1] * face.normal[1]
            })
            .collect();
        FluxField { cell, face_normal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxProfile {
    /// `f = (A sin(pi x / L), 0)`, tangential on every boundary face.
    Sine,
    /// `f = (A, 0)`.
    Constant,
}

/// Which potential difference multiplies the interfacial current in the heat source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceForm {
    /// `A_s i (phi_s - phi_e)`.
    Reduced,
    /// `A_s i (phi_s - phi_e - U)`.
    Overpotential,
}

/// Orientation of the Robin exchange term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobinSign {
    /// `-k grad u . n = k1 (w - T_a)`, Newton cooling.
    Cooling,
    /// `k grad u . n = k1 (w - T_a)`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub rho_cp: f64,
    pub k: Vec<f64>,
    pub sigma_s: ElectrodeField,
    pub sigma_e: Vec<f64>,
    pub alpha: f64,
    pub a_s: f64,
    pub k1: f64,
    pub t_ambient: f64,
    pub d1: f64,
    pub g1: ElectrodeField,
    pub g0: f64,
    pub ocp: ElectrodeField,
    /// Piecewise-linear additive offset to `ocp` as `(time, offset)` knots.
    /// Empty means static.
    pub ocp_schedule: Vec<(f64, f64)>,
    pub f: FluxField,
    /// Boundary current density per face (`sigma_s grad phi_s . n = I`);
    /// nonzero only on contact faces.
    pub current: Vec<f64>,
    pub u0: Vec<f64>,
    pub source_form: SourceForm,
    pub robin_sign: RobinSign,
}

impl PhysicalParams {
    /// Offset added to the open-circuit potential at time `t`.
    pub fn ocp_offset(&self, t: f64) -> f64 {
        let knots = &self.ocp_schedule;
        match knots.len() {
            0 => 0.0,
            1 => knots[0].1,
            _ => {
                if t <= knots[0].0 {
                    return knots[0].1;
                }
                for w in knots.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }

    /// Net boundary current `sum I |f|` over the external contacts.
    pub fn net_contact_current(&self, mesh: &Mesh) -> f64 {
        mesh.faces()
            .iter()
            .zip(&self.current)
            .filter(|(f, _)| {
                matches!(f.tag, Some(BoundaryTag::AnodeContact | BoundaryTag::CathodeContact))
            })
            .map(|(f, i)| i * f.measure)
            .sum()
    }
}

/// Region-wise scalar description of the parameters, discretized onto a mesh
/// with [`ParamSpec::discretize`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub rho_cp: f64,
    /// anode, separator, cathode
    pub k: [f64; 3],
    /// anode, cathode
    pub sigma_s: [f64; 2],
    pub sigma_e: [f64; 3],
    pub alpha: f64,
    pub a_s: f64,
    pub k1: f64,
    pub t_ambient: f64,
    pub d1: f64,
    pub g1: [f64; 2],
    /// Defaults to the smallest `g1` value.
    pub g0: Option<f64>,
    pub ocp: [f64; 2],
    pub ocp_schedule: Vec<(f64, f64)>,
    pub f_amplitude: f64,
    pub f_profile: FluxProfile,
    pub current_anode: f64,
    /// Defaults to the value balancing the anode current.
    pub current_cathode: Option<f64>,
    pub u0: f64,
    /// Linear slope of the initial temperature along x.
    pub u0_gradient: f64,
    pub source_form: SourceForm,
    pub robin_sign: RobinSign,
}

impl Default for ParamSpec {
    fn default() -> Self {
        ParamSpec {
            rho_cp: 1.0,
            k: [1.0; 3],
            sigma_s: [1.0; 2],
            sigma_e: [1.0; 3],
            alpha: 1.0,
            a_s: 1.0,
            k1: 1.0,
            t_ambient: 2.0,
            d1: 1.0,
            g1: [1.0; 2],
            g0: None,
            ocp: [0.0; 2],
            ocp_schedule: Vec::new(),
            f_amplitude: 0.0,
            f_profile: FluxProfile::Sine,
            current_anode: 0.0,
            current_cathode: None,
            u0: 2.0,
            u0_gradient: 0.0,
            source_form: SourceForm::Reduced,
            robin_sign: RobinSign::Cooling,
        }
    }
}

fn region_pick<T: Copy>(values: [T; 3], region: Region) -> T {
    match region {
        Region::Anode => values[0],
        Region::Separator => values[1],
        Region::Cathode => values[2],
    }
}

impl ParamSpec {
    pub fn discretize(&self, mesh: &Mesh) -> PhysicalParams {
        let cells = mesh.cells();
        let length = mesh.total_length();
        let amp = self.f_amplitude;
        let f = match self.f_profile {
            FluxProfile::Sine => {
                let mut f = FluxField::from_fn(mesh, |x| {
                    [amp * (std::f64::consts::PI * x[0] / length).sin(), 0.0]
                });
                // sin(pi) is not exactly zero in floating point
                for (face, fnorm) in mesh.faces().iter().zip(f.face_normal.iter_mut()) {
                    if face.is_boundary() {
                        *fnorm = 0.0;
                    }
                }
                f
            }
            FluxProfile::Constant => FluxField::from_fn(mesh, |_| [amp, 0.0]),
        };

        let anode_area: f64 = contact_area(mesh, BoundaryTag::AnodeContact);
        let cathode_area: f64 = contact_area(mesh, BoundaryTag::CathodeContact);
        let i_c = self
            .current_cathode
            .unwrap_or(-self.current_anode * anode_area / cathode_area);
        let current = mesh
            .faces()
            .iter()
            .map(|face| match face.tag {
                Some(BoundaryTag::AnodeContact) => self.current_anode,
                Some(BoundaryTag::CathodeContact) => i_c,
                _ => 0.0,
            })
            .collect();

        let g0 = self.g0.unwrap_or(self.g1[0].min(self.g1[1]));
        PhysicalParams {
            rho_cp: self.rho_cp,
            k: cells.iter().map(|c| region_pick(self.k, c.region)).collect(),
            sigma_s: ElectrodeField::from_regions(mesh, self.sigma_s[0], self.sigma_s[1]),
            sigma_e: cells.iter().map(|c| region_pick(self.sigma_e, c.region)).collect(),
            alpha: self.alpha,
            a_s: self.a_s,
            k1: self.k1,
            t_ambient: self.t_ambient,
            d1: self.d1,
            g1: ElectrodeField::from_regions(mesh, self.g1[0], self.g1[1]),
            g0,
            ocp: ElectrodeField::from_regions(mesh, self.ocp[0], self.ocp[1]),
            ocp_schedule: self.ocp_schedule.clone(),
            f,
            current,
            u0: cells
                .iter()
                .map(|c| self.u0 + self.u0_gradient * c.centroid[0])
                .collect(),
            source_form: self.source_form,
            robin_sign: self.robin_sign,
        }
    }
}

fn contact_area(mesh: &Mesh, tag: BoundaryTag) -> f64 {
    mesh.faces()
        .iter()
        .filter(|f| f.tag == Some(tag))
        .map(|f| f.measure)
        .sum()
}

/// Exchange-current prefactor `F k0 C_e^a (C_max - C_surf)^a C_surf^a` from
/// frozen concentration values. Input preparation only.
pub fn exchange_current_prefactor(
    faraday: f64,
    k0: f64,
    alpha: f64,
    c_e: f64,
    c_s_max: f64,
    c_s_surf: f64,
) -> f64 {
    faraday * k0 * c_e.powf(alpha) * (c_s_max - c_s_surf).powf(alpha) * c_s_surf.powf(alpha)
}

/// Builds a `g1` field from per-cell frozen concentrations.
pub fn g1_from_concentrations(
    mesh: &Mesh,
    faraday: f64,
    k0: f64,
    alpha: f64,
    c_e: &[f64],
    c_s_max: f64,
    c_s_surf: &[f64],
) -> ElectrodeField {
    ElectrodeField(
        mesh.cells()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.region.is_electrode().then(|| {
                    exchange_current_prefactor(faraday, k0, alpha, c_e[i], c_s_max, c_s_surf[i])
                })
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
    /// Positive initial temperature.
    InitialTemperature,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::InitialTemperature => f.write_str("U0"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, h: Hypothesis) -> &HypothesisCheck {
        self.checks
            .iter()
            .find(|c| c.hypothesis == h)
            .expect("every hypothesis is checked")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            writeln!(f, "{:<3} {:<5} {}", c.hypothesis, status, c.detail)?;
        }
        if self.passed() {
            write!(f, "H1..H7 pass")
        } else {
            let ids: Vec<String> = self.failures().map(|c| c.hypothesis.to_string()).collect();
            write!(f, "failed: {}", ids.join(", "))
        }
    }
}

fn check_len(name: &str, len: usize, expected: usize) -> Result<()> {
    if len == expected {
        Ok(())
    } else {
        Err(Error::structural(format!(
            "{name} has {len} entries, mesh needs {expected}"
        )))
    }
}

fn check_electrode_support(name: &str, field: &ElectrodeField, mesh: &Mesh) -> Result<()> {
    check_len(name, field.0.len(), mesh.num_cells())?;
    for (i, (v, c)) in field.0.iter().zip(mesh.cells()).enumerate() {
        match (v.is_some(), c.region.is_electrode()) {
            (true, false) => {
                return Err(Error::structural(format!(
                    "{name} is defined on separator cell {i}"
                )))
            }
            (false, true) => {
                return Err(Error::structural(format!(
                    "{name} is missing on {} cell {i}",
                    c.region.name()
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn all_finite(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(f64::is_finite)
}

/// Checks (H1)-(H7) and positivity of `u0`. Field supports that do not match
/// the mesh are structural errors, distinct from a failed hypothesis.
pub fn validate_hypotheses(params: &PhysicalParams, mesh: &Mesh) -> Result<ValidationReport> {
    let n = mesh.num_cells();
    check_len("k", params.k.len(), n)?;
    check_len("sigma_e", params.sigma_e.len(), n)?;
    check_len("u0", params.u0.len(), n)?;
    check_len("f", params.f.cell.len(), n)?;
    check_len("f (faces)", params.f.face_normal.len(), mesh.faces().len())?;
    check_len("I", params.current.len(), mesh.faces().len())?;
    check_electrode_support("sigma_s", &params.sigma_s, mesh)?;
    check_electrode_support("g1", &params.g1, mesh)?;
    check_electrode_support("U", &params.ocp, mesh)?;
    for (face, &i) in mesh.faces().iter().zip(&params.current) {
        let contact = matches!(
            face.tag,
            Some(BoundaryTag::AnodeContact | BoundaryTag::CathodeContact)
        );
        if !contact && i != 0.0 {
            return Err(Error::structural(
                "I is nonzero on a face that is not an external contact",
            ));
        }
    }

    let mut checks = Vec::with_capacity(8);

    let constants = [
        ("rho*C_p", params.rho_cp),
        ("T_a", params.t_ambient),
        ("alpha", params.alpha),
        ("A_s", params.a_s),
        ("k1", params.k1),
        ("d1", params.d1),
    ];
    let bad: Vec<String> = constants
        .iter()
        .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
        .map(|(name, v)| format!("{name} = {v}"))
        .collect();
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H1,
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "positive constants".into()
        } else {
            format!("not positive: {}", bad.join(", "))
        },
    });

    let (k_min, _) = min_max(params.k.iter().copied());
    let (ss_min, _) = min_max(params.sigma_s.values());
    let (se_min, _) = min_max(params.sigma_e.iter().copied());
    let finite = all_finite(params.k.iter().copied())
        && all_finite(params.sigma_s.values())
        && all_finite(params.sigma_e.iter().copied());
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H2,
        passed: finite && k_min > 0.0 && ss_min > 0.0 && se_min > 0.0,
        detail: format!("min k = {k_min}, min sigma_s = {ss_min}, min sigma_e = {se_min}"),
    });

    let ocp_finite = all_finite(params.ocp.values())
        && all_finite(params.ocp_schedule.iter().flat_map(|(t, v)| [*t, *v]));
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H3,
        passed: ocp_finite,
        detail: if ocp_finite {
            "U bounded".into()
        } else {
            "U has non-finite values".into()
        },
    });

    let (g1_min, _) = min_max(params.g1.values());
    let g_ok = params.g0 > 0.0 && all_finite(params.g1.values()) && g1_min >= params.g0;
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H4,
        passed: g_ok,
        detail: format!("min g1 = {g1_min}, g0 = {}", params.g0),
    });

    let mut worst_fn = 0.0f64;
    for (face, &fnorm) in mesh.faces().iter().zip(&params.f.face_normal) {
        if face.is_boundary() {
            worst_fn = worst_fn.max(fnorm.abs());
        }
    }
    let f_finite = all_finite(params.f.cell.iter().flat_map(|v| *v))
        && all_finite(params.f.face_normal.iter().copied());
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H5,
        passed: f_finite && worst_fn == 0.0,
        detail: format!("max |f.n| on boundary = {worst_fn}"),
    });

    let sum = params.net_contact_current(mesh);
    let scale: f64 = mesh
        .faces()
        .iter()
        .zip(&params.current)
        .map(|(f, i)| (i * f.measure).abs())
        .sum();
    let i_finite = all_finite(params.current.iter().copied());
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H6,
        passed: i_finite && sum.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE),
        detail: format!("contact current sum = {sum}"),
    });

    let sep = mesh.region_measure(Domain::Region(Region::Separator));
    let anode = mesh.region_measure(Domain::Region(Region::Anode));
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::H7,
        passed: sep < 0.5 * anode,
        detail: format!("|separator| = {sep}, |anode|/2 = {}", 0.5 * anode),
    });

    let (u0_min, _) = min_max(params.u0.iter().copied());
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::InitialTemperature,
        passed: all_finite(params.u0.iter().copied()) && u0_min > 0.0,
        detail: format!("min u0 = {u0_min}"),
    });

    Ok(ValidationReport { checks })
}

/// Admissible truncation radii: `eps` in `(0, L0)` with `L0 = min u0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBounds {
    pub l0: f64,
}

impl EpsilonBounds {
    pub fn interval(&self) -> (f64, f64) {
        (0.0, self.l0)
    }

    pub fn admits(&self, eps: f64) -> bool {
        eps > 0.0 && eps < self.l0
    }
}

pub fn epsilon_bounds(u0: &[f64]) -> Result<EpsilonBounds> {
    let l0 = u0.iter().copied().fold(f64::INFINITY, f64::min);
    if !(l0.is_finite() && l0 > 0.0) {
        return Err(Error::config("u0 must be positive"));
    }
    Ok(EpsilonBounds { l0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_sandwich_mesh;

    fn mesh() -> Mesh {
        build_sandwich_mesh([1.0, 0.25, 1.0], [4, 2, 4], None).unwrap()
    }

    fn valid_spec() -> ParamSpec {
        ParamSpec {
            current_anode: 1.0,
            ..ParamSpec::default()
        }
    }

    #[test]
    fn constant_valid_set_passes() {
        let m = mesh();
        let p = valid_spec().discretize(&m);
        let report = validate_hypotheses(&p, &m).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 8);
        assert!(report.to_string().ends_with("H1..H7 pass"));
    }

    #[test]
    fn validation_is_pure() {
        let m = mesh();
        let p = valid_spec().discretize(&m);
        assert_eq!(validate_hypotheses(&p, &m).unwrap(), validate_hypotheses(&p, &m).unwrap());
    }

    #[test]
    fn large_separator_fails_h7() {
        let m = build_sandwich_mesh([1.0, 1.0, 1.0], [4, 4, 4], None).unwrap();
        let p = valid_spec().discretize(&m);
        let report = validate_hypotheses(&p, &m).unwrap();
        assert!(!report.get(Hypothesis::H7).passed);
        assert!(report.get(Hypothesis::H6).passed);
    }

    #[test]
    fn unbalanced_current_fails_h6() {
        let m = mesh();
        let spec = ParamSpec {
            current_anode: 1.0,
            current_cathode: Some(1.0),
            ..ParamSpec::default()
        };
        let report = validate_hypotheses(&spec.discretize(&m), &m).unwrap();
        let h6 = report.get(Hypothesis::H6);
        assert!(!h6.passed);
        assert!(h6.detail.contains("= 2"), "{}", h6.detail);
    }

    #[test]
    fn each_hypothesis_can_fail() {
        let m = mesh();
        let base = valid_spec();
        let cases: Vec<(Hypothesis, ParamSpec)> = vec![
            (Hypothesis::H1, ParamSpec { d1: 0.0, ..base.clone() }),
            (Hypothesis::H2, ParamSpec { sigma_e: [1.0, 0.0, 1.0], ..base.clone() }),
            (Hypothesis::H3, ParamSpec { ocp: [f64::NAN, 0.0], ..base.clone() }),
            (Hypothesis::H4, ParamSpec { g1: [1.0, 0.5], g0: Some(0.8), ..base.clone() }),
            (
                Hypothesis::H5,
                ParamSpec { f_amplitude: 1.0, f_profile: FluxProfile::Constant, ..base.clone() },
            ),
            (Hypothesis::InitialTemperature, ParamSpec { u0: -1.0, ..base.clone() }),
        ];
        for (h, spec) in cases {
            let report = validate_hypotheses(&spec.discretize(&m), &m).unwrap();
            assert!(!report.get(h).passed, "{h} should fail");
            assert!(!report.passed());
        }
    }

    #[test]
    fn sine_flux_is_tangential() {
        let m = build_sandwich_mesh([1.0, 0.25, 1.0], [3, 1, 3], Some(crate::mesh::Width { extent: 0.5, cells: 2 })).unwrap();
        let spec = ParamSpec { f_amplitude: 2.0, ..valid_spec() };
        let report = validate_hypotheses(&spec.discretize(&m), &m).unwrap();
        assert!(report.get(Hypothesis::H5).passed, "{report}");
    }

    #[test]
    fn ocp_on_separator_is_structural() {
        let m = mesh();
        let mut p = valid_spec().discretize(&m);
        p.ocp.0[5] = Some(0.1);
        let err = validate_hypotheses(&p, &m).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
        assert!(err.to_string().contains("U"));
    }

    #[test]
    fn epsilon_interval() {
        let b = epsilon_bounds(&[2.0; 5]).unwrap();
        assert_eq!(b.l0, 2.0);
        assert_eq!(b.interval(), (0.0, 2.0));
        assert!(b.admits(1.0) && !b.admits(2.0) && !b.admits(0.0));

        let m = build_sandwich_mesh([1.0, 1.0, 1.0], [2, 2, 2], None).unwrap();
        let u0: Vec<f64> = m.cells().iter().map(|c| 1.0 + c.centroid[0]).collect();
        let b = epsilon_bounds(&u0).unwrap();
        assert_eq!(b.l0, 1.0 + m.cells()[0].centroid[0]);

        let err = epsilon_bounds(&[0.0; 3]).unwrap_err();
        assert_eq!(err.to_string(), "u0 must be positive");
    }

    #[test]
    fn ocp_schedule_interpolates() {
        let m = mesh();
        let mut p = valid_spec().discretize(&m);
        assert_eq!(p.ocp_offset(3.0), 0.0);
        p.ocp_schedule = vec![(0.0, 0.0), (1.0, 0.1), (2.0, 0.1)];
        assert!((p.ocp_offset(0.5) - 0.05).abs() < 1e-15);
        assert_eq!(p.ocp_offset(5.0), 0.1);
    }

    #[test]
    fn prefactor_formula() {
        let v = exchange_current_prefactor(2.0, 3.0, 0.5, 4.0, 10.0, 1.0);
        assert!((v - 2.0 * 3.0 * 2.0 * 3.0 * 1.0).abs() < 1e-12);
        let m = mesh();
        let n = m.num_cells();
        let g = g1_from_concentrations(&m, 1.0, 1.0, 1.0, &vec![1.0; n], 2.0, &vec![1.0; n]);
        assert_eq!(g.0[0], Some(1.0));
        assert_eq!(g.0[4], None);
    }
}
