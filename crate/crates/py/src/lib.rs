//! Python bindings: mesh construction, parameter validation, the kernel, the
//! potential solves and config-driven runs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tecell::butler_volmer as bv;
use tecell::config::parse_config;
use tecell::params::{FluxProfile, RobinSign, SourceForm};
use tecell::potentials::solve_potentials;
use tecell::{
    build_sandwich_mesh, run_simulation, validate_hypotheses, ButlerVolmerContext, Error,
    NonlinearSettings, ParamSpec, TStar, Width,
};

/// Maps library errors onto Python exceptions: bad input becomes
/// `ValueError`, solver failures `RuntimeError`.
pub fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Structural(_) | Error::OracleRefused(_) => PyValueError::new_err(e.to_string()),
        Error::Solver { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Mesh", module = "tecell_py", frozen)]
pub struct PyMesh {
    inner: tecell::Mesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (lengths, cells, width = None, width_cells = None))]
    fn new(
        lengths: [f64; 3],
        cells: [usize; 3],
        width: Option<f64>,
        width_cells: Option<usize>,
    ) -> PyResult<Self> {
        let width = match (width, width_cells) {
            (Some(extent), Some(cells)) => Some(Width { extent, cells }),
            (None, None) => None,
            _ => return Err(PyValueError::new_err("width and width_cells must be given together")),
        };
        let inner = build_sandwich_mesh(lengths, cells, width).map_err(to_py_err)?;
        Ok(PyMesh { inner })
    }

    #[getter]
    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn centroids(&self) -> Vec<(f64, f64)> {
        self.inner.cells().iter().map(|c| (c.centroid[0], c.centroid[1])).collect()
    }

    #[getter]
    fn measures(&self) -> Vec<f64> {
        self.inner.cells().iter().map(|c| c.measure).collect()
    }

    #[getter]
    fn regions(&self) -> Vec<&'static str> {
        self.inner.cells().iter().map(|c| c.region.name()).collect()
    }

    #[getter]
    fn electrode_cells(&self) -> Vec<usize> {
        self.inner.electrode_cells().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Mesh({})", self.inner.summary().replace('\n', ", "))
    }
}

#[pyclass(name = "Params", module = "tecell_py", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyParams {
    rho_cp: f64,
    k: [f64; 3],
    sigma_s: [f64; 2],
    sigma_e: [f64; 3],
    alpha: f64,
    a_s: f64,
    k1: f64,
    t_ambient: f64,
    d1: f64,
    g1: [f64; 2],
    ocp: [f64; 2],
    f_amplitude: f64,
    /// `"sine"` or `"constant"`.
    f_profile: String,
    current_anode: f64,
    current_cathode: Option<f64>,
    u0: f64,
    u0_gradient: f64,
    /// `"reduced"` or `"overpotential"`.
    source_form: String,
    /// `"cooling"` or `"literal"`.
    robin_sign: String,
}

impl PyParams {
    pub fn to_spec(&self) -> PyResult<ParamSpec> {
        let f_profile = match self.f_profile.as_str() {
            "sine" => FluxProfile::Sine,
            "constant" => FluxProfile::Constant,
            other => return Err(PyValueError::new_err(format!("unknown f_profile '{other}'"))),
        };
        let source_form = match self.source_form.as_str() {
            "reduced" => SourceForm::Reduced,
            "overpotential" => SourceForm::Overpotential,
            other => return Err(PyValueError::new_err(format!("unknown source_form '{other}'"))),
        };
        let robin_sign = match self.robin_sign.as_str() {
            "cooling" => RobinSign::Cooling,
            "literal" => RobinSign::Literal,
            other => return Err(PyValueError::new_err(format!("unknown robin_sign '{other}'"))),
        };
        Ok(ParamSpec {
            rho_cp: self.rho_cp,
            k: self.k,
            sigma_s: self.sigma_s,
            sigma_e: self.sigma_e,
            alpha: self.alpha,
            a_s: self.a_s,
            k1: self.k1,
            t_ambient: self.t_ambient,
            d1: self.d1,
            g1: self.g1,
            ocp: self.ocp,
            f_amplitude: self.f_amplitude,
            f_profile,
            current_anode: self.current_anode,
            current_cathode: self.current_cathode,
            u0: self.u0,
            u0_gradient: self.u0_gradient,
            source_form,
            robin_sign,
            ..ParamSpec::default()
        })
    }
}

#[pymethods]
impl PyParams {
    /// Defaults match the library; any field can be passed by keyword.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let d = ParamSpec::default();
        let params = PyParams {
            rho_cp: d.rho_cp,
            k: d.k,
            sigma_s: d.sigma_s,
            sigma_e: d.sigma_e,
            alpha: d.alpha,
            a_s: d.a_s,
            k1: d.k1,
            t_ambient: d.t_ambient,
            d1: d.d1,
            g1: d.g1,
            ocp: d.ocp,
            f_amplitude: d.f_amplitude,
            f_profile: "sine".into(),
            current_anode: d.current_anode,
            current_cathode: d.current_cathode,
            u0: d.u0,
            u0_gradient: d.u0_gradient,
            source_form: "reduced".into(),
            robin_sign: "cooling".into(),
        };
        let py = match kwargs {
            Some(k) => k.py(),
            None => return Ok(params),
        };
        let obj = Bound::new(py, params)?;
        for (key, value) in kwargs.unwrap().iter() {
            let name: String = key.extract()?;
            if !obj.hasattr(name.as_str())? {
                return Err(PyValueError::new_err(format!("unknown parameter '{name}'")));
            }
            obj.setattr(name.as_str(), value)?;
        }
        let out = obj.borrow().clone();
        Ok(out)
    }

    /// Hypothesis report as `{name: (passed, detail)}`.
    fn validate<'py>(&self, py: Python<'py>, mesh: &PyMesh) -> PyResult<Bound<'py, PyDict>> {
        let p = self.to_spec()?.discretize(&mesh.inner);
        let report = validate_hypotheses(&p, &mesh.inner).map_err(to_py_err)?;
        let out = PyDict::new(py);
        for c in &report.checks {
            out.set_item(c.hypothesis.to_string(), (c.passed, c.detail.clone()))?;
        }
        Ok(out)
    }
}

#[pyfunction]
fn theta_eps(s: f64, eps: f64) -> PyResult<f64> {
    bv::theta_eps(s, eps).map_err(to_py_err)
}

#[pyfunction]
fn effective_temperature(u: f64, u0: f64, eps: f64) -> f64 {
    bv::effective_temperature(u, u0, eps)
}

/// `2 g1 sinh(alpha (y2 - U) / w)`.
#[pyfunction]
fn bv_current(g1: f64, alpha: f64, ocp: f64, w: f64, y2: f64) -> f64 {
    bv::bv_current(g1, alpha, ocp, w, y2).value
}

#[pyfunction]
fn bv_current_dy2(g1: f64, alpha: f64, ocp: f64, w: f64, y2: f64) -> f64 {
    bv::bv_current_dy2(g1, alpha, ocp, w, y2).value
}

/// Potential solve at a frozen temperature; `tau = 0` is the mean-constrained
/// limit problem. `u` defaults to the initial temperature.
#[pyfunction]
#[pyo3(signature = (mesh, params, tau, delta = 1.0, eps = 1.0, u = None))]
fn solve<'py>(
    py: Python<'py>,
    mesh: &PyMesh,
    params: &PyParams,
    tau: f64,
    delta: f64,
    eps: f64,
    u: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params.to_spec()?.discretize(&mesh.inner);
    let ctx = ButlerVolmerContext::new(&p, eps).map_err(to_py_err)?;
    let u = u.unwrap_or_else(|| p.u0.clone());
    if u.len() != mesh.inner.num_cells() {
        return Err(PyValueError::new_err("u must have one value per cell"));
    }
    let pot = solve_potentials(&u, tau, delta, &ctx, &mesh.inner, &NonlinearSettings::default(), None)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("phis", pot.phis)?;
    out.set_item("phie", pot.phie)?;
    out.set_item("residual_norm", pot.residual_norm)?;
    out.set_item("mean_sum", pot.mean_sum)?;
    out.set_item("newton_iters", pot.newton_iters)?;
    Ok(out)
}

/// Runs a simulation from configuration text (no files are written).
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let c = parse_config(config).map_err(to_py_err)?;
    let mesh = c.mesh.build().map_err(to_py_err)?;
    let p = c.params.discretize(&mesh);
    let report = validate_hypotheses(&p, &mesh).map_err(to_py_err)?;
    if !report.passed() {
        return Err(PyValueError::new_err(report.to_string()));
    }
    let result = run_simulation(&mesh, &p, &c.solver).map_err(|f| to_py_err(f.error))?;
    let out = PyDict::new(py);
    out.set_item("times", result.times.clone())?;
    let t_star = match result.t_star {
        TStar::Time(t) => Some(t),
        TStar::Horizon => None,
    };
    out.set_item("t_star", t_star)?;
    let temps: Vec<Vec<f64>> = result.temperatures.iter().map(|u| u.values.clone()).collect();
    out.set_item("temperatures", temps)?;
    out.set_item("max_u", result.records.iter().map(|r| r.max_u).collect::<Vec<_>>())?;
    out.set_item("picard_iters", result.records.iter().map(|r| r.picard_iters).collect::<Vec<_>>())?;
    out.set_item(
        "truncation_active",
        result.records.iter().map(|r| r.truncation_active).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// Effective configuration echo for configuration text.
#[pyfunction]
fn echo_config(config: &str) -> PyResult<String> {
    parse_config(config).map(|c| c.echo()).map_err(to_py_err)
}

#[pymodule]
fn tecell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(theta_eps, m)?)?;
    m.add_function(wrap_pyfunction!(effective_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(bv_current, m)?)?;
    m.add_function(wrap_pyfunction!(bv_current_dy2, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(echo_config, m)?)?;
    Ok(())
}
