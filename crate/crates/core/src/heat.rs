//! Implicit-Euler heat step with Robin exchange on the whole outer boundary.

use nalgebra::DMatrix;

use crate::butler_volmer::ButlerVolmerContext;
use crate::error::{Error, Result, Stage};
use crate::linalg::solve_dense;
use crate::mesh::{FaceCells, Mesh};
use crate::params::{PhysicalParams, RobinSign};

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl TemperatureField {
    pub fn initial(params: &PhysicalParams) -> Self {
        TemperatureField {
            values: params.u0.clone(),
            time: 0.0,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Volume-weighted mean.
    pub fn mean(&self, mesh: &Mesh) -> f64 {
        let total: f64 = mesh.cells().iter().map(|c| c.measure).sum();
        self.integral(mesh) / total
    }

    pub fn integral(&self, mesh: &Mesh) -> f64 {
        self.values
            .iter()
            .zip(mesh.cells())
            .map(|(v, c)| v * c.measure)
            .sum()
    }

    pub fn max_diff(&self, other: &TemperatureField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Effective temperature seen by each face for the Robin data: the adjacent
/// cell's value on boundary faces, zero (unused) on interior faces.
pub fn boundary_effective_temperature(
    v: &[f64],
    ctx: &ButlerVolmerContext<'_>,
    mesh: &Mesh,
) -> Vec<f64> {
    mesh.faces()
        .iter()
        .map(|face| match face.cells {
            FaceCells::Boundary { cell } => ctx.effective_temperature(v[cell], cell),
            FaceCells::Interior { .. } => 0.0,
        })
        .collect()
}

/// One implicit-Euler step of `rho_cp u_t - div(k grad u) = q` with the
/// boundary flux `-k grad u . n = k1 (w_b - T_a)` (sign flipped for
/// [`RobinSign::Literal`]). `w_boundary` is indexed by face.
pub fn step_temperature(
    u_prev: &TemperatureField,
    q: &[f64],
    w_boundary: &[f64],
    dt: f64,
    mesh: &Mesh,
    params: &PhysicalParams,
) -> Result<TemperatureField> {
    if !(dt > 0.0) {
        return Err(Error::config("dt must be positive"));
    }
    let n = mesh.num_cells();
    if u_prev.values.len() != n || q.len() != n {
        return Err(Error::structural("heat step: field length does not match the mesh"));
    }
    if w_boundary.len() != mesh.faces().len() {
        return Err(Error::structural("heat step: boundary data must be given per face"));
    }
    let sign = match params.robin_sign {
        RobinSign::Cooling => 1.0,
        RobinSign::Literal => -1.0,
    };
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for (i, c) in mesh.cells().iter().enumerate() {
        let mass = params.rho_cp * c.measure / dt;
        a[(i, i)] += mass;
        rhs[i] = mass * u_prev.values[i] + q[i] * c.measure;
    }
    for (fi, face) in mesh.faces().iter().enumerate() {
        match face.cells {
            FaceCells::Interior { owner, neighbour } => {
                let t = mesh.transmissibility(fi, &params.k);
                a[(owner, owner)] += t;
                a[(neighbour, neighbour)] += t;
                a[(owner, neighbour)] -= t;
                a[(neighbour, owner)] -= t;
            }
            FaceCells::Boundary { cell } => {
                rhs[cell] -= sign * params.k1 * face.measure * (w_boundary[fi] - params.t_ambient);
            }
        }
    }
    let values = solve_dense(a, &rhs)
        .ok_or_else(|| Error::solver(Stage::Heat, "singular heat system", vec![]))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver(Stage::Heat, "non-finite temperature", vec![]));
    }
    Ok(TemperatureField {
        values,
        time: u_prev.time + dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfRecord {
    pub sup_u: f64,
    /// `q_norm + 2 sup|u0| + 1`; the unknown constant is left out and
    /// `ratio = sup_u / bound_estimate` is tracked instead.
    pub bound_estimate: f64,
    pub ratio: f64,
}

pub fn linf_monitor(u: &TemperatureField, q_norm: f64, params: &PhysicalParams) -> LinfRecord {
    let sup_u = u.sup();
    let u0 = params.u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound_estimate = q_norm + 2.0 * u0 + 1.0;
    LinfRecord {
        sup_u,
        bound_estimate,
        ratio: sup_u / bound_estimate,
    }
}

/// Discrete `L^p` norm `(sum |q|^p |K|)^(1/p)`.
pub fn source_norm(q: &[f64], mesh: &Mesh, p: f64) -> f64 {
    q.iter()
        .zip(mesh.cells())
        .map(|(v, c)| v.abs().powf(p) * c.measure)
        .sum::<f64>()
        .powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_sandwich_mesh, Width};
    use crate::params::ParamSpec;
    use proptest::prelude::*;

    fn setup(k1: f64) -> (Mesh, PhysicalParams) {
        let m = build_sandwich_mesh([1.0, 0.4, 1.0], [4, 2, 4], None).unwrap();
        let p = ParamSpec {
            k1,
            k: [1.0, 0.3, 2.0],
            rho_cp: 1.7,
            ..ParamSpec::default()
        }
        .discretize(&m);
        (m, p)
    }

    fn ambient_w(m: &Mesh, p: &PhysicalParams) -> Vec<f64> {
        vec![p.t_ambient; m.faces().len()]
    }

    #[test]
    fn equilibrium_is_fixed() {
        let (m, p) = setup(1.0);
        let mut u = TemperatureField { values: vec![p.t_ambient; m.num_cells()], time: 0.0 };
        for _ in 0..100 {
            u = step_temperature(&u, &vec![0.0; m.num_cells()], &ambient_w(&m, &p), 0.1, &m, &p).unwrap();
        }
        assert!(u.values.iter().all(|v| (v - p.t_ambient).abs() <= 1e-12));
        assert!((u.time - 10.0).abs() < 1e-9);
    }

    #[test]
    fn insulated_constant_forcing() {
        let (m, p) = setup(0.0);
        let c = 0.8;
        let mut u = TemperatureField::initial(&p);
        for k in 1..=20 {
            u = step_temperature(&u, &vec![c; m.num_cells()], &ambient_w(&m, &p), 0.05, &m, &p).unwrap();
            let exact = 2.0 + c * 0.05 * k as f64 / p.rho_cp;
            assert!(u.values.iter().all(|v| (v - exact).abs() <= 1e-12));
        }
    }

    #[test]
    fn rejects_bad_dt() {
        let (m, p) = setup(1.0);
        let u = TemperatureField::initial(&p);
        let err = step_temperature(&u, &vec![0.0; m.num_cells()], &ambient_w(&m, &p), 0.0, &m, &p);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn literal_sign_heats_when_hot() {
        let (m, mut p) = setup(1.0);
        let u = TemperatureField { values: vec![3.0; m.num_cells()], time: 0.0 };
        let w = vec![3.0; m.faces().len()];
        let q = vec![0.0; m.num_cells()];
        let cooled = step_temperature(&u, &q, &w, 0.1, &m, &p).unwrap();
        p.robin_sign = RobinSign::Literal;
        let heated = step_temperature(&u, &q, &w, 0.1, &m, &p).unwrap();
        assert!(cooled.max() < 3.0);
        assert!(heated.min() > 3.0);
    }

    #[test]
    fn monitor_tracks_growth() {
        let (m, p) = setup(0.0);
        let u = TemperatureField { values: vec![4.0; m.num_cells()], time: 1.0 };
        let r = linf_monitor(&u, 1.0, &p);
        assert_eq!(r.sup_u, 4.0);
        assert_eq!(r.bound_estimate, 6.0);
        assert!((source_norm(&vec![2.0; m.num_cells()], &m, 2.0) - 2.0 * m.total_length().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_uniform_data() {
        let m = build_sandwich_mesh([1.0, 0.4, 1.0], [3, 2, 3], Some(Width { extent: 0.5, cells: 2 })).unwrap();
        let p = ParamSpec::default().discretize(&m);
        let u = TemperatureField::initial(&p);
        let next = step_temperature(&u, &vec![0.0; m.num_cells()], &ambient_w(&m, &p), 0.1, &m, &p).unwrap();
        assert!(next.max_diff(&u) < 1e-14);
    }

    proptest! {
        #[test]
        fn insulated_conserves_energy(seed in proptest::collection::vec(1.0f64..3.0, 10)) {
            let (m, p) = setup(0.0);
            let u = TemperatureField { values: seed, time: 0.0 };
            let next = step_temperature(&u, &vec![0.0; 10], &ambient_w(&m, &p), 0.3, &m, &p).unwrap();
            let (a, b) = (u.integral(&m), next.integral(&m));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn maximum_principle(seed in proptest::collection::vec(0.5f64..4.0, 10), dt in 0.01f64..0.25) {
            // Robin data from the previous field: the step is a convex update
            // while rho_cp |K| / dt >= k1 |f|, which the dt range guarantees
            let (m, p) = setup(1.3);
            let u = TemperatureField { values: seed, time: 0.0 };
            let w: Vec<f64> = m.faces().iter().map(|f| match f.cells {
                FaceCells::Boundary { cell } => u.values[cell],
                _ => 0.0,
            }).collect();
            let next = step_temperature(&u, &vec![0.0; 10], &w, dt, &m, &p).unwrap();
            let lo = u.min().min(p.t_ambient);
            let hi = u.max().max(p.t_ambient);
            prop_assert!(next.min() >= lo - 1e-12);
            prop_assert!(next.max() <= hi + 1e-12);
        }

        #[test]
        fn superposition(q1 in proptest::collection::vec(-2.0f64..2.0, 10), q2 in proptest::collection::vec(-2.0f64..2.0, 10)) {
            let (m, p) = setup(0.7);
            let w = ambient_w(&m, &p);
            let u = TemperatureField::initial(&p);
            let zero = TemperatureField { values: vec![0.0; 10], time: 0.0 };
            let sum: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| a + b).collect();
            let a = step_temperature(&u, &sum, &w, 0.2, &m, &p).unwrap();
            let b = step_temperature(&u, &q1, &w, 0.2, &m, &p).unwrap();
            let c = step_temperature(&zero, &q2, &w, 0.2, &m, &p).unwrap();
            let d = step_temperature(&zero, &vec![0.0; 10], &w, 0.2, &m, &p).unwrap();
            for i in 0..10 {
                let lhs = a.values[i] - b.values[i];
                let rhs = c.values[i] - d.values[i];
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
    }
}
