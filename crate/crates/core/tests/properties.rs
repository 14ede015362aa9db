use proptest::prelude::*;

use tecell::butler_volmer::{bv_current, bv_current_exponentials};
use tecell::coupled::{apply_j, picard_step};
use tecell::heat::{step_temperature, TemperatureField};
use tecell::mesh::{BoundaryTag, FaceCells};
use tecell::potentials::{solve_potentials, solve_regularized};
use tecell::{
    build_sandwich_mesh, run_simulation, validate_hypotheses, ButlerVolmerContext, Domain, Mesh,
    NonlinearSettings, ParamSpec, PotentialPair, Region, SolverSettings, Truncation, Width,
};

fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    (
        proptest::array::uniform3(0.2f64..3.0),
        proptest::array::uniform3(1usize..6),
        proptest::option::of((0.1f64..2.0, 1usize..4)),
    )
        .prop_map(|(lengths, cells, width)| {
            build_sandwich_mesh(lengths, cells, width.map(|(extent, cells)| Width { extent, cells }))
                .unwrap()
        })
}

fn spec_strategy() -> impl Strategy<Value = ParamSpec> {
    (
        proptest::array::uniform2(0.5f64..2.0),
        proptest::array::uniform3(0.5f64..2.0),
        proptest::array::uniform2(0.5f64..1.5),
        proptest::array::uniform2(-0.3f64..0.3),
        -0.6f64..0.6,
        -0.5f64..0.5,
        0.5f64..1.5,
    )
        .prop_map(|(sigma_s, sigma_e, g1, ocp, current_anode, f_amplitude, alpha)| ParamSpec {
            sigma_s,
            sigma_e,
            g1,
            ocp,
            current_anode,
            f_amplitude,
            alpha,
            ..ParamSpec::default()
        })
}

fn small_mesh() -> Mesh {
    build_sandwich_mesh([1.0, 0.4, 1.0], [4, 2, 4], None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measures_add_up(mesh in mesh_strategy()) {
        let total: f64 = mesh.cells().iter().map(|c| c.measure).sum();
        let expected = mesh.total_length() * mesh.width();
        prop_assert!((total - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn faces_are_well_formed(mesh in mesh_strategy()) {
        let mut count = vec![0usize; mesh.num_cells()];
        for face in mesh.faces() {
            match face.cells {
                FaceCells::Interior { owner, neighbour } => {
                    prop_assert_ne!(owner, neighbour);
                    prop_assert!(matches!(face.tag, None | Some(BoundaryTag::SeparatorInterface)));
                    count[owner] += 1;
                    count[neighbour] += 1;
                }
                FaceCells::Boundary { cell } => {
                    prop_assert!(matches!(face.tag, Some(t) if t != BoundaryTag::SeparatorInterface));
                    count[cell] += 1;
                }
            }
        }
        let sides = 2 * mesh.dimension();
        prop_assert!(count.iter().all(|&c| c == sides));
    }

    #[test]
    fn refinement_keeps_region_measures(lengths in proptest::array::uniform3(0.2f64..3.0),
                                       cells in proptest::array::uniform3(1usize..5)) {
        let a = build_sandwich_mesh(lengths, cells, None).unwrap();
        let b = build_sandwich_mesh(lengths, cells.map(|n| 2 * n), None).unwrap();
        for r in [Region::Anode, Region::Separator, Region::Cathode] {
            let (x, y) = (a.region_measure(Domain::Region(r)), b.region_measure(Domain::Region(r)));
            prop_assert!((x - y).abs() <= 1e-12 * x);
        }
    }

    #[test]
    fn validation_is_pure(spec in spec_strategy()) {
        let m = small_mesh();
        let p = spec.discretize(&m);
        prop_assert_eq!(validate_hypotheses(&p, &m).unwrap(), validate_hypotheses(&p, &m).unwrap());
    }

    #[test]
    fn effective_temperature_stays_positive(gradient in -0.5f64..0.5, ratio in 0.01f64..0.99,
                                            u in -50.0f64..50.0) {
        let m = small_mesh();
        let p = ParamSpec { u0_gradient: gradient, ..ParamSpec::default() }.discretize(&m);
        let l0 = p.u0.iter().copied().fold(f64::INFINITY, f64::min);
        let ctx = ButlerVolmerContext::new(&p, ratio * l0).unwrap();
        for cell in 0..m.num_cells() {
            let w = ctx.effective_temperature(u, cell);
            prop_assert!(w >= l0 - ctx.eps() && w > 0.0);
        }
    }

    #[test]
    fn kernel_sign_and_strict_monotonicity(g1 in 0.5f64..2.0, alpha in 0.2f64..2.0, ocp in -0.5f64..0.5,
                                           w in 0.5f64..4.0, y2 in -2.0f64..2.0, gap in 1e-6f64..1.0) {
        let a = bv_current(g1, alpha, ocp, w, y2).value;
        let b = bv_current(g1, alpha, ocp, w, y2 + gap).value;
        prop_assert!(b > a);
        if y2 != ocp {
            prop_assert_eq!(a.signum(), (y2 - ocp).signum());
        }
        let x = alpha * (y2 - ocp) / w;
        let exp_form = bv_current_exponentials(g1, alpha, ocp, w, y2);
        prop_assert!((a - exp_form).abs() <= 1e-14 * g1 * (x.exp() + (-x).exp()));
    }

    #[test]
    fn secant_above_band_coercivity(u in 1.0f64..3.0, y2 in -1.5f64..1.5, gap in 1e-4f64..1.0,
                                    gradient in 0.0f64..0.5) {
        let m = small_mesh();
        let p = ParamSpec { u0_gradient: gradient, g1: [0.7, 1.2], ocp: [0.1, -0.2], ..ParamSpec::default() }
            .discretize(&m);
        let ctx = ButlerVolmerContext::new(&p, 0.5).unwrap();
        for &cell in m.electrode_cells() {
            let a = ctx.i_fara(u, y2, cell).value;
            let b = ctx.i_fara(u, y2 + gap, cell).value;
            prop_assert!((b - a) / gap >= ctx.coercivity() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn truncation_is_transparent_inside_band(frac in -1.0f64..1.0, y2 in -1.0f64..1.0) {
        let m = small_mesh();
        let p = ParamSpec { ocp: [0.1, -0.1], u0_gradient: 0.2, ..ParamSpec::default() }.discretize(&m);
        let ctx = ButlerVolmerContext::new(&p, 0.5).unwrap();
        let raw = ctx.clone().with_truncation(Truncation::Disabled);
        for &cell in m.electrode_cells() {
            let u = p.u0[cell] + frac * 0.5;
            prop_assert_eq!(ctx.i_fara(u, y2, cell).value.to_bits(), raw.i_fara(u, y2, cell).value.to_bits());
        }
    }

    #[test]
    fn regularized_solve_ignores_initial_guess(spec in spec_strategy(), tau in 1e-3f64..1.0,
                                               seeds in proptest::collection::vec(-1.0f64..1.0, 18)) {
        let m = small_mesh();
        let p = spec.discretize(&m);
        let ctx = ButlerVolmerContext::new(&p, 1.0).unwrap();
        let settings = NonlinearSettings::default();
        let base = solve_regularized(&p.u0, tau, 1.0, &ctx, &m, &settings).unwrap();
        let guess = PotentialPair::from_fields(&m, seeds[..8].to_vec(), seeds[8..].to_vec(), tau, 1.0);
        let other = solve_potentials(&p.u0, tau, 1.0, &ctx, &m, &settings, Some(&guess)).unwrap();
        prop_assert!(base.max_diff(&other) <= 10.0 * settings.tol);
    }

    #[test]
    fn converged_solves_have_zero_mean(spec in spec_strategy(), tau in prop_oneof![Just(0.0), 1e-6f64..1.0],
                                       delta in prop_oneof![Just(0.25), Just(0.5), Just(1.0)]) {
        let m = small_mesh();
        let p = spec.discretize(&m);
        let ctx = ButlerVolmerContext::new(&p, 1.0).unwrap();
        let settings = NonlinearSettings::default();
        let pot = solve_potentials(&p.u0, tau, delta, &ctx, &m, &settings, None).unwrap();
        prop_assert!(pot.residual_norm <= settings.tol);
        prop_assert!(pot.mean_sum.abs() <= 1e-10 * pot.mean_scale(&m));
    }

    #[test]
    fn insulated_heat_conserves_energy(seed in proptest::collection::vec(1.0f64..3.0, 10), dt in 0.01f64..1.0) {
        let m = small_mesh();
        let p = ParamSpec { k1: 0.0, k: [1.0, 0.2, 3.0], ..ParamSpec::default() }.discretize(&m);
        let w = vec![p.t_ambient; m.faces().len()];
        let mut u = TemperatureField { values: seed, time: 0.0 };
        let start = u.integral(&m);
        for _ in 0..5 {
            u = step_temperature(&u, &[0.0; 10], &w, dt, &m, &p).unwrap();
        }
        prop_assert!((u.integral(&m) - start).abs() <= 1e-12 * start);
    }
}

#[test]
fn picard_certificate_holds() {
    let m = small_mesh();
    let p = ParamSpec { current_anode: 0.4, f_amplitude: 0.3, ocp: [0.1, -0.1], ..ParamSpec::default() }
        .discretize(&m);
    let settings = SolverSettings { eps: 0.8, ..SolverSettings::default() };
    let ctx = ButlerVolmerContext::new(&p, settings.eps).unwrap();
    let prev = TemperatureField::initial(&p);
    let out = picard_step(&prev, 0.1, &ctx, &m, &settings, None).unwrap();
    let again = apply_j(&out.u.values, &prev, 0.1, &ctx, &m, &settings, None).unwrap();
    assert!(again.u.max_diff(&out.u) <= 2.0 * settings.picard_tol);
}

#[test]
fn delta_one_is_the_default_run() {
    let m = small_mesh();
    let p = ParamSpec { current_anode: 0.4, ..ParamSpec::default() }.discretize(&m);
    let base = SolverSettings { horizon: 0.3, ..SolverSettings::default() };
    let explicit = SolverSettings { delta: 1.0, ..base.clone() };
    let a = run_simulation(&m, &p, &base).unwrap();
    let b = run_simulation(&m, &p, &explicit).unwrap();
    assert_eq!(a.temperatures, b.temperatures);
    for delta in [0.25, 0.5] {
        let r = run_simulation(&m, &p, &SolverSettings { delta, ..base.clone() }).unwrap();
        assert_eq!(r.records.len(), a.records.len());
        // weaker coupling heats less
        assert!(r.records.last().unwrap().max_u <= a.records.last().unwrap().max_u + 1e-12);
    }
}
