use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;

use semiclassical_core::dynamics::{
    compare_trajectories, evolve_schrodinger, integrate_classical, EvolveOptions, InitialCondition, Potential,
};
use semiclassical_core::fields::{Boundary, ComplexField, Grid, PhysicalConstants, ScalarField};
use semiclassical_core::helmholtz::{box_minimum, evaluate_mode, HelmholtzMode, ModeKind};
use semiclassical_core::potentials::{
    construct_stationary, gauge_shift, GaugeShift, ScenarioOptions, SemiclassicalScenario,
};
use semiclassical_core::verify::{check_gauge_fields, scenario_report, EntryMeta};

fn cos_scenario(lambda: f64, phase: f64, amp: f64) -> SemiclassicalScenario {
    // Box well inside the first nodal interval of R = cos(λx).
    let half = 0.6 / lambda;
    let g = Grid::uniform(1, 81, -half, half, Boundary::DirichletZero).unwrap();
    let r = evaluate_mode(&HelmholtzMode::cosine_1d(lambda, 0.0), &g).unwrap();
    let mut s = HelmholtzMode::cosine_1d(lambda, phase);
    s.amplitudes[0] = amp;
    let s = evaluate_mode(&s, &g).unwrap();
    let sc =
        construct_stationary(r, s, 0.3, lambda, PhysicalConstants::natural(), &ScenarioOptions::default()).unwrap();
    SemiclassicalScenario::Stationary(sc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stationary_assembly_is_exact(lambda in 0.5f64..3.0, phase in -3.0f64..3.0, amp in 0.1f64..2.0) {
        let report = scenario_report(&cos_scenario(lambda, phase, amp), "p", "").unwrap();
        prop_assert!(report.entry("qhj_assembly").unwrap().measured <= 1e-12);
    }

    #[test]
    fn constant_gauge_changes_only_v_and_phase(c in -5.0f64..5.0, lambda in 0.5f64..2.0) {
        let SemiclassicalScenario::Stationary(sc) = cos_scenario(lambda, -1.0, 1.0) else { unreachable!() };
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let td = sc.to_time_dependent(times.clone()).unwrap();
        let shift = GaugeShift::constant(c, times).unwrap();
        let shifted = gauge_shift(&td, &shift).unwrap();
        prop_assert_eq!(&shifted.r, &td.r);
        for e in check_gauge_fields(&td, &shifted, &shift, 1e-12).unwrap() {
            prop_assert!(e.passed(), "{} {}", e.name, e.measured);
        }
    }

    #[test]
    fn helmholtz_modes_cannot_stay_positive_on_a_wavelength_box(
        lambda in 0.2f64..8.0,
        angle in 0.0f64..TAU,
        a2 in -1.0f64..1.0,
        theta in 0.0f64..TAU,
    ) {
        let mode = HelmholtzMode {
            kind: ModeKind::PlaneWaveSuperposition,
            lambda,
            wavevectors: vec![
                vec![lambda * angle.cos(), lambda * angle.sin()],
                vec![-lambda * angle.sin(), lambda * angle.cos()],
            ],
            amplitudes: vec![1.0, a2],
            phases: vec![theta, 0.5],
            center: None,
        };
        prop_assert!(box_minimum(&mode, 2, TAU / lambda).unwrap() < 0.0);
    }

    #[test]
    fn closed_evolution_is_unitary(k in -3i32..=3, v0 in -2.0f64..2.0, v1 in -2.0f64..2.0, width in 0.5f64..1.5) {
        let g = Grid::uniform(1, 64, 0.0, TAU, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&g, |x| {
            Complex64::from_polar((-(x[0] - 3.0).powi(2) / width).exp(), k as f64 * x[0])
        }).unwrap();
        let v = ScalarField::from_fn(&g, |x| v0 * x[0].cos() + v1 * (2.0 * x[0]).sin()).unwrap();
        let evo = evolve_schrodinger(&psi, &Potential::Static(v), &PhysicalConstants::natural(), &EvolveOptions::new(1e-2, 1.0)).unwrap();
        prop_assert!(evo.max_norm_drift <= 1e-10);
    }

    #[test]
    fn constant_potential_offset_exerts_no_force(c in -10.0f64..10.0, x0 in -0.5f64..0.5, v0 in -0.5f64..0.5) {
        let g = Grid::uniform(1, 101, -2.0, 2.0, Boundary::DirichletZero).unwrap();
        let v = ScalarField::from_fn(&g, |x| 0.5 * x[0] * x[0] + 0.1 * x[0].powi(3)).unwrap();
        let shifted = v.map(|y| y + c).unwrap();
        let ic = [InitialCondition { position: vec![x0], velocity: vec![v0] }];
        let nat = PhysicalConstants::natural();
        let a = integrate_classical(&Potential::Static(v), &nat, &ic, 1e-2, 1.0, None).unwrap();
        let b = integrate_classical(&Potential::Static(shifted), &nat, &ic, 1e-2, 1.0, None).unwrap();
        let cmp = compare_trajectories(&a, &b, 1e-12, EntryMeta::scalar()).unwrap();
        prop_assert!(cmp.max_deviation <= 1e-12);
    }
}
