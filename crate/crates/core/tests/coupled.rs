mod common;

use lco_core::aero::{influence_force, AeroSet};
use lco_core::benchmark::{BenchmarkConfig, BenchmarkSize};
use lco_core::contact::AftConfig;
use lco_core::coupled::{
    coupled_solve, initialize_from_backbone, initialize_from_solution, payload_size, CoupledConfig, Linearization,
    SurrogateProvider,
};
use lco_core::energy::{conventional_energy_lco, log_grid, LcoRoot};
use lco_core::harmonic_balance::{residual_scale, structural_residual};
use lco_core::model::{linear_eigen, ModeKind};
use lco_core::verify::{independent_balance, CouplingRun, Study};
use lco_core::{Error, HarmonicSet};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn refined_root(config: BenchmarkConfig) -> (Study, LcoRoot) {
    let study = Study::from_benchmark(config, BenchmarkSize::Small, 1).unwrap();
    let bb = study.backbone().unwrap();
    let root = study.refined(&bb).unwrap().roots.remove(0);
    (study, root)
}

fn solve_from(study: &Study, u: &HarmonicSet, omega: f64, lin: Linearization) -> (lco_core::coupled::LcoSolution, lco_core::coupled::CouplingTrace) {
    let (u0, w0, anchor) = initialize_from_solution(u, omega, study.model.dominant_coord(), 0.5, 1).unwrap();
    let mut provider = SurrogateProvider::new(study.set.clone(), study.model.dim(), 1, 0.5, 0.0).unwrap();
    coupled_solve(&study.model, &study.contacts, &mut provider, (&u0, w0), &CoupledConfig::new(anchor, lin), &study.aft).unwrap()
}

#[test]
fn exact_linearization_converges_in_two_outer_iterations() {
    for config in [BenchmarkConfig::One, BenchmarkConfig::Two] {
        let (study, root) = refined_root(config);
        let (_, trace) = solve_from(&study, &root.solution, root.point.omega, Linearization::FreqDependent);
        assert!(trace.entries.len() <= 2, "{config:?}: {} iterations", trace.entries.len());
    }
}

#[test]
fn perturbed_start_returns_to_the_refined_cycle() {
    for config in [BenchmarkConfig::One, BenchmarkConfig::Two] {
        let (study, root) = refined_root(config);
        let (s, _) = solve_from(&study, &root.solution.scaled(1.1), root.point.omega, Linearization::DominatingMode);
        assert!((s.modal_amplitude / root.point.amplitude - 1.0).abs() < 0.01);
        assert!((s.omega / root.point.omega - 1.0).abs() < 1e-3);
    }
}

#[test]
fn converged_cycles_balance_energy_and_report_the_payload() {
    let (study, root) = refined_root(BenchmarkConfig::Two);
    for lin in [Linearization::FreqDependent, Linearization::FreqIndependent, Linearization::DominatingMode] {
        let (s, trace) = solve_from(&study, &root.solution, root.point.omega, lin);
        let defect = independent_balance(&s.u, s.omega, &study.contacts, &study.set, 0.0, &AftConfig::default()).unwrap();
        assert!(defect <= 1e-6, "{lin:?}: {defect:e}");
        let width = payload_size(1, 1, study.model.dim());
        assert!(trace.entries.iter().all(|e| e.payload == width));
        for e in &trace.entries {
            assert!(e.fluid_residuals.windows(2).skip(1).all(|w| w[1] <= w[0]));
        }
    }
}

#[test]
fn relaxation_rescues_the_frequency_dependent_iteration() {
    let (study, root) = refined_root(BenchmarkConfig::Two);
    let run = |relax| {
        study.coupled(
            &root,
            CouplingRun { linearization: Linearization::FreqDependent, relax, kappa_relative: lco_core::verify::RELAXATION_KAPPA },
        )
    };
    assert!(matches!(run(1.0), Err(Error::OuterIterationCap { .. })));
    assert!(run(0.3).is_ok());
}

#[test]
fn backbone_start_is_anchored() {
    let study = Study::from_benchmark(BenchmarkConfig::One, BenchmarkSize::Small, 1).unwrap();
    let bb = study.backbone().unwrap();
    let a = bb.points[bb.points.len() / 2].amplitude;
    let (u, _, anchor) = initialize_from_backbone(&bb, a, &study.model, 0.5, 1).unwrap();
    let i = study.model.dominant_coord();
    assert_eq!(u.fundamental()[i].re, anchor.value);
    assert!(u.fundamental()[i].norm() >= anchor.value);
}

#[test]
fn energy_root_starts_on_the_structural_equation_for_exact_linear_aero() {
    // a purely imaginary scalar influence is exactly the modal damping term
    let (m, c) = common::jenkins_oscillator(3.0, 0.5);
    let mode = &linear_eigen(&m, &c, ModeKind::Stick).unwrap()[0];
    let g = DMatrix::from_element(1, 1, Complex64::new(0.0, 0.16));
    let set = AeroSet { nodal_diameter: 0, omega_stick: 2.0, omega_slip: 1.0, g_stick: g.clone(), g_slip: g };
    let aft = AftConfig::default();
    let grid = log_grid(1e-3, 10.0, 120).unwrap();
    let res = conventional_energy_lco(&m, &c, mode, &set, &grid, &aft).unwrap();
    let root = &res.roots[0];
    // the conventional root holds the stick frequency; correct it on the
    // harmonic-balance equation first
    let (u0, w0, anchor) = initialize_from_solution(&root.solution, root.point.omega, 0, 0.5, 1).unwrap();
    let mut provider = SurrogateProvider::new(set.clone(), 1, 1, 0.5, 0.0).unwrap();
    let cfg = CoupledConfig::new(anchor, Linearization::FreqIndependent);
    let (s, _) = coupled_solve(&m, &c, &mut provider, (&u0, w0), &cfg, &aft).unwrap();
    let mut f = HarmonicSet::zeros(1, 1);
    *f.fundamental_mut() = influence_force(s.u.fundamental(), s.omega, &set, true);
    let r = structural_residual(&s.u, s.omega, &f, &m, &c, &aft).unwrap();
    // the solver balanced the surrogate force, so the exact one is off by
    // at most the fluid tolerance
    let rel = r.to_flat().norm() / residual_scale(&m, &s.u);
    assert!(rel <= cfg.eps_a, "{rel:e}");
    // same amplitude as the energy balance: the motion is a pure harmonic
    assert!((s.modal_amplitude / root.point.amplitude - 1.0).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn anchoring_preserves_every_modulus(
        re in prop::collection::vec(-1.0..1.0f64, 4),
        im in prop::collection::vec(-1.0..1.0f64, 4),
        dominant in 0usize..4,
        fraction in 0.05..1.0f64,
    ) {
        let u = HarmonicSet::from_fundamental(1, nalgebra::DVector::from_fn(4, |i, _| Complex64::new(re[i], im[i])));
        prop_assume!(u.fundamental()[dominant].norm() > 1e-3);
        let (a, _, anchor) = initialize_from_solution(&u, 1.0, dominant, fraction, 1).unwrap();
        prop_assert_eq!(a.fundamental()[dominant].re, anchor.value);
        for i in 0..4 {
            prop_assert!((a.fundamental()[i].norm() - u.fundamental()[i].norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn payload_counts_the_exchanged_reals(hs in 1usize..6, hf in 1usize..6, n in 1usize..40) {
        prop_assert_eq!(payload_size(hs, hf, n), (2 * hs.min(hf) + 1) * n + 1);
    }
}
