mod common;

use approx::assert_relative_eq;
use lco_core::benchmark::{generate_benchmark, BenchmarkConfig, BenchmarkSize};
use lco_core::model::{
    assemble_dynamic_stiffness, craig_bampton_reduce, linear_eigen, recover_sensor_amplitude, ContactElement,
    ModeKind, ReducedModel,
};
use lco_core::{harmonic, HarmonicSet};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

#[test]
fn scalar_dynamic_stiffness_vanishes_at_second_harmonic_resonance() {
    let m = ReducedModel::new(DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 8.0)).unwrap();
    assert_eq!(assemble_dynamic_stiffness(&m, 1.0, 2)[(0, 0)], 0.0);
}

#[test]
fn chain_reduction_keeps_the_full_spectrum() {
    let (m, k) = common::chain(3);
    let red = craig_bampton_reduce(&m, &k, &[1], 2).unwrap();
    // full-order oracle: M = I so the frequencies are the eigenvalues of K
    let mut full: Vec<f64> = SymmetricEigen::new(k.clone()).eigenvalues.iter().copied().collect();
    full.sort_by(f64::total_cmp);
    let model = red.into_model(labels(3), 0, 0, None).unwrap();
    let modes = linear_eigen(&model, &[], ModeKind::Stick).unwrap();
    for (mode, lam) in modes.iter().zip(&full) {
        assert_relative_eq!(mode.omega * mode.omega, *lam, max_relative = 1e-10);
    }
}

#[test]
fn recovery_points_the_sensor_at_a_full_dof() {
    let (m, k) = common::chain(4);
    let red = craig_bampton_reduce(&m, &k, &[3], 1).unwrap();
    let model = red.into_model(labels(2), 3, 1, None).unwrap();
    let mut q = DVector::zeros(2);
    q[0] = Complex64::new(0.0, 2.0);
    // interface coordinate maps one-to-one onto DOF 3
    let u = HarmonicSet::from_fundamental(1, q);
    assert_relative_eq!(recover_sensor_amplitude(&u, &model).unwrap(), 2.0, epsilon = 1e-14);
}

#[test]
fn sensor_amplitude_is_zero_without_fundamental_motion() {
    let model = common::scalar(1.0, 1.0);
    assert_eq!(recover_sensor_amplitude(&HarmonicSet::zeros(2, 1), &model).unwrap(), 0.0);
}

#[test]
fn flat_length_counts_the_exchanged_reals() {
    assert_eq!(harmonic::flat_len(1, 21), 63);
    assert_eq!(HarmonicSet::zeros(3, 6).flat_len(), 7 * 6);
}

#[test]
fn benchmark_models_are_valid_and_mass_normalized() {
    for size in [BenchmarkSize::Small, BenchmarkSize::Medium] {
        let b = generate_benchmark(BenchmarkConfig::Two, size).unwrap();
        for kind in [ModeKind::Stick, ModeKind::Slip] {
            for mode in linear_eigen(&b.model, &b.contacts, kind).unwrap() {
                let mv = b.model.mass().map(Complex64::from) * &mode.shape;
                assert_relative_eq!(harmonic::hdot(&mode.shape, &mv).re, 1.0, max_relative = 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dynamic_stiffness_is_symmetric(
        a in prop::collection::vec(-1.0..1.0f64, 16),
        b in prop::collection::vec(-1.0..1.0f64, 16),
        omega in 0.0..10.0f64,
        k in 0usize..4,
    ) {
        let model = ReducedModel::new(common::spd(4, &a, 0.5), common::spsd(4, &b)).unwrap();
        let s = assemble_dynamic_stiffness(&model, omega, k);
        prop_assert!((&s - s.transpose()).amax() <= 1e-12 * s.amax().max(1.0));
    }

    #[test]
    fn reduction_is_exact_for_interface_loads(
        a in prop::collection::vec(-1.0..1.0f64, 25),
        b in prop::collection::vec(-1.0..1.0f64, 25),
        load in prop::collection::vec(-1.0..1.0f64, 2),
        n_modes in 0usize..4,
    ) {
        let m = common::spd(5, &a, 0.5);
        let k = common::spd(5, &b, 1.0);
        let iface = [1, 4];
        let red = craig_bampton_reduce(&m, &k, &iface, n_modes).unwrap();
        let mut f = DVector::zeros(5);
        f[1] = load[0];
        f[4] = load[1];
        let full = k.clone().lu().solve(&f).unwrap();
        let fr = red.recovery.transpose() * &f;
        let q = red.stiffness.clone().lu().solve(&fr).unwrap();
        let rec = &red.recovery * q;
        prop_assert!((&rec - &full).norm() <= 1e-10 * full.norm().max(1e-300));
    }

    #[test]
    fn stick_frequencies_bound_slip_frequencies(
        a in prop::collection::vec(-1.0..1.0f64, 16),
        b in prop::collection::vec(-1.0..1.0f64, 16),
        kt in prop::collection::vec(0.01..5.0f64, 2),
    ) {
        let model = ReducedModel::new(common::spd(4, &a, 0.5), common::spd(4, &b, 0.1)).unwrap();
        let contacts = [ContactElement::planar(0, 2, kt[0], 1.0), ContactElement::uniaxial(3, kt[1], 1.0)];
        let stick = linear_eigen(&model, &contacts, ModeKind::Stick).unwrap();
        let slip = linear_eigen(&model, &contacts, ModeKind::Slip).unwrap();
        for (s, l) in stick.iter().zip(&slip) {
            prop_assert!(s.omega >= l.omega * (1.0 - 1e-12));
        }
        for w in stick.windows(2) {
            prop_assert!(w[1].omega >= w[0].omega);
        }
    }

    #[test]
    fn sensor_amplitude_ignores_global_phase(
        re in prop::collection::vec(-1.0..1.0f64, 3),
        im in prop::collection::vec(-1.0..1.0f64, 3),
        theta in -3.2..3.2f64,
    ) {
        let model = ReducedModel::with_details(
            DMatrix::identity(3, 3), DMatrix::identity(3, 3), None, labels(3), 2, 0, None,
        ).unwrap();
        let u = HarmonicSet::from_fundamental(2, DVector::from_fn(3, |i, _| Complex64::new(re[i], im[i])));
        let a = recover_sensor_amplitude(&u, &model).unwrap();
        let b = recover_sensor_amplitude(&u.phase_shifted(theta), &model).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
    }

    #[test]
    fn flat_representation_round_trips(
        vals in prop::collection::vec(-1e3..1e3f64, 5 * 3),
    ) {
        let x = DVector::from_vec(vals);
        let u = HarmonicSet::from_flat(2, 3, &x).unwrap();
        prop_assert_eq!(u.to_flat(), x);
    }
}
