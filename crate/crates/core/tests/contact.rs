use lco_core::contact::{self, AftConfig};
use lco_core::model::{contact_stiffness, ContactElement, ReducedModel};
use lco_core::HarmonicSet;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn model(n: usize) -> ReducedModel {
    ReducedModel::new(DMatrix::identity(n, n), DMatrix::identity(n, n)).unwrap()
}

fn contacts() -> Vec<ContactElement> {
    vec![
        ContactElement::planar(0, 1, 2.0, 0.6),
        ContactElement::uniaxial(2, 1.5, 0.4),
    ]
}

fn set_from(order: usize, dim: usize, vals: &[f64]) -> HarmonicSet {
    HarmonicSet::from_flat(order, dim, &DVector::from_column_slice(vals)).unwrap()
}

fn fd_jacobian(u: &HarmonicSet, m: &ReducedModel, c: &[ContactElement], cfg: &AftConfig) -> DMatrix<f64> {
    let x = u.to_flat();
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for col in 0..n {
        let h = 1e-7 * x[col].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += h;
        xm[col] -= h;
        let fp = contact::contact_force_fourier(&HarmonicSet::from_flat(u.order(), u.dim(), &xp).unwrap(), m, c, cfg)
            .unwrap()
            .to_flat();
        let fm = contact::contact_force_fourier(&HarmonicSet::from_flat(u.order(), u.dim(), &xm).unwrap(), m, c, cfg)
            .unwrap()
            .to_flat();
        j.set_column(col, &((fp - fm) / (2.0 * h)));
    }
    j
}

#[test]
fn dense_reference_dft_matches_fundamental() {
    // steady 1-D Jenkins loop for u = cos t, k_t = 1, f_lim = 0.5
    let el = ContactElement::uniaxial(0, 1.0, 0.5);
    let u = HarmonicSet::from_fundamental(1, DVector::from_element(1, Complex64::new(1.0, 0.0)));
    let m = model(1);
    let f128 = contact::contact_force_fourier(&u, &m, &[el], &AftConfig::default()).unwrap();

    let ns = 128;
    let gx: Vec<f64> = (0..ns).map(|n| (2.0 * std::f64::consts::PI * n as f64 / ns as f64).cos()).collect();
    let mut state = Default::default();
    let mut forces = Vec::new();
    for _ in 0..4 {
        let (f, s) = contact::jenkins_march(&gx, None, &el, state);
        state = s;
        forces = f;
    }
    let oracle = contact::dft_real(&forces.iter().map(|p| p[0]).collect::<Vec<_>>(), 1);
    assert!((f128.fundamental()[0].re - oracle[1]).abs() < 1e-8);
    assert!((f128.fundamental()[0].im - oracle[2]).abs() < 1e-8);
}

#[test]
fn stick_force_equals_contact_spring() {
    let m = model(3);
    let u = set_from(2, 3, &[0.01, -0.02, 0.0, 0.05, 0.02, -0.01, 0.03, 0.0, 0.01, 0.02, -0.01, 0.0, 0.01, 0.0, 0.02]);
    let c = contacts();
    let f = contact::contact_force_fourier(&u, &m, &c, &AftConfig::default()).unwrap();
    let kc = contact_stiffness(3, &c);
    for k in 1..=2 {
        let expect = kc.map(Complex64::from) * u.harmonic(k);
        assert!((f.harmonic(k) - expect).iter().all(|z| z.norm() < 1e-10));
    }
    let expect0 = &kc * u.zeroth();
    assert!((f.zeroth() - expect0).amax() < 1e-10);
    let j = contact::contact_jacobian(&u, &m, &c, &AftConfig::default()).unwrap();
    let mut block = DMatrix::zeros(15, 15);
    for b in 0..5 {
        block.view_mut((3 * b, 3 * b), (3, 3)).copy_from(&kc);
    }
    assert!((j - block).amax() < 1e-10);
}

#[test]
fn zero_contacts_give_zero_jacobian() {
    let m = model(2);
    let u = set_from(1, 2, &[0.0, 0.0, 1.0, 2.0, 0.5, -0.5]);
    let j = contact::contact_jacobian(&u, &m, &[], &AftConfig::default()).unwrap();
    assert_eq!(j.amax(), 0.0);
}

#[test]
fn planar_slip_settles_periodically() {
    let u = set_from(1, 3, &[0.0, 0.0, 0.0, 1.0, 0.2, 0.4, 0.1, 0.9, -0.8]);
    let r = contact::evaluate(&u, &contacts(), &AftConfig::default(), false).unwrap();
    assert!(r.any_slip);
    assert!(r.loop_work > 0.0);
    assert!(r.cycles <= 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobian_matches_finite_differences(
        vals in proptest::collection::vec(-1.0f64..1.0, 15),
        amp in 0.5f64..3.0,
    ) {
        let scaled: Vec<f64> = vals.iter().map(|v| v * amp).collect();
        let u = set_from(2, 3, &scaled);
        let m = model(3);
        let c = contacts();
        let cfg = AftConfig::default();
        let j = contact::contact_jacobian(&u, &m, &c, &cfg).unwrap();
        let fd = fd_jacobian(&u, &m, &c, &cfg);
        let err = (j - fd).amax();
        prop_assert!(err < 1e-5, "max deviation {err:e}");
    }

    #[test]
    fn dissipation_is_nonnegative(vals in proptest::collection::vec(-2.0f64..2.0, 9)) {
        let u = set_from(1, 3, &vals);
        let w = contact::contact_dissipated_work(&u, 3.0, &model(3), &contacts(), &AftConfig::default()).unwrap();
        prop_assert!(w >= 0.0);
    }

    #[test]
    fn rate_independence(vals in proptest::collection::vec(-2.0f64..2.0, 9), w in 0.1f64..100.0) {
        let u = set_from(1, 3, &vals);
        let m = model(3);
        let cfg = AftConfig::default();
        let a = contact::contact_dissipated_work(&u, w, &m, &contacts(), &cfg).unwrap();
        let b = contact::contact_dissipated_work(&u, 2.0 * w, &m, &contacts(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
