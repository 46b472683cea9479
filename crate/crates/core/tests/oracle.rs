mod common;

use std::f64::consts::PI;

use lco_core::aero::{aero_damping, aero_work, influence_force, AeroSet};
use lco_core::benchmark::{BenchmarkConfig, BenchmarkSize};
use lco_core::contact::{AftConfig, TractionState};
use lco_core::model::{ContactElement, ReducedModel};
use lco_core::oracle::{
    extract_lco, find_stability_limit, time_integrate, InitialState, IntegratorConfig, StabilityLimitConfig,
    TimeHistory,
};
use lco_core::verify::Study;
use lco_core::{Error, HarmonicSet};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn constant_set(g: Complex64) -> AeroSet {
    let gm = DMatrix::from_element(1, 1, g);
    AeroSet {
        nodal_diameter: 0,
        omega_stick: 2.0,
        omega_slip: 1.0,
        g_stick: gm.clone(),
        g_slip: gm,
    }
}

fn harmonic_start(amp: f64, omega: f64, contacts: &[ContactElement]) -> InitialState {
    let u = HarmonicSet::from_fundamental(1, DVector::from_element(1, Complex64::new(amp, 0.0)));
    InitialState::from_harmonics(&u, omega, contacts, &AftConfig::default()).unwrap()
}

/// Kinetic, structural and stored friction-spring energy.
fn mechanical_energy(model: &ReducedModel, contacts: &[ContactElement], s: &InitialState) -> f64 {
    let kin = 0.5 * s.v.dot(&(model.mass() * &s.v));
    let pot = 0.5 * s.q.dot(&(model.stiffness() * &s.q));
    let spring: f64 = contacts
        .iter()
        .zip(&s.contact)
        .map(|(c, t)| 0.5 * (t.p[0] * t.p[0] + t.p[1] * t.p[1]) / c.k_t)
        .sum();
    kin + pot + spring
}

fn self_excited() -> (ReducedModel, Vec<ContactElement>, AeroSet) {
    let (m, c) = common::jenkins_oscillator(3.0, 0.5);
    (m, c, constant_set(Complex64::new(0.0, 0.05)))
}

#[test]
fn linear_system_without_aero_conserves_energy() {
    let model = common::scalar(1.0, 4.0);
    let init = harmonic_start(1.0, 2.0, &[]);
    let hist = time_integrate(&model, &[], None, &init, None, &IntegratorConfig::new(2.0, 100)).unwrap();
    let e0 = mechanical_energy(&model, &[], &init);
    let e1 = mechanical_energy(&model, &[], &hist.final_state);
    assert!((e1 / e0 - 1.0).abs() < 1e-3, "{e1} vs {e0}");
}

#[test]
fn negative_aero_damping_grows_at_the_linear_rate() {
    let omega: f64 = 2.0;
    let set = constant_set(Complex64::new(0.0, 0.02 * omega * omega));
    let model = common::scalar(1.0, omega * omega);
    let u1 = DVector::from_element(1, Complex64::new(1.0, 0.0));
    let d = aero_damping(aero_work(&u1, omega, &influence_force(&u1, omega, &set, true)), omega * omega).unwrap();
    assert!((d + 0.01).abs() < 1e-12);
    let init = harmonic_start(1.0, omega, &[]);
    let mut cfg = IntegratorConfig::new(omega, 30);
    cfg.steps_per_period = 256;
    let reference = DVector::from_element(1, 1.0);
    let hist = time_integrate(&model, &[], Some(&set), &init, Some(&reference), &cfg).unwrap();
    // least-squares slope of the log envelope against time
    let pts: Vec<(f64, f64)> = hist.t.iter().zip(&hist.envelope).map(|(t, e)| (*t, e.ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let rate = sxy / sxx;
    let expected = -d * omega;
    assert!((rate / expected - 1.0).abs() < 0.02, "{rate} vs {expected}");
}

#[test]
fn self_excited_jenkins_settles_on_a_periodic_orbit() {
    let (m, c, set) = self_excited();
    let init = harmonic_start(0.16, 1.9, &c);
    let hist = time_integrate(&m, &c, Some(&set), &init, None, &IntegratorConfig::new(1.9, 1500)).unwrap();
    let lco = extract_lco(&hist, 20, 0.005).unwrap();
    assert!(lco.drift <= 0.005);
    assert!(lco.sensor_amplitude > 0.5 / 3.0, "orbit must slip: {}", lco.sensor_amplitude);
}

fn synthetic(amp: f64, omega: f64, rate: f64, periods: usize, n: usize) -> TimeHistory {
    let dt = 2.0 * PI / omega / n as f64;
    let t: Vec<f64> = (0..=periods * n).map(|i| i as f64 * dt).collect();
    let sensor = t.iter().map(|&t| amp * (rate * t).exp() * (omega * t).sin()).collect();
    TimeHistory {
        t,
        sensor,
        envelope: vec![],
        omega_estimates: vec![],
        steps_per_period: n,
        diverged: false,
        final_state: InitialState {
            q: DVector::zeros(1),
            v: DVector::zeros(1),
            contact: vec![],
        },
    }
}

#[test]
fn pure_sinusoid_is_recovered() {
    let (amp, omega) = (0.37, 3.1);
    let lco = extract_lco(&synthetic(amp, omega, 0.0, 40, 512), 20, 0.01).unwrap();
    assert!((lco.omega / omega - 1.0).abs() < 1e-9, "{}", lco.omega);
    // half peak-to-trough of a sampled sine is low by at most 1 - cos(pi/n)
    assert!((lco.sensor_amplitude / amp - 1.0).abs() < 1e-4, "{}", lco.sensor_amplitude);
}

#[test]
fn decaying_signal_is_not_stationary() {
    let r = extract_lco(&synthetic(1.0, 2.0, -0.01, 40, 256), 20, 0.01);
    assert!(matches!(r, Err(Error::NonStationary { .. })), "{r:?}");
}

#[test]
fn halving_the_step_barely_moves_the_amplitude() {
    let (m, c, set) = self_excited();
    let init = harmonic_start(0.17, 1.9, &c);
    let amp = |n: usize| {
        let mut cfg = IntegratorConfig::new(1.9, 1200);
        cfg.steps_per_period = n;
        let hist = time_integrate(&m, &c, Some(&set), &init, None, &cfg).unwrap();
        extract_lco(&hist, 20, 0.005).unwrap().sensor_amplitude
    };
    let (a1, a2) = (amp(128), amp(256));
    assert!((a2 / a1 - 1.0).abs() < 2e-3, "{a1} vs {a2}");
}

#[test]
fn friction_alone_never_adds_energy() {
    let (m, c) = common::jenkins_oscillator(3.0, 0.5);
    let mut state = harmonic_start(0.6, 1.8, &c);
    let mut e = mechanical_energy(&m, &c, &state);
    let e0 = e;
    for _ in 0..40 {
        let hist = time_integrate(&m, &c, None, &state, None, &IntegratorConfig::new(1.8, 1)).unwrap();
        state = hist.final_state;
        let next = mechanical_energy(&m, &c, &state);
        assert!(next <= e * (1.0 + 1e-12), "{next} > {e}");
        e = next;
    }
    assert!(e < e0, "slip must dissipate");
}

#[test]
fn stuck_contact_state_round_trips() {
    // a state that never slips stays on the elastic branch
    let (m, c) = common::jenkins_oscillator(3.0, 0.5);
    let init = harmonic_start(0.05, 2.0, &c);
    let hist = time_integrate(&m, &c, None, &init, None, &IntegratorConfig::new(2.0, 20)).unwrap();
    let e0 = mechanical_energy(&m, &c, &init);
    let e1 = mechanical_energy(&m, &c, &hist.final_state);
    assert!((e1 / e0 - 1.0).abs() < 1e-3, "{e1} vs {e0}");
    let TractionState { p, .. } = hist.final_state.contact[0];
    assert!(p[0].abs() < 0.5);
}

fn benchmark_limit(config: BenchmarkConfig, bracket: (f64, f64)) -> (lco_core::Result<lco_core::oracle::StabilityLimit>, f64) {
    let study = Study::from_benchmark(config, BenchmarkSize::Small, 1).unwrap();
    let bb = study.backbone().unwrap();
    let root = study.refined(&bb).unwrap().roots.remove(0);
    let a = root.point.amplitude;
    let r = find_stability_limit(
        &study.model,
        &study.contacts,
        &study.set,
        &bb,
        (bracket.0 * a, bracket.1 * a),
        &StabilityLimitConfig::default(),
    );
    (r, a)
}

#[test]
fn stable_configuration_has_no_threshold() {
    let (r, _) = benchmark_limit(BenchmarkConfig::One, (0.7, 1.4));
    assert!(matches!(r, Err(Error::NoStraddle(_))), "{r:?}");
}

#[test]
fn unstable_configuration_threshold_matches_the_energy_root() {
    let (r, a) = benchmark_limit(BenchmarkConfig::Two, (0.7, 1.4));
    let lim = r.unwrap();
    assert!((lim.amplitude / a - 1.0).abs() < 0.05, "{} vs {a}", lim.amplitude);
}

#[test]
fn tighter_tolerance_narrows_the_bracket_proportionally() {
    let study = Study::from_benchmark(BenchmarkConfig::Two, BenchmarkSize::Small, 1).unwrap();
    let bb = study.backbone().unwrap();
    let a = study.refined(&bb).unwrap().roots[0].point.amplitude;
    let run = |tol: f64| {
        let cfg = StabilityLimitConfig { tol, ..Default::default() };
        find_stability_limit(&study.model, &study.contacts, &study.set, &bb, (0.7 * a, 1.4 * a), &cfg).unwrap()
    };
    let (wide, narrow) = (run(0.01), run(0.001));
    let width = |l: &lco_core::oracle::StabilityLimit| (l.bracket.1 - l.bracket.0) / l.bracket.0;
    // bisection halves the bracket, so ten times the tolerance costs 3 or 4 halvings
    let ratio = width(&wide) / width(&narrow);
    assert!((8.0..=16.0 + 1e-9).contains(&ratio), "{ratio}");
    assert!(narrow.amplitude >= wide.bracket.0 && narrow.amplitude <= wide.bracket.1);
}
