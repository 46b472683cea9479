//! Cross-checks of the solvers against closed forms, finite differences and
//! the time-domain oracle, on the synthetic benchmark.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use std::time::Instant;

use crate::aero::{self, AeroSet};
use crate::benchmark::{generate_benchmark, BenchmarkConfig, BenchmarkSize};
use crate::io::{Case, CouplingSettings, GridSettings, OracleSettings};
use crate::contact::{self, AftConfig};
use crate::coupled::{
    coupled_solve, initialize_from_solution, CoupledConfig, CouplingTrace, LcoSolution, Linearization,
    SurrogateProvider,
};
use crate::energy::{
    conventional_energy_lco, log_grid, refined_energy_lco, EnergyOutcome, EnergyResult, LcoRoot, RefinedOptions,
    StabilityClass,
};
use crate::epmc::{continue_backbone, Backbone, ContinuationConfig, EpmcSolver};
use crate::error::{Error, Result};
use crate::harmonic::{complex_norm, HarmonicSet};
use crate::model::{self, ContactElement, ModeKind, ReducedModel};
use crate::oracle::{extract_lco, find_stability_limit, time_integrate, InitialState, IntegratorConfig, StabilityLimitConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let time = if self.limit_seconds.is_finite() {
            format!("{:.2} s of {:.0} s", self.seconds, self.limit_seconds)
        } else {
            format!("{:.2} s", self.seconds)
        };
        format!(
            "{} [{:>2}] {} ({time}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn timed(
    id: usize,
    name: &'static str,
    limit_seconds: f64,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CheckResult {
    let t0 = Instant::now();
    let out = body();
    let seconds = t0.elapsed().as_secs_f64();
    let (ok, detail) = match out {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        id,
        name,
        passed: ok && seconds < limit_seconds,
        detail,
        seconds,
        limit_seconds,
    }
}

/// One analysis setup: structure, contacts, the influence matrices of one
/// nodal diameter and solver settings.
#[derive(Debug, Clone)]
pub struct Study {
    pub model: ReducedModel,
    pub contacts: Vec<ContactElement>,
    pub set: AeroSet,
    pub mode_index: usize,
    pub order: usize,
    pub aft: AftConfig,
    pub continuation: ContinuationConfig,
    pub grid: GridSettings,
    pub coupling: CouplingSettings,
}

/// Coupled-run variant; the nonlinearity is given relative to `|u_1|^2`
/// of the starting motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRun {
    pub linearization: Linearization,
    pub relax: f64,
    pub kappa_relative: f64,
}

impl CouplingRun {
    pub fn linear(linearization: Linearization) -> Self {
        Self {
            linearization,
            relax: 1.0,
            kappa_relative: 0.0,
        }
    }
}

/// Backbone end amplitude used for a benchmark configuration.
pub fn benchmark_a_max(config: BenchmarkConfig) -> f64 {
    match config {
        BenchmarkConfig::One => 1e-3,
        BenchmarkConfig::Two => 1e-2,
    }
}

impl Study {
    pub fn from_benchmark(config: BenchmarkConfig, size: BenchmarkSize, order: usize) -> Result<Self> {
        let b = generate_benchmark(config, size)?;
        let set = b.aero.get(b.target_nd)?.clone();
        let a_max = benchmark_a_max(config);
        Ok(Self {
            model: b.model,
            contacts: b.contacts,
            set,
            mode_index: b.mode_index,
            order,
            aft: AftConfig::default(),
            continuation: ContinuationConfig {
                a_min: 1e-6,
                a_max,
                order,
                ..Default::default()
            },
            grid: GridSettings {
                a_min: 1e-6,
                a_max,
                points: 60,
            },
            coupling: CouplingSettings::default(),
        })
    }

    pub fn from_case(case: &Case) -> Result<Self> {
        let a = &case.analysis;
        let set = case.aero.get(a.nodal_diameter)?.clone();
        a.aft.check(a.harmonics)?;
        let continuation = ContinuationConfig {
            a_min: a.backbone.a_min,
            a_max: a.backbone.a_max,
            order: a.harmonics,
            h0: a.backbone.h0,
            h_max: a.backbone.h_max,
            ..Default::default()
        };
        continuation.check()?;
        Ok(Self {
            model: case.model.clone(),
            contacts: case.contacts.clone(),
            set,
            mode_index: a.mode_index,
            order: a.harmonics,
            aft: a.aft,
            continuation,
            grid: a.grid,
            coupling: a.coupling,
        })
    }

    pub fn backbone(&self) -> Result<Backbone> {
        continue_backbone(&self.model, &self.contacts, self.mode_index, self.aft, &self.continuation)
    }

    pub fn stick_mode(&self) -> Result<model::LinearMode> {
        let modes = model::linear_eigen(&self.model, &self.contacts, ModeKind::Stick)?;
        modes
            .get(self.mode_index)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("mode index {} beyond {} modes", self.mode_index, modes.len())))
    }

    pub fn refined(&self, backbone: &Backbone) -> Result<EnergyResult> {
        let solver = EpmcSolver::new(&self.model, &self.contacts, self.aft, self.mode_index, self.order)?;
        refined_energy_lco(
            backbone,
            &self.model,
            &self.set,
            &self.stick_mode()?,
            &RefinedOptions::standard(),
            Some(&solver),
        )
    }

    pub fn conventional(&self) -> Result<EnergyResult> {
        let grid = log_grid(self.grid.a_min, self.grid.a_max, self.grid.points)?;
        conventional_energy_lco(&self.model, &self.contacts, &self.stick_mode()?, &self.set, &grid, &self.aft)
    }

    /// Coupled solve from a refined root with explicit settings and an
    /// absolute nonlinearity coefficient.
    pub fn coupled_with(&self, root: &LcoRoot, s: &CouplingSettings) -> Result<(LcoSolution, CouplingTrace)> {
        let m = &self.model;
        let (u0, w0, anchor) =
            initialize_from_solution(&root.solution, root.point.omega, m.dominant_coord(), s.anchor_fraction, self.order)?;
        let mut provider = SurrogateProvider::new(self.set.clone(), m.dim(), s.fluid_harmonics, s.rho, s.kappa)?;
        let mut cfg = CoupledConfig::new(anchor, s.linearization);
        cfg.relax = s.relax;
        cfg.max_outer = s.max_outer;
        cfg.eps_s = s.eps_s;
        cfg.eps_a = s.eps_a;
        cfg.eps_omega = s.eps_omega;
        cfg.eps_u = s.eps_u;
        coupled_solve(m, &self.contacts, &mut provider, (&u0, w0), &cfg, &self.aft)
    }

    /// Coupled solve with the study's settings overridden by `run`; also
    /// returns the absolute nonlinearity coefficient.
    pub fn coupled(&self, root: &LcoRoot, run: CouplingRun) -> Result<(LcoSolution, CouplingTrace, f64)> {
        let (u0, _, _) = initialize_from_solution(
            &root.solution,
            root.point.omega,
            self.model.dominant_coord(),
            self.coupling.anchor_fraction,
            self.order,
        )?;
        let n1 = complex_norm(u0.fundamental());
        let s = CouplingSettings {
            linearization: run.linearization,
            relax: run.relax,
            kappa: run.kappa_relative / (n1 * n1),
            ..self.coupling
        };
        let (sol, trace) = self.coupled_with(root, &s)?;
        Ok((sol, trace, s.kappa))
    }
}

/// `|dW_s - dW_a| / max` from a fresh AFT evaluation and the closed-form
/// surrogate force; independent of the solver's own bookkeeping.
pub fn independent_balance(
    u: &HarmonicSet,
    omega: f64,
    contacts: &[ContactElement],
    set: &AeroSet,
    kappa: f64,
    aft: &AftConfig,
) -> Result<f64> {
    let fc = contact::evaluate(u, contacts, aft, false)?.force;
    let dws = contact::harmonic_work(u, &fc);
    let u1 = u.fundamental();
    let f1 = aero::influence_force(u1, omega, set, true) * Complex64::from(1.0 + kappa * complex_norm(u1).powi(2));
    let dwa = aero::aero_work(u1, omega, &f1);
    Ok(crate::io::energy_balance_defect(dws, dwa))
}

/// Worst relative defect of `2 pi E D = dW_s` over the backbone points.
pub fn backbone_identity_defect(bb: &Backbone, study: &Study) -> Result<f64> {
    let mut worst = 0.0_f64;
    for p in &bb.points {
        let fc = contact::evaluate(&p.solution, &study.contacts, &study.aft, false)?.force;
        let dws = contact::harmonic_work(&p.solution, &fc);
        let lhs = 2.0 * PI * p.energy * p.damping;
        // both sides vanish while sticking; floor the scale at a damping
        // ratio of 1e-10
        let scale = dws.abs().max(lhs.abs()).max(2.0 * PI * p.energy * 1e-10);
        worst = worst.max((lhs - dws).abs() / scale);
    }
    Ok(worst)
}

fn root_balance(root: &LcoRoot, study: &Study) -> Result<f64> {
    independent_balance(&root.solution, root.point.omega, &study.contacts, &study.set, 0.0, &study.aft)
}

pub fn jenkins_closed_form() -> CheckResult {
    timed(1, "Jenkins closed-form dissipation", 1.0, || {
        let model = ReducedModel::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1))?;
        let el = ContactElement::uniaxial(0, 1.0, 0.5);
        let u = HarmonicSet::from_fundamental(1, DVector::from_element(1, Complex64::new(1.0, 0.0)));
        let w = contact::contact_dissipated_work(&u, 1.0, &model, &[el], &AftConfig::default())?;
        let expect = 4.0 * 0.5 * (1.0 - 0.5 / 1.0);
        let rel = (w - expect).abs() / expect;
        Ok((rel <= 1e-6, format!("work {w:.12} vs {expect}, relative error {rel:.2e}")))
    })
}

/// Largest absolute deviation of the analytic contact Jacobian from central
/// differences over `states` random slipping states. Harmonic `k` is drawn
/// uniformly in `[-range, range] / (1 + k)`.
pub fn jacobian_deviation(
    model: &ReducedModel,
    contacts: &[ContactElement],
    order: usize,
    aft: &AftConfig,
    range: f64,
    states: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let dim = model.dim();
    let n = HarmonicSet::zeros(order, dim).flat_len();
    let mut worst = 0.0_f64;
    let mut found = 0;
    let mut drawn = 0;
    while found < states {
        drawn += 1;
        if drawn > 100 * states.max(100) {
            return Err(Error::Consistency("could not draw slipping states".into()));
        }
        let x = DVector::from_fn(n, |i, _| {
            let k = if i < dim { 0 } else { (i - dim) / (2 * dim) + 1 };
            rng.random_range(-range..range) / (1 + k) as f64
        });
        let u = HarmonicSet::from_flat(order, dim, &x)?;
        let r = contact::evaluate(&u, contacts, aft, true)?;
        if !r.any_slip {
            continue;
        }
        found += 1;
        let j = r.jacobian.expect("requested");
        let h = 1e-7 * range.max(f64::MIN_POSITIVE) / 1.5;
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let fp = contact::contact_force_fourier(&HarmonicSet::from_flat(order, dim, &xp)?, model, contacts, aft)?;
            let fm = contact::contact_force_fourier(&HarmonicSet::from_flat(order, dim, &xm)?, model, contacts, aft)?;
            let fd = (fp.to_flat() - fm.to_flat()) / (2.0 * h);
            worst = worst.max((fd - j.column(c)).amax());
        }
    }
    Ok(worst)
}

pub fn jacobian_finite_differences(seed: u64) -> CheckResult {
    timed(2, "contact Jacobian vs central differences", 10.0, || {
        let dim = 4;
        let model = ReducedModel::new(DMatrix::identity(dim, dim), DMatrix::identity(dim, dim))?;
        let contacts = [
            ContactElement::planar(0, 1, 2.0, 0.6),
            ContactElement::uniaxial(2, 1.5, 0.4),
            ContactElement::planar(3, 1, 1.0, 0.3),
        ];
        let worst = jacobian_deviation(&model, &contacts, 3, &AftConfig::default(), 1.5, 100, seed)?;
        Ok((worst <= 1e-5, format!("100 slipping states, max abs deviation {worst:.2e}")))
    })
}

pub fn epmc_energy_consistency() -> CheckResult {
    timed(3, "EPMC energy identity and backbone endpoints", 60.0, || {
        let study = Study::from_benchmark(BenchmarkConfig::Two, BenchmarkSize::Small, 1)?;
        let bb = study.backbone()?;
        let worst = backbone_identity_defect(&bb, &study)?;
        let first = bb.points.first().ok_or_else(|| Error::Consistency("empty backbone".into()))?;
        let last = bb.points.last().expect("nonempty");
        let e_stick = (first.omega / bb.omega_stick - 1.0).abs();
        let e_slip = (last.omega / bb.omega_slip - 1.0).abs();
        let ok = worst <= 1e-6 && e_stick <= 5e-3 && e_slip <= 5e-3 && !bb.partial;
        Ok((
            ok,
            format!(
                "{} points, worst identity defect {worst:.2e}, stick end {e_stick:.2e}, slip end {e_slip:.2e}",
                bb.points.len()
            ),
        ))
    })
}

pub fn hb_vs_oracle() -> CheckResult {
    timed(4, "coupled HB vs time-domain oracle (config 1, H=3)", 300.0, || {
        let study = Study::from_benchmark(BenchmarkConfig::One, BenchmarkSize::Small, 3)?;
        let bb = study.backbone()?;
        let refined = study.refined(&bb)?;
        let root = refined
            .roots
            .first()
            .ok_or_else(|| Error::Consistency("no refined limit cycle on config 1".into()))?;
        let (s, _, _) = study.coupled(root, CouplingRun::linear(Linearization::DominatingMode))?;
        let set = &study.set;
        let init = InitialState::from_harmonics(&s.u.scaled(1.05), s.omega, &study.contacts, &study.aft)?;
        let cfg = IntegratorConfig::new(s.omega, 1500);
        let hist = time_integrate(&study.model, &study.contacts, Some(set), &init, None, &cfg)?;
        let lco = extract_lco(&hist, 20, 0.01)?;
        let dw = (lco.omega / s.omega - 1.0).abs();
        let da = (lco.sensor_amplitude / s.sensor_amplitude - 1.0).abs();
        Ok((
            dw <= 0.01 && da <= 0.02,
            format!(
                "HB {:.4} rad/s, {:.4e} m; oracle {:.4} rad/s, {:.4e} m; deviations {dw:.2e}, {da:.2e}",
                s.omega, s.sensor_amplitude, lco.omega, lco.sensor_amplitude
            ),
        ))
    })
}

pub fn coupled_vs_refined() -> CheckResult {
    timed(5, "coupled vs refined energy method (kappa = 0)", 120.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        for config in [BenchmarkConfig::One, BenchmarkConfig::Two] {
            let study = Study::from_benchmark(config, BenchmarkSize::Small, 1)?;
            let bb = study.backbone()?;
            let refined = study.refined(&bb)?;
            let root = refined
                .roots
                .first()
                .ok_or_else(|| Error::Consistency("no refined limit cycle".into()))?;
            let (s, trace, _) = study.coupled(root, CouplingRun::linear(Linearization::DominatingMode))?;
            let dw = (s.omega / root.point.omega - 1.0).abs();
            let da = (s.modal_amplitude / root.point.amplitude - 1.0).abs();
            let it = trace.entries.len();
            ok &= dw <= 1e-3 && da <= 1e-2 && it <= 10;
            detail.push(format!("config {config:?}: dw {dw:.2e}, da {da:.2e}, {it} outer iterations"));
        }
        Ok((ok, detail.join("; ")))
    })
}

pub fn nonlinear_instability() -> CheckResult {
    timed(6, "nonlinear instability detection (config 2)", 600.0, || {
        let study = Study::from_benchmark(BenchmarkConfig::Two, BenchmarkSize::Small, 1)?;
        let conv = study.conventional()?;
        let bb = study.backbone()?;
        let refined = study.refined(&bb)?;
        let unstable: Vec<&LcoRoot> = refined.roots.iter().filter(|r| r.class == StabilityClass::Unstable).collect();
        let Some(root) = unstable.first() else {
            return Ok((false, "refined method found no unstable limit cycle".into()));
        };
        let a = root.point.amplitude;
        let (s, _, _) = study.coupled(root, CouplingRun::linear(Linearization::DominatingMode))?;
        let coupled_match = (s.modal_amplitude / a - 1.0).abs() <= 1e-2;
        let limit = find_stability_limit(
            &study.model,
            &study.contacts,
            &study.set,
            &bb,
            (0.7 * a, 1.4 * a),
            &StabilityLimitConfig::default(),
        )?;
        let dev = (limit.amplitude / a - 1.0).abs();
        let conv_ok = conv.outcome == EnergyOutcome::StableForAllAmplitudes;
        Ok((
            conv_ok && coupled_match && dev <= 0.05,
            format!(
                "conventional {:?}; refined unstable LCO at {a:.4e}; coupled LCO at {:.4e}; oracle limit {:.4e} (deviation {dev:.2e})",
                conv.outcome, s.modal_amplitude, limit.amplitude
            ),
        ))
    })
}

pub fn linearization_neutrality() -> CheckResult {
    timed(7, "linearization neutrality", 180.0, || {
        let mut ok = true;
        let mut detail = Vec::new();
        for config in [BenchmarkConfig::One, BenchmarkConfig::Two] {
            let study = Study::from_benchmark(config, BenchmarkSize::Small, 1)?;
            let bb = study.backbone()?;
            let refined = study.refined(&bb)?;
            let root = refined.roots.first().ok_or_else(|| Error::Consistency("no refined limit cycle".into()))?;
            let runs = [Linearization::FreqDependent, Linearization::FreqIndependent, Linearization::DominatingMode]
                .map(|l| study.coupled(root, CouplingRun::linear(l)));
            let sols: Vec<LcoSolution> = runs.into_iter().map(|r| r.map(|x| x.0)).collect::<Result<_>>()?;
            let cfg = CoupledConfig::new(crate::harmonic_balance::PhaseAnchor::new(0, 1.0)?, Linearization::DominatingMode);
            let reference = &sols[0];
            let dom = reference.u.fundamental()[study.model.dominant_coord()].norm();
            let mut worst_w = 0.0_f64;
            let mut worst_u = 0.0_f64;
            for s in &sols[1..] {
                worst_w = worst_w.max((s.omega / reference.omega - 1.0).abs());
                worst_u = worst_u.max((s.u.to_flat() - reference.u.to_flat()).norm() / dom);
            }
            ok &= worst_w <= 10.0 * cfg.eps_omega && worst_u <= 10.0 * cfg.eps_u;
            detail.push(format!("config {config:?}: dw {worst_w:.2e}, du {worst_u:.2e}"));
        }
        Ok((ok, detail.join("; ")))
    })
}

/// Amplitude nonlinearity at which the unrelaxed frequency-dependent
/// iteration overshoots on the config-2 limit cycle.
pub const RELAXATION_KAPPA: f64 = 0.6;

pub fn relaxation_regression() -> CheckResult {
    timed(8, "relaxation regression (config 2, freq-dependent G)", 180.0, || {
        let study = Study::from_benchmark(BenchmarkConfig::Two, BenchmarkSize::Small, 1)?;
        let bb = study.backbone()?;
        let refined = study.refined(&bb)?;
        let root = refined.roots.first().ok_or_else(|| Error::Consistency("no refined limit cycle".into()))?;
        let run = |relax| {
            study.coupled(
                root,
                CouplingRun {
                    linearization: Linearization::FreqDependent,
                    relax,
                    kappa_relative: RELAXATION_KAPPA,
                },
            )
        };
        let plain = run(1.0);
        let relaxed = run(0.3);
        let plain_capped = matches!(plain, Err(Error::OuterIterationCap { .. }));
        let plain_text = match &plain {
            Ok((s, _, _)) => format!("alpha=1 converged in {}", s.iterations),
            Err(e) => format!("alpha=1: {e}"),
        };
        let relaxed_text = match &relaxed {
            Ok((s, _, _)) => format!("alpha=0.3 converged in {}", s.iterations),
            Err(e) => format!("alpha=0.3: {e}"),
        };
        Ok((plain_capped && relaxed.is_ok(), format!("{plain_text}; {relaxed_text}")))
    })
}

pub fn energy_balance() -> CheckResult {
    timed(9, "energy balance at every reported limit cycle", 300.0, || {
        let mut worst = 0.0_f64;
        let mut count = 0;
        for (config, size) in [
            (BenchmarkConfig::One, BenchmarkSize::Small),
            (BenchmarkConfig::Two, BenchmarkSize::Small),
            (BenchmarkConfig::One, BenchmarkSize::Medium),
            (BenchmarkConfig::Two, BenchmarkSize::Medium),
        ] {
            let study = Study::from_benchmark(config, size, 1)?;
            let bb = study.backbone()?;
            let refined = study.refined(&bb)?;
            for root in &refined.roots {
                worst = worst.max(root_balance(root, &study)?);
                count += 1;
                for lin in [Linearization::FreqDependent, Linearization::FreqIndependent, Linearization::DominatingMode] {
                    let (s, _, kappa) = study.coupled(root, CouplingRun::linear(lin))?;
                    worst = worst.max(independent_balance(&s.u, s.omega, &study.contacts, &study.set, kappa, &study.aft)?);
                    count += 1;
                }
            }
            if config == BenchmarkConfig::Two && size == BenchmarkSize::Small {
                if let Some(root) = refined.roots.first() {
                    let (s, _, kappa) = study.coupled(
                        root,
                        CouplingRun {
                            linearization: Linearization::FreqDependent,
                            relax: 0.3,
                            kappa_relative: RELAXATION_KAPPA,
                        },
                    )?;
                    worst = worst.max(independent_balance(&s.u, s.omega, &study.contacts, &study.set, kappa, &study.aft)?);
                    count += 1;
                }
            }
        }
        Ok((count > 0 && worst <= 1e-6, format!("{count} limit cycles, worst relative imbalance {worst:.2e}")))
    })
}

pub fn payload_invariant() -> CheckResult {
    timed(10, "payload invariant (medium, H=1)", 120.0, || {
        let study = Study::from_benchmark(BenchmarkConfig::Two, BenchmarkSize::Medium, 1)?;
        let bb = study.backbone()?;
        let refined = study.refined(&bb)?;
        let root = refined.roots.first().ok_or_else(|| Error::Consistency("no refined limit cycle".into()))?;
        let (_, trace, _) = study.coupled(root, CouplingRun::linear(Linearization::DominatingMode))?;
        let n = study.model.dim();
        let expect = (2 + 1) * n + 1;
        let ok = !trace.entries.is_empty() && trace.entries.iter().all(|e| e.payload == expect) && expect == 64;
        let reported = trace.entries.first().map_or(0, |e| e.payload);
        Ok((ok, format!("N = {n}, reported {reported}, expected {expect}")))
    })
}

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        jenkins_closed_form(),
        jacobian_finite_differences(seed),
        epmc_energy_consistency(),
        hb_vs_oracle(),
        coupled_vs_refined(),
        nonlinear_instability(),
        linearization_neutrality(),
        relaxation_regression(),
        energy_balance(),
        payload_invariant(),
    ]
}

fn upstream(e: &Error) -> Error {
    Error::Consistency(format!("upstream step failed: {e}"))
}

/// Invariant checks on an arbitrary case, run by the command-line `verify`
/// mode. Every refined root is cross-checked against the coupled solver,
/// the three linearizations and the time-domain oracle.
pub fn verify_case(study: &Study, oracle: &OracleSettings, seed: u64) -> Vec<CheckResult> {
    let none = f64::INFINITY;
    let mut out = Vec::new();
    out.push(timed(0, "contact Jacobian vs central differences", none, || {
        if study.contacts.is_empty() {
            return Ok((true, "no contacts".into()));
        }
        // a few stick displacements wide so that most draws slip
        let range = 5.0 * study.contacts.iter().map(|c| c.f_lim / c.k_t).fold(0.0, f64::max);
        let worst = jacobian_deviation(&study.model, &study.contacts, study.order, &study.aft, range, 20, seed)?;
        // relative to the largest contact stiffness
        let scale = study.contacts.iter().map(|c| c.k_t).fold(0.0, f64::max);
        let rel = worst / scale;
        Ok((rel <= 1e-5, format!("20 slipping states, max deviation {rel:.2e} of the largest k_t")))
    }));
    let backbone = study.backbone();
    out.push(timed(1, "backbone energy identity", none, || {
        let bb = backbone.as_ref().map_err(upstream)?;
        let worst = backbone_identity_defect(bb, study)?;
        Ok((worst <= 1e-6 && !bb.partial, format!("{} points, worst defect {worst:.2e}", bb.points.len())))
    }));
    let refined = backbone.as_ref().map_err(upstream).and_then(|bb| study.refined(bb));
    out.push(timed(2, "refined energy balance", none, || {
        let r = refined.as_ref().map_err(upstream)?;
        let mut worst = 0.0_f64;
        for root in &r.roots {
            worst = worst.max(root_balance(root, study)?);
        }
        Ok((worst <= 1e-6, format!("{} roots, worst imbalance {worst:.2e}", r.roots.len())))
    }));
    let roots: Vec<LcoRoot> = refined.as_ref().map(|r| r.roots.clone()).unwrap_or_default();
    let lins = [Linearization::FreqDependent, Linearization::FreqIndependent, Linearization::DominatingMode];
    let mut runs: Vec<Vec<Result<(LcoSolution, CouplingTrace)>>> = Vec::new();
    for root in &roots {
        runs.push(
            lins.iter()
                .map(|&l| study.coupled_with(root, &CouplingSettings { linearization: l, ..study.coupling }))
                .collect(),
        );
    }
    out.push(timed(3, "coupled energy balance and payload", none, || {
        let mut worst = 0.0_f64;
        let mut count = 0;
        let width = (2 * study.order.min(study.coupling.fluid_harmonics) + 1) * study.model.dim() + 1;
        let mut payload_ok = true;
        for rs in &runs {
            for r in rs {
                let (s, trace) = r.as_ref().map_err(upstream)?;
                worst = worst.max(independent_balance(&s.u, s.omega, &study.contacts, &study.set, study.coupling.kappa, &study.aft)?);
                payload_ok &= trace.entries.iter().all(|e| e.payload == width);
                count += 1;
            }
        }
        Ok((
            worst <= 1e-6 && payload_ok,
            format!("{count} solves, worst imbalance {worst:.2e}, payload {width} per iteration"),
        ))
    }));
    out.push(timed(4, "linearization neutrality", none, || {
        let mut worst_w = 0.0_f64;
        let mut worst_u = 0.0_f64;
        for rs in &runs {
            let sols: Vec<&LcoSolution> = rs.iter().map(|r| r.as_ref().map(|x| &x.0).map_err(upstream)).collect::<Result<_>>()?;
            let reference = sols[0];
            let dom = reference.u.fundamental()[study.model.dominant_coord()].norm();
            for s in &sols[1..] {
                worst_w = worst_w.max((s.omega / reference.omega - 1.0).abs());
                worst_u = worst_u.max((s.u.to_flat() - reference.u.to_flat()).norm() / dom);
            }
        }
        let c = &study.coupling;
        Ok((
            worst_w <= 10.0 * c.eps_omega && worst_u <= 10.0 * c.eps_u,
            format!("dw {worst_w:.2e}, du {worst_u:.2e}"),
        ))
    }));
    if study.coupling.kappa == 0.0 {
        out.push(timed(5, "coupled vs refined", none, || {
            let mut worst_w = 0.0_f64;
            let mut worst_a = 0.0_f64;
            for (root, rs) in roots.iter().zip(&runs) {
                let (s, _) = rs[2].as_ref().map_err(upstream)?;
                worst_w = worst_w.max((s.omega / root.point.omega - 1.0).abs());
                worst_a = worst_a.max((s.modal_amplitude / root.point.amplitude - 1.0).abs());
            }
            Ok((worst_w <= 1e-3 && worst_a <= 1e-2, format!("dw {worst_w:.2e}, da {worst_a:.2e}")))
        }));
        out.push(timed(6, "time-domain oracle", none, || {
            let bb = backbone.as_ref().map_err(upstream)?;
            let mut ok = true;
            let mut detail = Vec::new();
            for (root, rs) in roots.iter().zip(&runs) {
                let a = root.point.amplitude;
                match root.class {
                    StabilityClass::Stable => {
                        let (s, _) = rs[2].as_ref().map_err(upstream)?;
                        let init = InitialState::from_harmonics(&s.u.scaled(1.05), s.omega, &study.contacts, &study.aft)?;
                        let mut cfg = IntegratorConfig::new(s.omega, oracle.periods);
                        cfg.steps_per_period = oracle.steps_per_period;
                        let hist = time_integrate(&study.model, &study.contacts, Some(&study.set), &init, None, &cfg)?;
                        let lco = extract_lco(&hist, oracle.window, 0.01)?;
                        let dw = (lco.omega / s.omega - 1.0).abs();
                        let da = (lco.sensor_amplitude / s.sensor_amplitude - 1.0).abs();
                        ok &= dw <= 0.01 && da <= 0.02;
                        detail.push(format!("stable LCO at {a:.4e}: dw {dw:.2e}, da {da:.2e}"));
                    }
                    StabilityClass::Unstable => {
                        let cfg = StabilityLimitConfig {
                            periods: oracle.limit_periods,
                            aft: study.aft,
                            ..Default::default()
                        };
                        let limit = find_stability_limit(&study.model, &study.contacts, &study.set, bb, (0.7 * a, 1.4 * a), &cfg)?;
                        let dev = (limit.amplitude / a - 1.0).abs();
                        ok &= dev <= 0.05;
                        detail.push(format!("unstable LCO at {a:.4e}: oracle limit {:.4e}", limit.amplitude));
                    }
                    StabilityClass::Degenerate => detail.push(format!("degenerate LCO at {a:.4e}: skipped")),
                }
            }
            if detail.is_empty() {
                detail.push("no limit cycles".into());
            }
            Ok((ok, detail.join("; ")))
        }));
    }
    out
}
