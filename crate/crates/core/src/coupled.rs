//! Serial fluid-structure coupling in the frequency domain.
//!
//! Each outer iteration first lets the flow provider converge on the frozen
//! structural motion, then solves the structural balance with a linearized
//! version of the returned force, then relaxes the displacement update.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aero::{self, AeroSet, SurrogateFluidState};
use crate::contact::{self, AftConfig};
use crate::energy::mac;
use crate::epmc::{backbone_query, modal_energy, Backbone};
use crate::error::{Error, Result};
use crate::harmonic::{flat_index, hdot, HarmonicSet};
use crate::harmonic_balance::{
    embed_fundamental_block, solve_structural, AeroForce, NewtonConfig, PhaseAnchor,
};
use crate::linalg;
use crate::model::{self, ContactElement, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linearization {
    /// Influence matrix re-evaluated at the current frequency.
    FreqDependent,
    /// Influence matrix frozen at one frequency.
    FreqIndependent,
    /// Returned force scaled by the dominant coordinate.
    DominatingMode,
}

impl std::str::FromStr for Linearization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq-dependent" | "freq-dependent-g" | "a" => Ok(Self::FreqDependent),
            "freq-independent" | "freq-independent-g" | "b" => Ok(Self::FreqIndependent),
            "dominating-mode" | "c" => Ok(Self::DominatingMode),
            other => Err(Error::InvalidConfig(format!("unknown linearization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledConfig {
    pub eps_s: f64,
    pub eps_a: f64,
    pub eps_omega: f64,
    pub eps_u: f64,
    pub max_outer: usize,
    pub linearization: Linearization,
    /// Relaxation factor on the displacement update.
    pub relax: f64,
    pub anchor: PhaseAnchor,
    /// Frequency at which the frozen influence matrix is taken; defaults to
    /// the initial frequency.
    pub frozen_omega: Option<f64>,
    pub newton_max_iter: usize,
}

impl CoupledConfig {
    pub fn new(anchor: PhaseAnchor, linearization: Linearization) -> Self {
        Self {
            eps_s: 1e-13,
            eps_a: 1e-10,
            eps_omega: 1e-9,
            eps_u: 1e-8,
            max_outer: 50,
            linearization,
            relax: 1.0,
            anchor,
            frozen_omega: None,
            newton_max_iter: 40,
        }
    }

    pub fn check(&self) -> Result<()> {
        let tols = [self.eps_s, self.eps_a, self.eps_omega, self.eps_u];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidConfig("all coupling tolerances must be positive".into()));
        }
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(Error::InvalidConfig("relaxation factor must lie in (0, 1]".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("outer iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// External flow solver contract.
pub trait AeroProvider {
    /// Converges the flow on the frozen motion; returns the force on the
    /// structural order and the inner residual history.
    fn solve(&mut self, u: &HarmonicSet, omega: f64, eps_a: f64) -> Result<(HarmonicSet, Vec<f64>)>;

    fn influence(&self) -> &AeroSet;

    /// Harmonic order resolved by the flow.
    fn order(&self) -> usize;
}

/// The iterative surrogate with warm restarts.
pub struct SurrogateProvider {
    set: AeroSet,
    state: Option<SurrogateFluidState>,
}

impl SurrogateProvider {
    pub fn new(set: AeroSet, dim: usize, order: usize, rho: f64, kappa: f64) -> Result<Self> {
        set.validate(dim)?;
        Ok(Self {
            set,
            state: Some(SurrogateFluidState::new(dim, order, rho, kappa)?),
        })
    }

    pub fn state(&self) -> &SurrogateFluidState {
        self.state.as_ref().expect("state is always restored")
    }
}

impl AeroProvider for SurrogateProvider {
    fn solve(&mut self, u: &HarmonicSet, omega: f64, eps_a: f64) -> Result<(HarmonicSet, Vec<f64>)> {
        let st = self.state.take().expect("state is always restored");
        let backup = st.clone();
        match aero::surrogate_fluid_solve(u, omega, st, &self.set, eps_a) {
            Ok((f, st)) => {
                let hist = st.history.clone();
                self.state = Some(st);
                Ok((f, hist))
            }
            Err(e) => {
                self.state = Some(backup);
                Err(e)
            }
        }
    }

    fn influence(&self) -> &AeroSet {
        &self.set
    }

    fn order(&self) -> usize {
        self.state().order()
    }
}

/// Aerodynamic force functional consistent with the provider output at the
/// expansion point.
pub struct LinearizedAero<'a> {
    pub variant: Linearization,
    pub force: HarmonicSet,
    pub u_prev: HarmonicSet,
    pub omega_prev: f64,
    pub set: &'a AeroSet,
    pub dominant: usize,
    pub frozen_omega: f64,
}

impl<'a> LinearizedAero<'a> {
    pub fn new(
        variant: Linearization,
        force: HarmonicSet,
        u_prev: HarmonicSet,
        omega_prev: f64,
        set: &'a AeroSet,
        dominant: usize,
        frozen_omega: f64,
    ) -> Result<Self> {
        force.same_shape(&u_prev)?;
        if variant == Linearization::DominatingMode && u_prev.fundamental()[dominant].norm() == 0.0 {
            return Err(Error::InvalidConfig(
                "dominating-mode linearization needs a nonzero dominant coefficient".into(),
            ));
        }
        Ok(Self {
            variant,
            force,
            u_prev,
            omega_prev,
            set,
            dominant,
            frozen_omega,
        })
    }
}

impl AeroForce for LinearizedAero<'_> {
    fn eval(&self, u: &HarmonicSet, omega: f64) -> Result<HarmonicSet> {
        let mut f = self.force.clone();
        let fm = self.force.fundamental();
        let u1 = u.fundamental();
        let p1 = self.u_prev.fundamental();
        let f1 = match self.variant {
            Linearization::FreqDependent => {
                fm + self.set.g_at(omega, true) * u1 - self.set.g_at(self.omega_prev, true) * p1
            }
            Linearization::FreqIndependent => {
                let g = self.set.g_at(self.frozen_omega, true);
                fm + &g * u1 - &g * p1
            }
            Linearization::DominatingMode => {
                let r = u1[self.dominant] / p1[self.dominant];
                fm * r
            }
        };
        *f.fundamental_mut() = f1;
        Ok(f)
    }

    fn jacobian(&self, u: &HarmonicSet, omega: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = u.flat_len();
        let dim = u.dim();
        let mut j = DMatrix::zeros(n, n);
        let mut dw = DVector::zeros(n);
        match self.variant {
            Linearization::FreqDependent => {
                embed_fundamental_block(&mut j, &linalg::realify(&self.set.g_at(omega, true)), dim);
                let d = self.set.dg_domega(true) * u.fundamental();
                for i in 0..dim {
                    dw[flat_index(1, false, i, dim)] = d[i].re;
                    dw[flat_index(1, true, i, dim)] = d[i].im;
                }
            }
            Linearization::FreqIndependent => {
                embed_fundamental_block(&mut j, &linalg::realify(&self.set.g_at(self.frozen_omega, true)), dim);
            }
            Linearization::DominatingMode => {
                let c = self.u_prev.fundamental()[self.dominant];
                let col_re = flat_index(1, false, self.dominant, dim);
                let col_im = flat_index(1, true, self.dominant, dim);
                for i in 0..dim {
                    let g = self.force.fundamental()[i] / c;
                    let gi = g * Complex64::i();
                    j[(flat_index(1, false, i, dim), col_re)] = g.re;
                    j[(flat_index(1, true, i, dim), col_re)] = g.im;
                    j[(flat_index(1, false, i, dim), col_im)] = gi.re;
                    j[(flat_index(1, true, i, dim), col_im)] = gi.im;
                }
            }
        }
        Ok((j, dw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub fluid_residuals: Vec<f64>,
    pub structural_residual: f64,
    pub structural_iterations: usize,
    pub omega: f64,
    pub dominant_amplitude: f64,
    pub delta_omega: f64,
    pub delta_u: f64,
    pub payload: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub entries: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcoSolution {
    pub omega: f64,
    pub u: HarmonicSet,
    /// `sqrt(u_1^H M u_1)`.
    pub modal_amplitude: f64,
    pub sensor_amplitude: f64,
    pub damping_structure: f64,
    pub damping_aero: f64,
    pub work_structure: f64,
    pub work_aero: f64,
    pub mac_stick: f64,
    pub mac_nonlinear: Option<f64>,
    pub iterations: usize,
}

impl LcoSolution {
    /// Relative mismatch of dissipated and supplied work.
    pub fn energy_balance_defect(&self) -> f64 {
        let scale = self.work_structure.abs().max(self.work_aero.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.work_structure - self.work_aero).abs() / scale
        }
    }
}

/// Exchanged real numbers per coupling step.
pub fn payload_size(h_structure: usize, h_fluid: usize, dim: usize) -> usize {
    (2 * h_structure.min(h_fluid) + 1) * dim + 1
}

/// Serial coupling loop. Failures carry the iteration trace gathered so far
/// through the log only; the error names the reason.
pub fn coupled_solve(
    model: &ReducedModel,
    contacts: &[ContactElement],
    provider: &mut dyn AeroProvider,
    init: (&HarmonicSet, f64),
    cfg: &CoupledConfig,
    aft: &AftConfig,
) -> Result<(LcoSolution, CouplingTrace)> {
    cfg.check()?;
    let (u0, omega0) = init;
    let mut u_prev = cfg.anchor.apply(u0)?;
    let mut omega_prev = omega0;
    let frozen = cfg.frozen_omega.unwrap_or(omega0);
    let newton = NewtonConfig {
        tol: cfg.eps_s,
        max_iter: cfg.newton_max_iter,
        ..NewtonConfig::default()
    };
    let payload = payload_size(u0.order(), provider.order(), u0.dim());
    let mut trace = CouplingTrace::default();
    let mut last = (f64::NAN, f64::NAN);
    for m in 1..=cfg.max_outer {
        let (force, fluid_residuals) = provider.solve(&u_prev, omega_prev, cfg.eps_a)?;
        let lin = LinearizedAero::new(
            cfg.linearization,
            force,
            u_prev.clone(),
            omega_prev,
            provider.influence(),
            cfg.anchor.coord,
            frozen,
        )?;
        let sol = solve_structural(&u_prev, omega_prev, &lin, cfg.anchor, model, contacts, aft, &newton)
            .map_err(|e| Error::Structural {
                iteration: m,
                source: Box::new(e),
            })?;
        let u_new = sol.u.blend(&u_prev, cfg.relax)?;
        let omega_new = sol.omega;
        let dominant = u_new.fundamental()[cfg.anchor.coord].norm();
        let delta_omega = (omega_new - omega_prev).abs() / omega_prev.abs();
        let delta_u = (u_new.to_flat() - u_prev.to_flat()).norm() / dominant;
        trace.entries.push(TraceEntry {
            iteration: m,
            fluid_residuals,
            structural_residual: sol.residual,
            structural_iterations: sol.iterations,
            omega: omega_new,
            dominant_amplitude: dominant,
            delta_omega,
            delta_u,
            payload,
        });
        log::debug!("outer iteration {m}: w = {omega_new:.9e}, dw = {delta_omega:.2e}, du = {delta_u:.2e}");
        u_prev = u_new;
        omega_prev = omega_new;
        last = (delta_omega, delta_u);
        if delta_omega < cfg.eps_omega && delta_u < cfg.eps_u {
            let sol = finalize(model, contacts, provider, &u_prev, omega_prev, cfg, aft, m)?;
            return Ok((sol, trace));
        }
    }
    Err(Error::OuterIterationCap {
        iterations: cfg.max_outer,
        delta_omega: last.0,
        delta_u: last.1,
    })
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    model: &ReducedModel,
    contacts: &[ContactElement],
    provider: &mut dyn AeroProvider,
    u: &HarmonicSet,
    omega: f64,
    cfg: &CoupledConfig,
    aft: &AftConfig,
    iterations: usize,
) -> Result<LcoSolution> {
    let (fa, _) = provider.solve(u, omega, cfg.eps_a)?;
    let fc = contact::evaluate(u, contacts, aft, false)?.force;
    let work_structure = contact::harmonic_work(u, &fc);
    let work_aero = contact::harmonic_work(u, &fa);
    let energy = modal_energy(u, omega, model);
    let stick = model::linear_eigen(model, contacts, model::ModeKind::Stick)?;
    let u1 = u.fundamental();
    let best_stick = stick
        .iter()
        .filter_map(|m| mac(u1, &m.shape).ok())
        .fold(0.0, f64::max);
    let modal_amplitude = hdot(u1, &(model.mass().map(Complex64::from) * u1)).re.sqrt();
    Ok(LcoSolution {
        omega,
        u: u.clone(),
        modal_amplitude,
        sensor_amplitude: model::recover_sensor_amplitude(u, model)?,
        damping_structure: aero::damping_ratio(work_structure, energy)?,
        damping_aero: aero::aero_damping(work_aero, energy)?,
        work_structure,
        work_aero,
        mac_stick: best_stick,
        mac_nonlinear: None,
        iterations,
    })
}

/// Starting point from a known periodic motion: the anchor value is a
/// fraction of the dominant fundamental amplitude.
pub fn initialize_from_solution(
    u: &HarmonicSet,
    omega: f64,
    dominant: usize,
    fraction: f64,
    order: usize,
) -> Result<(HarmonicSet, f64, PhaseAnchor)> {
    if u.order() < order {
        return Err(Error::InvalidConfig(format!(
            "initial motion has {} harmonics, {} requested",
            u.order(),
            order
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig("anchor fraction must lie in (0, 1]".into()));
    }
    let u = u.with_order(order);
    let mag = u.fundamental()[dominant].norm();
    let anchor = PhaseAnchor::new(dominant, fraction * mag)?;
    Ok((anchor.apply(&u)?, omega, anchor))
}

/// `u_0 = psi_nl(a) a`, `w_0 = w_nl(a)` from the backbone at the limit-cycle
/// amplitude, phase-rotated onto the anchor.
pub fn initialize_from_backbone(
    backbone: &Backbone,
    amplitude: f64,
    model: &ReducedModel,
    fraction: f64,
    order: usize,
) -> Result<(HarmonicSet, f64, PhaseAnchor)> {
    let p = backbone_query(backbone, amplitude, model)?;
    initialize_from_solution(&p.solution, p.omega, model.dominant_coord(), fraction, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> AeroSet {
        AeroSet {
            nodal_diameter: 1,
            omega_stick: 2.0,
            omega_slip: 1.5,
            g_stick: DMatrix::from_row_slice(2, 2, &[
                Complex64::new(0.1, 0.2),
                Complex64::new(0.0, 0.05),
                Complex64::new(0.0, 0.05),
                Complex64::new(-0.1, 0.1),
            ]),
            g_slip: DMatrix::from_row_slice(2, 2, &[
                Complex64::new(0.05, -0.1),
                Complex64::new(0.0, 0.02),
                Complex64::new(0.01, 0.0),
                Complex64::new(0.0, -0.2),
            ]),
        }
    }

    fn motion(a: f64) -> HarmonicSet {
        let mut u = HarmonicSet::zeros(2, 2);
        *u.fundamental_mut() = DVector::from_vec(vec![Complex64::new(a, 0.3), Complex64::new(-0.2, 0.4)]);
        *u.harmonic_mut(2) = DVector::from_vec(vec![Complex64::new(0.01, 0.0), Complex64::new(0.0, 0.02)]);
        u
    }

    #[test]
    fn linearizations_are_consistent_at_expansion_point() {
        let s = set();
        let u = motion(1.0);
        let mut f = HarmonicSet::zeros(2, 2);
        *f.fundamental_mut() = DVector::from_vec(vec![Complex64::new(0.3, -0.1), Complex64::new(0.2, 0.5)]);
        *f.harmonic_mut(2) = DVector::from_vec(vec![Complex64::new(0.01, 0.02), Complex64::new(0.0, 0.0)]);
        for v in [Linearization::FreqDependent, Linearization::FreqIndependent, Linearization::DominatingMode] {
            let lin = LinearizedAero::new(v, f.clone(), u.clone(), 1.8, &s, 0, 1.9).unwrap();
            assert_eq!(lin.eval(&u, 1.8).unwrap(), f);
        }
    }

    #[test]
    fn dominating_mode_is_homogeneous() {
        let s = set();
        let u = motion(1.0);
        let mut f = HarmonicSet::zeros(2, 2);
        *f.fundamental_mut() = DVector::from_vec(vec![Complex64::new(0.3, -0.1), Complex64::new(0.2, 0.5)]);
        let lin = LinearizedAero::new(Linearization::DominatingMode, f.clone(), u.clone(), 1.8, &s, 0, 1.8).unwrap();
        let twice = lin.eval(&u.scaled(2.0), 1.7).unwrap();
        let expect = f.fundamental() * Complex64::from(2.0);
        assert!((twice.fundamental() - expect).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn linearization_jacobians_match_finite_differences() {
        let s = set();
        let u = motion(1.0);
        let mut f = HarmonicSet::zeros(2, 2);
        *f.fundamental_mut() = DVector::from_vec(vec![Complex64::new(0.3, -0.1), Complex64::new(0.2, 0.5)]);
        for v in [Linearization::FreqDependent, Linearization::FreqIndependent, Linearization::DominatingMode] {
            let lin = LinearizedAero::new(v, f.clone(), u.clone(), 1.8, &s, 0, 1.9).unwrap();
            let x = motion(1.2);
            let (j, dw) = lin.jacobian(&x, 1.7).unwrap();
            let flat = x.to_flat();
            let h = 1e-6;
            for c in 0..flat.len() {
                let mut p = flat.clone();
                let mut q = flat.clone();
                p[c] += h;
                q[c] -= h;
                let fp = lin.eval(&HarmonicSet::from_flat(2, 2, &p).unwrap(), 1.7).unwrap().to_flat();
                let fq = lin.eval(&HarmonicSet::from_flat(2, 2, &q).unwrap(), 1.7).unwrap().to_flat();
                let fd = (fp - fq) / (2.0 * h);
                assert!((fd - j.column(c)).amax() < 1e-8);
            }
            let fp = lin.eval(&x, 1.7 + h).unwrap().to_flat();
            let fq = lin.eval(&x, 1.7 - h).unwrap().to_flat();
            assert!(((fp - fq) / (2.0 * h) - dw).amax() < 1e-8);
        }
    }

    #[test]
    fn payload_for_medium_model() {
        assert_eq!(payload_size(1, 2, 21), 64);
        assert_eq!(payload_size(3, 2, 6), 31);
    }
}
