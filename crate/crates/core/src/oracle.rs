//! Reference time integration used to cross-check frequency-domain results.
//!
//! Average-acceleration Newmark with an implicit radial-return friction law.
//! Aerodynamics enter as `Re{G} q + Im{G} q' / w_est`, which reproduces
//! `G u_1` for harmonic motion at `w_est`; the estimate follows the measured
//! frequency every few cycles.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::aero::AeroSet;
use crate::contact::{self, AftConfig, TractionState};
use crate::epmc::{backbone_query, Backbone};
use crate::error::{Error, Result};
use crate::harmonic::HarmonicSet;
use crate::linalg;
use crate::model::{ContactElement, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub steps_per_period: usize,
    pub n_periods: usize,
    /// Initial frequency estimate; sets the step and the aero law.
    pub omega_est: f64,
    /// Update the frequency estimate after this many measured cycles.
    pub reestimate_every: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub freq_dependent: bool,
    /// Stop once the state norm exceeds this multiple of its initial value.
    pub blowup_factor: f64,
}

impl IntegratorConfig {
    pub fn new(omega_est: f64, n_periods: usize) -> Self {
        Self {
            steps_per_period: 128,
            n_periods,
            omega_est,
            reestimate_every: 10,
            newton_tol: 1e-12,
            max_newton: 50,
            freq_dependent: true,
            blowup_factor: 1e3,
        }
    }

    /// Rejects steps that cannot resolve the estimated period.
    pub fn check(&self) -> Result<()> {
        if self.steps_per_period < 50 {
            return Err(Error::InvalidConfig(format!(
                "{} steps per period; at least 50 are required",
                self.steps_per_period
            )));
        }
        if !(self.omega_est > 0.0) || self.n_periods == 0 || self.reestimate_every == 0 {
            return Err(Error::InvalidConfig(
                "frequency estimate, period count and re-estimation interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub contact: Vec<TractionState>,
}

impl InitialState {
    /// Phase-zero state of a harmonic motion, with friction tractions taken
    /// from the steady hysteresis cycle.
    pub fn from_harmonics(u: &HarmonicSet, omega: f64, contacts: &[ContactElement], aft: &AftConfig) -> Result<Self> {
        let mut q = u.zeroth().clone();
        let mut v = DVector::zeros(u.dim());
        for k in 1..=u.order() {
            let h = u.harmonic(k);
            for i in 0..u.dim() {
                q[i] += h[i].re;
                v[i] -= omega * k as f64 * h[i].im;
            }
        }
        let contact = contact::evaluate(u, contacts, aft, false)?.state_at_zero;
        Ok(Self { q, v, contact })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHistory {
    pub t: Vec<f64>,
    pub sensor: Vec<f64>,
    /// Envelope `sqrt(m^2 + (m'/w)^2)` of the projection on the reference
    /// shape, when one was given.
    pub envelope: Vec<f64>,
    /// `(time, estimate)` after every update.
    pub omega_estimates: Vec<(f64, f64)>,
    pub steps_per_period: usize,
    pub diverged: bool,
    pub final_state: InitialState,
}

struct Aero<'a> {
    set: Option<&'a AeroSet>,
    freq_dependent: bool,
}

impl Aero<'_> {
    /// Effective damping and stiffness contributions `(C, A)`, with the aero
    /// force `A q - C v`.
    fn matrices(&self, dim: usize, omega: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        match self.set {
            None => (DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim)),
            Some(s) => {
                let g = s.g_at(omega, self.freq_dependent);
                (g.map(|z| -z.im / omega), g.map(|z| z.re))
            }
        }
    }
}

fn friction(
    el: &ContactElement,
    st: &TractionState,
    q: &DVector<f64>,
) -> ([f64; 2], [[f64; 2]; 2]) {
    let g = [q[el.coord_x], el.coord_y.map_or(0.0, |y| q[y])];
    let ps = [
        st.p[0] + el.k_t * (g[0] - st.g_prev[0]),
        st.p[1] + el.k_t * (g[1] - st.g_prev[1]),
    ];
    let norm = ps[0].hypot(ps[1]);
    if norm <= el.f_lim {
        return (ps, [[el.k_t, 0.0], [0.0, el.k_t]]);
    }
    let n = [ps[0] / norm, ps[1] / norm];
    let c = el.k_t * el.f_lim / norm;
    (
        [el.f_lim * n[0], el.f_lim * n[1]],
        [
            [c * (1.0 - n[0] * n[0]), -c * n[0] * n[1]],
            [-c * n[0] * n[1], c * (1.0 - n[1] * n[1])],
        ],
    )
}

fn contact_terms(
    contacts: &[ContactElement],
    states: &[TractionState],
    q: &DVector<f64>,
    tangent: Option<&mut DMatrix<f64>>,
) -> (DVector<f64>, Vec<[f64; 2]>) {
    let mut f = DVector::zeros(q.len());
    let mut ps = Vec::with_capacity(contacts.len());
    let mut tangent = tangent;
    for (el, st) in contacts.iter().zip(states) {
        let (p, t) = friction(el, st, q);
        let axes: Vec<usize> = el.coords().collect();
        for (a, &ia) in axes.iter().enumerate() {
            f[ia] += p[a];
            if let Some(tm) = tangent.as_deref_mut() {
                for (b, &ib) in axes.iter().enumerate() {
                    tm[(ia, ib)] += t[a][b];
                }
            }
        }
        ps.push(p);
    }
    (f, ps)
}

fn sensor_row(model: &ReducedModel) -> DVector<f64> {
    match model.recovery() {
        Some(t) => t.row(model.sensor_coord()).transpose(),
        None => {
            let mut r = DVector::zeros(model.dim());
            r[model.sensor_coord()] = 1.0;
            r
        }
    }
}

/// Integrates `M q'' + K q + f_c = f_a` from the given state.
pub fn time_integrate(
    model: &ReducedModel,
    contacts: &[ContactElement],
    aero: Option<&AeroSet>,
    init: &InitialState,
    reference: Option<&DVector<f64>>,
    cfg: &IntegratorConfig,
) -> Result<TimeHistory> {
    cfg.check()?;
    let dim = model.dim();
    if init.q.len() != dim || init.v.len() != dim || init.contact.len() != contacts.len() {
        return Err(Error::Dimension("initial state does not match the model".into()));
    }
    if let Some(s) = aero {
        s.validate(dim)?;
    }
    let aero = Aero {
        set: aero,
        freq_dependent: cfg.freq_dependent,
    };
    let m = model.mass();
    let k = model.stiffness();
    let srow = sensor_row(model);
    let mref = reference.map(|r| m * r);

    let mut omega = cfg.omega_est;
    let mut dt = 2.0 * PI / (omega * cfg.steps_per_period as f64);
    let (mut c, mut a_mat) = aero.matrices(dim, omega);
    let mut base = m * (4.0 / (dt * dt)) + &c * (2.0 / dt) + k - &a_mat;

    let mut q = init.q.clone();
    let mut v = init.v.clone();
    let mut states = init.contact.clone();
    // the stored tractions are the contact forces at the initial state
    let mut fc0 = DVector::zeros(dim);
    for (el, st) in contacts.iter().zip(&states) {
        for (a, i) in el.coords().enumerate() {
            fc0[i] += st.p[a];
        }
    }
    let rhs0 = -(&c * &v) - (k - &a_mat) * &q - fc0;
    let mut acc = linalg::solve(m, &rhs0, "mass matrix")?;

    let total_steps = cfg.n_periods * cfg.steps_per_period;
    let mut hist = TimeHistory {
        t: Vec::with_capacity(total_steps + 1),
        sensor: Vec::with_capacity(total_steps + 1),
        envelope: Vec::new(),
        omega_estimates: Vec::new(),
        steps_per_period: cfg.steps_per_period,
        diverged: false,
        final_state: init.clone(),
    };
    let envelope = |q: &DVector<f64>, v: &DVector<f64>, w: f64| {
        mref.as_ref().map(|mr| {
            let a = mr.dot(q);
            let b = mr.dot(v) / w;
            a.hypot(b)
        })
    };
    let mut t = 0.0;
    hist.t.push(t);
    hist.sensor.push(srow.dot(&q));
    if let Some(e) = envelope(&q, &v, omega) {
        hist.envelope.push(e);
    }
    let norm0 = q.norm().max(v.norm() / omega).max(f64::MIN_POSITIVE);
    let mut crossings: Vec<f64> = Vec::new();
    let mut last_update = 0usize;

    let mut step = 0usize;
    while step < total_steps {
        let qn = q.clone();
        let pred_a = |qt: &DVector<f64>| (qt - &qn - &v * dt) * (4.0 / (dt * dt)) - &acc;
        let pred_v = |qt: &DVector<f64>| (qt - &qn) * (2.0 / dt) - &v;
        let mut qt = &qn + &v * dt + &acc * (dt * dt / 2.0);
        let mut converged = false;
        for _ in 0..cfg.max_newton {
            let mut jac = base.clone();
            let (fc, _) = contact_terms(contacts, &states, &qt, Some(&mut jac));
            let r = m * pred_a(&qt) + &c * pred_v(&qt) + (k - &a_mat) * &qt + fc;
            let dq = linalg::solve(&jac, &(-r), "Newmark iteration matrix")?;
            qt += &dq;
            if dq.norm() <= cfg.newton_tol * qt.norm().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Integration(format!(
                "implicit step {step} did not converge in {} iterations",
                cfg.max_newton
            )));
        }
        let an = pred_a(&qt);
        let vn = pred_v(&qt);
        let (_, ps) = contact_terms(contacts, &states, &qt, None);
        for ((el, st), p) in contacts.iter().zip(states.iter_mut()).zip(ps) {
            st.p = p;
            st.g_prev = [qt[el.coord_x], el.coord_y.map_or(0.0, |y| qt[y])];
        }
        let s_old = *hist.sensor.last().unwrap();
        q = qt;
        v = vn;
        acc = an;
        t += dt;
        step += 1;
        let s_new = srow.dot(&q);
        hist.t.push(t);
        hist.sensor.push(s_new);
        if let Some(e) = envelope(&q, &v, omega) {
            hist.envelope.push(e);
        }
        if s_old < 0.0 && s_new >= 0.0 {
            crossings.push(t - dt * s_new / (s_new - s_old));
            if crossings.len() - last_update > cfg.reestimate_every {
                let span = &crossings[last_update..];
                let period = (span[span.len() - 1] - span[0]) / (span.len() - 1) as f64;
                omega = 2.0 * PI / period;
                last_update = crossings.len() - 1;
                hist.omega_estimates.push((t, omega));
                let needed = 2.0 * PI / (omega * dt);
                if needed < 50.0 {
                    dt = 2.0 * PI / (omega * cfg.steps_per_period as f64);
                }
                (c, a_mat) = aero.matrices(dim, omega);
                base = m * (4.0 / (dt * dt)) + &c * (2.0 / dt) + k - &a_mat;
            }
        }
        let norm = q.norm().max(v.norm() / omega);
        if !norm.is_finite() || norm > cfg.blowup_factor * norm0 {
            hist.diverged = true;
            break;
        }
    }
    hist.final_state = InitialState { q, v, contact: states };
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcoEstimate {
    pub omega: f64,
    /// Half peak-to-trough of the sensor signal.
    pub sensor_amplitude: f64,
    /// Relative amplitude change across the window.
    pub drift: f64,
}

/// Frequency from zero crossings and amplitude from the last `window`
/// periods; errors when the amplitude still drifts by more than
/// `drift_limit`.
pub fn extract_lco(hist: &TimeHistory, window: usize, drift_limit: f64) -> Result<LcoEstimate> {
    if window < 2 {
        return Err(Error::InvalidConfig("window must span at least two periods".into()));
    }
    let s = &hist.sensor;
    let tail = (window + 2) * hist.steps_per_period;
    let start = s.len().saturating_sub(tail);
    let mean = s[start..].iter().sum::<f64>() / (s.len() - start) as f64;
    let mut cross = Vec::new();
    for i in start + 1..s.len() {
        let (a, b) = (s[i - 1] - mean, s[i] - mean);
        if a < 0.0 && b >= 0.0 {
            let frac = -a / (b - a);
            cross.push((i - 1, hist.t[i - 1] + frac * (hist.t[i] - hist.t[i - 1])));
        }
    }
    if cross.len() < window + 1 {
        return Err(Error::Integration(format!(
            "only {} upward crossings in the analysis window",
            cross.len()
        )));
    }
    let cross = &cross[cross.len() - window - 1..];
    let period = (cross[window].1 - cross[0].1) / window as f64;
    let amps: Vec<f64> = cross
        .windows(2)
        .map(|w| {
            let seg = &s[w[0].0..=w[1].0];
            let hi = seg.iter().cloned().fold(f64::MIN, f64::max);
            let lo = seg.iter().cloned().fold(f64::MAX, f64::min);
            0.5 * (hi - lo)
        })
        .collect();
    let amp = amps.iter().sum::<f64>() / amps.len() as f64;
    let drift = (amps[amps.len() - 1] - amps[0]).abs() / amp;
    if drift > drift_limit {
        return Err(Error::NonStationary {
            drift,
            limit: drift_limit,
        });
    }
    Ok(LcoEstimate {
        omega: 2.0 * PI / period,
        sensor_amplitude: amp,
        drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityLimitConfig {
    pub periods: usize,
    /// Leading periods ignored when fitting the envelope trend.
    pub skip: usize,
    /// Relative bracket width at which bisection stops.
    pub tol: f64,
    pub steps_per_period: usize,
    pub aft: AftConfig,
}

impl Default for StabilityLimitConfig {
    fn default() -> Self {
        Self {
            periods: 300,
            skip: 30,
            tol: 0.01,
            steps_per_period: 96,
            aft: AftConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityLimit {
    pub amplitude: f64,
    pub bracket: (f64, f64),
    /// `(initial amplitude, envelope growth rate per period)` of every trial.
    pub trials: Vec<(f64, f64)>,
}

/// Largest change of the log envelope over the late half of a trial that
/// still counts as settled.
const SETTLED_LOG_CHANGE: f64 = 0.1;

/// Least-squares slope of `ln(b)` per period over `(index, b)` pairs.
fn log_slope(blocks: &[(usize, f64)]) -> f64 {
    let len = blocks.len() as f64;
    let ys: Vec<(f64, f64)> = blocks.iter().map(|&(i, b)| (i as f64, b.max(f64::MIN_POSITIVE).ln())).collect();
    let mx = ys.iter().map(|p| p.0).sum::<f64>() / len;
    let my = ys.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = ys.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = ys.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Envelope growth per period over the whole window and over its two halves.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Trend {
    rate: f64,
    early: f64,
    late: f64,
    /// Periods spanned by the late half.
    late_span: f64,
}

impl Trend {
    fn of(hist: &TimeHistory, skip: usize) -> Self {
        if hist.diverged {
            return Self {
                rate: f64::INFINITY,
                early: f64::INFINITY,
                late: f64::INFINITY,
                late_span: 0.0,
            };
        }
        let n = hist.steps_per_period;
        let blocks: Vec<(usize, f64)> = hist
            .envelope
            .chunks_exact(n)
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .enumerate()
            .skip(skip)
            .collect();
        let half = blocks.len() / 2;
        Self {
            rate: log_slope(&blocks),
            early: log_slope(&blocks[..half]),
            late: log_slope(&blocks[half..]),
            late_span: (blocks.len() - half) as f64,
        }
    }

    /// Settling onto a nearby limit cycle: the trend weakens or reverses
    /// and the envelope is nearly stationary by the end. A response running
    /// away from an unstable cycle speeds up instead, and one decaying to
    /// rest keeps the linear stick rate.
    fn attracted(&self) -> bool {
        let weakening = self.early.signum() != self.late.signum() || self.late.abs() < self.early.abs();
        weakening && self.late.abs() * self.late_span < SETTLED_LOG_CHANGE
    }
}

/// Amplitude-marching bisection for the separation between decaying and
/// growing responses. Trials start from the backbone motion at the trial
/// amplitude with steady friction tractions. Both bracket ends must run away
/// from their start, one decaying and one growing; a response that settles
/// onto a stable limit cycle marks no threshold.
pub fn find_stability_limit(
    model: &ReducedModel,
    contacts: &[ContactElement],
    aero: &AeroSet,
    backbone: &Backbone,
    bracket: (f64, f64),
    cfg: &StabilityLimitConfig,
) -> Result<StabilityLimit> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidConfig("bracket must satisfy 0 < lo < hi".into()));
    }
    if cfg.periods < cfg.skip + 4 {
        return Err(Error::InvalidConfig("too few periods after the skipped transient".into()));
    }
    let reference = backbone
        .points
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty backbone".into()))?
        .shape
        .map(|z| z.re);
    let mut trials = Vec::new();
    let mut trial = |a: f64| -> Result<Trend> {
        let p = backbone_query(backbone, a, model)?;
        let init = InitialState::from_harmonics(&p.solution, p.omega, contacts, &cfg.aft)?;
        let mut ic = IntegratorConfig::new(p.omega, cfg.periods);
        ic.steps_per_period = cfg.steps_per_period;
        let hist = time_integrate(model, contacts, Some(aero), &init, Some(&reference), &ic)?;
        let trend = Trend::of(&hist, cfg.skip);
        log::debug!("stability trial a = {a:.6e}: growth {:.3e} per period", trend.rate);
        trials.push((a, trend.rate));
        Ok(trend)
    };
    let t_lo = trial(lo)?;
    let t_hi = trial(hi)?;
    if t_lo.attracted() || t_hi.attracted() {
        return Err(Error::NoStraddle(format!(
            "the responses from {lo:.4e} and {hi:.4e} settle onto a limit cycle (growth {:.3e}, {:.3e} per period)",
            t_lo.rate, t_hi.rate
        )));
    }
    if t_lo.rate.signum() == t_hi.rate.signum() {
        return Err(Error::NoStraddle(format!(
            "growth rates {:.3e} at {lo:.4e} and {:.3e} at {hi:.4e} share a sign",
            t_lo.rate, t_hi.rate
        )));
    }
    let lo_sign = t_lo.rate.signum();
    while (hi - lo) / lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if trial(mid)?.rate.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(StabilityLimit {
        amplitude: 0.5 * (lo + hi),
        bracket: (lo, hi),
        trials,
    })
}
