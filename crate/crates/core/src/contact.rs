//! Alternating frequency-time evaluation of elastic Coulomb (Jenkins)
//! contacts.
//!
//! Relative displacements are synthesized at equispaced phase samples, every
//! element is marched with a radial-return update until its traction state
//! repeats from cycle to cycle, and the forces of the steady cycle are
//! transformed back. Derivatives are propagated through the same update so
//! the Jacobian is the exact derivative of the sampled map.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::harmonic::{flat_index, HarmonicSet};
use crate::model::{ContactElement, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AftConfig {
    pub n_samples: usize,
    /// Cycles marched before periodicity is first checked.
    pub n_transient_cycles: usize,
    /// Hard cap on marched cycles.
    pub max_cycles: usize,
}

impl Default for AftConfig {
    fn default() -> Self {
        Self {
            n_samples: 128,
            n_transient_cycles: 3,
            max_cycles: 10,
        }
    }
}

impl AftConfig {
    pub fn check(&self, order: usize) -> Result<()> {
        if !self.n_samples.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "sample count {} is not a power of two",
                self.n_samples
            )));
        }
        let required = (4 * order).max(4);
        if self.n_samples < required {
            return Err(Error::Aliasing {
                samples: self.n_samples,
                harmonics: order,
                required,
            });
        }
        if self.n_transient_cycles == 0 || self.max_cycles <= self.n_transient_cycles {
            return Err(Error::InvalidConfig(
                "need at least one transient cycle and a cycle cap above it".into(),
            ));
        }
        Ok(())
    }
}

/// Traction and the displacement it was last updated with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TractionState {
    pub p: [f64; 2],
    pub g_prev: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
struct StepOut {
    p: [f64; 2],
    /// Radial-return tangent `dp/dp*` (row-major 2x2); `None` when sticking.
    tangent: Option<[f64; 4]>,
    dissipation: f64,
}

fn radial_return(p_prev: [f64; 2], g: [f64; 2], g_prev: [f64; 2], k_t: f64, f_lim: f64) -> StepOut {
    let ps = [
        p_prev[0] + k_t * (g[0] - g_prev[0]),
        p_prev[1] + k_t * (g[1] - g_prev[1]),
    ];
    let norm = ps[0].hypot(ps[1]);
    if norm <= f_lim {
        return StepOut {
            p: ps,
            tangent: None,
            dissipation: 0.0,
        };
    }
    let n = [ps[0] / norm, ps[1] / norm];
    let p = [f_lim * n[0], f_lim * n[1]];
    let c = f_lim / norm;
    StepOut {
        p,
        tangent: Some([c * (1.0 - n[0] * n[0]), -c * n[0] * n[1], -c * n[0] * n[1], c * (1.0 - n[1] * n[1])]),
        // p . (p* - p) / k_t: energy lost in the slider during this step
        dissipation: f_lim * (norm - f_lim) / k_t,
    }
}

/// Marches one element over the given displacement samples. One-dimensional
/// elements pass `gy = None`.
pub fn jenkins_march(
    gx: &[f64],
    gy: Option<&[f64]>,
    element: &ContactElement,
    state: TractionState,
) -> (Vec<[f64; 2]>, TractionState) {
    let mut st = state;
    let mut out = Vec::with_capacity(gx.len());
    for (n, &x) in gx.iter().enumerate() {
        let g = [x, gy.map_or(0.0, |y| y[n])];
        let s = radial_return(st.p, g, st.g_prev, element.k_t, element.f_lim);
        st = TractionState { p: s.p, g_prev: g };
        out.push(s.p);
    }
    (out, st)
}

/// Synthesis rows `[1, cos t, -sin t, ..., cos Ht, -sin Ht]` per sample.
fn synthesis_basis(order: usize, ns: usize) -> Vec<Vec<f64>> {
    (0..ns)
        .map(|n| {
            let tau = 2.0 * PI * n as f64 / ns as f64;
            let mut row = Vec::with_capacity(2 * order + 1);
            row.push(1.0);
            for k in 1..=order {
                let (s, c) = (k as f64 * tau).sin_cos();
                row.push(c);
                row.push(-s);
            }
            row
        })
        .collect()
}

/// Analysis rows matching `synthesis_basis`, so that `W B = I` below Nyquist.
fn analysis_weights(order: usize, ns: usize) -> Vec<Vec<f64>> {
    let inv = 1.0 / ns as f64;
    (0..ns)
        .map(|n| {
            let tau = 2.0 * PI * n as f64 / ns as f64;
            let mut row = Vec::with_capacity(2 * order + 1);
            row.push(inv);
            for k in 1..=order {
                let (s, c) = (k as f64 * tau).sin_cos();
                row.push(2.0 * inv * c);
                row.push(-2.0 * inv * s);
            }
            row
        })
        .collect()
}

/// Fourier coefficients of a real sample series in the flattened per-coordinate
/// layout `[c0, Re c1, Im c1, ...]`.
pub fn dft_real(samples: &[f64], order: usize) -> Vec<f64> {
    let w = analysis_weights(order, samples.len());
    let mut out = vec![0.0; 2 * order + 1];
    for (n, &x) in samples.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += w[n][j] * x;
        }
    }
    out
}

/// Samples the signal of every coordinate over one period.
pub fn synthesize(u: &HarmonicSet, ns: usize) -> Vec<DVector<f64>> {
    let b = synthesis_basis(u.order(), ns);
    let flat = u.to_flat();
    let n = u.dim();
    b.iter()
        .map(|row| {
            DVector::from_fn(n, |i, _| {
                row.iter()
                    .enumerate()
                    .map(|(j, bj)| bj * flat[local_to_flat(j, i, n)])
                    .sum()
            })
        })
        .collect()
}

fn local_to_flat(j: usize, coord: usize, dim: usize) -> usize {
    if j == 0 {
        flat_index(0, false, coord, dim)
    } else {
        flat_index(j.div_ceil(2), j.is_multiple_of(2), coord, dim)
    }
}

struct Cycle {
    p_end: [f64; 2],
    forces: Vec<[f64; 2]>,
    /// `dp_n / d theta` with zero start derivative; row-major `d x m`.
    p_sens: Vec<Vec<f64>>,
    /// `dp_n / d p_start`; row-major `d x d`.
    s_sens: Vec<[f64; 4]>,
    any_slip: bool,
    dissipation: f64,
}

struct ElementEngine<'a> {
    el: &'a ContactElement,
    d: usize,
    nb: usize,
    g: Vec<[f64; 2]>,
    basis: &'a [Vec<f64>],
    scale: f64,
}

impl ElementEngine<'_> {
    fn m(&self) -> usize {
        self.d * self.nb
    }

    fn cycle(&self, start: [f64; 2], virgin: bool) -> Cycle {
        let ns = self.g.len();
        let (d, nb, m) = (self.d, self.nb, self.m());
        let mut p = start;
        let mut g_prev = if virgin { [0.0; 2] } else { self.g[ns - 1] };
        let zeros = vec![0.0; nb];
        let mut b_prev: &[f64] = if virgin { &zeros } else { &self.basis[ns - 1] };
        let mut pm = vec![0.0; d * m];
        let mut sm = [1.0, 0.0, 0.0, 1.0];
        let mut out = Cycle {
            p_end: start,
            forces: Vec::with_capacity(ns),
            p_sens: Vec::with_capacity(ns),
            s_sens: Vec::with_capacity(ns),
            any_slip: false,
            dissipation: 0.0,
        };
        for n in 0..ns {
            let g = self.g[n];
            let st = radial_return(p, g, g_prev, self.el.k_t, self.el.f_lim);
            let bn = &self.basis[n];
            for a in 0..d {
                for j in 0..nb {
                    pm[a * m + a * nb + j] += self.el.k_t * (bn[j] - b_prev[j]);
                }
            }
            if let Some(t) = st.tangent {
                out.any_slip = true;
                out.dissipation += st.dissipation;
                if d == 1 {
                    // one-dimensional radial return is a hard reset
                    pm.iter_mut().for_each(|v| *v = 0.0);
                    sm = [0.0; 4];
                } else {
                    for c in 0..m {
                        let (x, y) = (pm[c], pm[m + c]);
                        pm[c] = t[0] * x + t[1] * y;
                        pm[m + c] = t[2] * x + t[3] * y;
                    }
                    sm = mul2(&t, &sm);
                }
            }
            p = st.p;
            g_prev = g;
            b_prev = bn;
            out.forces.push(p);
            out.p_sens.push(pm.clone());
            out.s_sens.push(sm);
        }
        out.p_end = p;
        out
    }

    fn state_dim_change(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    fn run(&self, cfg: &AftConfig) -> Result<ElementResult> {
        let (d, m) = (self.d, self.m());
        let tol = 1e-10 * self.scale;
        let mut c = self.cycle([0.0; 2], true);
        let mut s = c.p_end;
        let mut d_prop = c.p_sens.last().cloned().unwrap_or_default();
        let mut cycles = 1;
        while cycles < cfg.n_transient_cycles {
            c = self.cycle(s, false);
            d_prop = compose(&c, &d_prop, d, m);
            s = c.p_end;
            cycles += 1;
        }
        let mut polish = 0;
        loop {
            c = self.cycle(s, false);
            cycles += 1;
            let change = self.state_dim_change(c.p_end, s);
            let s_end = *c.s_sens.last().unwrap();
            let inv = inverse_i_minus(&s_end, d);
            let p_end = c.p_sens.last().unwrap().clone();
            if change <= tol {
                let polish_more = inv.is_some() && change > 1e-13 * self.scale && polish < 3 && cycles < cfg.max_cycles;
                if !polish_more {
                    let dstart = match inv {
                        Some(a) => apply2(&a, &p_end, d, m),
                        None => d_prop,
                    };
                    return Ok(self.finish(c, s, dstart, cycles));
                }
                polish += 1;
            }
            if cycles >= cfg.max_cycles {
                return Err(Error::HysteresisNotSteady {
                    cycles,
                    change: change / self.scale,
                });
            }
            match inv {
                Some(a) => {
                    let r = [c.p_end[0] - s[0], c.p_end[1] - s[1]];
                    let step = [a[0] * r[0] + a[1] * r[1], a[2] * r[0] + a[3] * r[1]];
                    s = [s[0] + step[0], if d == 2 { s[1] + step[1] } else { 0.0 }];
                    let norm = s[0].hypot(s[1]);
                    if norm > self.el.f_lim && norm > 0.0 {
                        s = [s[0] * self.el.f_lim / norm, s[1] * self.el.f_lim / norm];
                    }
                    d_prop = apply2(&a, &p_end, d, m);
                }
                None => {
                    d_prop = compose(&c, &d_prop, d, m);
                    s = c.p_end;
                }
            }
        }
    }

    fn finish(&self, c: Cycle, start: [f64; 2], dstart: Vec<f64>, cycles: usize) -> ElementResult {
        let (d, m) = (self.d, self.m());
        let ns = self.g.len();
        let sens = (0..ns)
            .map(|n| {
                let sm = &c.s_sens[n];
                let pm = &c.p_sens[n];
                let mut out = pm.clone();
                for a in 0..d {
                    for col in 0..m {
                        let mut v = 0.0;
                        for b in 0..d {
                            v += sm[a * 2 + b] * dstart[b * m + col];
                        }
                        out[a * m + col] += v;
                    }
                }
                out
            })
            .collect();
        ElementResult {
            forces: c.forces,
            sens,
            any_slip: c.any_slip,
            dissipation: c.dissipation,
            cycles,
            start,
            g0: self.g[0],
        }
    }
}

struct ElementResult {
    forces: Vec<[f64; 2]>,
    sens: Vec<Vec<f64>>,
    any_slip: bool,
    dissipation: f64,
    cycles: usize,
    start: [f64; 2],
    g0: [f64; 2],
}

fn mul2(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// `(I - S)^{-1}` when its smallest singular value is comfortably nonzero.
fn inverse_i_minus(s: &[f64; 4], d: usize) -> Option<[f64; 4]> {
    if d == 1 {
        let a = 1.0 - s[0];
        return (a.abs() > 1e-6).then(|| [1.0 / a, 0.0, 0.0, 0.0]);
    }
    let a = nalgebra::Matrix2::new(1.0 - s[0], -s[1], -s[2], 1.0 - s[3]);
    let sv = a.singular_values();
    if sv.min() <= 1e-6 {
        return None;
    }
    let inv = a.try_inverse()?;
    Some([inv[(0, 0)], inv[(0, 1)], inv[(1, 0)], inv[(1, 1)]])
}

fn apply2(a: &[f64; 4], x: &[f64], d: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * m];
    for r in 0..d {
        for col in 0..m {
            let mut v = 0.0;
            for b in 0..d {
                v += a[r * 2 + b] * x[b * m + col];
            }
            out[r * m + col] = v;
        }
    }
    out
}

/// Start derivative of the next cycle: `S_end D + P_end`.
fn compose(c: &Cycle, dstart: &[f64], d: usize, m: usize) -> Vec<f64> {
    let mut out = c.p_sens.last().unwrap().clone();
    let sm = c.s_sens.last().unwrap();
    for a in 0..d {
        for col in 0..m {
            for b in 0..d {
                out[a * m + col] += sm[a * 2 + b] * dstart[b * m + col];
            }
        }
    }
    out
}

/// Full result of one AFT evaluation.
#[derive(Debug, Clone)]
pub struct AftResult {
    pub force: HarmonicSet,
    /// Derivative of the flattened force with respect to the flattened
    /// displacement, when requested.
    pub jacobian: Option<DMatrix<f64>>,
    /// Energy dissipated in the sliders over the steady cycle.
    pub loop_work: f64,
    pub any_slip: bool,
    /// Largest number of cycles any element needed.
    pub cycles: usize,
    /// Per-element traction state right after the update at phase zero.
    pub state_at_zero: Vec<TractionState>,
}

pub fn evaluate(
    u: &HarmonicSet,
    contacts: &[ContactElement],
    cfg: &AftConfig,
    with_jacobian: bool,
) -> Result<AftResult> {
    cfg.check(u.order())?;
    u.check_finite()?;
    let (order, dim, ns) = (u.order(), u.dim(), cfg.n_samples);
    for c in contacts {
        if c.coords().any(|i| i >= dim) {
            return Err(Error::Dimension(format!(
                "contact coordinate beyond the {dim} coordinates of the displacement set"
            )));
        }
    }
    let basis = synthesis_basis(order, ns);
    let weights = analysis_weights(order, ns);
    let samples = synthesize(u, ns);
    let nb = 2 * order + 1;

    let results: Vec<ElementResult> = contacts
        .par_iter()
        .map(|el| {
            let d = if el.coord_y.is_some() { 2 } else { 1 };
            let g: Vec<[f64; 2]> = samples
                .iter()
                .map(|s| [s[el.coord_x], el.coord_y.map_or(0.0, |y| s[y])])
                .collect();
            let gmax = g.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
            let engine = ElementEngine {
                el,
                d,
                nb,
                g,
                basis: &basis,
                scale: el.f_lim.max(el.k_t * gmax).max(f64::MIN_POSITIVE),
            };
            engine.run(cfg)
        })
        .collect::<Result<_>>()?;

    let n_flat = nb * dim;
    let mut flat = DVector::zeros(n_flat);
    let mut jac = with_jacobian.then(|| DMatrix::zeros(n_flat, n_flat));
    let mut loop_work = 0.0;
    let mut any_slip = false;
    let mut cycles = 0;
    let mut state_at_zero = Vec::with_capacity(contacts.len());
    for (el, r) in contacts.iter().zip(&results) {
        let axes: Vec<usize> = el.coords().collect();
        let m = axes.len() * nb;
        for (a, &coord) in axes.iter().enumerate() {
            for (n, w) in weights.iter().enumerate() {
                for j in 0..nb {
                    flat[local_to_flat(j, coord, dim)] += w[j] * r.forces[n][a];
                }
            }
            if let Some(jm) = jac.as_mut() {
                for (n, w) in weights.iter().enumerate() {
                    let row_sens = &r.sens[n][a * m..(a + 1) * m];
                    for j in 0..nb {
                        let row = local_to_flat(j, coord, dim);
                        for (col_local, v) in row_sens.iter().enumerate() {
                            let col_axis = axes[col_local / nb];
                            let col = local_to_flat(col_local % nb, col_axis, dim);
                            jm[(row, col)] += w[j] * v;
                        }
                    }
                }
            }
        }
        loop_work += r.dissipation;
        any_slip |= r.any_slip;
        cycles = cycles.max(r.cycles);
        let _ = r.start;
        state_at_zero.push(TractionState {
            p: r.forces[0],
            g_prev: r.g0,
        });
    }
    Ok(AftResult {
        force: HarmonicSet::from_flat(order, dim, &flat)?,
        jacobian: jac,
        loop_work,
        any_slip,
        cycles,
        state_at_zero,
    })
}

fn check_dim(u: &HarmonicSet, model: &ReducedModel) -> Result<()> {
    if u.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "displacement set has {} coordinates, model has {}",
            u.dim(),
            model.dim()
        )));
    }
    Ok(())
}

pub fn contact_force_fourier(
    u: &HarmonicSet,
    model: &ReducedModel,
    contacts: &[ContactElement],
    cfg: &AftConfig,
) -> Result<HarmonicSet> {
    check_dim(u, model)?;
    Ok(evaluate(u, contacts, cfg, false)?.force)
}

pub fn contact_jacobian(
    u: &HarmonicSet,
    model: &ReducedModel,
    contacts: &[ContactElement],
    cfg: &AftConfig,
) -> Result<DMatrix<f64>> {
    check_dim(u, model)?;
    Ok(evaluate(u, contacts, cfg, true)?
        .jacobian
        .expect("jacobian requested"))
}

/// Energy dissipated by friction over one steady cycle. Independent of the
/// frequency, which is accepted only to document that fact.
pub fn contact_dissipated_work(
    u: &HarmonicSet,
    omega: f64,
    model: &ReducedModel,
    contacts: &[ContactElement],
    cfg: &AftConfig,
) -> Result<f64> {
    check_dim(u, model)?;
    if !(omega > 0.0) {
        return Err(Error::InvalidConfig("frequency must be positive".into()));
    }
    let w = evaluate(u, contacts, cfg, false)?.loop_work;
    if w < -1e-12 {
        return Err(Error::Consistency(format!("negative dissipated work {w:e}")));
    }
    Ok(w.max(0.0))
}

/// Work per cycle `int du/dt . f dt` from Fourier coefficients alone.
pub fn harmonic_work(u: &HarmonicSet, f: &HarmonicSet) -> f64 {
    let kmax = u.order().min(f.order());
    (1..=kmax)
        .map(|k| {
            let s: f64 = u
                .harmonic(k)
                .iter()
                .zip(f.harmonic(k).iter())
                .map(|(a, b): (&Complex64, &Complex64)| a.re * b.im - a.im * b.re)
                .sum();
            PI * k as f64 * s
        })
        .sum()
}
