//! Nonlinear modal analysis with the extended periodic motion concept.
//!
//! The damping introduced by friction is balanced by an artificial
//! mass-proportional negative damping term whose coefficient is the modal
//! damping ratio. The resulting family of periodic motions is traced over the
//! modal amplitude by pseudo-arclength continuation in `ln a`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::contact::{self, AftConfig};
use crate::error::{Error, Result};
use crate::harmonic::{flat_index, hdot, HarmonicSet};
use crate::harmonic_balance::{dynamic_stiffness_blocks, dynamic_stiffness_domega, linear_part};
use crate::linalg;
use crate::model::{self, ContactElement, LinearMode, ModeKind, ReducedModel};

/// Modal data at one amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackbonePoint {
    /// Modal amplitude `a` with `u_1 = psi a` and `psi^H M psi = 1`.
    pub amplitude: f64,
    pub omega: f64,
    /// Modal damping ratio from the excitation term.
    pub damping: f64,
    pub shape: DVector<Complex64>,
    /// Full motion `a q` over all harmonics.
    pub solution: HarmonicSet,
    /// Energy normalization `sum_k (k w)^2 u_k^H M u_k`.
    pub energy: f64,
    /// Friction work per cycle from the hysteresis coefficients.
    pub dissipated_work: f64,
    pub sensor_amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Backbone {
    pub points: Vec<BackbonePoint>,
    pub mode_index: usize,
    pub omega_stick: f64,
    pub omega_slip: f64,
    /// Set when continuation stopped before the requested end amplitude.
    pub partial: bool,
    pub abort_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub order: usize,
    /// Initial, smallest and largest step in scaled arclength.
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub tol: f64,
    pub max_corrector_iter: usize,
    pub max_points: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            a_min: 1e-6,
            a_max: 1e-3,
            order: 1,
            h0: 0.02,
            h_min: 1e-5,
            h_max: 0.1,
            tol: 1e-10,
            max_corrector_iter: 12,
            max_points: 4000,
        }
    }
}

impl ContinuationConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.a_min > 0.0 && self.a_max > self.a_min) {
            return Err(Error::InvalidConfig("need 0 < a_min < a_max".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidConfig("harmonic order must be at least 1".into()));
        }
        if !(self.h_min > 0.0 && self.h0 >= self.h_min && self.h_max >= self.h0) {
            return Err(Error::InvalidConfig("need 0 < h_min <= h0 <= h_max".into()));
        }
        if !(self.tol > 0.0) || self.max_corrector_iter < 2 {
            return Err(Error::InvalidConfig("invalid corrector settings".into()));
        }
        Ok(())
    }
}

/// `S_k u_k + f_c,k - 2 D w (i k w) M u_k` per harmonic.
pub fn epmc_residual(
    u: &HarmonicSet,
    omega: f64,
    damping: f64,
    model: &ReducedModel,
    contacts: &[ContactElement],
    cfg: &AftConfig,
) -> Result<HarmonicSet> {
    if u.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "displacement set has {} coordinates, model has {}",
            u.dim(),
            model.dim()
        )));
    }
    let fc = contact::evaluate(u, contacts, cfg, false)?.force;
    let flat = linear_part(u, omega, model) + fc.to_flat() + damping_term(u, omega, damping, model);
    HarmonicSet::from_flat(u.order(), u.dim(), &flat)
}

/// Flat layout of `-2 D w (i k w) M u_k`.
fn damping_term(u: &HarmonicSet, omega: f64, damping: f64, model: &ReducedModel) -> DVector<f64> {
    let n = u.dim();
    let mut out = DVector::zeros(u.flat_len());
    for k in 1..=u.order() {
        let c = 2.0 * damping * k as f64 * omega * omega;
        let h = u.harmonic(k);
        let re = model.mass() * linalg::real_part(h);
        let im = model.mass() * linalg::imag_part(h);
        out.rows_mut(flat_index(k, false, 0, n), n).copy_from(&(im * c));
        out.rows_mut(flat_index(k, true, 0, n), n).copy_from(&(re * -c));
    }
    out
}

/// `sum_k (k w)^2 u_k^H M u_k`.
pub fn modal_energy(u: &HarmonicSet, omega: f64, model: &ReducedModel) -> f64 {
    (1..=u.order())
        .map(|k| {
            let h = u.harmonic(k);
            let mh = model.mass().map(Complex64::from) * h;
            let kw = k as f64 * omega;
            kw * kw * hdot(h, &mh).re
        })
        .sum()
}

fn mass_norm(v: &DVector<Complex64>, model: &ReducedModel) -> f64 {
    let mv = model.mass().map(Complex64::from) * v;
    hdot(v, &mv).re
}

struct Eval {
    /// Scaled residual, `n + 2` entries.
    f: DVector<f64>,
    /// Scaled Jacobian, `(n + 2) x (n + 3)`, last column is `d/ds`.
    j: Option<DMatrix<f64>>,
    force: HarmonicSet,
}

/// Continuation and point-wise EPMC solves for one model.
pub struct EpmcSolver<'a> {
    model: &'a ReducedModel,
    contacts: &'a [ContactElement],
    aft: AftConfig,
    order: usize,
    phase_coord: usize,
    mode_index: usize,
    mref: f64,
    kref: f64,
    omega_ref: f64,
    omega_slip: f64,
    stick: LinearMode,
}

impl<'a> EpmcSolver<'a> {
    pub fn new(
        model: &'a ReducedModel,
        contacts: &'a [ContactElement],
        aft: AftConfig,
        mode_index: usize,
        order: usize,
    ) -> Result<Self> {
        aft.check(order)?;
        let stick_modes = model::linear_eigen(model, contacts, ModeKind::Stick)?;
        let slip_modes = model::linear_eigen(model, contacts, ModeKind::Slip)?;
        let stick = stick_modes
            .get(mode_index)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("mode index {mode_index} out of range")))?;
        if stick.rigid {
            return Err(Error::InvalidModel("selected stick mode has zero frequency".into()));
        }
        let slip = &slip_modes[mode_index];
        let phase_coord = stick.shape.iter().enumerate().fold(0, |best, (i, z)| {
            if z.norm() > stick.shape[best].norm() {
                i
            } else {
                best
            }
        });
        let mref = model.mass().diagonal().amax();
        let kc = model.stiffness() + model::contact_stiffness(model.dim(), contacts);
        let kref = kc.diagonal().amax();
        Ok(Self {
            model,
            contacts,
            aft,
            order,
            phase_coord,
            mode_index,
            mref,
            kref,
            omega_ref: stick.omega,
            omega_slip: slip.omega,
            stick,
        })
    }

    pub fn stick_mode(&self) -> &LinearMode {
        &self.stick
    }

    pub fn omega_slip(&self) -> f64 {
        self.omega_slip
    }

    fn n(&self) -> usize {
        (2 * self.order + 1) * self.model.dim()
    }

    /// Scaled state `(q sqrt(m), w / w_ref, D, ln a)`.
    fn to_scaled(&self, q: &HarmonicSet, omega: f64, damping: f64, s: f64) -> DVector<f64> {
        let n = self.n();
        let mut z = DVector::zeros(n + 3);
        z.rows_mut(0, n).copy_from(&(q.to_flat() * self.mref.sqrt()));
        z[n] = omega / self.omega_ref;
        z[n + 1] = damping;
        z[n + 2] = s;
        z
    }

    fn unscale(&self, z: &DVector<f64>) -> Result<(HarmonicSet, f64, f64, f64)> {
        let n = self.n();
        let q = HarmonicSet::from_flat(
            self.order,
            self.model.dim(),
            &(z.rows(0, n).into_owned() / self.mref.sqrt()),
        )?;
        Ok((q, z[n] * self.omega_ref, z[n + 1], z[n + 2]))
    }

    fn eval(&self, z: &DVector<f64>, jac: bool) -> Result<Eval> {
        let n = self.n();
        let dim = self.model.dim();
        let (q, omega, damping, s) = self.unscale(z)?;
        if !(omega > 0.0) {
            return Err(Error::Consistency("nonpositive frequency in modal solve".into()));
        }
        let a = s.exp();
        let u = q.scaled(a);
        let aft = contact::evaluate(&u, self.contacts, &self.aft, jac)?;
        let fq = aft.force.to_flat() / a;
        let mut f = DVector::zeros(n + 2);
        let dyn_rows = linear_part(&q, omega, self.model) + &fq + damping_term(&q, omega, damping, self.model);
        f.rows_mut(0, n).copy_from(&dyn_rows);
        let q1 = q.fundamental();
        f[n] = mass_norm(q1, self.model) - 1.0;
        f[n + 1] = q1[self.phase_coord].im;

        // row and column scales of the dimensionless system
        let row_dyn = self.mref.sqrt() / self.kref;
        let col_q = 1.0 / self.mref.sqrt();
        let row_norm = 1.0;
        let row_phase = self.mref.sqrt();
        f.rows_mut(0, n).scale_mut(row_dyn);
        f[n] *= row_norm;
        f[n + 1] *= row_phase;

        let j = if jac {
            let mut jm = DMatrix::zeros(n + 2, n + 3);
            let mut jq = dynamic_stiffness_blocks(self.model, omega, self.order)
                + aft.jacobian.as_ref().expect("requested");
            let m = self.model.mass();
            let mut d_omega = dynamic_stiffness_domega(&q, omega, self.model);
            let mut d_damp = DVector::zeros(n);
            for k in 1..=self.order {
                let kk = k as f64;
                let c = 2.0 * damping * kk * omega * omega;
                let re_b = flat_index(k, false, 0, dim);
                let im_b = flat_index(k, true, 0, dim);
                {
                    let mut v = jq.view_mut((re_b, im_b), (dim, dim));
                    v += m * c;
                }
                {
                    let mut v = jq.view_mut((im_b, re_b), (dim, dim));
                    v -= m * c;
                }
                let h = q.harmonic(k);
                let mre = m * linalg::real_part(h);
                let mim = m * linalg::imag_part(h);
                let dc_domega = 4.0 * damping * kk * omega;
                let dc_ddamp = 2.0 * kk * omega * omega;
                for i in 0..dim {
                    d_omega[re_b + i] += dc_domega * mim[i];
                    d_omega[im_b + i] -= dc_domega * mre[i];
                    d_damp[re_b + i] = dc_ddamp * mim[i];
                    d_damp[im_b + i] = -dc_ddamp * mre[i];
                }
            }
            // d/ds of f(a q)/a with a = e^s
            let d_s = aft.jacobian.as_ref().expect("requested") * q.to_flat() - &fq;
            jq.scale_mut(row_dyn * col_q);
            jm.view_mut((0, 0), (n, n)).copy_from(&jq);
            jm.view_mut((0, n), (n, 1))
                .copy_from(&(d_omega * (row_dyn * self.omega_ref)));
            jm.view_mut((0, n + 1), (n, 1)).copy_from(&(d_damp * row_dyn));
            jm.view_mut((0, n + 2), (n, 1)).copy_from(&(d_s * row_dyn));
            let mre = m * linalg::real_part(q1);
            let mim = m * linalg::imag_part(q1);
            let re_1 = flat_index(1, false, 0, dim);
            let im_1 = flat_index(1, true, 0, dim);
            for i in 0..dim {
                jm[(n, re_1 + i)] = 2.0 * mre[i] * col_q * row_norm;
                jm[(n, im_1 + i)] = 2.0 * mim[i] * col_q * row_norm;
            }
            jm[(n + 1, im_1 + self.phase_coord)] = col_q * row_phase;
            Some(jm)
        } else {
            None
        };
        Ok(Eval {
            f,
            j,
            force: aft.force,
        })
    }

    fn point_from(&self, z: &DVector<f64>, force: &HarmonicSet) -> Result<BackbonePoint> {
        let (q, omega, damping, s) = self.unscale(z)?;
        let a = s.exp();
        let u = q.scaled(a);
        let energy = modal_energy(&u, omega, self.model);
        Ok(BackbonePoint {
            amplitude: a,
            omega,
            damping,
            shape: q.fundamental().clone(),
            sensor_amplitude: model::recover_sensor_amplitude(&u, self.model)?,
            dissipated_work: contact::harmonic_work(&u, force),
            energy,
            solution: u,
        })
    }

    /// Newton at fixed `s`, returning the polished state and contact force.
    fn correct_fixed(&self, z0: &DVector<f64>, max_iter: usize, tol: f64) -> Result<(DVector<f64>, HarmonicSet, usize)> {
        let n = self.n();
        let mut z = z0.clone();
        let mut e = self.eval(&z, true)?;
        let mut it = 0;
        let mut polish = 0;
        loop {
            let r = e.f.amax();
            if r <= tol {
                if r <= 1e-14 || polish >= 2 {
                    return Ok((z, e.force, it));
                }
                polish += 1;
            } else if it >= max_iter {
                return Err(Error::NewtonDivergence {
                    iterations: it,
                    residual: r,
                });
            }
            let j = e.j.as_ref().expect("requested");
            let jsq = j.view((0, 0), (n + 2, n + 2)).into_owned();
            let dz = linalg::solve(&jsq, &(-&e.f), "modal Newton Jacobian")?;
            let mut trial = z.clone();
            {
                let mut head = trial.rows_mut(0, n + 2);
                head += &dz;
            }
            let et = self.eval(&trial, true)?;
            if polish > 0 && et.f.amax() >= r {
                return Ok((z, e.force, it));
            }
            z = trial;
            e = et;
            it += 1;
        }
    }

    /// Seed: stick mode with zero damping at `a_min`.
    fn seed(&self, a_min: f64) -> Result<DVector<f64>> {
        let dim = self.model.dim();
        let mut q = HarmonicSet::zeros(self.order, dim);
        *q.fundamental_mut() = self.stick.shape.clone();
        let probe = contact::evaluate(&q.scaled(a_min), self.contacts, &self.aft, false)?;
        if probe.any_slip {
            return Err(Error::Continuation {
                amplitude: a_min,
                reason: "contacts already slip at the starting amplitude".into(),
            });
        }
        Ok(self.to_scaled(&q, self.stick.omega, 0.0, a_min.ln()))
    }

    fn tangent(&self, j: &DMatrix<f64>, prev: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        let mut a = DMatrix::zeros(n + 3, n + 3);
        a.view_mut((0, 0), (n + 2, n + 3)).copy_from(j);
        a.row_mut(n + 2).copy_from(&prev.transpose());
        let mut rhs = DVector::zeros(n + 3);
        rhs[n + 2] = 1.0;
        let t = linalg::solve(&a, &rhs, "continuation tangent")?;
        Ok(t.normalize())
    }

    /// Pseudo-arclength corrector from the predicted state.
    fn correct_arclength(
        &self,
        pred: &DVector<f64>,
        t: &DVector<f64>,
        cfg: &ContinuationConfig,
    ) -> Result<(DVector<f64>, usize)> {
        let n = self.n();
        let mut z = pred.clone();
        for it in 0..cfg.max_corrector_iter {
            let e = self.eval(&z, true)?;
            let arc = t.dot(&(&z - pred));
            let r = e.f.amax().max(arc.abs());
            if r <= cfg.tol {
                return Ok((z, it));
            }
            let mut a = DMatrix::zeros(n + 3, n + 3);
            a.view_mut((0, 0), (n + 2, n + 3))
                .copy_from(e.j.as_ref().expect("requested"));
            a.row_mut(n + 2).copy_from(&t.transpose());
            let mut rhs = DVector::zeros(n + 3);
            rhs.rows_mut(0, n + 2).copy_from(&(-&e.f));
            rhs[n + 2] = -arc;
            z += linalg::solve(&a, &rhs, "arclength corrector")?;
        }
        Err(Error::NewtonDivergence {
            iterations: cfg.max_corrector_iter,
            residual: f64::NAN,
        })
    }

    pub fn continue_backbone(&self, cfg: &ContinuationConfig) -> Result<Backbone> {
        cfg.check()?;
        if cfg.order != self.order {
            return Err(Error::InvalidConfig(
                "continuation order differs from the solver order".into(),
            ));
        }
        let n = self.n();
        let s_max = cfg.a_max.ln();
        let (mut z, force, _) = self.correct_fixed(&self.seed(cfg.a_min)?, cfg.max_corrector_iter, cfg.tol)?;
        let mut points = vec![self.point_from(&z, &force)?];
        let mut t_prev = DVector::zeros(n + 3);
        t_prev[n + 2] = 1.0;
        let mut h = cfg.h0;
        let mut abort = None;
        while z[n + 2] < s_max {
            if points.len() >= cfg.max_points {
                abort = Some(format!("point limit {} reached", cfg.max_points));
                break;
            }
            let e = self.eval(&z, true)?;
            let mut t = self.tangent(e.j.as_ref().expect("requested"), &t_prev)?;
            if t[n + 2] < 0.0 {
                t = -t;
            }
            if t[n + 2] <= 1e-8 {
                abort = Some("amplitude stopped increasing along the branch".into());
                break;
            }
            let s = z[n + 2];
            let reaches_end = s + h * t[n + 2] >= s_max;
            let outcome = if reaches_end {
                let guess = &z + &t * ((s_max - s) / t[n + 2]);
                let mut g = guess;
                g[n + 2] = s_max;
                self.correct_fixed(&g, cfg.max_corrector_iter, cfg.tol)
                    .map(|(zn, _, it)| (zn, it))
            } else {
                let pred = &z + &t * h;
                self.correct_arclength(&pred, &t, cfg)
            };
            match outcome {
                Ok((zn, it)) if zn[n + 2] > s && zn[n + 1] > -1e-9 => {
                    let (zp, force, _) = self.correct_fixed(&zn, 4, cfg.tol)?;
                    let mut zp = zp;
                    if reaches_end {
                        zp[n + 2] = s_max;
                    }
                    points.push(self.point_from(&zp, &force)?);
                    z = zp;
                    t_prev = t;
                    if it <= 3 {
                        h = (2.0 * h).min(cfg.h_max);
                    } else if it >= 8 {
                        h = (0.5 * h).max(cfg.h_min);
                    }
                }
                _ => {
                    if h <= cfg.h_min {
                        abort = Some(format!(
                            "corrector failed at the minimum step near amplitude {:e}",
                            s.exp()
                        ));
                        break;
                    }
                    h = (0.5 * h).max(cfg.h_min);
                }
            }
        }
        if let Some(reason) = &abort {
            log::warn!("backbone continuation stopped early: {reason}");
        }
        Ok(Backbone {
            points,
            mode_index: self.mode_index,
            omega_stick: self.stick.omega,
            omega_slip: self.omega_slip,
            partial: abort.is_some(),
            abort_reason: abort,
        })
    }

    /// Exact modal point at amplitude `a`, starting from `guess`.
    pub fn solve_at(&self, a: f64, guess: &ModalPoint) -> Result<BackbonePoint> {
        let q = guess.solution.scaled(1.0 / guess.amplitude).with_order(self.order);
        let z0 = self.to_scaled(&q, guess.omega, guess.damping, a.ln());
        let (z, force, _) = self.correct_fixed(&z0, 30, 1e-11)?;
        let mut p = self.point_from(&z, &force)?;
        p.amplitude = a;
        Ok(p)
    }
}

/// Convenience wrapper around [`EpmcSolver::continue_backbone`].
pub fn continue_backbone(
    model: &ReducedModel,
    contacts: &[ContactElement],
    mode_index: usize,
    aft: AftConfig,
    cfg: &ContinuationConfig,
) -> Result<Backbone> {
    EpmcSolver::new(model, contacts, aft, mode_index, cfg.order)?.continue_backbone(cfg)
}

/// Interpolated modal data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalPoint {
    pub amplitude: f64,
    pub omega: f64,
    pub damping: f64,
    pub shape: DVector<Complex64>,
    pub solution: HarmonicSet,
    pub energy: f64,
}

impl From<&BackbonePoint> for ModalPoint {
    fn from(p: &BackbonePoint) -> Self {
        Self {
            amplitude: p.amplitude,
            omega: p.omega,
            damping: p.damping,
            shape: p.shape.clone(),
            solution: p.solution.clone(),
            energy: p.energy,
        }
    }
}

impl Backbone {
    pub fn amplitude_range(&self) -> (f64, f64) {
        (
            self.points.first().map_or(0.0, |p| p.amplitude),
            self.points.last().map_or(0.0, |p| p.amplitude),
        )
    }
}

/// Piecewise-linear interpolation in amplitude; the shape is re-normalized
/// to unit modal mass.
pub fn backbone_query(backbone: &Backbone, a: f64, model: &ReducedModel) -> Result<ModalPoint> {
    let pts = &backbone.points;
    let (lo, hi) = backbone.amplitude_range();
    if pts.is_empty() || a < lo * (1.0 - 1e-12) || a > hi * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            value: a,
            min: lo,
            max: hi,
        });
    }
    let j = match pts.iter().position(|p| p.amplitude >= a) {
        Some(0) | None => {
            let p = if a <= lo { &pts[0] } else { pts.last().unwrap() };
            return Ok(p.into());
        }
        Some(j) => j,
    };
    let (p0, p1) = (&pts[j - 1], &pts[j]);
    if p1.amplitude == a {
        return Ok(p1.into());
    }
    let lam = (a - p0.amplitude) / (p1.amplitude - p0.amplitude);
    let q0 = p0.solution.scaled(1.0 / p0.amplitude);
    let q1 = p1.solution.scaled(1.0 / p1.amplitude);
    let q = q1.blend(&q0, lam)?;
    let norm = mass_norm(q.fundamental(), model).sqrt();
    let q = q.scaled(1.0 / norm);
    let omega = p0.omega + lam * (p1.omega - p0.omega);
    let damping = p0.damping + lam * (p1.damping - p0.damping);
    let solution = q.scaled(a);
    Ok(ModalPoint {
        amplitude: a,
        omega,
        damping,
        shape: q.fundamental().clone(),
        energy: modal_energy(&solution, omega, model),
        solution,
    })
}

/// `2 pi E D - dW`, the energy identity of a modal point.
pub fn energy_defect(p: &BackbonePoint) -> f64 {
    2.0 * PI * p.energy * p.damping - p.dissipated_work
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jenkins() -> (ReducedModel, Vec<ContactElement>) {
        (
            ReducedModel::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1)).unwrap(),
            vec![ContactElement::uniaxial(0, 3.0, 0.5)],
        )
    }

    #[test]
    fn stick_mode_satisfies_modal_equation() {
        let (m, c) = jenkins();
        let u = HarmonicSet::from_fundamental(2, DVector::from_element(1, Complex64::new(0.01, 0.0)));
        let r = epmc_residual(&u, 2.0, 0.0, &m, &c, &AftConfig::default()).unwrap();
        assert!(r.to_flat().amax() < 1e-14);
    }

    #[test]
    fn no_contact_reduces_to_linear_residual() {
        let m = ReducedModel::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, 4.0)).unwrap();
        let u = HarmonicSet::from_fundamental(1, DVector::from_element(1, Complex64::new(0.3, 0.1)));
        let r = epmc_residual(&u, 1.5, 0.0, &m, &[], &AftConfig::default()).unwrap();
        let expect = u.fundamental() * Complex64::from(4.0 - 2.25);
        assert!((r.fundamental() - expect).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn jenkins_backbone_limits() {
        let (m, c) = jenkins();
        let cfg = ContinuationConfig {
            a_min: 0.01,
            a_max: 200.0,
            ..Default::default()
        };
        let bb = continue_backbone(&m, &c, 0, AftConfig::default(), &cfg).unwrap();
        assert!(!bb.partial);
        let first = &bb.points[0];
        let last = bb.points.last().unwrap();
        assert!((first.omega - 2.0).abs() < 1e-10);
        assert!((last.omega - 1.0).abs() / 1.0 < 5e-3, "{}", last.omega);
        assert!((last.amplitude - 200.0).abs() < 1e-9);
        for p in &bb.points {
            assert!(energy_defect(p).abs() <= 1e-6 * p.dissipated_work.abs() + 1e-12 * p.energy);
        }
    }
}
