//! Structural harmonic balance residual and its anchored Newton solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contact::{self, AftConfig};
use crate::error::{Error, Result};
use crate::harmonic::{flat_index, HarmonicSet};
use crate::linalg;
use crate::model::{ContactElement, ReducedModel};

/// Bound on the relative change of the motion or frequency in one Newton step.
pub const MAX_RELATIVE_STEP: f64 = 0.1;

/// Fixes `Re u_1[coord] = value`, removing the phase indeterminacy of an
/// autonomous periodic solution and excluding the trivial one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnchor {
    pub coord: usize,
    pub value: f64,
}

impl PhaseAnchor {
    pub fn new(coord: usize, value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidConfig("anchor value must be positive".into()));
        }
        Ok(Self { coord, value })
    }

    /// Rotates the global phase so the anchored real part equals `value`,
    /// keeping the sign of the imaginary part.
    pub fn apply(&self, u: &HarmonicSet) -> Result<HarmonicSet> {
        if self.coord >= u.dim() {
            return Err(Error::InvalidConfig(format!(
                "anchor coordinate {} out of range",
                self.coord
            )));
        }
        let z = u.fundamental()[self.coord];
        let mag = z.norm();
        if mag < self.value {
            return Err(Error::AnchorViolation {
                coord: self.coord,
                magnitude: mag,
                anchor: self.value,
            });
        }
        let target = (self.value / mag).clamp(-1.0, 1.0).acos();
        let target = if z.im < 0.0 { -target } else { target };
        let rotated = u.phase_shifted(target - z.arg());
        let mut out = rotated;
        // remove round-off so the constraint holds exactly
        let zi = out.fundamental()[self.coord];
        out.fundamental_mut()[self.coord] = Complex64::new(self.value, zi.im);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Tolerance on the relative residual norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step length in (0, 1].
    pub damping: f64,
    /// Build the Jacobian by finite differences instead of analytically.
    pub fd_jacobian: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            damping: 1.0,
            fd_jacobian: false,
        }
    }
}

impl NewtonConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(
                "Newton tolerance must be positive, iterations nonzero, damping in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Aerodynamic force as a functional of the structural solution, as seen by
/// the structural solver.
pub trait AeroForce {
    fn eval(&self, u: &HarmonicSet, omega: f64) -> Result<HarmonicSet>;

    /// Derivatives of the flattened force with respect to the flattened
    /// displacement and to the frequency.
    fn jacobian(&self, u: &HarmonicSet, omega: f64) -> Result<(DMatrix<f64>, DVector<f64>)>;
}

/// A force that does not depend on the motion.
pub struct FixedForce(pub HarmonicSet);

impl AeroForce for FixedForce {
    fn eval(&self, _u: &HarmonicSet, _omega: f64) -> Result<HarmonicSet> {
        Ok(self.0.clone())
    }

    fn jacobian(&self, u: &HarmonicSet, _omega: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = u.flat_len();
        Ok((DMatrix::zeros(n, n), DVector::zeros(n)))
    }
}

/// First-harmonic force `G u_1` with a fixed complex matrix.
pub struct LinearFundamental(pub DMatrix<Complex64>);

impl AeroForce for LinearFundamental {
    fn eval(&self, u: &HarmonicSet, _omega: f64) -> Result<HarmonicSet> {
        let mut f = HarmonicSet::zeros(u.order(), u.dim());
        *f.fundamental_mut() = &self.0 * u.fundamental();
        Ok(f)
    }

    fn jacobian(&self, u: &HarmonicSet, _omega: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = u.flat_len();
        let mut j = DMatrix::zeros(n, n);
        embed_fundamental_block(&mut j, &linalg::realify(&self.0), u.dim());
        Ok((j, DVector::zeros(n)))
    }
}

/// Writes a realified `2N x 2N` block acting on `[Re u_1; Im u_1]` into a
/// flat-layout matrix.
pub fn embed_fundamental_block(target: &mut DMatrix<f64>, block: &DMatrix<f64>, dim: usize) {
    let base = flat_index(1, false, 0, dim);
    let mut view = target.view_mut((base, base), (2 * dim, 2 * dim));
    view += block;
}

/// `S(w) u + f_c(u) - f_a` per harmonic.
pub fn structural_residual(
    u: &HarmonicSet,
    omega: f64,
    f_a: &HarmonicSet,
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
    u.same_shape(f_a)?;
    let fc = contact::evaluate(u, contacts, cfg, false)?.force;
    let flat = linear_part(u, omega, model) + fc.to_flat() - f_a.to_flat();
    HarmonicSet::from_flat(u.order(), u.dim(), &flat)
}

/// `S(w) u` in flat layout.
pub fn linear_part(u: &HarmonicSet, omega: f64, model: &ReducedModel) -> DVector<f64> {
    let n = u.dim();
    let mut out = DVector::zeros(u.flat_len());
    out.rows_mut(0, n).copy_from(&(model.stiffness() * u.zeroth()));
    for k in 1..=u.order() {
        let s = crate::model::assemble_dynamic_stiffness(model, omega, k);
        let h = u.harmonic(k);
        let re = linalg::real_part(h);
        let im = linalg::imag_part(h);
        out.rows_mut(flat_index(k, false, 0, n), n).copy_from(&(&s * re));
        out.rows_mut(flat_index(k, true, 0, n), n).copy_from(&(&s * im));
    }
    out
}

/// Block-diagonal `S(w)` over the flat layout.
pub fn dynamic_stiffness_blocks(model: &ReducedModel, omega: f64, order: usize) -> DMatrix<f64> {
    let n = model.dim();
    let len = (2 * order + 1) * n;
    let mut out = DMatrix::zeros(len, len);
    out.view_mut((0, 0), (n, n)).copy_from(model.stiffness());
    for k in 1..=order {
        let s = crate::model::assemble_dynamic_stiffness(model, omega, k);
        for imag in [false, true] {
            let b = flat_index(k, imag, 0, n);
            out.view_mut((b, b), (n, n)).copy_from(&s);
        }
    }
    out
}

/// `dS(w)u / dw` in flat layout.
pub fn dynamic_stiffness_domega(u: &HarmonicSet, omega: f64, model: &ReducedModel) -> DVector<f64> {
    let n = u.dim();
    let mut out = DVector::zeros(u.flat_len());
    for k in 1..=u.order() {
        let c = -2.0 * (k * k) as f64 * omega;
        let h = u.harmonic(k);
        let re = model.mass() * linalg::real_part(h) * c;
        let im = model.mass() * linalg::imag_part(h) * c;
        out.rows_mut(flat_index(k, false, 0, n), n).copy_from(&re);
        out.rows_mut(flat_index(k, true, 0, n), n).copy_from(&im);
    }
    out
}

/// Residual scale used for relative convergence checks.
pub fn residual_scale(model: &ReducedModel, u: &HarmonicSet) -> f64 {
    let kref = model
        .stiffness()
        .diagonal()
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    kref * u.to_flat().norm().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone)]
pub struct StructuralSolution {
    pub u: HarmonicSet,
    pub omega: f64,
    pub iterations: usize,
    /// Relative residual norm at the returned point.
    pub residual: f64,
}

struct Problem<'a> {
    model: &'a ReducedModel,
    contacts: &'a [ContactElement],
    aero: &'a dyn AeroForce,
    aft: &'a AftConfig,
    anchor: PhaseAnchor,
    order: usize,
    dim: usize,
}

impl Problem<'_> {
    fn anchor_index(&self) -> usize {
        flat_index(1, false, self.anchor.coord, self.dim)
    }

    fn unpack(&self, x: &DVector<f64>) -> Result<(HarmonicSet, f64)> {
        let len = x.len() - 1;
        let a = self.anchor_index();
        let mut flat = DVector::zeros(x.len());
        let mut src = 0;
        for i in 0..flat.len() {
            if i == a {
                flat[i] = self.anchor.value;
            } else {
                flat[i] = x[src];
                src += 1;
            }
        }
        Ok((HarmonicSet::from_flat(self.order, self.dim, &flat)?, x[len]))
    }

    /// Largest step fraction keeping the change in the motion and in the
    /// frequency within `MAX_RELATIVE_STEP` of their current size. Near the
    /// onset of slip a full Newton step can fall into the stuck region, where
    /// the anchored residual is flat in amplitude and Newton stalls.
    fn step_limit(&self, x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
        let n = x.len() - 1;
        let u = (x.rows(0, n).norm_squared() + self.anchor.value.powi(2)).sqrt();
        let du = dx.rows(0, n).norm();
        let dw = dx[n].abs();
        let mut t = 1.0f64;
        if du > MAX_RELATIVE_STEP * u {
            t = t.min(MAX_RELATIVE_STEP * u / du);
        }
        if dw > MAX_RELATIVE_STEP * x[n].abs() {
            t = t.min(MAX_RELATIVE_STEP * x[n].abs() / dw);
        }
        t
    }

    fn pack(&self, u: &HarmonicSet, omega: f64) -> DVector<f64> {
        let flat = u.to_flat();
        let a = self.anchor_index();
        let mut x = DVector::zeros(flat.len());
        let mut dst = 0;
        for (i, v) in flat.iter().enumerate() {
            if i != a {
                x[dst] = *v;
                dst += 1;
            }
        }
        x[flat.len() - 1] = omega;
        x
    }

    fn residual(&self, x: &DVector<f64>, jac: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>, f64)> {
        let (u, omega) = self.unpack(x)?;
        if !(omega > 0.0) {
            return Err(Error::Consistency(format!("nonpositive frequency {omega:e} during Newton")));
        }
        let aft = contact::evaluate(&u, self.contacts, self.aft, jac)?;
        let fa = self.aero.eval(&u, omega)?;
        let r = linear_part(&u, omega, self.model) + aft.force.to_flat() - fa.to_flat();
        let scale = residual_scale(self.model, &u);
        let j = if jac {
            let (ja, dfa) = self.aero.jacobian(&u, omega)?;
            let full = dynamic_stiffness_blocks(self.model, omega, self.order)
                + aft.jacobian.expect("requested")
                - ja;
            let domega = dynamic_stiffness_domega(&u, omega, self.model) - dfa;
            Some(self.reduce_columns(&full, &domega))
        } else {
            None
        };
        Ok((r, j, scale))
    }

    fn reduce_columns(&self, full: &DMatrix<f64>, domega: &DVector<f64>) -> DMatrix<f64> {
        let n = full.nrows();
        let a = self.anchor_index();
        let mut j = DMatrix::zeros(n, n);
        let mut dst = 0;
        for c in 0..n {
            if c != a {
                j.set_column(dst, &full.column(c));
                dst += 1;
            }
        }
        j.set_column(n - 1, domega);
        j
    }

    fn fd_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let h = 1e-7 * x[c].abs().max(1e-7 * x.amax()).max(f64::MIN_POSITIVE);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let rp = self.residual(&xp, false)?.0;
            let rm = self.residual(&xm, false)?.0;
            j.set_column(c, &((rp - rm) / (2.0 * h)));
        }
        Ok(j)
    }
}

/// Newton iteration on `{u without the anchored entry, w}`.
#[allow(clippy::too_many_arguments)]
pub fn solve_structural(
    u0: &HarmonicSet,
    omega0: f64,
    aero: &dyn AeroForce,
    anchor: PhaseAnchor,
    model: &ReducedModel,
    contacts: &[ContactElement],
    aft: &AftConfig,
    cfg: &NewtonConfig,
) -> Result<StructuralSolution> {
    cfg.check()?;
    if u0.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "initial guess has {} coordinates, model has {}",
            u0.dim(),
            model.dim()
        )));
    }
    let start = anchor.apply(u0)?;
    let problem = Problem {
        model,
        contacts,
        aero,
        aft,
        anchor,
        order: u0.order(),
        dim: u0.dim(),
    };
    let mut x = problem.pack(&start, omega0);
    let (mut r, mut j, scale) = problem.residual(&x, !cfg.fd_jacobian)?;
    let mut rel = r.norm() / scale;
    let mut it = 0;
    while rel > cfg.tol {
        if it >= cfg.max_iter {
            return Err(Error::NewtonDivergence {
                iterations: it,
                residual: rel,
            });
        }
        let jm = match j.take() {
            Some(m) => m,
            None => problem.fd_jacobian(&x)?,
        };
        let dx = linalg::solve(&jm, &(-&r), "structural Newton Jacobian")?;
        let mut step = cfg.damping.min(problem.step_limit(&x, &dx));
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &x + &dx * step;
            if let Ok((rt, jt, st)) = problem.residual(&trial, !cfg.fd_jacobian) {
                let relt = rt.norm() / st;
                if relt < (1.0 - 1e-4 * step) * rel || relt <= cfg.tol {
                    accepted = Some((trial, rt, jt, st, relt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, rn, jn, _, reln)) = accepted else {
            return Err(Error::NewtonDivergence {
                iterations: it,
                residual: rel,
            });
        };
        x = xn;
        r = rn;
        j = jn;
        rel = reln;
        it += 1;
    }
    let (u, omega) = problem.unpack(&x)?;
    let mag = u.fundamental()[anchor.coord].norm();
    if mag < anchor.value * (1.0 - 1e-12) {
        return Err(Error::AnchorViolation {
            coord: anchor.coord,
            magnitude: mag,
            anchor: anchor.value,
        });
    }
    Ok(StructuralSolution {
        u,
        omega,
        iterations: it,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> ReducedModel {
        ReducedModel::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, 4.0)).unwrap()
    }

    #[test]
    fn anchor_rotation_sets_real_part() {
        let u = HarmonicSet::from_fundamental(2, DVector::from_element(1, Complex64::new(-1.0, 2.0)));
        let a = PhaseAnchor::new(0, 0.5).unwrap();
        let r = a.apply(&u).unwrap();
        assert_eq!(r.fundamental()[0].re, 0.5);
        assert!((r.fundamental()[0].norm() - 5f64.sqrt()).abs() < 1e-12);
        assert!(r.fundamental()[0].im > 0.0);
    }

    #[test]
    fn anchor_larger_than_amplitude_is_rejected() {
        let u = HarmonicSet::from_fundamental(1, DVector::from_element(1, Complex64::new(0.1, 0.0)));
        let a = PhaseAnchor::new(0, 0.5).unwrap();
        assert!(matches!(a.apply(&u), Err(Error::AnchorViolation { .. })));
    }

    #[test]
    fn trivial_equilibrium_has_zero_residual() {
        let m = oscillator();
        let u = HarmonicSet::zeros(2, 1);
        let r = structural_residual(&u, 3.0, &u, &m, &[], &AftConfig::default()).unwrap();
        assert_eq!(r.to_flat().amax(), 0.0);
    }

    #[test]
    fn constructed_stick_solution_has_zero_residual() {
        let m = oscillator();
        let c = [ContactElement::uniaxial(0, 3.0, 100.0)];
        let u = HarmonicSet::from_fundamental(1, DVector::from_element(1, Complex64::new(0.2, -0.1)));
        let w = 1.3;
        let fa = u.scaled(4.0 + 3.0 - w * w);
        let r = structural_residual(&u, w, &fa, &m, &c, &AftConfig::default()).unwrap();
        assert!(r.to_flat().amax() < 1e-14);
    }
}
