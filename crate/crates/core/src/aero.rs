//! Aerodynamic influence-coefficient model, work and damping measures, and an
//! iterative surrogate that behaves like an external flow solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::harmonic::{complex_norm, hdot, HarmonicSet};

/// Influence matrices of one nodal diameter at the stick and slip reference
/// frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroSet {
    pub nodal_diameter: i32,
    pub omega_stick: f64,
    pub omega_slip: f64,
    pub g_stick: DMatrix<Complex64>,
    pub g_slip: DMatrix<Complex64>,
}

impl AeroSet {
    pub fn validate(&self, dim: usize) -> Result<()> {
        for g in [&self.g_stick, &self.g_slip] {
            if g.shape() != (dim, dim) {
                return Err(Error::Dimension(format!(
                    "influence matrix of ND {} is {:?}, expected {dim}x{dim}",
                    self.nodal_diameter,
                    g.shape()
                )));
            }
            if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "influence matrix of ND {} has non-finite entries",
                    self.nodal_diameter
                )));
            }
        }
        if !(self.omega_stick > 0.0 && self.omega_slip > 0.0) {
            return Err(Error::InvalidModel("reference frequencies must be positive".into()));
        }
        if self.omega_stick == self.omega_slip {
            return Err(Error::InvalidModel(
                "stick and slip reference frequencies coincide; interpolation undefined".into(),
            ));
        }
        Ok(())
    }

    fn lambda(&self, omega: f64) -> f64 {
        (omega - self.omega_slip) / (self.omega_stick - self.omega_slip)
    }

    /// `G(w)`, linearly interpolated between the references, or `G_stick`
    /// when the frequency dependence is switched off.
    pub fn g_at(&self, omega: f64, freq_dependent: bool) -> DMatrix<Complex64> {
        if !freq_dependent {
            return self.g_stick.clone();
        }
        let lo = self.omega_stick.min(self.omega_slip);
        let hi = self.omega_stick.max(self.omega_slip);
        if omega < 0.8 * lo || omega > 1.2 * hi {
            log::warn!(
                "frequency {omega:.6e} extrapolates the influence model of ND {} beyond 20%",
                self.nodal_diameter
            );
        }
        // weighted form is exact at both ends
        let lam = self.lambda(omega);
        &self.g_stick * Complex64::from(lam) + &self.g_slip * Complex64::from(1.0 - lam)
    }

    /// `dG/dw` (zero without frequency dependence).
    pub fn dg_domega(&self, freq_dependent: bool) -> DMatrix<Complex64> {
        if !freq_dependent {
            return DMatrix::zeros(self.g_stick.nrows(), self.g_stick.ncols());
        }
        (&self.g_stick - &self.g_slip) * Complex64::from(1.0 / (self.omega_stick - self.omega_slip))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroInfluenceModel {
    pub sets: Vec<AeroSet>,
}

impl AeroInfluenceModel {
    pub fn get(&self, nd: i32) -> Result<&AeroSet> {
        self.sets
            .iter()
            .find(|s| s.nodal_diameter == nd)
            .ok_or_else(|| Error::InvalidConfig(format!("no influence matrices for nodal diameter {nd}")))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut nds: Vec<i32> = self.sets.iter().map(|s| s.nodal_diameter).collect();
        nds.sort_unstable();
        if nds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("nodal diameter listed twice in aero model".into()));
        }
        self.sets.iter().try_for_each(|s| s.validate(dim))
    }
}

/// First-harmonic force `G(w) u_1`.
pub fn influence_force(
    u1: &DVector<Complex64>,
    omega: f64,
    set: &AeroSet,
    freq_dependent: bool,
) -> DVector<Complex64> {
    set.g_at(omega, freq_dependent) * u1
}

/// Work per cycle done by the fundamental force on the structure,
/// `Re{-i pi u_1^H f_1}`. Positive values feed energy into the structure.
pub fn aero_work(u1: &DVector<Complex64>, _omega: f64, f1: &DVector<Complex64>) -> f64 {
    (Complex64::new(0.0, -PI) * hdot(u1, f1)).re
}

/// `dW / (2 pi E)`; positive when energy is removed.
pub fn damping_ratio(dissipated_work: f64, energy: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "energy normalization must be positive, got {energy:e}"
        )));
    }
    Ok(dissipated_work / (2.0 * PI * energy))
}

/// Aerodynamic damping from supplied work; negative means self-excitation.
pub fn aero_damping(supplied_work: f64, energy: f64) -> Result<f64> {
    damping_ratio(-supplied_work, energy)
}

/// Internal state of the surrogate flow solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFluidState {
    /// Current force per harmonic of the fluid order (harmonic 1 first).
    pub force: Vec<DVector<Complex64>>,
    /// Geometric relaxation rate in (0, 1).
    pub rho: f64,
    /// Cubic amplitude correction coefficient.
    pub kappa: f64,
    /// Residual history of the last call.
    pub history: Vec<f64>,
    pub max_iter: usize,
    /// Whether the underlying influence law is frequency dependent.
    pub freq_dependent: bool,
}

impl SurrogateFluidState {
    pub fn new(dim: usize, order: usize, rho: f64, kappa: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig("fluid relaxation rate must lie in (0, 1)".into()));
        }
        if !kappa.is_finite() {
            return Err(Error::InvalidConfig("nonlinearity coefficient must be finite".into()));
        }
        Ok(Self {
            force: vec![DVector::zeros(dim); order.max(1)],
            rho,
            kappa,
            history: Vec::new(),
            max_iter: 500,
            freq_dependent: true,
        })
    }

    pub fn order(&self) -> usize {
        self.force.len()
    }

    /// Closed-form target force on the fundamental.
    pub fn target(&self, u1: &DVector<Complex64>, omega: f64, set: &AeroSet) -> DVector<Complex64> {
        let amp2 = complex_norm(u1).powi(2);
        influence_force(u1, omega, set, self.freq_dependent) * Complex64::from(1.0 + self.kappa * amp2)
    }
}

/// Relaxes the surrogate toward its target force until the relative residual
/// drops below `eps_a`. Returns the force on the structural order.
pub fn surrogate_fluid_solve(
    u: &HarmonicSet,
    omega: f64,
    state: SurrogateFluidState,
    set: &AeroSet,
    eps_a: f64,
) -> Result<(HarmonicSet, SurrogateFluidState)> {
    if !(eps_a > 0.0) {
        return Err(Error::InvalidConfig("fluid tolerance must be positive".into()));
    }
    let mut st = state;
    if st.force[0].len() != u.dim() {
        return Err(Error::Dimension("fluid state and structure differ in size".into()));
    }
    let target = st.target(u.fundamental(), omega, set);
    let scale = complex_norm(&target);
    st.history.clear();
    let residual = |x: &DVector<Complex64>| {
        let d = complex_norm(&(&target - x));
        if scale > 0.0 {
            d / scale
        } else {
            d
        }
    };
    loop {
        let r = residual(&st.force[0]);
        st.history.push(r);
        if r < eps_a {
            break;
        }
        if st.history.len() > st.max_iter {
            return Err(Error::FluidIterationCap {
                iterations: st.max_iter,
                residual: r,
            });
        }
        let x = &st.force[0];
        st.force[0] = x + (&target - x) * Complex64::from(st.rho);
        for h in st.force.iter_mut().skip(1) {
            *h *= Complex64::from(1.0 - st.rho);
        }
    }
    let mut f = HarmonicSet::zeros(u.order(), u.dim());
    for k in 1..=u.order().min(st.order()) {
        *f.harmonic_mut(k) = st.force[k - 1].clone();
    }
    Ok((f, st))
}
