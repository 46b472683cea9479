//! Truncated Fourier representation of periodic vectors.
//!
//! A periodic signal is written as `u(t) = Re{ sum_{k=0..H} u_k e^{i k w t} }`
//! with a real zeroth coefficient. The flattened real layout used by every
//! Jacobian in this crate is
//!
//! ```text
//! [u_0 (N) ; Re u_1 (N) ; Im u_1 (N) ; ... ; Re u_H (N) ; Im u_H (N)]
//! ```
//!
//! so a set holds `(2H + 1) N` real numbers.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSet {
    order: usize,
    dim: usize,
    zeroth: DVector<f64>,
    harmonics: Vec<DVector<Complex64>>,
}

impl HarmonicSet {
    pub fn zeros(order: usize, dim: usize) -> Self {
        Self {
            order,
            dim,
            zeroth: DVector::zeros(dim),
            harmonics: vec![DVector::zeros(dim); order],
        }
    }

    /// Set with only the fundamental populated.
    pub fn from_fundamental(order: usize, fundamental: DVector<Complex64>) -> Self {
        let dim = fundamental.len();
        let mut set = Self::zeros(order.max(1), dim);
        set.harmonics[0] = fundamental;
        set
    }

    pub fn from_parts(zeroth: DVector<f64>, harmonics: Vec<DVector<Complex64>>) -> Result<Self> {
        let dim = zeroth.len();
        if harmonics.iter().any(|h| h.len() != dim) {
            return Err(Error::Dimension(
                "all harmonic coefficient vectors must share one length".into(),
            ));
        }
        let set = Self {
            order: harmonics.len(),
            dim,
            zeroth,
            harmonics,
        };
        set.check_finite()?;
        Ok(set)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat_len(&self) -> usize {
        flat_len(self.order, self.dim)
    }

    pub fn zeroth(&self) -> &DVector<f64> {
        &self.zeroth
    }

    pub fn zeroth_mut(&mut self) -> &mut DVector<f64> {
        &mut self.zeroth
    }

    /// Coefficient of harmonic `k >= 1`.
    pub fn harmonic(&self, k: usize) -> &DVector<Complex64> {
        &self.harmonics[k - 1]
    }

    pub fn harmonic_mut(&mut self, k: usize) -> &mut DVector<Complex64> {
        &mut self.harmonics[k - 1]
    }

    pub fn fundamental(&self) -> &DVector<Complex64> {
        self.harmonic(1)
    }

    pub fn fundamental_mut(&mut self) -> &mut DVector<Complex64> {
        self.harmonic_mut(1)
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(self.flat_len());
        out.rows_mut(0, n).copy_from(&self.zeroth);
        for (j, h) in self.harmonics.iter().enumerate() {
            let base = (2 * j + 1) * n;
            for i in 0..n {
                out[base + i] = h[i].re;
                out[base + n + i] = h[i].im;
            }
        }
        out
    }

    pub fn from_flat(order: usize, dim: usize, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != flat_len(order, dim) {
            return Err(Error::Dimension(format!(
                "flattened length {} does not match (2H+1)N = {}",
                flat.len(),
                flat_len(order, dim)
            )));
        }
        let zeroth = flat.rows(0, dim).into_owned();
        let harmonics = (0..order)
            .map(|j| {
                let base = (2 * j + 1) * dim;
                DVector::from_fn(dim, |i, _| {
                    Complex64::new(flat[base + i], flat[base + dim + i])
                })
            })
            .collect();
        Self::from_parts(zeroth, harmonics)
    }

    pub fn check_finite(&self) -> Result<()> {
        let ok = self.zeroth.iter().all(|x| x.is_finite())
            && self
                .harmonics
                .iter()
                .all(|h| h.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::Consistency("harmonic set contains non-finite entries".into()))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            zeroth: &self.zeroth * factor,
            harmonics: self.harmonics.iter().map(|h| h * Complex64::from(factor)).collect(),
        }
    }

    /// Time shift by `theta / w`: harmonic k is multiplied by `e^{i k theta}`.
    pub fn phase_shifted(&self, theta: f64) -> Self {
        let harmonics = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(j, h)| h * Complex64::from_polar(1.0, (j + 1) as f64 * theta))
            .collect();
        Self {
            order: self.order,
            dim: self.dim,
            zeroth: self.zeroth.clone(),
            harmonics,
        }
    }

    /// Copy truncated or zero-padded to another order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut out = Self::zeros(order, self.dim);
        out.zeroth.copy_from(&self.zeroth);
        for k in 1..=order.min(self.order) {
            out.harmonics[k - 1].copy_from(&self.harmonics[k - 1]);
        }
        out
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn blend(&self, other: &Self, alpha: f64) -> Result<Self> {
        self.same_shape(other)?;
        let a = alpha;
        let b = 1.0 - alpha;
        Ok(Self {
            order: self.order,
            dim: self.dim,
            zeroth: &self.zeroth * a + &other.zeroth * b,
            harmonics: self
                .harmonics
                .iter()
                .zip(&other.harmonics)
                .map(|(x, y)| x * Complex64::from(a) + y * Complex64::from(b))
                .collect(),
        })
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "harmonic sets differ in shape: (H={}, N={}) vs (H={}, N={})",
                self.order, self.dim, other.order, other.dim
            )));
        }
        Ok(())
    }

    /// Evaluates the signal of coordinate `i` at phase `tau = w t`.
    pub fn eval(&self, i: usize, tau: f64) -> f64 {
        let mut v = self.zeroth[i];
        for (j, h) in self.harmonics.iter().enumerate() {
            let k = (j + 1) as f64;
            v += h[i].re * (k * tau).cos() - h[i].im * (k * tau).sin();
        }
        v
    }

    /// Derivative with respect to `tau` of coordinate `i`.
    pub fn eval_dtau(&self, i: usize, tau: f64) -> f64 {
        let mut v = 0.0;
        for (j, h) in self.harmonics.iter().enumerate() {
            let k = (j + 1) as f64;
            v += -k * h[i].re * (k * tau).sin() - k * h[i].im * (k * tau).cos();
        }
        v
    }
}

pub fn flat_len(order: usize, dim: usize) -> usize {
    (2 * order + 1) * dim
}

/// Flattened index of the real (`imag = false`) or imaginary part of
/// coordinate `i` in harmonic `k`. `k = 0` only has a real part.
pub fn flat_index(k: usize, imag: bool, i: usize, dim: usize) -> usize {
    if k == 0 {
        debug_assert!(!imag);
        i
    } else {
        (2 * k - 1) * dim + if imag { dim } else { 0 } + i
    }
}

/// Hermitian inner product `a^H b`.
pub fn hdot(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn complex_norm(a: &DVector<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
