#![allow(dead_code)]

use lco_core::model::{ContactElement, ReducedModel};
use nalgebra::DMatrix;

/// `A A^T + shift I` from row-major entries.
pub fn spd(n: usize, entries: &[f64], shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &a * a.transpose() + DMatrix::identity(n, n) * shift
}

/// Symmetric positive semidefinite `A A^T`.
pub fn spsd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &a * a.transpose()
}

pub fn scalar(m: f64, k: f64) -> ReducedModel {
    ReducedModel::new(DMatrix::from_element(1, 1, m), DMatrix::from_element(1, 1, k)).unwrap()
}

/// Unit oscillator with a grounded Jenkins element.
pub fn jenkins_oscillator(k_t: f64, f_lim: f64) -> (ReducedModel, Vec<ContactElement>) {
    (scalar(1.0, 1.0), vec![ContactElement::uniaxial(0, k_t, f_lim)])
}

/// Spring chain with unit masses, grounded at the first mass.
pub fn chain(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = DMatrix::identity(n, n);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = if i + 1 < n { 2.0 } else { 1.0 };
        if i + 1 < n {
            k[(i, i + 1)] = -1.0;
            k[(i + 1, i)] = -1.0;
        }
    }
    (m, k)
}
