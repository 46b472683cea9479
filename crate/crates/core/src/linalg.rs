//! Small dense linear-algebra helpers shared across solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Generalized symmetric eigenproblem `K x = lambda M x` with `M` SPD.
///
/// Eigenvalues ascend; eigenvectors are `M`-normalized.
pub fn generalized_symmetric_eigen(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if k.shape() != m.shape() || !m.is_square() {
        return Err(Error::Dimension(format!(
            "stiffness is {:?} but mass is {:?}",
            k.shape(),
            m.shape()
        )));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("mass matrix is not symmetric positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Cholesky factor of the mass matrix".into()))?;
    let a = symmetrize(&(&l_inv * k * l_inv.transpose()));
    let eig = a.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vecs = DMatrix::zeros(n, n);
    let back = l_inv.transpose();
    for (c, &j) in order.iter().enumerate() {
        let x = &back * eig.eigenvectors.column(j);
        vecs.set_column(c, &x);
    }
    Ok((vals, vecs))
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Real 2N x 2N form `[Re -Im; Im Re]` of a complex N x N matrix, acting on
/// `[Re x; Im x]`.
pub fn realify(g: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = g.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = g[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

pub fn complex_mat_vec(g: &DMatrix<Complex64>, x: &DVector<Complex64>) -> DVector<Complex64> {
    g * x
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(Complex64::from)
}

pub fn real_part(x: &DVector<Complex64>) -> DVector<f64> {
    x.map(|z| z.re)
}

pub fn imag_part(x: &DVector<Complex64>) -> DVector<f64> {
    x.map(|z| z.im)
}
