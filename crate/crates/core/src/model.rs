//! Structural data types, dynamic stiffness, Craig-Bampton reduction and the
//! two linear limit eigenproblems (elastic stick, frictionless slip).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::HarmonicSet;
use crate::linalg;

/// Reduced sector model. Contact springs are not part of `stiffness`.
///
/// When `recovery` is present, `sensor_coord` indexes rows of the recovered
/// (full) displacement vector; otherwise it indexes reduced coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    recovery: Option<DMatrix<f64>>,
    labels: Vec<String>,
    sensor_coord: usize,
    dominant_coord: usize,
    span_length: Option<f64>,
}

impl ReducedModel {
    pub fn new(mass: DMatrix<f64>, stiffness: DMatrix<f64>) -> Result<Self> {
        let n = mass.nrows();
        let labels = (0..n).map(|i| format!("q{i}")).collect();
        Self::with_details(mass, stiffness, None, labels, 0, 0, None)
    }

    pub fn with_details(
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        recovery: Option<DMatrix<f64>>,
        labels: Vec<String>,
        sensor_coord: usize,
        dominant_coord: usize,
        span_length: Option<f64>,
    ) -> Result<Self> {
        let model = Self {
            mass,
            stiffness,
            recovery,
            labels,
            sensor_coord,
            dominant_coord,
            span_length,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let n = self.mass.nrows();
        if n == 0 {
            return Err(Error::InvalidModel("model has no coordinates".into()));
        }
        if !self.mass.is_square() || self.stiffness.shape() != self.mass.shape() {
            return Err(Error::Dimension(format!(
                "mass is {:?}, stiffness is {:?}",
                self.mass.shape(),
                self.stiffness.shape()
            )));
        }
        if self.mass.iter().chain(self.stiffness.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("mass or stiffness has non-finite entries".into()));
        }
        if !linalg::is_symmetric(&self.mass, 1e-10) {
            return Err(Error::InvalidModel("mass matrix is not symmetric".into()));
        }
        if !linalg::is_symmetric(&self.stiffness, 1e-10) {
            return Err(Error::InvalidModel("stiffness matrix is not symmetric".into()));
        }
        if self.mass.clone().cholesky().is_none() {
            return Err(Error::InvalidModel(
                "mass matrix is not symmetric positive definite".into(),
            ));
        }
        let kmin = linalg::symmetrize(&self.stiffness)
            .symmetric_eigenvalues()
            .min();
        if kmin < -1e-10 * self.stiffness.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidModel(format!(
                "stiffness matrix is not positive semidefinite (smallest eigenvalue {kmin:e})"
            )));
        }
        if self.labels.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} labels given for {} coordinates",
                self.labels.len(),
                n
            )));
        }
        if self.dominant_coord >= n {
            return Err(Error::InvalidModel(format!(
                "dominant coordinate {} out of range 0..{}",
                self.dominant_coord, n
            )));
        }
        let sensor_rows = match &self.recovery {
            Some(t) => {
                if t.ncols() != n {
                    return Err(Error::Dimension(format!(
                        "recovery matrix has {} columns, model has {} coordinates",
                        t.ncols(),
                        n
                    )));
                }
                t.nrows()
            }
            None => n,
        };
        if self.sensor_coord >= sensor_rows {
            return Err(Error::InvalidModel(format!(
                "sensor index {} out of range 0..{}",
                self.sensor_coord, sensor_rows
            )));
        }
        if let Some(l) = self.span_length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidModel("span length must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn recovery(&self) -> Option<&DMatrix<f64>> {
        self.recovery.as_ref()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sensor_coord(&self) -> usize {
        self.sensor_coord
    }

    pub fn dominant_coord(&self) -> usize {
        self.dominant_coord
    }

    pub fn span_length(&self) -> Option<f64> {
        self.span_length
    }
}

/// Node-pair elastic Coulomb element acting on one or two tangential
/// relative coordinates. Stiffness and limit force are already lumped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactElement {
    pub coord_x: usize,
    pub coord_y: Option<usize>,
    pub k_t: f64,
    pub f_lim: f64,
}

impl ContactElement {
    pub fn planar(coord_x: usize, coord_y: usize, k_t: f64, f_lim: f64) -> Self {
        Self {
            coord_x,
            coord_y: Some(coord_y),
            k_t,
            f_lim,
        }
    }

    pub fn uniaxial(coord: usize, k_t: f64, f_lim: f64) -> Self {
        Self {
            coord_x: coord,
            coord_y: None,
            k_t,
            f_lim,
        }
    }

    pub fn coords(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.coord_x).chain(self.coord_y)
    }
}

/// Checks element parameters and that no coordinate is used twice.
pub fn validate_contacts(model: &ReducedModel, contacts: &[ContactElement]) -> Result<()> {
    let n = model.dim();
    let mut seen = vec![false; n];
    for (e, c) in contacts.iter().enumerate() {
        if !(c.k_t > 0.0 && c.k_t.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "contact {e}: tangential stiffness must be positive and finite"
            )));
        }
        if !(c.f_lim >= 0.0 && c.f_lim.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "contact {e}: limit friction force must be finite and nonnegative"
            )));
        }
        for i in c.coords() {
            if i >= n {
                return Err(Error::InvalidModel(format!(
                    "contact {e}: coordinate {i} out of range 0..{n}"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidModel(format!(
                    "contact {e}: coordinate {i} already used by another contact"
                )));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// Stiffness added by fully sticking contacts.
pub fn contact_stiffness(dim: usize, contacts: &[ContactElement]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(dim, dim);
    for c in contacts {
        for i in c.coords() {
            k[(i, i)] += c.k_t;
        }
    }
    k
}

/// `K - (k w)^2 M`.
pub fn assemble_dynamic_stiffness(model: &ReducedModel, omega: f64, k: usize) -> DMatrix<f64> {
    let kw = k as f64 * omega;
    model.stiffness() - model.mass() * (kw * kw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Stick,
    Slip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMode {
    pub shape: DVector<Complex64>,
    pub omega: f64,
    pub kind: ModeKind,
    /// Zero-frequency mode (slip can remove all grounding).
    pub rigid: bool,
}

/// Generalized eigenpairs of `(K + K_contact(kind), M)`, mass-normalized and
/// sorted ascending.
pub fn linear_eigen(
    model: &ReducedModel,
    contacts: &[ContactElement],
    kind: ModeKind,
) -> Result<Vec<LinearMode>> {
    validate_contacts(model, contacts)?;
    let n = model.dim();
    let mut k = model.stiffness().clone();
    if kind == ModeKind::Stick {
        k += contact_stiffness(n, contacts);
    }
    let (vals, vecs) = linalg::generalized_symmetric_eigen(&k, model.mass())?;
    let scale = vals.amax().max(f64::MIN_POSITIVE);
    let mut modes: Vec<(f64, usize, DVector<f64>)> = (0..n)
        .map(|j| {
            let mut v = vecs.column(j).into_owned();
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v = -v;
            }
            (vals[j], imax, v)
        })
        .collect();
    let tol = 1e-10 * scale;
    modes.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tol {
            a.1.cmp(&b.1)
        } else {
            a.0.total_cmp(&b.0)
        }
    });
    Ok(modes
        .into_iter()
        .map(|(lambda, _, v)| {
            let rigid = lambda <= 1e-12 * scale;
            LinearMode {
                shape: v.map(Complex64::from),
                omega: if rigid { 0.0 } else { lambda.sqrt() },
                kind,
                rigid,
            }
        })
        .collect())
}

/// `|u_1[sensor]|`, recovered to full coordinates first when a recovery
/// basis is present.
pub fn recover_sensor_amplitude(u: &HarmonicSet, model: &ReducedModel) -> Result<f64> {
    if u.order() == 0 {
        return Err(Error::InvalidConfig(
            "sensor amplitude needs at least one harmonic".into(),
        ));
    }
    if u.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "harmonic set has {} coordinates, model has {}",
            u.dim(),
            model.dim()
        )));
    }
    let u1 = u.fundamental();
    let s = model.sensor_coord();
    Ok(match model.recovery() {
        Some(t) => {
            let row = t.row(s);
            row.iter()
                .zip(u1.iter())
                .map(|(a, z)| z * *a)
                .sum::<Complex64>()
                .norm()
        }
        None => u1[s].norm(),
    })
}

/// Output of a Craig-Bampton reduction. Reduced coordinates are ordered as
/// the interface DOFs (in the given order) followed by the fixed-interface
/// modes; recovery rows keep the original full ordering.
#[derive(Debug, Clone)]
pub struct CbReduction {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub recovery: DMatrix<f64>,
    pub fixed_interface_omegas: Vec<f64>,
}

impl CbReduction {
    pub fn into_model(
        self,
        labels: Vec<String>,
        sensor_dof: usize,
        dominant_coord: usize,
        span_length: Option<f64>,
    ) -> Result<ReducedModel> {
        ReducedModel::with_details(
            linalg::symmetrize(&self.mass),
            linalg::symmetrize(&self.stiffness),
            Some(self.recovery),
            labels,
            sensor_dof,
            dominant_coord,
            span_length,
        )
    }
}

pub fn craig_bampton_reduce(
    m_fem: &DMatrix<f64>,
    k_fem: &DMatrix<f64>,
    interface_dofs: &[usize],
    n_fixed_modes: usize,
) -> Result<CbReduction> {
    let n = m_fem.nrows();
    if !m_fem.is_square() || k_fem.shape() != m_fem.shape() {
        return Err(Error::Dimension("full mass and stiffness must be square and equal".into()));
    }
    if interface_dofs.is_empty() {
        return Err(Error::InvalidConfig("interface DOF set is empty".into()));
    }
    let mut is_interface = vec![false; n];
    for &b in interface_dofs {
        if b >= n {
            return Err(Error::InvalidConfig(format!("interface DOF {b} out of range 0..{n}")));
        }
        if is_interface[b] {
            return Err(Error::InvalidConfig(format!("interface DOF {b} listed twice")));
        }
        is_interface[b] = true;
    }
    if m_fem.clone().cholesky().is_none() {
        return Err(Error::InvalidModel(
            "full mass matrix is not symmetric positive definite".into(),
        ));
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !is_interface[i]).collect();
    let nb = interface_dofs.len();
    let ni = interior.len();
    if n_fixed_modes > ni {
        return Err(Error::InvalidConfig(format!(
            "{n_fixed_modes} fixed-interface modes requested but only {ni} interior DOFs exist"
        )));
    }
    let pick = |a: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])])
    };
    let nr = nb + n_fixed_modes;
    let mut t = DMatrix::zeros(n, nr);
    for (j, &b) in interface_dofs.iter().enumerate() {
        t[(b, j)] = 1.0;
    }
    let mut fixed_interface_omegas = Vec::new();
    if ni > 0 {
        let k_ii = pick(k_fem, &interior, &interior);
        let k_ib = pick(k_fem, &interior, interface_dofs);
        let m_ii = pick(m_fem, &interior, &interior);
        let psi = -linalg::solve_matrix(&k_ii, &k_ib, "interior stiffness block")?;
        for (r, &i) in interior.iter().enumerate() {
            for j in 0..nb {
                t[(i, j)] = psi[(r, j)];
            }
        }
        if n_fixed_modes > 0 {
            let (vals, vecs) = linalg::generalized_symmetric_eigen(&k_ii, &m_ii)?;
            for m in 0..n_fixed_modes {
                let mut v = vecs.column(m).into_owned();
                let imax = v.iamax();
                if v[imax] < 0.0 {
                    v = -v;
                }
                for (r, &i) in interior.iter().enumerate() {
                    t[(i, nb + m)] = v[r];
                }
                fixed_interface_omegas.push(vals[m].max(0.0).sqrt());
            }
        }
    }
    let mass = t.transpose() * m_fem * &t;
    let stiffness = t.transpose() * k_fem * &t;
    Ok(CbReduction {
        mass,
        stiffness,
        recovery: t,
        fixed_interface_omegas,
    })
}
