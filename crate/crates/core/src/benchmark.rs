//! Synthetic cyclic-sector benchmark: a pretwisted lumped blade with a tip
//! shroud whose nodes rub against the neighbouring sector.
//!
//! The two configurations share the geometry. Contact stiffness is tuned to
//! a target slip/stick frequency ratio, the stiffness scale to a target stick
//! frequency, and the influence matrices to target aerodynamic damping of the
//! stick and slip modes at the target nodal diameter.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::aero::{AeroInfluenceModel, AeroSet};
use crate::error::{Error, Result};
use crate::model::{self, ContactElement, ModeKind, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchmarkConfig {
    /// Weakly self-excited stick mode; stable limit cycle near slip onset.
    #[serde(rename = "1")]
    One,
    /// Aerodynamically stable stick mode, unstable slip mode.
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkSize {
    /// Two contact nodes and two fixed-interface modes (N = 6).
    Small,
    /// Eight contact nodes and five fixed-interface modes (N = 21).
    Medium,
}

impl std::str::FromStr for BenchmarkConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            o => Err(Error::InvalidConfig(format!("unknown benchmark configuration '{o}'"))),
        }
    }
}

impl std::str::FromStr for BenchmarkSize {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Self::Small),
            "medium" => Ok(Self::Medium),
            o => Err(Error::InvalidConfig(format!("unknown benchmark size '{o}'"))),
        }
    }
}

/// Dimensionless targets of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTargets {
    pub frequency_ratio: f64,
    pub omega_stick: f64,
    pub damping_aero_stick: f64,
    pub damping_aero_slip: f64,
    /// Modal amplitude at which the first contact node starts to slip.
    pub onset_amplitude: f64,
}

impl BenchmarkConfig {
    pub fn targets(self) -> BenchmarkTargets {
        let omega_stick = 2.0 * PI * 520.0;
        match self {
            Self::One => BenchmarkTargets {
                frequency_ratio: 0.957,
                omega_stick,
                damping_aero_stick: -3.0e-4,
                damping_aero_slip: 1.0e-3,
                onset_amplitude: 1.0e-5,
            },
            Self::Two => BenchmarkTargets {
                frequency_ratio: 418.0 / 520.0,
                omega_stick,
                damping_aero_stick: 2.1e-3,
                damping_aero_slip: -1.9e-3,
                onset_amplitude: 1.0e-5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub size: BenchmarkSize,
    pub model: ReducedModel,
    pub contacts: Vec<ContactElement>,
    pub aero: AeroInfluenceModel,
    pub target_nd: i32,
    pub mode_index: usize,
    pub omega_stick: f64,
    pub omega_slip: f64,
}

pub const N_BLADES: i32 = 50;
pub const TARGET_ND: i32 = -4;

struct Geometry {
    stations: usize,
    shroud_nodes: usize,
    fixed_modes: usize,
}

impl BenchmarkSize {
    fn geometry(self) -> Geometry {
        match self {
            Self::Small => Geometry {
                stations: 6,
                shroud_nodes: 2,
                fixed_modes: 2,
            },
            Self::Medium => Geometry {
                stations: 10,
                shroud_nodes: 8,
                fixed_modes: 5,
            },
        }
    }
}

fn rotated(k1: f64, k2: f64, angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    let r = Matrix2::new(c, -s, s, c);
    r * Matrix2::new(k1, 0.0, 0.0, k2) * r.transpose()
}

fn add_spring(k: &mut DMatrix<f64>, a: Option<usize>, b: usize, ke: &Matrix2<f64>) {
    // `a = None` grounds the spring
    for r in 0..2 {
        for c in 0..2 {
            k[(2 * b + r, 2 * b + c)] += ke[(r, c)];
            if let Some(a) = a {
                k[(2 * a + r, 2 * a + c)] += ke[(r, c)];
                k[(2 * a + r, 2 * b + c)] -= ke[(r, c)];
                k[(2 * b + r, 2 * a + c)] -= ke[(r, c)];
            }
        }
    }
}

/// Full lumped model: blade stations first, shroud nodes last, two DOFs
/// (flap, edge) per node.
fn full_model(g: &Geometry) -> (DMatrix<f64>, DMatrix<f64>) {
    let nodes = g.stations + g.shroud_nodes;
    let n = 2 * nodes;
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let blade_mass = 0.12;
    let kflap = 2.0e6 * g.stations as f64;
    for j in 0..g.stations {
        let taper = 1.0 - 0.5 * j as f64 / g.stations as f64;
        let mj = blade_mass / g.stations as f64 * taper / 0.75;
        m[(2 * j, 2 * j)] = mj;
        m[(2 * j + 1, 2 * j + 1)] = mj;
        let twist = 0.6 * j as f64 / g.stations as f64;
        let ke = rotated(kflap * taper, 5.0 * kflap * taper, twist);
        add_spring(&mut k, j.checked_sub(1), j, &ke);
    }
    let tip = g.stations - 1;
    let shroud_mass = 0.02 / g.shroud_nodes as f64;
    let ks = 4.0e6 / g.shroud_nodes as f64;
    for s in 0..g.shroud_nodes {
        let node = g.stations + s;
        m[(2 * node, 2 * node)] = shroud_mass;
        m[(2 * node + 1, 2 * node + 1)] = shroud_mass;
        add_spring(&mut k, Some(tip), node, &rotated(ks, 2.0 * ks, 0.3));
        if s > 0 {
            add_spring(&mut k, Some(node - 1), node, &rotated(0.5 * ks, 0.5 * ks, 0.0));
        }
    }
    (m, k)
}

fn frequencies(model: &ReducedModel, contacts: &[ContactElement], mode: usize) -> Result<(f64, f64)> {
    let stick = model::linear_eigen(model, contacts, ModeKind::Stick)?;
    let slip = model::linear_eigen(model, contacts, ModeKind::Slip)?;
    Ok((stick[mode].omega, slip[mode].omega))
}

fn with_stiffness(contacts: &[ContactElement], kt: f64) -> Vec<ContactElement> {
    contacts.iter().map(|c| ContactElement { k_t: kt, ..*c }).collect()
}

/// Influence matrices `(c + i) g M v v^T M` of rank one along `v`.
fn rank_one(model: &ReducedModel, v: &DVector<f64>, g: f64) -> DMatrix<Complex64> {
    let mv = model.mass() * v;
    (&mv * mv.transpose()).map(|x| Complex64::new(0.05, 1.0) * (g * x))
}

/// Flutter curve over nodal diameters through the target value, with sign
/// changes across the spectrum.
fn flutter_curve(target: f64, nd: i32) -> f64 {
    let theta = 2.0 * PI * f64::from(nd - TARGET_ND) / f64::from(N_BLADES);
    let amp = if target >= 0.0 { 2.0e-3 } else { -2.0e-3 };
    target + amp * (theta.cos() - 1.0) + 0.5 * amp * theta.sin()
}

pub fn generate_benchmark(config: BenchmarkConfig, size: BenchmarkSize) -> Result<Benchmark> {
    let t = config.targets();
    let g = size.geometry();
    let (m_full, k_full) = full_model(&g);
    let interface: Vec<usize> = (2 * g.stations..2 * (g.stations + g.shroud_nodes)).collect();
    let cb = model::craig_bampton_reduce(&m_full, &k_full, &interface, g.fixed_modes)?;
    let mut labels: Vec<String> = (0..g.shroud_nodes)
        .flat_map(|s| [format!("shroud{s}.flap"), format!("shroud{s}.edge")])
        .collect();
    labels.extend((0..g.fixed_modes).map(|j| format!("fixed_mode{j}")));
    let sensor = 2 * (g.stations - 1);
    let span = 0.1;
    let mode = 0;

    // tune the contact stiffness on a unit-scale model
    let unit = cb.clone().into_model(labels.clone(), sensor, 0, Some(span))?;
    let base: Vec<ContactElement> = (0..g.shroud_nodes)
        .map(|s| ContactElement::planar(2 * s, 2 * s + 1, 1.0, 1.0))
        .collect();
    let ratio = |kt: f64| -> Result<f64> {
        let (ws, wl) = frequencies(&unit, &with_stiffness(&base, kt), mode)?;
        Ok(wl / ws)
    };
    let (mut lo, mut hi) = (1e2_f64, 1e10_f64);
    if ratio(hi)? > t.frequency_ratio || ratio(lo)? < t.frequency_ratio {
        return Err(Error::Consistency("frequency ratio target not reachable by contact stiffness".into()));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if ratio(mid)? > t.frequency_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let kt = (lo * hi).sqrt();
    let (ws, _) = frequencies(&unit, &with_stiffness(&base, kt), mode)?;
    let scale = (t.omega_stick / ws).powi(2);
    let mut cb = cb;
    cb.stiffness *= scale;
    let provisional = cb.clone().into_model(labels.clone(), sensor, 0, Some(span))?;
    let kt = kt * scale;
    let stiff = with_stiffness(&base, kt);
    let stick = model::linear_eigen(&provisional, &stiff, ModeKind::Stick)?;
    let psi = stick[mode].shape.map(|z| z.re);
    let dominant = psi.iamax();
    let model = cb.into_model(labels, sensor, dominant, Some(span))?;

    // slip limits staggered around the onset amplitude
    let contacts: Vec<ContactElement> = stiff
        .iter()
        .enumerate()
        .map(|(s, c)| {
            let disp = psi[c.coord_x].hypot(psi[c.coord_y.expect("planar")]);
            let spread = if g.shroud_nodes > 1 {
                1.0 + 0.6 * s as f64 / (g.shroud_nodes - 1) as f64
            } else {
                1.0
            };
            ContactElement {
                f_lim: kt * disp * t.onset_amplitude * spread,
                ..*c
            }
        })
        .collect();
    let (omega_stick, omega_slip) = frequencies(&model, &contacts, mode)?;
    let slip = model::linear_eigen(&model, &contacts, ModeKind::Slip)?;
    let psi_slip = slip[mode].shape.map(|z| z.re);
    let proj_slip = (psi.transpose() * model.mass() * &psi_slip)[(0, 0)].powi(2);

    let sets = (-N_BLADES / 2 + 1..=N_BLADES / 2)
        .map(|nd| {
            let d_stick = flutter_curve(t.damping_aero_stick, nd);
            let d_slip = flutter_curve(t.damping_aero_slip, nd);
            AeroSet {
                nodal_diameter: nd,
                omega_stick,
                omega_slip,
                g_stick: rank_one(&model, &psi, -2.0 * omega_stick.powi(2) * d_stick),
                g_slip: rank_one(&model, &psi, -2.0 * omega_slip.powi(2) * d_slip / proj_slip),
            }
        })
        .collect();
    Ok(Benchmark {
        config,
        size,
        model,
        contacts,
        aero: AeroInfluenceModel { sets },
        target_nd: TARGET_ND,
        mode_index: mode,
        omega_stick,
        omega_slip,
    })
}
