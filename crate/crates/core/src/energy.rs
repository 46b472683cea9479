//! Energy methods: damping curves over amplitude, their zero crossings and the
//! stability of the resulting limit cycles.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aero::{self, AeroSet};
use crate::contact::{self, AftConfig};
use crate::epmc::{backbone_query, Backbone, EpmcSolver, ModalPoint};
use crate::error::{Error, Result};
use crate::harmonic::{hdot, HarmonicSet};
use crate::model::{ContactElement, LinearMode, ModeKind, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityClass {
    Stable,
    Unstable,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyOutcome {
    /// At least one limit cycle exists.
    LimitCycles,
    /// Net damping is positive at every amplitude.
    StableForAllAmplitudes,
    /// Net damping is negative at every amplitude.
    UnboundedGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub amplitude: f64,
    pub omega: f64,
    pub damping_structure: f64,
    pub damping_aero: f64,
    pub work_structure: f64,
    /// Work supplied by the flow per cycle.
    pub work_aero: f64,
    pub mac_stick: f64,
}

impl CurvePoint {
    pub fn total(&self) -> f64 {
        self.damping_structure + self.damping_aero
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcoRoot {
    pub point: CurvePoint,
    pub class: StabilityClass,
    pub shape: DVector<Complex64>,
    pub solution: HarmonicSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub curve: Vec<CurvePoint>,
    pub roots: Vec<LcoRoot>,
    pub outcome: EnergyOutcome,
}

/// `|a^H b|^2 / ((a^H a)(b^H b))`.
pub fn mac(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Result<f64> {
    let aa = hdot(a, a).re;
    let bb = hdot(b, b).re;
    if !(aa > 0.0 && bb > 0.0) {
        return Err(Error::InvalidConfig("MAC of a zero vector is undefined".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Dimension("MAC vectors differ in length".into()));
    }
    Ok((hdot(a, b).norm_sqr() / (aa * bb)).clamp(0.0, 1.0))
}

/// Classification by the secant slope of net damping across a bracket.
pub fn classify_stability(a_left: f64, d_left: f64, a_right: f64, d_right: f64) -> StabilityClass {
    let slope = (d_right - d_left) / (a_right - a_left);
    let scale = d_left.abs().max(d_right.abs());
    if (d_right - d_left).abs() <= 1e-14 * scale || !slope.is_finite() {
        StabilityClass::Degenerate
    } else if slope > 0.0 {
        StabilityClass::Stable
    } else {
        StabilityClass::Unstable
    }
}

pub fn log_grid(a_min: f64, a_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(a_min > 0.0 && a_max > a_min) || n < 2 {
        return Err(Error::InvalidConfig("log grid needs 0 < a_min < a_max and two points".into()));
    }
    let (l0, l1) = (a_min.ln(), a_max.ln());
    Ok((0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

const ROOT_TOL: f64 = 1e-10;

/// Bisection on the amplitude with a curve evaluator.
fn bisect<F>(mut lo: (f64, CurvePoint), mut hi: (f64, CurvePoint), eval: &F) -> Result<(f64, CurvePoint)>
where
    F: Fn(f64) -> Result<(CurvePoint, DVector<Complex64>, HarmonicSet)>,
{
    for _ in 0..200 {
        if (hi.0 - lo.0) <= ROOT_TOL * hi.0 {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let (p, _, _) = eval(mid)?;
        if p.total() == 0.0 {
            return Ok((mid, p));
        }
        if (p.total() > 0.0) == (lo.1.total() > 0.0) {
            lo = (mid, p);
        } else {
            hi = (mid, p);
        }
    }
    let mid = 0.5 * (lo.0 + hi.0);
    Ok((mid, eval(mid)?.0))
}

fn collect_roots<F>(grid: &[f64], curve: &[CurvePoint], eval: &F) -> Result<Vec<LcoRoot>>
where
    F: Fn(f64) -> Result<(CurvePoint, DVector<Complex64>, HarmonicSet)>,
{
    let mut roots = Vec::new();
    for i in 1..curve.len() {
        let (l, r) = (&curve[i - 1], &curve[i]);
        if l.total() == 0.0 || (l.total() > 0.0) != (r.total() > 0.0) {
            let class = classify_stability(grid[i - 1], l.total(), grid[i], r.total());
            let (a, _) = bisect((grid[i - 1], l.clone()), (grid[i], r.clone()), eval)?;
            let (point, shape, solution) = eval(a)?;
            roots.push(LcoRoot {
                point,
                class,
                shape,
                solution,
            });
        }
    }
    Ok(roots)
}

fn outcome(curve: &[CurvePoint], roots: &[LcoRoot]) -> EnergyOutcome {
    if !roots.is_empty() {
        EnergyOutcome::LimitCycles
    } else if curve.iter().all(|p| p.total() > 0.0) {
        EnergyOutcome::StableForAllAmplitudes
    } else {
        EnergyOutcome::UnboundedGrowth
    }
}

/// Linear aerodynamic damping of the stick and slip mode for one nodal
/// diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlutterPoint {
    pub nodal_diameter: i32,
    pub damping_aero_stick: f64,
    pub damping_aero_slip: f64,
}

fn mode_aero_damping(mode: &LinearMode, set: &AeroSet) -> Result<f64> {
    if mode.rigid {
        return Err(Error::InvalidConfig("aerodynamic damping of a rigid mode is undefined".into()));
    }
    let f1 = aero::influence_force(&mode.shape, mode.omega, set, true);
    let dwa = aero::aero_work(&mode.shape, mode.omega, &f1);
    // mass-normalized shape at unit amplitude
    aero::aero_damping(dwa, mode.omega * mode.omega)
}

/// `D^a` over all nodal diameters of the influence model, evaluated in
/// parallel and returned in the stored order.
pub fn flutter_curve(
    model: &ReducedModel,
    contacts: &[ContactElement],
    aero: &crate::aero::AeroInfluenceModel,
    mode_index: usize,
) -> Result<Vec<FlutterPoint>> {
    let pick = |kind| -> Result<LinearMode> {
        crate::model::linear_eigen(model, contacts, kind)?
            .get(mode_index)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("mode index {mode_index} out of range")))
    };
    let stick = pick(ModeKind::Stick)?;
    let slip = pick(ModeKind::Slip)?;
    aero.validate(model.dim())?;
    aero.sets
        .par_iter()
        .map(|set| {
            Ok(FlutterPoint {
                nodal_diameter: set.nodal_diameter,
                damping_aero_stick: mode_aero_damping(&stick, set)?,
                damping_aero_slip: mode_aero_damping(&slip, set)?,
            })
        })
        .collect()
}

/// Imposes `u = Re{psi_stick a e^{i w_stick t}}` and balances friction work
/// against the work of the linear aerodynamic force at the stick frequency.
pub fn conventional_energy_lco(
    model: &ReducedModel,
    contacts: &[ContactElement],
    mode: &LinearMode,
    set: &AeroSet,
    grid: &[f64],
    aft: &AftConfig,
) -> Result<EnergyResult> {
    if mode.kind != ModeKind::Stick || mode.rigid {
        return Err(Error::InvalidConfig("conventional method needs an elastic stick mode".into()));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
        return Err(Error::InvalidConfig("amplitude grid must be positive and increasing".into()));
    }
    let psi = &mode.shape;
    let omega = mode.omega;
    let u_of = |a: f64| HarmonicSet::from_fundamental(1, psi * Complex64::from(a));
    let first = contact::evaluate(&u_of(grid[0]), contacts, aft, false)?;
    if first.any_slip {
        return Err(Error::GridNotSticking(grid[0]));
    }
    let g = set.g_at(omega, true);
    let eval = |a: f64| -> Result<(CurvePoint, DVector<Complex64>, HarmonicSet)> {
        let u = u_of(a);
        let dws = contact::contact_dissipated_work(&u, omega, model, contacts, aft)?;
        let f1 = &g * u.fundamental();
        let dwa = aero::aero_work(u.fundamental(), omega, &f1);
        let e = omega * omega * a * a;
        Ok((
            CurvePoint {
                amplitude: a,
                omega,
                damping_structure: aero::damping_ratio(dws, e)?,
                damping_aero: aero::aero_damping(dwa, e)?,
                work_structure: dws,
                work_aero: dwa,
                mac_stick: 1.0,
            },
            psi.clone(),
            u,
        ))
    };
    let curve: Vec<CurvePoint> = grid
        .par_iter()
        .map(|&a| eval(a).map(|r| r.0))
        .collect::<Result<_>>()?;
    let roots = collect_roots(grid, &curve, &eval)?;
    Ok(EnergyResult {
        outcome: outcome(&curve, &roots),
        curve,
        roots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RefinedOptions {
    /// Interpolate `G` in frequency; otherwise use the stick matrix.
    pub freq_dependent: bool,
    /// Use the stick shape instead of the nonlinear one.
    pub hold_shape: bool,
    /// Use the stick frequency instead of the nonlinear one.
    pub hold_frequency: bool,
}

impl RefinedOptions {
    pub fn standard() -> Self {
        Self {
            freq_dependent: true,
            hold_shape: false,
            hold_frequency: false,
        }
    }
}

fn refined_point(
    p: &ModalPoint,
    dws: f64,
    stick: &DVector<Complex64>,
    omega_stick: f64,
    set: &AeroSet,
    opts: &RefinedOptions,
) -> Result<CurvePoint> {
    let a = p.amplitude;
    let omega = if opts.hold_frequency { omega_stick } else { p.omega };
    let shape = if opts.hold_shape { stick } else { &p.shape };
    let u1 = shape * Complex64::from(a);
    let f1 = set.g_at(omega, opts.freq_dependent) * &u1;
    let dwa = aero::aero_work(&u1, omega, &f1);
    let e = if opts.hold_shape || opts.hold_frequency {
        omega * omega * a * a
    } else {
        p.energy
    };
    Ok(CurvePoint {
        amplitude: a,
        omega: p.omega,
        damping_structure: p.damping,
        damping_aero: aero::aero_damping(dwa, e)?,
        work_structure: dws,
        work_aero: dwa,
        mac_stick: mac(&p.shape, stick)?,
    })
}

/// Damping balance along the nonlinear modes. When `exact` is given, roots
/// are refined on exact modal solutions instead of interpolated ones.
pub fn refined_energy_lco(
    backbone: &Backbone,
    model: &ReducedModel,
    set: &AeroSet,
    stick: &LinearMode,
    opts: &RefinedOptions,
    exact: Option<&EpmcSolver>,
) -> Result<EnergyResult> {
    if backbone.points.len() < 2 {
        return Err(Error::InvalidConfig("backbone needs at least two points".into()));
    }
    let grid: Vec<f64> = backbone.points.iter().map(|p| p.amplitude).collect();
    let curve: Vec<CurvePoint> = backbone
        .points
        .iter()
        .map(|p| refined_point(&p.into(), p.dissipated_work, &stick.shape, stick.omega, set, opts))
        .collect::<Result<_>>()?;
    let eval = |a: f64| -> Result<(CurvePoint, DVector<Complex64>, HarmonicSet)> {
        let guess = backbone_query(backbone, a, model)?;
        let (mp, dws) = match exact {
            Some(solver) => {
                let bp = solver.solve_at(a, &guess)?;
                let dws = bp.dissipated_work;
                ((&bp).into(), dws)
            }
            None => {
                let dws = 2.0 * std::f64::consts::PI * guess.energy * guess.damping;
                (guess, dws)
            }
        };
        let cp = refined_point(&mp, dws, &stick.shape, stick.omega, set, opts)?;
        Ok((cp, mp.shape.clone(), mp.solution.clone()))
    };
    let roots = collect_roots(&grid, &curve, &eval)?;
    Ok(EnergyResult {
        outcome: outcome(&curve, &roots),
        curve,
        roots,
    })
}
