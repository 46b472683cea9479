//! Versioned JSON files for models, influence matrices, cases and result
//! summaries, plus CSV emitters for curves and traces.
//!
//! Matrices are stored row by row; complex entries as `[re, im]` pairs.
//! Floats round-trip exactly through the shortest decimal representation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::aero::{AeroInfluenceModel, AeroSet};
use crate::contact::AftConfig;
use crate::coupled::{CouplingTrace, Linearization};
use crate::energy::CurvePoint;
use crate::epmc::Backbone;
use crate::error::{Error, Result};
use crate::model::{ContactElement, ReducedModel};

pub const MODEL_SCHEMA: &str = "lco-model/1";
pub const AERO_SCHEMA: &str = "lco-aero/1";
pub const CASE_SCHEMA: &str = "lco-case/1";
pub const SUMMARY_SCHEMA: &str = "lco-summary/1";

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(name: &str, r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = r.len();
    let nc = r.first().map_or(0, Vec::len);
    if r.iter().any(|row| row.len() != nc) {
        return Err(Error::Dimension(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| r[i][j]))
}

fn complex_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn from_complex_rows(name: &str, r: &[Vec<[f64; 2]>]) -> Result<DMatrix<Complex64>> {
    let nr = r.len();
    let nc = r.first().map_or(0, Vec::len);
    if r.iter().any(|row| row.len() != nc) {
        return Err(Error::Dimension(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| Complex64::new(r[i][j][0], r[i][j][1])))
}

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::InvalidConfig(format!(
            "schema tag '{found}' where '{expected}' was expected"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    pub mass: Vec<Vec<f64>>,
    pub stiffness: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Vec<Vec<f64>>>,
    pub labels: Vec<String>,
    pub sensor_coord: usize,
    pub dominant_coord: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_length: Option<f64>,
    #[serde(default)]
    pub contacts: Vec<ContactEntry>,
}

/// Contact as stored in a model file: either lumped force quantities or
/// tractions with the tributary area they act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContactEntry {
    Traction(TractionContact),
    Lumped(ContactElement),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionContact {
    pub coord_x: usize,
    #[serde(default)]
    pub coord_y: Option<usize>,
    /// Tangential stiffness per unit area.
    pub stiffness_per_area: f64,
    /// Friction-limited traction.
    pub traction_limit: f64,
    pub area: f64,
}

impl ContactEntry {
    pub fn lumped(&self) -> Result<ContactElement> {
        match self {
            Self::Lumped(c) => Ok(*c),
            Self::Traction(t) => {
                if !(t.area > 0.0) || !t.area.is_finite() {
                    return Err(Error::InvalidModel(format!("contact area must be positive, got {}", t.area)));
                }
                Ok(ContactElement {
                    coord_x: t.coord_x,
                    coord_y: t.coord_y,
                    k_t: t.stiffness_per_area * t.area,
                    f_lim: t.traction_limit * t.area,
                })
            }
        }
    }
}

impl ModelFile {
    pub fn from_model(model: &ReducedModel, contacts: &[ContactElement]) -> Self {
        Self {
            schema: MODEL_SCHEMA.into(),
            mass: rows(model.mass()),
            stiffness: rows(model.stiffness()),
            recovery: model.recovery().map(rows),
            labels: model.labels().to_vec(),
            sensor_coord: model.sensor_coord(),
            dominant_coord: model.dominant_coord(),
            span_length: model.span_length(),
            contacts: contacts.iter().cloned().map(ContactEntry::Lumped).collect(),
        }
    }

    /// Validated model and contacts.
    pub fn build(&self) -> Result<(ReducedModel, Vec<ContactElement>)> {
        check_schema(&self.schema, MODEL_SCHEMA)?;
        let recovery = self
            .recovery
            .as_ref()
            .map(|r| from_rows("recovery", r))
            .transpose()?;
        let model = ReducedModel::with_details(
            from_rows("mass", &self.mass)?,
            from_rows("stiffness", &self.stiffness)?,
            recovery,
            self.labels.clone(),
            self.sensor_coord,
            self.dominant_coord,
            self.span_length,
        )?;
        let contacts = self.contacts.iter().map(ContactEntry::lumped).collect::<Result<Vec<_>>>()?;
        crate::model::validate_contacts(&model, &contacts)?;
        Ok((model, contacts))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroSetFile {
    pub nodal_diameter: i32,
    pub omega_stick: f64,
    pub omega_slip: f64,
    pub g_stick: Vec<Vec<[f64; 2]>>,
    pub g_slip: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroFile {
    pub schema: String,
    pub sets: Vec<AeroSetFile>,
}

impl AeroFile {
    pub fn from_model(aero: &AeroInfluenceModel) -> Self {
        Self {
            schema: AERO_SCHEMA.into(),
            sets: aero
                .sets
                .iter()
                .map(|s| AeroSetFile {
                    nodal_diameter: s.nodal_diameter,
                    omega_stick: s.omega_stick,
                    omega_slip: s.omega_slip,
                    g_stick: complex_rows(&s.g_stick),
                    g_slip: complex_rows(&s.g_slip),
                })
                .collect(),
        }
    }

    pub fn build(&self, dim: usize) -> Result<AeroInfluenceModel> {
        check_schema(&self.schema, AERO_SCHEMA)?;
        let sets = self
            .sets
            .iter()
            .map(|s| {
                Ok(AeroSet {
                    nodal_diameter: s.nodal_diameter,
                    omega_stick: s.omega_stick,
                    omega_slip: s.omega_slip,
                    g_stick: from_complex_rows("g_stick", &s.g_stick)?,
                    g_slip: from_complex_rows("g_slip", &s.g_slip)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = AeroInfluenceModel { sets };
        model.validate(dim)?;
        Ok(model)
    }
}

/// Either a path relative to the case file or the content itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(String),
    Inline(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackboneSettings {
    pub a_min: f64,
    pub a_max: f64,
    pub h0: f64,
    pub h_max: f64,
}

impl Default for BackboneSettings {
    fn default() -> Self {
        Self {
            a_min: 1e-6,
            a_max: 1e-2,
            h0: 0.02,
            h_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub a_min: f64,
    pub a_max: f64,
    pub points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            a_min: 1e-6,
            a_max: 1e-2,
            points: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSettings {
    pub linearization: Linearization,
    pub relax: f64,
    pub max_outer: usize,
    pub eps_s: f64,
    pub eps_a: f64,
    pub eps_omega: f64,
    pub eps_u: f64,
    /// Anchor value as a fraction of the initial dominant amplitude.
    pub anchor_fraction: f64,
    /// Surrogate amplitude nonlinearity, absolute.
    pub kappa: f64,
    /// Surrogate relaxation rate.
    pub rho: f64,
    /// Harmonics resolved by the flow.
    pub fluid_harmonics: usize,
}

impl Default for CouplingSettings {
    fn default() -> Self {
        Self {
            linearization: Linearization::DominatingMode,
            relax: 1.0,
            max_outer: 50,
            eps_s: 1e-13,
            eps_a: 1e-10,
            eps_omega: 1e-9,
            eps_u: 1e-8,
            anchor_fraction: 0.5,
            kappa: 0.0,
            rho: 0.5,
            fluid_harmonics: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSettings {
    pub steps_per_period: usize,
    pub periods: usize,
    pub window: usize,
    pub limit_periods: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            steps_per_period: 128,
            periods: 600,
            window: 20,
            limit_periods: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub nodal_diameter: i32,
    pub mode_index: usize,
    pub harmonics: usize,
    pub aft: AftConfig,
    pub backbone: BackboneSettings,
    pub grid: GridSettings,
    pub coupling: CouplingSettings,
    pub oracle: OracleSettings,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            nodal_diameter: 0,
            mode_index: 0,
            harmonics: 1,
            aft: AftConfig::default(),
            backbone: BackboneSettings::default(),
            grid: GridSettings::default(),
            coupling: CouplingSettings::default(),
            oracle: OracleSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub model: Source<ModelFile>,
    pub aero: Source<AeroFile>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
}

/// Fully loaded and validated case.
#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    pub model: ReducedModel,
    pub contacts: Vec<ContactElement>,
    pub aero: AeroInfluenceModel,
    pub analysis: AnalysisSettings,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidConfig(format!(
            "{} line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn resolve<T: for<'de> Deserialize<'de> + Clone>(src: &Source<T>, base: &Path) -> Result<T> {
    match src {
        Source::Inline(t) => Ok(t.clone()),
        Source::Path(p) => read_json(&base.join(p)),
    }
}

pub fn load_case(path: &Path) -> Result<Case> {
    let file: CaseFile = read_json(path)?;
    check_schema(&file.schema, CASE_SCHEMA)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let (model, contacts) = resolve(&file.model, &base)?.build()?;
    let aero = resolve(&file.aero, &base)?.build(model.dim())?;
    Ok(Case {
        name: file.name,
        model,
        contacts,
        aero,
        analysis: file.analysis,
    })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_pretty(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// One limit cycle in the result summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcoRecord {
    pub method: String,
    pub nodal_diameter: i32,
    pub modal_amplitude: f64,
    pub omega: f64,
    pub frequency_hz: f64,
    pub sensor_amplitude: f64,
    pub sensor_over_span: Option<f64>,
    pub damping_aero: f64,
    pub damping_structure: f64,
    pub mac_stick: f64,
    pub mac_nonlinear: Option<f64>,
    pub stability: Option<String>,
    pub iterations: Option<usize>,
    pub work_structure: f64,
    pub work_aero: f64,
    /// `|dW_s - dW_a| / max(|dW_s|, |dW_a|)` recomputed from the record.
    pub energy_balance_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub case: String,
    pub mode: String,
    pub outcome: Option<String>,
    pub records: Vec<LcoRecord>,
    pub checks: Vec<CheckRecord>,
}

impl Summary {
    pub fn new(case: &str, mode: &str) -> Self {
        Self {
            schema: SUMMARY_SCHEMA.into(),
            case: case.into(),
            mode: mode.into(),
            outcome: None,
            records: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn energy_balance_defect(work_structure: f64, work_aero: f64) -> f64 {
    let scale = work_structure.abs().max(work_aero.abs());
    if scale == 0.0 {
        0.0
    } else {
        (work_structure - work_aero).abs() / scale
    }
}

fn csv_float(x: f64) -> String {
    format!("{x:.12e}")
}

/// Damping curve with the column set used for energy-method plots.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from(
        "amplitude [modal],D_s [-],minus_D_a [-],dW_s [J],dW_a [J],omega [rad/s],mac_stick [-]\n",
    );
    for p in curve {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            csv_float(p.amplitude),
            csv_float(p.damping_structure),
            csv_float(-p.damping_aero),
            csv_float(p.work_structure),
            csv_float(p.work_aero),
            csv_float(p.omega),
            csv_float(p.mac_stick)
        );
    }
    s
}

pub fn backbone_csv(b: &Backbone) -> String {
    let mut s = String::from("amplitude [modal],omega [rad/s],damping [-],energy [J],dW_s [J],sensor_amplitude [m]\n");
    for p in &b.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            csv_float(p.amplitude),
            csv_float(p.omega),
            csv_float(p.damping),
            csv_float(p.energy),
            csv_float(p.dissipated_work),
            csv_float(p.sensor_amplitude)
        );
    }
    s
}

pub fn trace_csv(trace: &CouplingTrace) -> String {
    let mut s = String::from(
        "iteration [-],omega [rad/s],dominant_amplitude [modal],delta_omega [-],delta_u [-],structural_residual [-],structural_iterations [-],fluid_iterations [-],fluid_final_residual [-],payload [reals]\n",
    );
    for e in &trace.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            e.iteration,
            csv_float(e.omega),
            csv_float(e.dominant_amplitude),
            csv_float(e.delta_omega),
            csv_float(e.delta_u),
            csv_float(e.structural_residual),
            e.structural_iterations,
            e.fluid_residuals.len(),
            csv_float(e.fluid_residuals.last().copied().unwrap_or(f64::NAN)),
            e.payload
        );
    }
    s
}

/// `(nd, D_a stick, D_a slip)` rows.
pub fn flutter_csv(rows: &[(i32, f64, f64)]) -> String {
    let mut s = String::from("nodal_diameter [-],D_a_stick [-],D_a_slip [-]\n");
    for (nd, a, b) in rows {
        let _ = writeln!(s, "{nd},{},{}", csv_float(*a), csv_float(*b));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.1 + 0.2, -3.5e-300, 4.0, 5.0, 1.0 / 3.0]);
        let back = from_rows("m", &rows(&m)).unwrap();
        assert_eq!(m, back);
        assert!(from_rows("m", &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn empty_summary_is_valid_json() {
        let s = Summary::new("none", "refined");
        let text = to_json_pretty(&s).unwrap();
        let back: Summary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(back.all_passed());
    }

    #[test]
    fn schema_tag_is_checked() {
        let f = ModelFile {
            schema: "other/1".into(),
            mass: vec![vec![1.0]],
            stiffness: vec![vec![1.0]],
            recovery: None,
            labels: vec!["x".into()],
            sensor_coord: 0,
            dominant_coord: 0,
            span_length: None,
            contacts: vec![],
        };
        assert!(f.build().is_err());
    }
}
