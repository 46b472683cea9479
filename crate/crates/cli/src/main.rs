use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use lco_core::benchmark::{generate_benchmark, BenchmarkConfig, BenchmarkSize};
use lco_core::coupled::{CouplingTrace, LcoSolution, Linearization};
use lco_core::energy::{self, mac, EnergyResult, LcoRoot};
use lco_core::io::{
    self, AeroFile, AnalysisSettings, BackboneSettings, Case, CaseFile, CheckRecord, GridSettings, LcoRecord,
    ModelFile, Source, Summary, CASE_SCHEMA,
};
use lco_core::verify::{benchmark_a_max, independent_balance, verify_case, Study};
use lco_core::{model, Error, Result};

/// Flutter-induced limit cycles of friction-damped blade sectors.
#[derive(Debug, Parser)]
#[command(name = "lco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic benchmark as model, aero and case files.
    Generate(GenerateArgs),
    /// Run one analysis on a case file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Benchmark configuration: 1 (stable LCO) or 2 (unstable LCO).
    #[arg(long)]
    config: BenchmarkConfig,
    #[arg(long, default_value = "small")]
    size: BenchmarkSize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    FlutterCurve,
    Conventional,
    Refined,
    Coupled,
    Verify,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::FlutterCurve => "flutter-curve",
            Mode::Conventional => "conventional",
            Mode::Refined => "refined",
            Mode::Coupled => "coupled",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Nodal diameter; overrides the case file.
    #[arg(long, allow_hyphen_values = true)]
    nd: Option<i32>,
    /// Structural harmonic order; overrides the case file.
    #[arg(long)]
    harmonics: Option<usize>,
    /// freq-dependent, freq-independent or dominating-mode.
    #[arg(long)]
    linearization: Option<Linearization>,
    /// Under-relaxation factor of the coupled iteration.
    #[arg(long)]
    relax: Option<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Seed of the randomized checks in verify mode.
    #[arg(long, default_value_t = 20_241_014)]
    seed: u64,
}

/// Balance tolerance applied to every reported limit cycle.
const BALANCE_TOL: f64 = 1e-6;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Generate(a) => generate(&a).map(|()| true),
        Command::Run(a) => run(&a),
    };
    match out {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let b = generate_benchmark(a.config, a.size)?;
    std::fs::create_dir_all(&a.out)?;
    io::write_json(&a.out.join("model.json"), &ModelFile::from_model(&b.model, &b.contacts))?;
    io::write_json(&a.out.join("aero.json"), &AeroFile::from_model(&b.aero))?;
    let a_max = benchmark_a_max(a.config);
    let analysis = AnalysisSettings {
        nodal_diameter: b.target_nd,
        mode_index: b.mode_index,
        backbone: BackboneSettings {
            a_max,
            ..Default::default()
        },
        grid: GridSettings {
            a_max,
            ..Default::default()
        },
        ..Default::default()
    };
    let case = CaseFile {
        schema: CASE_SCHEMA.into(),
        name: format!("benchmark-{}-{}", config_tag(a.config), size_tag(a.size)),
        model: Source::Path("model.json".into()),
        aero: Source::Path("aero.json".into()),
        analysis,
    };
    io::write_json(&a.out.join("case.json"), &case)?;
    println!(
        "wrote {} (stick {:.3} Hz, slip {:.3} Hz, target ND {})",
        a.out.display(),
        b.omega_stick / (2.0 * std::f64::consts::PI),
        b.omega_slip / (2.0 * std::f64::consts::PI),
        b.target_nd
    );
    Ok(())
}

fn config_tag(c: BenchmarkConfig) -> &'static str {
    match c {
        BenchmarkConfig::One => "1",
        BenchmarkConfig::Two => "2",
    }
}

fn size_tag(s: BenchmarkSize) -> &'static str {
    match s {
        BenchmarkSize::Small => "small",
        BenchmarkSize::Medium => "medium",
    }
}

fn apply_overrides(case: &mut Case, a: &RunArgs) -> Result<()> {
    let s = &mut case.analysis;
    if let Some(nd) = a.nd {
        s.nodal_diameter = nd;
    }
    if let Some(h) = a.harmonics {
        if h == 0 {
            return Err(Error::InvalidConfig("harmonic order must be at least 1".into()));
        }
        s.harmonics = h;
    }
    if let Some(l) = a.linearization {
        s.coupling.linearization = l;
    }
    if let Some(r) = a.relax {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidConfig(format!("relaxation factor must lie in (0, 1], got {r}")));
        }
        s.coupling.relax = r;
    }
    Ok(())
}

fn run(a: &RunArgs) -> Result<bool> {
    let t0 = Instant::now();
    let mut case = io::load_case(&a.case)?;
    apply_overrides(&mut case, a)?;
    std::fs::create_dir_all(&a.out)?;
    let mut summary = Summary::new(&case.name, a.mode.name());
    match a.mode {
        Mode::FlutterCurve => flutter(&case, &a.out, &mut summary)?,
        Mode::Conventional => conventional(&Study::from_case(&case)?, &a.out, &mut summary)?,
        Mode::Refined => {
            refined(&Study::from_case(&case)?, &a.out, &mut summary)?;
        }
        Mode::Coupled => coupled(&Study::from_case(&case)?, &a.out, &mut summary)?,
        Mode::Verify => {
            let study = Study::from_case(&case)?;
            for c in verify_case(&study, &case.analysis.oracle, a.seed) {
                println!("{}", c.line());
                summary.checks.push(CheckRecord {
                    name: c.name.into(),
                    passed: c.passed,
                    detail: c.detail,
                });
            }
        }
    }
    io::write_json(&a.out.join("summary.json"), &summary)?;
    // kept apart from the summary so that the summary is reproducible
    let timing = serde_json::json!({ "mode": a.mode.name(), "seconds": t0.elapsed().as_secs_f64() });
    io::write_json(&a.out.join("timing.json"), &timing)?;
    for r in &summary.records {
        println!(
            "{:<12} ND {:>3}  a {:.6e}  {:.6} Hz  sensor {:.4e}  D_a {:+.3e}  {}",
            r.method,
            r.nodal_diameter,
            r.modal_amplitude,
            r.frequency_hz,
            r.sensor_amplitude,
            r.damping_aero,
            r.stability.as_deref().unwrap_or("-")
        );
    }
    if let Some(o) = &summary.outcome {
        println!("outcome: {o}");
    }
    let ok = summary.all_passed();
    for c in summary.checks.iter().filter(|c| !c.passed) {
        eprintln!("failed: {}: {}", c.name, c.detail);
    }
    println!("results in {}", a.out.display());
    Ok(ok)
}

fn flutter(case: &Case, out: &Path, summary: &mut Summary) -> Result<()> {
    let pts = energy::flutter_curve(&case.model, &case.contacts, &case.aero, case.analysis.mode_index)?;
    let rows: Vec<(i32, f64, f64)> = pts
        .iter()
        .map(|p| (p.nodal_diameter, p.damping_aero_stick, p.damping_aero_slip))
        .collect();
    io::write_text(&out.join("flutter.csv"), &io::flutter_csv(&rows))?;
    let flips = |f: fn(&(i32, f64, f64)) -> f64| rows.windows(2).filter(|w| (f(&w[0]) < 0.0) != (f(&w[1]) < 0.0)).count();
    summary.outcome = Some(format!(
        "{} nodal diameters; sign changes: stick {}, slip {}",
        rows.len(),
        flips(|r| r.1),
        flips(|r| r.2)
    ));
    Ok(())
}

fn energy_records(study: &Study, method: &str, res: &EnergyResult, summary: &mut Summary) -> Result<()> {
    summary.outcome = Some(serde_json::to_value(res.outcome)?.as_str().unwrap_or_default().to_string());
    for root in &res.roots {
        let p = &root.point;
        let defect = io::energy_balance_defect(p.work_structure, p.work_aero);
        let rec = LcoRecord {
            method: method.into(),
            nodal_diameter: study.set.nodal_diameter,
            modal_amplitude: p.amplitude,
            omega: p.omega,
            frequency_hz: p.omega / (2.0 * std::f64::consts::PI),
            sensor_amplitude: model::recover_sensor_amplitude(&root.solution, &study.model)?,
            sensor_over_span: None,
            damping_aero: p.damping_aero,
            damping_structure: p.damping_structure,
            mac_stick: p.mac_stick,
            mac_nonlinear: None,
            stability: Some(serde_json::to_value(root.class)?.as_str().unwrap_or_default().to_string()),
            iterations: None,
            work_structure: p.work_structure,
            work_aero: p.work_aero,
            energy_balance_defect: defect,
        };
        summary.records.push(with_span(rec, study));
    }
    balance_check(summary);
    Ok(())
}

fn with_span(mut r: LcoRecord, study: &Study) -> LcoRecord {
    r.sensor_over_span = study.model.span_length().map(|l| r.sensor_amplitude / l);
    r
}

/// One check over every record so far.
fn balance_check(summary: &mut Summary) {
    let worst = summary.records.iter().map(|r| r.energy_balance_defect).fold(0.0, f64::max);
    summary.checks.retain(|c| c.name != "energy balance");
    summary.checks.push(CheckRecord {
        name: "energy balance".into(),
        passed: worst <= BALANCE_TOL,
        detail: format!("{} limit cycles, worst relative imbalance {worst:.2e}", summary.records.len()),
    });
}

fn conventional(study: &Study, out: &Path, summary: &mut Summary) -> Result<()> {
    let res = study.conventional()?;
    io::write_text(&out.join("curve.csv"), &io::curve_csv(&res.curve))?;
    energy_records(study, "conventional", &res, summary)
}

fn refined(study: &Study, out: &Path, summary: &mut Summary) -> Result<EnergyResult> {
    let bb = study.backbone()?;
    if bb.partial {
        warn!("backbone stopped early: {}", bb.abort_reason.as_deref().unwrap_or("unknown"));
        summary.checks.push(CheckRecord {
            name: "backbone continuation".into(),
            passed: false,
            detail: bb.abort_reason.clone().unwrap_or_default(),
        });
    }
    io::write_text(&out.join("backbone.csv"), &io::backbone_csv(&bb))?;
    let res = study.refined(&bb)?;
    io::write_text(&out.join("curve.csv"), &io::curve_csv(&res.curve))?;
    energy_records(study, "refined", &res, summary)?;
    Ok(res)
}

fn coupled_record(study: &Study, root: &LcoRoot, s: &LcoSolution) -> Result<LcoRecord> {
    let defect = independent_balance(&s.u, s.omega, &study.contacts, &study.set, study.coupling.kappa, &study.aft)?
        .max(s.energy_balance_defect());
    Ok(with_span(
        LcoRecord {
            method: "coupled".into(),
            nodal_diameter: study.set.nodal_diameter,
            modal_amplitude: s.modal_amplitude,
            omega: s.omega,
            frequency_hz: s.omega / (2.0 * std::f64::consts::PI),
            sensor_amplitude: s.sensor_amplitude,
            sensor_over_span: None,
            damping_aero: s.damping_aero,
            damping_structure: s.damping_structure,
            mac_stick: s.mac_stick,
            mac_nonlinear: Some(mac(s.u.fundamental(), &root.shape)?),
            stability: Some(serde_json::to_value(root.class)?.as_str().unwrap_or_default().to_string()),
            iterations: Some(s.iterations),
            work_structure: s.work_structure,
            work_aero: s.work_aero,
            energy_balance_defect: defect,
        },
        study,
    ))
}

fn coupled(study: &Study, out: &Path, summary: &mut Summary) -> Result<()> {
    let res = refined(study, out, summary)?;
    for (i, root) in res.roots.iter().enumerate() {
        info!("coupled solve {} from the refined root at {:.4e}", i, root.point.amplitude);
        let run: Result<(LcoSolution, CouplingTrace)> = study.coupled_with(root, &study.coupling);
        match run {
            Ok((s, trace)) => {
                io::write_text(&out.join(format!("trace_{i}.csv")), &io::trace_csv(&trace))?;
                summary.records.push(coupled_record(study, root, &s)?);
            }
            Err(e) => summary.checks.push(CheckRecord {
                name: format!("coupled solve {i}"),
                passed: false,
                detail: e.to_string(),
            }),
        }
    }
    balance_check(summary);
    Ok(())
}
