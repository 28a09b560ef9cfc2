//! Command-line front end: argument parsing, configuration files, JSON/CSV
//! output and geometry export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod export;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pcw_core::heuristic::{
    AxialUnit, DesignError, Designer, EmissionAngleConvention, GroupVelocity, ModelConventions,
    ZoneWavelength,
};
use pcw_core::numerics::Tolerance;
use pcw_core::robustness::{
    build_compound, run_perturbation, PerturbationConfig, RngIdentity, RobustnessError,
};
use pcw_core::slab_optics::{vertical_cavity, MaterialModel, OpticsError};
use pcw_core::units::deg_to_rad;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "pcw",
    version,
    about = "Photonic crystal waveguide design for Purcell enhancement"
)]
#[command(
    after_help = "Exit codes: 0 success, 2 invalid input, 3 infeasible design, 4 no convergence."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vertical Fabry-Perot cavity of the membrane.
    Fp(FpArgs),
    /// Solve the hole radius for a period and target wavelength.
    Design(DesignArgs),
    /// Design radii over a range of periods and write them as CSV.
    #[command(
        long_about = "Design radii over a range of periods and write them as CSV.\n\n\
CSV columns: a_nm, r_nm, c1_nm, c2, theta_wg_rad, F_PCW, beta, feasible.\n\
Rows where no design exists have feasible=0 and empty numeric cells."
    )]
    Curve(CurveArgs),
    /// Design both halves of a compound crystal.
    Compound(CompoundArgs),
    /// Monte Carlo of radius errors on a compound crystal.
    #[command(long_about = "Monte Carlo of radius errors on a compound crystal.\n\n\
Writes the full report as JSON to --out and the per-run table next to it as CSV \
with columns run, eff_r1_nm, eff_r2_nm, peak1_nm, peak2_nm, compound_peak_nm.")]
    Perturb(PerturbArgs),
    /// Write the hole list of a finite crystal for an external solver.
    ExportGeometry(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FpArgs {
    /// Membrane thickness, nm.
    #[arg(long = "h")]
    pub h_nm: f64,
    /// Refractive index of the membrane.
    #[arg(long)]
    pub n: f64,
    /// Wavelength, nm.
    #[arg(long = "lambda")]
    pub lambda_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionAngleArg {
    Literal,
    ProjectionAsCosine,
    MeanProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxialUnitArg {
    Period,
    Micrometre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneWavelengthArg {
    Vacuum,
    Medium,
}

/// Membrane, material and modelling conventions shared by design commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Membrane thickness, nm.
    #[arg(long = "h")]
    pub h_nm: f64,
    /// Lattice angle, degrees.
    #[arg(long = "theta-gr", default_value_t = 60.0)]
    pub theta_gr_deg: f64,
    /// Refractive-index table (wavelength_nm n); built-in GaAs when absent.
    #[arg(long)]
    pub material: Option<PathBuf>,
    /// Incidence angle used in the Bragg conditions.
    #[arg(long, value_enum, default_value_t = EmissionAngleArg::MeanProjection)]
    pub emission_angle: EmissionAngleArg,
    /// Unit of the axial coordinate in the mode-volume average.
    #[arg(long, value_enum, default_value_t = AxialUnitArg::Period)]
    pub axial_unit: AxialUnitArg,
    /// Wavelength used in the Fresnel-zone count.
    #[arg(long, value_enum, default_value_t = ZoneWavelengthArg::Vacuum)]
    pub zone_wavelength: ZoneWavelengthArg,
    /// Fixed group velocity in m/s instead of c/n.
    #[arg(long)]
    pub group_velocity: Option<f64>,
    /// Damping of the radius iteration, in (0, 1].
    #[arg(long, default_value_t = pcw_core::heuristic::DEFAULT_DAMPING)]
    pub damping: f64,
    /// Convergence tolerance on the radius, nm.
    #[arg(long = "tol", default_value_t = Tolerance::default().abs_tol)]
    pub tol_nm: f64,
    /// Iteration limit.
    #[arg(long, default_value_t = Tolerance::default().max_iter)]
    pub max_iter: usize,
}

impl ModelArgs {
    pub fn conventions(&self) -> ModelConventions {
        ModelConventions {
            axial_unit: match self.axial_unit {
                AxialUnitArg::Period => AxialUnit::Period,
                AxialUnitArg::Micrometre => AxialUnit::Micrometre,
            },
            zone_wavelength: match self.zone_wavelength {
                ZoneWavelengthArg::Vacuum => ZoneWavelength::Vacuum,
                ZoneWavelengthArg::Medium => ZoneWavelength::Medium,
            },
            emission_angle: match self.emission_angle {
                EmissionAngleArg::Literal => EmissionAngleConvention::Literal,
                EmissionAngleArg::ProjectionAsCosine => EmissionAngleConvention::ProjectionAsCosine,
                EmissionAngleArg::MeanProjection => EmissionAngleConvention::MeanProjection,
            },
            group_velocity: match self.group_velocity {
                None => GroupVelocity::FreeSpace,
                Some(m_per_s) => GroupVelocity::Fixed { m_per_s },
            },
        }
    }

    pub fn designer(&self) -> Result<Designer> {
        let material = load_material(self.material.as_deref())?;
        Ok(
            Designer::new(self.h_nm, material, deg_to_rad(self.theta_gr_deg))?
                .with_conventions(self.conventions())
                .with_damping(self.damping),
        )
    }

    pub fn tolerance(&self) -> Result<Tolerance> {
        let tol = Tolerance {
            abs_tol: self.tol_nm,
            max_iter: self.max_iter,
            ..Tolerance::default()
        };
        tol.validate()
            .map_err(|e| DesignError::Invalid(e.to_string()))?;
        Ok(tol)
    }
}

pub fn load_material(path: Option<&Path>) -> Result<MaterialModel> {
    match path {
        None => Ok(MaterialModel::gaas()),
        Some(p) => Ok(MaterialModel::load(p)?),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DesignArgs {
    /// Lattice period, nm.
    #[arg(long = "a")]
    pub a_nm: f64,
    /// Target wavelength, nm.
    #[arg(long = "lambda")]
    pub lambda_nm: f64,
    /// Initial radius, nm (default a/3).
    #[arg(long = "r0")]
    pub r0_nm: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    /// Target wavelength, nm.
    #[arg(long = "lambda")]
    pub lambda_nm: f64,
    #[arg(long = "a-min")]
    pub a_min_nm: f64,
    #[arg(long = "a-max")]
    pub a_max_nm: f64,
    #[arg(long = "a-step")]
    pub a_step_nm: f64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CompoundArgs {
    #[arg(long = "a1")]
    pub a1_nm: f64,
    #[arg(long = "a2")]
    pub a2_nm: f64,
    #[arg(long = "lambda1")]
    pub lambda1_nm: f64,
    #[arg(long = "lambda2")]
    pub lambda2_nm: f64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    /// JSON run configuration (see README).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed; overrides the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; the CSV table goes next to it with extension .csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides delta_r_max from the configuration file, nm.
    #[arg(long = "delta-r-max")]
    pub delta_r_max_nm: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    /// JSON written by `design` or `compound`.
    #[arg(long)]
    pub design: PathBuf,
    /// Hole rows including the removed waveguide row.
    #[arg(long)]
    pub rows: usize,
    /// Holes per row.
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Compound geometry section of a `perturb` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundConfig {
    pub a1_nm: f64,
    pub a2_nm: f64,
    pub lambda1_nm: f64,
    pub lambda2_nm: f64,
    pub h_nm: f64,
    #[serde(default = "default_theta_gr_deg")]
    pub theta_gr_deg: f64,
    #[serde(default)]
    pub material: Option<PathBuf>,
}

fn default_theta_gr_deg() -> f64 {
    60.0
}

/// Contents of the `perturb --config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbFile {
    pub compound: CompoundConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub conventions: ModelConventions,
}

impl PerturbFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| ValidationError(format!("config {}: {e}", path.display())).into())
    }
}

/// Input rejected before any computation.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: C,
    pub result: R,
}

fn envelope<C: Serialize, R: Serialize>(command: &str, config: C, result: R) -> Result<String> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

#[derive(Serialize)]
struct ResolvedModel<'a> {
    #[serde(flatten)]
    args: &'a ModelArgs,
    conventions: ModelConventions,
    material_model: MaterialModel,
}

fn resolved(model: &ModelArgs) -> Result<ResolvedModel<'_>> {
    Ok(ResolvedModel {
        args: model,
        conventions: model.conventions(),
        material_model: load_material(model.material.as_deref())?,
    })
}

/// Maps an error chain to the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DesignError>() {
            return design_exit_code(e);
        }
        if let Some(e) = cause.downcast_ref::<RobustnessError>() {
            return match e.design_error() {
                Some(d) => design_exit_code(d),
                None => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<OpticsError>().is_some()
            || cause.downcast_ref::<ValidationError>().is_some()
        {
            return EXIT_VALIDATION;
        }
    }
    EXIT_VALIDATION
}

fn design_exit_code(e: &DesignError) -> i32 {
    match e {
        DesignError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        e if e.is_infeasible() => EXIT_INFEASIBLE,
        _ => EXIT_VALIDATION,
    }
}

fn csv_cell(v: f64) -> String {
    v.to_string()
}

/// Lattice periods `a_min, a_min + step, …` up to `a_max` inclusive.
pub fn period_grid(a_min: f64, a_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(a_min > 0.0 && a_max >= a_min && step > 0.0) || !a_max.is_finite() {
        bail!(ValidationError(format!(
            "need 0 < a-min <= a-max and a-step > 0, got {a_min}, {a_max}, {step}"
        )));
    }
    let n = ((a_max - a_min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| a_min + step * i as f64).collect())
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Fp(args) => {
            let cav = vertical_cavity(args.h_nm, args.n, args.lambda_nm)?;
            stdout.write_all(envelope("fp", &args, cav)?.as_bytes())?;
        }
        Command::Design(args) => {
            let designer = args.model.designer()?;
            let tol = args.model.tolerance()?;
            let d = designer.design_radius(args.a_nm, args.lambda_nm, args.r0_nm, &tol)?;
            let config = serde_json::json!({
                "a_nm": args.a_nm,
                "lambda_nm": args.lambda_nm,
                "r0_nm": args.r0_nm,
                "model": resolved(&args.model)?,
            });
            stdout.write_all(envelope("design", config, d)?.as_bytes())?;
        }
        Command::Curve(args) => {
            let designer = args.model.designer()?;
            let tol = args.model.tolerance()?;
            let grid = period_grid(args.a_min_nm, args.a_max_nm, args.a_step_nm)?;
            let points = designer.design_curve(args.lambda_nm, &grid, &tol)?;
            let mut w = csv_writer(&args.out)?;
            w.write_all(b"a_nm,r_nm,c1_nm,c2,theta_wg_rad,F_PCW,beta,feasible\n")?;
            let mut feasible = 0;
            for p in &points {
                match &p.result {
                    Ok(d) => {
                        feasible += 1;
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{},1",
                            csv_cell(p.a_nm),
                            csv_cell(d.spec.r_nm),
                            csv_cell(d.c1),
                            csv_cell(d.c2),
                            csv_cell(d.theta_wg),
                            csv_cell(d.f_pcw),
                            csv_cell(d.beta)
                        )?;
                    }
                    Err(_) => writeln!(w, "{},,,,,,,0", csv_cell(p.a_nm))?,
                }
            }
            w.flush()?;
            let failures: Vec<_> = points
                .iter()
                .filter_map(|p| {
                    p.result
                        .as_ref()
                        .err()
                        .map(|e| serde_json::json!({ "a_nm": p.a_nm, "reason": e.to_string() }))
                })
                .collect();
            let config = serde_json::json!({
                "lambda_nm": args.lambda_nm,
                "a_min_nm": args.a_min_nm,
                "a_max_nm": args.a_max_nm,
                "a_step_nm": args.a_step_nm,
                "out": args.out,
                "model": resolved(&args.model)?,
            });
            let result = serde_json::json!({
                "points": points.len(),
                "feasible": feasible,
                "infeasible": failures,
            });
            stdout.write_all(envelope("curve", config, result)?.as_bytes())?;
        }
        Command::Compound(args) => {
            let designer = args.model.designer()?;
            let tol = args.model.tolerance()?;
            let c = build_compound(
                &designer,
                (args.a1_nm, args.a2_nm),
                (args.lambda1_nm, args.lambda2_nm),
                &tol,
            )?;
            let config = serde_json::json!({
                "a1_nm": args.a1_nm,
                "a2_nm": args.a2_nm,
                "lambda1_nm": args.lambda1_nm,
                "lambda2_nm": args.lambda2_nm,
                "model": resolved(&args.model)?,
            });
            stdout.write_all(envelope("compound", config, c)?.as_bytes())?;
        }
        Command::Perturb(args) => {
            let mut file = PerturbFile::load(&args.config)?;
            if let Some(seed) = args.seed {
                file.perturbation.seed = seed;
            }
            if let Some(d) = args.delta_r_max_nm {
                file.perturbation.delta_r_max = d;
            }
            let c = &file.compound;
            let material = load_material(c.material.as_deref())?;
            let designer = Designer::new(c.h_nm, material, deg_to_rad(c.theta_gr_deg))?
                .with_conventions(file.conventions);
            let design = build_compound(
                &designer,
                (c.a1_nm, c.a2_nm),
                (c.lambda1_nm, c.lambda2_nm),
                &Tolerance::default(),
            )?;
            let report = run_perturbation(&design, &file.perturbation)?;
            let csv_path = args.out.with_extension("csv");
            let config = serde_json::json!({
                "config_file": args.config,
                "resolved": &file,
                "rng": RngIdentity::default(),
                "csv": csv_path,
            });
            let result = serde_json::json!({ "design": design, "report": report });
            write_file(&args.out, envelope("perturb", &config, &result)?.as_bytes())?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            write_file(&csv_path, &csv)?;
            let summary = serde_json::json!({
                "json": args.out,
                "csv": csv_path,
                "n_runs": report.n_runs,
                "n_failed": report.n_failed,
                "mean_shift": report.mean_shift,
                "std_shift": report.std_shift,
                "success_fraction": report.success_fraction,
            });
            stdout.write_all(envelope("perturb", &config, summary)?.as_bytes())?;
        }
        Command::ExportGeometry(args) => {
            let text = fs::read_to_string(&args.design)
                .with_context(|| format!("reading design {}", args.design.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| ValidationError(format!("design {}: {e}", args.design.display())))?;
            let layout =
                export::Layout::from_json(value).map_err(|e| ValidationError(format!("{e:#}")))?;
            let geometry = export::build(&layout, args.rows, args.cols)
                .map_err(|e| ValidationError(format!("{e:#}")))?;
            write_file(&args.out, geometry.to_text().as_bytes())?;
            let result = serde_json::json!({
                "out": args.out,
                "holes": geometry.holes.len(),
                "bbox_nm": geometry.bbox,
            });
            stdout.write_all(envelope("export-geometry", &args, result)?.as_bytes())?;
        }
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
