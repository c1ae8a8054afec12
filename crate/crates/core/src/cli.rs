//! The `romstab` command line.
//!
//! Exit codes: 0 success, 2 usage or invalid parameters, 3 file errors,
//! 4 divergence, 5 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::Error;
use crate::hyper::{
    collocate_naive, collocate_projected, deim_points, deim_reduce, ecsw_reduce, ecsw_train,
    ecsw_weighted_operator, gnat_reduce, integrate_collocation, read_sample_set_json,
    read_weights_json, write_sample_set_json, write_weights_json, EcswWeights, SampleSet,
    VelocityUpdate,
};
use crate::instances::rng;
use crate::integrator::{integrate, IntegrateOptions, DEFAULT_BLOWUP};
use crate::linalg::{sym_eig, thin_svd};
use crate::model::{
    build_rod_chain, build_string_model, read_model_json, write_model_json, FullOrderModel,
    StringParams,
};
use crate::reduction::{
    galerkin_reduce, modal_basis, pod_basis, read_basis_json, read_snapshot_csv,
    write_basis_json, ReducedBasis, ReducedModel,
};
use crate::reproduce::{reproduce, Group};
use crate::stability::{
    critical_dt_system, element_dt_bound, fom_eigenvalues, fom_report, reduced_report,
    ModelKind, StabilityReport,
};
use crate::verify::{run_suite, VerifyOptions, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "romstab",
    version,
    about = "Central-difference stability of full, reduced and hyper-reduced structural models",
    args_override_self = true
)]
pub struct Cli {
    /// Seed for randomized initial conditions and verification suites.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON file with default flag values: top-level "seed"/"json" and one
    /// object per command, e.g. {"integrate": {"dt-frac": 0.99}}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a model file.
    #[command(args_override_self = true)]
    Build(BuildArgs),
    /// Critical time step of a model, ROM or HROM.
    #[command(args_override_self = true)]
    Timestep(TimestepArgs),
    /// Build a reduced basis.
    #[command(args_override_self = true)]
    Reduce(ReduceArgs),
    /// Build a hyper-reduced model and report its structure and time step.
    #[command(args_override_self = true)]
    Hyper(HyperArgs),
    /// Integrate with the central-difference scheme; exit 4 on divergence.
    #[command(args_override_self = true)]
    Integrate(IntegrateArgs),
    /// Run the randomized property suites; exit 5 on any failure.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Recompute the worked string examples; exit 5 on any mismatch.
    #[command(args_override_self = true)]
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BuildKind {
    /// Uniform string with stiff boundary springs.
    String,
    /// Chain of 2-node rod elements.
    Rod,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(value_enum)]
    pub kind: BuildKind,
    /// Node count (string).
    #[arg(long = "m", default_value_t = 5)]
    pub nodes: usize,
    /// Nodal mass (string).
    #[arg(long = "M", default_value_t = 1.0)]
    pub mass: f64,
    /// Element stiffness (string).
    #[arg(long = "K", default_value_t = 10.0)]
    pub stiffness: f64,
    /// Total length (string).
    #[arg(long = "L", default_value_t = 1.0)]
    pub length: f64,
    /// Boundary spring stiffness as a multiple of K (string).
    #[arg(long, default_value_t = StringParams::DEFAULT_BOUNDARY_FACTOR)]
    pub boundary: f64,
    /// Element lengths (rod).
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<f64>,
    /// Element wave speeds (rod).
    #[arg(long, value_delimiter = ',')]
    pub speeds: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub a1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub a2: f64,
    #[arg(short, long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TimestepArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Galerkin ROM on this basis (ECSW HROM when combined with --weights).
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// ECSW element weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Element-wise bound instead of the exact eigenvalue.
    #[arg(long)]
    pub element_bound: bool,
    /// Safety factor applied to the reported step.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisKindArg {
    Plain,
    Mass,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Eigenvector indices of M⁻¹K (0-based, ascending eigenvalue).
    #[arg(long, value_delimiter = ',', conflicts_with = "snapshots")]
    pub modes: Vec<usize>,
    /// Snapshot CSV for POD.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// POD basis size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Orthonormality of the POD basis (modal bases are always mass-orthonormal).
    #[arg(long, value_enum, default_value = "mass")]
    pub kind: BasisKindArg,
    #[arg(short, long, default_value = "basis.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HyperMethod {
    Naive,
    Projected,
    Deim,
    Gnat,
    Ecsw,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long, value_enum)]
    pub method: HyperMethod,
    /// Collocation rows (naive/projected); defaults to DEIM points of the basis.
    #[arg(long, value_delimiter = ',')]
    pub points: Vec<usize>,
    /// Sample-set file (naive/projected), overriding --points.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Displacement snapshots (deim/gnat force basis, ecsw training).
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// Force-basis size for deim/gnat (default: basis size).
    #[arg(long)]
    pub force_modes: Option<usize>,
    /// Total GNAT sample rows (default: force-basis size).
    #[arg(long)]
    pub oversample: Option<usize>,
    /// ECSW training tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tau: f64,
    /// Use these ECSW weights instead of training.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Writes trained ECSW weights or the sample set used.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitKind {
    /// Uniform random displacements in [-amplitude, amplitude].
    Random,
    Zero,
    /// Eigenvector `--mode-index` of M⁻¹K scaled to `amplitude`.
    Mode,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UpdateArg {
    Displacement,
    Velocity,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// ECSW weights (needs --basis).
    #[arg(long, requires = "basis")]
    pub weights: Option<PathBuf>,
    /// Naive-collocation sample set (needs --basis); steps with the
    /// collocation scheme.
    #[arg(long, requires = "basis", conflicts_with = "weights")]
    pub samples: Option<PathBuf>,
    /// Reduced velocity update of the collocation scheme.
    #[arg(long, value_enum, default_value = "displacement")]
    pub velocity_update: UpdateArg,
    #[arg(long, conflicts_with = "dt_frac", required_unless_present = "dt_frac")]
    pub dt: Option<f64>,
    /// Step as a fraction of the computed critical step.
    #[arg(long)]
    pub dt_frac: Option<f64>,
    #[arg(long)]
    pub t_end: f64,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[arg(long, default_value_t = DEFAULT_BLOWUP)]
    pub blowup: f64,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitKind,
    #[arg(long, default_value_t = 0)]
    pub mode_index: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub amplitude: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,
    /// Also run the seeded DEIM counterexample (passes when Kr is nonsymmetric).
    #[arg(long)]
    pub break_symmetry: bool,
    /// Largest random model order.
    #[arg(long, default_value_t = 30)]
    pub max_order: usize,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Restrict to one group: string5, ecsw or string100.
    #[arg(long)]
    pub only: Option<String>,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn file(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = i32> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match apply_config(raw) {
        Ok(a) => a,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

const COMMANDS: [&str; 7] = [
    "build",
    "timestep",
    "reduce",
    "hyper",
    "integrate",
    "verify",
    "reproduce",
];

/// Splices config-file flags into `argv`: global ones right after the program
/// name, command ones right after the command name, so that explicit
/// arguments (which come later) override them.
fn apply_config(raw: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let strs: Vec<String> = raw.iter().map(|s| s.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(raw) };
    let path = PathBuf::from(path);
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::file(&path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::file(&path, e))?;
    let Value::Object(map) = value else {
        return Err(Failure::file(&path, "config must be a JSON object"));
    };
    let mut global = Vec::new();
    let mut command = Vec::new();
    let cmd_pos = strs.iter().skip(1).position(|a| COMMANDS.contains(&a.as_str())).map(|p| p + 1);
    let cmd_name = cmd_pos.map(|p| strs[p].clone());
    for (key, v) in &map {
        if COMMANDS.contains(&key.as_str()) {
            if Some(key) != cmd_name.as_ref() {
                continue;
            }
            let Value::Object(flags) = v else {
                return Err(Failure::file(&path, format!("section {key:?} must be an object")));
            };
            for (flag, fv) in flags {
                push_flag(&mut command, flag, fv).map_err(|m| Failure::file(&path, m))?;
            }
        } else if key == "seed" || key == "json" {
            push_flag(&mut global, key, v).map_err(|m| Failure::file(&path, m))?;
        } else {
            return Err(Failure::file(&path, format!("unknown config key {key:?}")));
        }
    }
    let mut argv: Vec<OsString> = Vec::with_capacity(raw.len() + global.len() + command.len());
    argv.push(raw[0].clone());
    argv.extend(global.into_iter().map(OsString::from));
    match cmd_pos {
        Some(p) => {
            argv.extend(raw[1..=p].iter().cloned());
            argv.extend(command.into_iter().map(OsString::from));
            argv.extend(raw[p + 1..].iter().cloned());
        }
        None => argv.extend(raw[1..].iter().cloned()),
    }
    Ok(argv)
}

fn push_flag(out: &mut Vec<String>, flag: &str, v: &Value) -> Result<(), String> {
    let name = format!("--{flag}");
    match v {
        Value::Bool(true) => out.push(name),
        Value::Bool(false) | Value::Null => {}
        Value::Number(n) => {
            out.push(name);
            out.push(n.to_string());
        }
        Value::String(s) => {
            out.push(name);
            out.push(s.clone());
        }
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(format!("unsupported list entry for {flag}")),
                })
                .collect::<Result<_, _>>()?;
            out.push(name);
            out.push(parts.join(","));
        }
        Value::Object(_) => return Err(format!("unsupported value for {flag}")),
    }
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Build(a) => cmd_build(cli, a, out),
        Command::Timestep(a) => cmd_timestep(a, out),
        Command::Reduce(a) => cmd_reduce(cli, a, out),
        Command::Hyper(a) => cmd_hyper(cli, a, out),
        Command::Integrate(a) => cmd_integrate(cli, a, out),
        Command::Verify(a) => cmd_verify(cli, a, out),
        Command::Reproduce(a) => cmd_reproduce(cli, a, out),
    }
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|e| Failure::from(Error::Io(e)))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, v: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::from(Error::Json(e)))?;
    emit(out, s)
}

fn load_model(path: &Path) -> CliResult<FullOrderModel> {
    read_model_json(path).map_err(|e| Failure::file(path, e))
}

fn load_basis(path: &Path, model: &FullOrderModel) -> CliResult<ReducedBasis> {
    read_basis_json(path, Some(model.mass())).map_err(|e| Failure::file(path, e))
}

fn load_weights(path: &Path) -> CliResult<EcswWeights> {
    read_weights_json(path).map_err(|e| Failure::file(path, e))
}

fn cmd_build(cli: &Cli, a: &BuildArgs, out: &mut dyn Write) -> CliResult {
    let model = match a.kind {
        BuildKind::String => {
            let p = StringParams {
                m: a.nodes,
                mass: a.mass,
                stiffness: a.stiffness,
                length: a.length,
                boundary_factor: a.boundary,
                a1: a.a1,
                a2: a.a2,
            };
            build_string_model(&p)?
        }
        BuildKind::Rod => build_rod_chain(&a.lengths, &a.speeds)?.with_damping(a.a1, a.a2)?,
    };
    write_model_json(&model, &a.out).map_err(|e| Failure::file(&a.out, e))?;
    let eig = fom_eigenvalues(&model)?;
    let mu_max = eig.max();
    #[derive(Serialize)]
    struct BuildSummary<'a> {
        path: &'a Path,
        m: usize,
        elements: usize,
        mu_max: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        eigenvalues: Option<Vec<f64>>,
    }
    let summary = BuildSummary {
        path: &a.out,
        m: model.dim(),
        elements: model.elements().len(),
        mu_max,
        eigenvalues: (model.dim() <= 10).then(|| eig.iter().copied().collect()),
    };
    if cli.json {
        emit_json(out, &summary)?;
    } else {
        emit(out, format!("wrote {}", a.out.display()))?;
        emit(out, format!("dofs: {}", summary.m))?;
        emit(out, format!("mu_max: {mu_max:.6}"))?;
        if let Some(e) = &summary.eigenvalues {
            let list: Vec<String> = e.iter().map(|v| format!("{v:.6}")).collect();
            emit(out, format!("eigenvalues: [{}]", list.join(", ")))?;
        }
    }
    Ok(EXIT_OK)
}

fn timestep_report(a: &TimestepArgs) -> CliResult<StabilityReport> {
    let model = load_model(&a.model)?;
    let weights = a.weights.as_deref().map(load_weights).transpose()?;
    let basis = a.basis.as_deref().map(|p| load_basis(p, &model)).transpose()?;
    if a.element_bound {
        return Ok(element_dt_bound(model.elements(), model.a1(), model.a2(), weights.as_ref())?);
    }
    let report = match (basis, weights) {
        (None, None) => fom_report(&model)?,
        (Some(b), None) => reduced_report(&galerkin_reduce(&model, &b)?)?,
        (Some(b), Some(w)) => reduced_report(&ecsw_reduce(&model, &w, &b)?)?,
        (None, Some(w)) => {
            let mu = sym_eig(&ecsw_weighted_operator(&model, &w)?)?.max();
            critical_dt_system(mu, model.a1(), model.a2())?.with_kind(ModelKind::Hrom)
        }
    };
    Ok(report)
}

fn cmd_timestep(a: &TimestepArgs, out: &mut dyn Write) -> CliResult {
    if !(a.scale > 0.0) {
        return Err(Failure::usage("--scale must be positive"));
    }
    let report = timestep_report(a)?.scaled(a.scale);
    emit_json(out, &report)?;
    Ok(EXIT_OK)
}

fn cmd_reduce(cli: &Cli, a: &ReduceArgs, out: &mut dyn Write) -> CliResult {
    let model = load_model(&a.model)?;
    let basis = match (&a.snapshots, a.modes.is_empty()) {
        (Some(path), true) => {
            let snaps = read_snapshot_csv(path).map_err(|e| Failure::file(path, e))?;
            let k = a.k.ok_or_else(|| Failure::usage("--k is required with --snapshots"))?;
            let mass = match a.kind {
                BasisKindArg::Mass => Some(model.mass()),
                BasisKindArg::Plain => None,
            };
            pod_basis(&snaps, k, mass)?
        }
        (None, false) => modal_basis(&model, &a.modes)?,
        _ => return Err(Failure::usage("give exactly one of --modes or --snapshots")),
    };
    write_basis_json(&basis, &a.out).map_err(|e| Failure::file(&a.out, e))?;
    let fom = fom_report(&model)?;
    let rom = reduced_report(&galerkin_reduce(&model, &basis)?)?;
    #[derive(Serialize)]
    struct ReduceSummary<'a> {
        path: &'a Path,
        k: usize,
        dt_fom: f64,
        dt_rom: f64,
        rom: StabilityReport,
    }
    let s = ReduceSummary {
        path: &a.out,
        k: basis.dim(),
        dt_fom: fom.dt_crit,
        dt_rom: rom.dt_crit,
        rom,
    };
    if cli.json {
        emit_json(out, &s)?;
    } else {
        emit(out, format!("wrote {} (k = {})", a.out.display(), s.k))?;
        emit(out, format!("dt_fom: {:.6e}", s.dt_fom))?;
        emit(out, format!("dt_rom: {:.6e} (ratio {:.4})", s.dt_rom, s.dt_rom / s.dt_fom))?;
    }
    Ok(EXIT_OK)
}

/// Left singular vectors of the stiffness forces `K x_s`.
fn force_basis(model: &FullOrderModel, snapshots: &DMatrix<f64>, k: usize) -> CliResult<DMatrix<f64>> {
    let forces = model.stiffness().as_matrix() * snapshots;
    let svd = thin_svd(&forces)?;
    if k == 0 || k > svd.sigma.len() || !(svd.sigma[k - 1] > 1e-12 * svd.sigma[0]) {
        return Err(Failure::usage(format!(
            "force basis of size {k} exceeds the rank of the snapshot forces"
        )));
    }
    Ok(svd.u.columns(0, k).into_owned())
}

/// DEIM points of `u`, then the remaining rows of largest `|U|` row norm up
/// to `p` rows in total.
fn gnat_points(u: &DMatrix<f64>, p: usize) -> CliResult<Vec<usize>> {
    let mut pts = deim_points(u)?;
    if p > u.nrows() {
        return Err(Failure::usage(format!("{p} sample rows exceed the {} DoFs", u.nrows())));
    }
    let mut rest: Vec<usize> = (0..u.nrows()).filter(|i| !pts.contains(i)).collect();
    rest.sort_by(|&i, &j| u.row(j).norm().total_cmp(&u.row(i).norm()).then(i.cmp(&j)));
    pts.extend(rest.into_iter().take(p.saturating_sub(pts.len())));
    Ok(pts)
}

fn cmd_hyper(cli: &Cli, a: &HyperArgs, out: &mut dyn Write) -> CliResult {
    let model = load_model(&a.model)?;
    let basis = load_basis(&a.basis, &model)?;
    let snapshots = a
        .snapshots
        .as_deref()
        .map(|p| read_snapshot_csv(p).map_err(|e| Failure::file(p, e)))
        .transpose()?;
    let need_snaps = || {
        snapshots
            .as_ref()
            .ok_or_else(|| Failure::usage("--snapshots is required for this method"))
    };
    let sample_set = |model: &FullOrderModel| -> CliResult<SampleSet> {
        if let Some(p) = &a.samples {
            return read_sample_set_json(p).map_err(|e| Failure::file(p, e));
        }
        let pts = if a.points.is_empty() {
            deim_points(basis.matrix())?
        } else {
            a.points.clone()
        };
        Ok(SampleSet::from_structure(model, &pts)?)
    };
    let hrom: ReducedModel = match a.method {
        HyperMethod::Naive | HyperMethod::Projected => {
            let s = sample_set(&model)?;
            if let Some(p) = &a.out {
                write_sample_set_json(&s, p).map_err(|e| Failure::file(p, e))?;
            }
            if a.method == HyperMethod::Naive {
                collocate_naive(&model, &basis, &s)?
            } else {
                collocate_projected(&model, &basis, &s)?
            }
        }
        HyperMethod::Deim | HyperMethod::Gnat => {
            let snaps = need_snaps()?;
            let k = a.force_modes.unwrap_or(basis.dim());
            let u = force_basis(&model, &snaps.centered(), k)?;
            let pts = if a.method == HyperMethod::Deim {
                deim_points(&u)?
            } else {
                gnat_points(&u, a.oversample.unwrap_or(k))?
            };
            if let Some(p) = &a.out {
                let s = SampleSet::from_structure(&model, &pts)?;
                write_sample_set_json(&s, p).map_err(|e| Failure::file(p, e))?;
            }
            if a.method == HyperMethod::Deim {
                deim_reduce(&model, &basis, &u, &pts)?
            } else {
                gnat_reduce(&model, &basis, &u, &pts)?
            }
        }
        HyperMethod::Ecsw => {
            let w = match &a.weights {
                Some(p) => load_weights(p)?,
                None => ecsw_train(&model, &basis, need_snaps()?, a.tau)?,
            };
            if let Some(p) = &a.out {
                write_weights_json(&w, p).map_err(|e| Failure::file(p, e))?;
            }
            ecsw_reduce(&model, &w, &basis)?
        }
    };
    let report = match reduced_report(&hrom) {
        Ok(r) => Some(r),
        Err(Error::Unstable) => None,
        Err(e) => return Err(e.into()),
    };
    #[derive(Serialize)]
    struct HyperSummary {
        provenance: crate::reduction::Provenance,
        rows: usize,
        k: usize,
        symmetric: bool,
        stiffness_asymmetry: Option<f64>,
        sample_rows: Option<Vec<usize>>,
        report: Option<StabilityReport>,
    }
    let asym = hrom.stiffness_asymmetry();
    let s = HyperSummary {
        provenance: hrom.provenance,
        rows: hrom.mr.nrows(),
        k: hrom.dim(),
        symmetric: hrom.symmetric,
        stiffness_asymmetry: asym.is_finite().then_some(asym),
        sample_rows: hrom.collocation.as_ref().map(|c| c.rows.clone()),
        report,
    };
    if cli.json {
        emit_json(out, &s)?;
    } else {
        emit(out, format!("provenance: {:?}", s.provenance))?;
        emit(out, format!("reduced system: {}x{} (symmetric by construction: {})", s.rows, s.k, s.symmetric))?;
        if let Some(a) = s.stiffness_asymmetry {
            emit(out, format!("stiffness asymmetry: {a:.3e}"))?;
        }
        match &s.report {
            Some(r) => emit(out, format!("dt_crit: {:.6e} ({:?})", r.dt_crit, r.method))?,
            None => emit(out, "dt_crit: none (unstable for every step)")?,
        }
    }
    Ok(EXIT_OK)
}

fn initial_displacement(cli: &Cli, a: &IntegrateArgs, model: &FullOrderModel) -> CliResult<DVector<f64>> {
    let m = model.dim();
    Ok(match a.init {
        InitKind::Zero => DVector::zeros(m),
        InitKind::Random => {
            let mut r = rng(cli.seed);
            DVector::from_fn(m, |_, _| a.amplitude * r.gen_range(-1.0..1.0))
        }
        InitKind::Mode => {
            let b = modal_basis(model, &[a.mode_index])?;
            let v = b.matrix().column(0).into_owned();
            &v * (a.amplitude / v.amax())
        }
    })
}

fn cmd_integrate(cli: &Cli, a: &IntegrateArgs, out: &mut dyn Write) -> CliResult {
    let model = load_model(&a.model)?;
    let basis = a.basis.as_deref().map(|p| load_basis(p, &model)).transpose()?;
    let x0 = initial_displacement(cli, a, &model)?;
    enum Sys {
        Full,
        Reduced(ReducedModel, ReducedBasis),
        Collocation(ReducedModel, ReducedBasis),
    }
    let sys = match (&basis, &a.weights, &a.samples) {
        (None, _, _) => Sys::Full,
        (Some(b), Some(w), _) => Sys::Reduced(ecsw_reduce(&model, &load_weights(w)?, b)?, b.clone()),
        (Some(b), None, Some(s)) => {
            let s = read_sample_set_json(s).map_err(|e| Failure::file(s, e))?;
            Sys::Collocation(collocate_naive(&model, b, &s)?, b.clone())
        }
        (Some(b), None, None) => Sys::Reduced(galerkin_reduce(&model, b)?, b.clone()),
    };
    let dt = match (a.dt, a.dt_frac) {
        (Some(dt), _) => dt,
        (None, Some(f)) => {
            let crit = match &sys {
                Sys::Full => fom_report(&model)?,
                Sys::Reduced(rm, _) | Sys::Collocation(rm, _) => reduced_report(rm)?,
            };
            f * crit.dt_crit
        }
        (None, None) => return Err(Failure::usage("one of --dt or --dt-frac is required")),
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Failure::usage(format!("time step {dt} must be positive")));
    }
    let opts = IntegrateOptions {
        dt,
        t_end: a.t_end,
        record_every: a.record_every,
        blowup: a.blowup,
    };
    let file = File::create(&a.out).map_err(|e| Failure::file(&a.out, e))?;
    let writer = BufWriter::new(file);
    let traj = match &sys {
        Sys::Full => {
            let t = integrate(&model, &x0, &DVector::zeros(model.dim()), &opts)?;
            t.write_csv(writer).map_err(|e| Failure::file(&a.out, e))?;
            t
        }
        Sys::Reduced(rm, b) | Sys::Collocation(rm, b) => {
            let xr = b.project(&x0);
            let vr = DVector::zeros(b.dim());
            let t = match &sys {
                Sys::Collocation(..) => {
                    let update = match a.velocity_update {
                        UpdateArg::Displacement => VelocityUpdate::Displacement,
                        UpdateArg::Velocity => VelocityUpdate::Velocity,
                    };
                    integrate_collocation(rm, &xr, &vr, &opts, update)?
                }
                _ => integrate(rm, &xr, &vr, &opts)?,
            };
            t.write_csv_mapped(writer, |x| b.matrix() * x)
                .map_err(|e| Failure::file(&a.out, e))?;
            t
        }
    };
    #[derive(Serialize)]
    struct IntegrateSummary<'a> {
        path: &'a Path,
        dt: f64,
        steps: usize,
        diverged: bool,
        divergence_step: Option<usize>,
        max_norm: f64,
    }
    let s = IntegrateSummary {
        path: &a.out,
        dt,
        steps: traj.final_state.n,
        diverged: traj.diverged,
        divergence_step: traj.divergence_step,
        max_norm: traj.max_norm,
    };
    if cli.json {
        emit_json(out, &s)?;
    } else {
        emit(out, format!("wrote {}", a.out.display()))?;
        emit(out, format!("dt: {dt:.6e}, steps: {}", s.steps))?;
        emit(out, format!("max |x|: {:.6e}", s.max_norm))?;
        emit(out, format!("diverged: {}", s.diverged))?;
    }
    Ok(if traj.diverged { EXIT_DIVERGED } else { EXIT_OK })
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs, out: &mut dyn Write) -> CliResult {
    let opts = VerifyOptions {
        seed: cli.seed,
        trials: a.trials as usize,
        break_symmetry: a.break_symmetry,
        max_order: a.max_order.max(2),
    };
    let results = run_suite(&opts)?;
    let all = results.iter().all(|r| r.ok());
    if cli.json {
        #[derive(Serialize)]
        struct VerifyReport<'a> {
            seed: u64,
            results: &'a [crate::verify::PropertyResult],
            all_pass: bool,
        }
        emit_json(
            out,
            &VerifyReport {
                seed: opts.seed,
                results: &results,
                all_pass: all,
            },
        )?;
    } else {
        emit(out, format!("{:<32} {:>9} {:>12}  status", "property", "passed", "worst"))?;
        for r in &results {
            emit(
                out,
                format!(
                    "{:<32} {:>9} {:>12.3e}  {}",
                    r.name,
                    format!("{}/{}", r.passed, r.trials),
                    r.worst,
                    if r.ok() { "PASS" } else { "FAIL" }
                ),
            )?;
            if let Some(f) = &r.failure {
                emit(out, format!("    {f}"))?;
            }
        }
    }
    Ok(if all { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_reproduce(cli: &Cli, a: &ReproduceArgs, out: &mut dyn Write) -> CliResult {
    let only = a
        .only
        .as_deref()
        .map(|s| s.parse::<Group>())
        .transpose()
        .map_err(Failure::usage)?;
    let report = reproduce(only)?;
    if cli.json {
        emit_json(out, &report)?;
    } else {
        if let Some(m) = &report.system_matrix {
            emit(out, "M^-1 K (m = 5, M = 1, K = 10):")?;
            for row in m {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>9.3}")).collect();
                emit(out, format!("  [{}]", cells.join(" ")))?;
            }
        }
        for r in &report.rows {
            emit(
                out,
                format!(
                    "{:<30} expected {:>12.6} computed {:>14.8}  {}",
                    r.id,
                    r.expected,
                    r.computed,
                    if r.pass { "PASS" } else { "FAIL" }
                ),
            )?;
        }
        for n in &report.notes {
            emit(out, format!("note: {n}"))?;
        }
    }
    Ok(if report.all_pass { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn parser_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn zero_stiffness_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let (code, _, err) =
            run_capture(&["romstab", "build", "string", "--m", "3", "--K", "0", "-o", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE, "{err}");
    }

    #[test]
    fn config_supplies_defaults_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"json": true, "reproduce": {"only": "ecsw"}}"#).unwrap();
        let (code, out, _) = run_capture(&["romstab", "--config", cfg.to_str().unwrap(), "reproduce"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 7);
        let (code, out, _) = run_capture(&[
            "romstab",
            "--config",
            cfg.to_str().unwrap(),
            "reproduce",
            "--only",
            "string5",
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 7);
        assert_eq!(v["rows"][0]["group"], "string5");
    }

    #[test]
    fn missing_config_is_file_error() {
        let (code, _, _) = run_capture(&["romstab", "--config", "/nonexistent/c.json", "verify"]);
        assert_eq!(code, EXIT_IO);
    }
}
