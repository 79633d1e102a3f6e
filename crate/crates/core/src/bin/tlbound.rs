use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use transfer_bounds::bounds::{minimax_floor, BoundInput, BoundReport};
use transfer_bounds::harness::{self, emit_csv, emit_dat, presets, run_sweep, simulate, ModelConfig, MatrixSource, SweepConfig};
use transfer_bounds::kernels::arccos_covariance;
use transfer_bounds::metrics::{parameter_distance, DistanceReport};
use transfer_bounds::numerics::{format_matrix, read_matrix_file, write_matrix_file, SymMatrix};
use transfer_bounds::verify::{self, Scale};
use transfer_bounds::{Error, ModelKind, ModelSpec, TaskParams};

const EXIT_USAGE: u8 = 1;
const EXIT_COMPUTE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "tlbound", version, about = "Transfer-learning minimax bounds, closed-form risks and simulation sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-regime lower bound and risk floor
    Bound(BoundArgs),
    /// Transfer distance between two parameter matrices
    Distance(DistanceArgs),
    /// Arc-cosine covariance of ReLU features
    Kernel(KernelArgs),
    /// One trial of a sweep: sample, fit, evaluate
    Simulate(SimulateArgs),
    /// Run a sweep and write plot data
    Sweep(SweepArgs),
    /// Print a built-in sweep configuration as JSON
    Preset(PresetArgs),
    /// Run the Monte-Carlo oracle suite
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Kv,
    Json,
    Csv,
}

#[derive(Args)]
struct BoundArgs {
    /// linear, net-fixed-output or net-fixed-input (ignored with --spec)
    #[arg(long, default_value = "linear")]
    model: ModelKind,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    ns: u64,
    #[arg(long)]
    nt: u64,
    /// Noise level; required without --spec
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Hidden width for the network models
    #[arg(long)]
    hidden: Option<usize>,
    /// Model description (JSON); identity covariances and an all-ones fixed matrix otherwise
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "kv")]
    format: Format,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Distance budget to test membership against
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    cov: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepSource {
    /// Sweep configuration (JSON)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration name
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SweepSource,
    /// Axis value; defaults to the first in the config
    #[arg(long)]
    x: Option<f64>,
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SweepSource,
    /// Worker threads; all available cores by default
    #[arg(long)]
    threads: Option<usize>,
    /// Also write `x,mean,std,floor` CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Override the configured .dat path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    /// Omit to list the available names
    name: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Reduced sample counts
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 20_211_014)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Compute(Error),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            e => Failure::Compute(e),
        }
    }
}

type CliResult = Result<(), Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<ModelSpec, Failure> {
    let cfg: ModelConfig = read_json(path)?;
    Ok(cfg.build(path.parent())?)
}

fn read_matrix(path: &Path) -> Result<nalgebra::DMatrix<f64>, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(format!("no such file: {}", path.display())));
    }
    Ok(read_matrix_file(path)?)
}

fn default_spec(a: &BoundArgs) -> Result<ModelSpec, Failure> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("--{flag} is required without --spec")));
    let d = need(a.d, "d")?;
    let k = need(a.k, "k")?;
    let sigma = a.sigma.ok_or_else(|| Failure::Usage("--sigma is required without --spec".into()))?;
    let hidden = match a.model {
        ModelKind::Linear => None,
        _ => Some(need(a.hidden, "hidden")?),
    };
    let cfg = ModelConfig {
        kind: a.model,
        d,
        k,
        hidden,
        sigma,
        cov_source: MatrixSource::ScaledIdentity { scale: 1.0 },
        cov_target: MatrixSource::ScaledIdentity { scale: 1.0 },
        fixed: hidden.map(|_| MatrixSource::Constant { value: 1.0 }),
    };
    Ok(cfg.build(None)?)
}

fn cmd_bound(a: BoundArgs) -> CliResult {
    let spec = match &a.spec {
        Some(p) => load_spec(p)?,
        None => default_spec(&a)?,
    };
    if let Some(s) = a.sigma {
        if a.spec.is_some() && (s - spec.sigma()).abs() > 1e-12 * spec.sigma() {
            return Err(Failure::Usage(format!("--sigma {s} disagrees with the spec's σ = {}", spec.sigma())));
        }
    }
    let input = BoundInput::from_spec(&spec, a.delta, a.ns, a.nt)?;
    let report = minimax_floor(&spec, &input)?;
    match a.format {
        Format::Kv => print!("{}", report.to_kv()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Csv => println!("{}\n{}", BoundReport::CSV_HEADER, report.to_csv_row()),
    }
    Ok(())
}

fn cmd_distance(a: DistanceArgs) -> CliResult {
    let spec = load_spec(&a.spec)?;
    let s = TaskParams(read_matrix(&a.source)?);
    let t = TaskParams(read_matrix(&a.target)?);
    let mut report = DistanceReport { rho: parameter_distance(&spec, &s, &t)?, delta_bound: None };
    if let Some(d) = a.delta {
        report = report.with_budget(d);
    }
    println!("rho={:e}", report.rho);
    if let (Some(d), Some(inside)) = (report.delta_bound, report.within_budget()) {
        println!("delta={d:e}");
        println!("within_budget={inside}");
    }
    Ok(())
}

fn cmd_kernel(a: KernelArgs) -> CliResult {
    let w = read_matrix(&a.weights)?;
    let cov = SymMatrix::new(read_matrix(&a.cov)?)?;
    let k = arccos_covariance(&w, &cov)?;
    match a.out {
        Some(p) => write_matrix_file(&p, k.matrix.as_matrix())?,
        None => print!("{}", format_matrix(k.matrix.as_matrix())),
    }
    Ok(())
}

fn load_sweep(src: &SweepSource) -> Result<SweepConfig, Failure> {
    match (&src.config, &src.preset) {
        (Some(p), _) => {
            if !p.is_file() {
                return Err(Failure::Usage(format!("config file not found: {}", p.display())));
            }
            Ok(SweepConfig::from_file(p)?)
        }
        (None, Some(name)) => presets::get(name)
            .ok_or_else(|| Failure::Usage(format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", ")))),
        (None, None) => Err(Failure::Usage("one of --config or --preset is required".into())),
    }
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let cfg = load_sweep(&a.source)?;
    let x = a.x.unwrap_or(cfg.axis_values[0]);
    let spec = cfg.model.build(cfg.base_dir.as_deref())?;
    let pair = cfg.pair_at(&spec, x)?;
    let report = simulate(&pair, &cfg.setup_at(x), cfg.cell_seed(x, a.trial))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let mut cfg = load_sweep(&a.source)?;
    if let Some(out) = a.out {
        cfg.output = Some(out);
    }
    let series = run_sweep(&cfg, a.threads)?;
    let path = cfg.output_path();
    emit_dat(&series, &path)?;
    println!("wrote {}", path.display());
    if let Some(csv) = a.csv {
        emit_csv(&series, &csv)?;
        println!("wrote {}", csv.display());
    }
    let failed: usize = series.points.iter().map(|p| p.failed.len()).sum();
    if failed > 0 {
        eprintln!("warning: {failed} cell(s) failed; see {}", harness::meta_path(&path).display());
    }
    Ok(())
}

fn cmd_preset(a: PresetArgs) -> CliResult {
    match a.name {
        None => presets::NAMES.iter().for_each(|n| println!("{n}")),
        Some(n) => {
            let cfg = presets::get(&n).ok_or_else(|| Failure::Usage(format!("unknown preset {n:?}")))?;
            println!("{}", cfg.to_json());
        }
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let scale = if a.quick { Scale::Quick } else { Scale::Full };
    let outcomes = verify::run(scale, a.seed);
    for o in &outcomes {
        println!("{o}");
    }
    if outcomes.iter().all(|o| o.passed) {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Distance(a) => cmd_distance(a),
        Command::Kernel(a) => cmd_kernel(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Preset(a) => cmd_preset(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `tlbound --help` for usage");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_COMPUTE)
        }
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
    }
}
