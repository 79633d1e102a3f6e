//! Declarative experiment sweeps: one axis (source count, target count or
//! perturbation scale), several trials per axis value, trial averages
//! written as two-column plot data.
//!
//! Every cell `(axis value, trial)` draws from streams derived from the
//! master seed and the cell's own coordinates, so a cell's result does not
//! depend on which other cells run, in what order, or on how many threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{minimax_floor, BoundInput};
use crate::error::{Error, Result};
use crate::estimators::{
    closed_form_excess_risk, fit_weighted_erm, mc_risk, select_lambda, ErmConfig, GdConfig, SourceWeighting,
};
use crate::metrics::transfer_distance;
use crate::model::{
    make_synthetic_pair, sample_dataset, Dataset, Domain, ModelKind, ModelSpec, PairRecipe, Role, TaskPair,
};
use crate::numerics::{matrix_from_rows, read_matrix_file, SymMatrix};
use crate::rng::{derive_seed, f64_tag};

/// Environment variable naming the directory for relative output paths.
pub const OUT_DIR_ENV: &str = "TLBOUND_OUT_DIR";

/// A matrix given inline, by shape rule, or by reference to a text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum MatrixSource {
    /// `scale · I`, order taken from context.
    ScaledIdentity { scale: f64 },
    Diagonal { values: Vec<f64> },
    Rows { rows: Vec<Vec<f64>> },
    File { path: PathBuf },
    /// Every entry equal to `value`; shape taken from context.
    Constant { value: f64 },
}

impl MatrixSource {
    fn resolve(&self, rows: usize, cols: usize, base: Option<&Path>) -> Result<DMatrix<f64>> {
        let m = match self {
            MatrixSource::ScaledIdentity { scale } => DMatrix::identity(rows, cols) * *scale,
            MatrixSource::Diagonal { values } => {
                let mut m = DMatrix::zeros(values.len(), values.len());
                m.set_diagonal(&nalgebra::DVector::from_column_slice(values));
                m
            }
            MatrixSource::Rows { rows } => matrix_from_rows(rows)?,
            MatrixSource::File { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                read_matrix_file(&full)?
            }
            MatrixSource::Constant { value } => DMatrix::from_element(rows, cols, *value),
        };
        if m.shape() != (rows, cols) {
            return Err(Error::Config(format!(
                "matrix is {}x{}, expected {rows}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub d: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    pub sigma: f64,
    pub cov_source: MatrixSource,
    pub cov_target: MatrixSource,
    /// `V` for the fixed-output network, `W` for the fixed-input network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<MatrixSource>,
}

impl ModelConfig {
    pub fn build(&self, base: Option<&Path>) -> Result<ModelSpec> {
        let d = self.d;
        let cov = |m: &MatrixSource| -> Result<SymMatrix> { SymMatrix::new(m.resolve(d, d, base)?) };
        let cov_s = cov(&self.cov_source)?;
        let cov_t = cov(&self.cov_target)?;
        let hidden = self.hidden.unwrap_or(0);
        let fixed = match (self.kind, &self.fixed) {
            (ModelKind::Linear, None) => None,
            (ModelKind::Linear, Some(_)) => {
                return Err(Error::Config("the linear model takes no fixed matrix".into()))
            }
            (_, None) => return Err(Error::Config(format!("{} needs a fixed matrix", self.kind))),
            (kind, Some(src)) => {
                if hidden == 0 {
                    return Err(Error::Config(format!("{kind} needs a positive hidden width")));
                }
                let (r, c) = if kind == ModelKind::NetFixedOutput { (self.k, hidden) } else { (hidden, d) };
                Some(src.resolve(r, c, base)?)
            }
        };
        ModelSpec::new(self.kind, d, self.k, hidden, self.sigma, cov_s, cov_t, fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NS,
    NT,
    DeltaScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum LambdaPolicy {
    Fixed { value: f64 },
    Grid { values: Vec<f64>, validation_size: usize },
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Fixed { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelConfig,
    pub pair: PairRecipe,
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    /// Source count when the axis is not `n_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    /// Target count when the axis is not `n_t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(default)]
    pub lambda: LambdaPolicy,
    #[serde(default)]
    pub gd: GdConfig,
    #[serde(default)]
    pub weighting: SourceWeighting,
    /// Reuse trial `t`'s random draws at every axis value (seeds from
    /// `(master_seed, trial)` instead of `(master_seed, axis value, trial)`).
    #[serde(default)]
    pub common_random_numbers: bool,
    pub trials: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory relative matrix files are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_n_test() -> usize {
    200
}

/// Per-trial setting shared by [`simulate`] and the sweep cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    pub n_s: usize,
    pub n_t: usize,
    pub lambda: LambdaPolicy,
    pub gd: GdConfig,
    pub weighting: SourceWeighting,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub lambda_used: f64,
    pub converged: bool,
    /// Monte-Carlo target risk on `n_test` fresh samples.
    pub mc_risk: f64,
    pub closed_form_risk: f64,
    pub excess_risk: f64,
    pub rho: f64,
    /// `None` when the bound's preconditions fail (e.g. small `D`).
    pub risk_floor: Option<f64>,
}

fn empty_dataset(spec: &ModelSpec, role: Role, seed: u64) -> Dataset {
    Dataset {
        features: DMatrix::zeros(0, spec.d()),
        labels: DMatrix::zeros(0, spec.k()),
        role,
        seed,
    }
}

fn draw(pair: &TaskPair, n: usize, domain: Domain, role: Role, seed: u64) -> Result<Dataset> {
    let s = derive_seed(seed, &[role.tag()]);
    if n == 0 {
        return Ok(empty_dataset(&pair.spec, role, s));
    }
    sample_dataset(&pair.spec, pair.params(domain), n, domain, role, s)
}

/// Risk floor for a pair at `Δ = ρ`, or `None` when the bound does not apply.
pub fn cell_floor(spec: &ModelSpec, rho: f64, n_s: usize, n_t: usize) -> Option<f64> {
    let input = BoundInput::from_spec(spec, rho, n_s as u64, n_t as u64).ok()?;
    minimax_floor(spec, &input).ok().map(|r| r.risk_floor)
}

/// One trial: sample, fit, evaluate. Every stream derives from `seed`.
pub fn simulate(pair: &TaskPair, setup: &SimulationSetup, seed: u64) -> Result<SimulationReport> {
    let spec = &pair.spec;
    let source = draw(pair, setup.n_s, Domain::Source, Role::Source, seed)?;
    let target = draw(pair, setup.n_t, Domain::Target, Role::Target, seed)?;
    let base = ErmConfig {
        lambda: 0.0,
        lambda_grid: None,
        gd: setup.gd,
        weighting: setup.weighting,
        record_trace: false,
    };
    let fit = match &setup.lambda {
        LambdaPolicy::Fixed { value } => fit_weighted_erm(spec, &source, &target, &ErmConfig { lambda: *value, ..base })?,
        LambdaPolicy::Grid { values, validation_size } => {
            let val = draw(pair, *validation_size, Domain::Target, Role::Validation, seed)?;
            select_lambda(spec, &source, &target, &val, values, &base)?
        }
    };
    let est = fit.task_params();
    let test_seed = derive_seed(seed, &[Role::Test.tag()]);
    let mc = mc_risk(spec, &est, &pair.target, setup.n_test, test_seed)?;
    let excess = closed_form_excess_risk(spec, &est, &pair.target)?;
    if !mc.is_finite() || !excess.is_finite() {
        return Err(Error::DivergedOptimization { iteration: fit.iterations });
    }
    let rho = transfer_distance(pair)?.rho;
    Ok(SimulationReport {
        lambda_used: fit.lambda_used,
        converged: fit.converged,
        mc_risk: mc,
        closed_form_risk: excess + spec.noise_floor(),
        excess_risk: excess,
        rho,
        risk_floor: cell_floor(spec, rho, setup.n_s, setup.n_t),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub n_s: usize,
    pub n_t: usize,
    pub rho: f64,
    /// Trial mean of the Monte-Carlo risk.
    pub mean_error: f64,
    /// Sample standard deviation of the Monte-Carlo risk across trials.
    pub std_error: f64,
    pub mean_closed_form: f64,
    pub mean_excess: f64,
    pub mean_lambda: f64,
    pub risk_floor: Option<f64>,
    pub trials_ok: usize,
    pub failed: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub points: Vec<SweepPoint>,
    pub config: SweepConfig,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative matrix paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_test == 0 {
            return bad("n_test must be at least 1".into());
        }
        if self.axis_values.is_empty() {
            return bad("axis_values is empty".into());
        }
        if self.axis_values.iter().any(|v| !v.is_finite()) {
            return bad("axis_values must be finite".into());
        }
        if self.axis_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("axis_values must be strictly increasing".into());
        }
        if matches!(self.axis, SweepAxis::NS | SweepAxis::NT)
            && self.axis_values.iter().any(|v| *v < 0.0 || v.fract() != 0.0)
        {
            return bad("sample-count axis values must be nonnegative integers".into());
        }
        match self.axis {
            SweepAxis::NS if self.n_t.is_none() => return bad("axis n_s needs a fixed n_t".into()),
            SweepAxis::NT if self.n_s.is_none() => return bad("axis n_t needs a fixed n_s".into()),
            SweepAxis::DeltaScale if self.n_s.is_none() || self.n_t.is_none() => {
                return bad("axis delta_scale needs fixed n_s and n_t".into())
            }
            _ => {}
        }
        match &self.lambda {
            LambdaPolicy::Fixed { value } if !(value.is_finite() && *value >= 0.0) => {
                return bad(format!("λ must be nonnegative, got {value}"))
            }
            LambdaPolicy::Grid { values, validation_size } => {
                if values.is_empty() || *validation_size == 0 {
                    return bad("λ grid and validation size must be nonempty".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("λ grid entries must be nonnegative".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `(n_s, n_t, perturbation scale)` at an axis value.
    fn cell_setting(&self, x: f64) -> (usize, usize, f64) {
        let n_s = self.n_s.unwrap_or(0);
        let n_t = self.n_t.unwrap_or(0);
        match self.axis {
            SweepAxis::NS => (x as usize, n_t, self.pair.scale),
            SweepAxis::NT => (n_s, x as usize, self.pair.scale),
            SweepAxis::DeltaScale => (n_s, n_t, x),
        }
    }

    pub fn cell_seed(&self, x: f64, trial: usize) -> u64 {
        if self.common_random_numbers {
            derive_seed(self.master_seed, &[trial as u64])
        } else {
            derive_seed(self.master_seed, &[f64_tag(x), trial as u64])
        }
    }

    pub fn setup_at(&self, x: f64) -> SimulationSetup {
        let (n_s, n_t, _) = self.cell_setting(x);
        SimulationSetup {
            n_s,
            n_t,
            lambda: self.lambda.clone(),
            gd: self.gd,
            weighting: self.weighting,
            n_test: self.n_test,
        }
    }

    /// The ground-truth pair at an axis value.
    pub fn pair_at(&self, spec: &ModelSpec, x: f64) -> Result<TaskPair> {
        let (_, _, scale) = self.cell_setting(x);
        make_synthetic_pair(spec, &self.pair.with_scale(scale))
    }

    /// Where the `.dat` file goes: `output` (default `sweep.dat`), joined
    /// onto `$TLBOUND_OUT_DIR` when relative and the variable is set.
    pub fn output_path(&self) -> PathBuf {
        let p = self.output.clone().unwrap_or_else(|| PathBuf::from("sweep.dat"));
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if p.is_relative() && !dir.is_empty() => Path::new(&dir).join(p),
            _ => p,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn aggregate(x: f64, setup: &SimulationSetup, rho: f64, floor: Option<f64>, cells: Vec<Result<SimulationReport>>) -> SweepPoint {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (trial, c) in cells.into_iter().enumerate() {
        match c {
            Ok(r) => ok.push(r),
            Err(e) => failed.push(CellFailure { trial, message: e.to_string() }),
        }
    }
    let col = |f: fn(&SimulationReport) -> f64| -> Vec<f64> { ok.iter().map(f).collect() };
    let errors = col(|r| r.mc_risk);
    let (mean_error, std_error, mean_closed_form, mean_excess, mean_lambda) = if ok.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            mean(&errors),
            sample_std(&errors),
            mean(&col(|r| r.closed_form_risk)),
            mean(&col(|r| r.excess_risk)),
            mean(&col(|r| r.lambda_used)),
        )
    };
    SweepPoint {
        x,
        n_s: setup.n_s,
        n_t: setup.n_t,
        rho,
        mean_error,
        std_error,
        mean_closed_form,
        mean_excess,
        mean_lambda,
        risk_floor: floor,
        trials_ok: ok.len(),
        failed,
    }
}

/// Runs every cell and averages per axis value. `threads = None` uses the
/// global pool; the result is identical for any thread count.
pub fn run_sweep(cfg: &SweepConfig, threads: Option<usize>) -> Result<SweepSeries> {
    cfg.validate()?;
    let spec = cfg.model.build(cfg.base_dir.as_deref())?;
    let mut pairs = Vec::with_capacity(cfg.axis_values.len());
    for &x in &cfg.axis_values {
        pairs.push(cfg.pair_at(&spec, x)?);
    }
    let cells: Vec<(usize, usize)> = (0..cfg.axis_values.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    let run_cell = |&(i, t): &(usize, usize)| {
        let x = cfg.axis_values[i];
        simulate(&pairs[i], &cfg.setup_at(x), cfg.cell_seed(x, t))
    };
    let results = run_cells(&cells, run_cell, threads)?;

    let mut results = results.into_iter();
    let mut points = Vec::with_capacity(cfg.axis_values.len());
    for (i, &x) in cfg.axis_values.iter().enumerate() {
        let setup = cfg.setup_at(x);
        let rho = transfer_distance(&pairs[i])?.rho;
        let floor = cell_floor(&spec, rho, setup.n_s, setup.n_t);
        let cells: Vec<_> = results.by_ref().take(cfg.trials).collect();
        points.push(aggregate(x, &setup, rho, floor, cells));
    }
    Ok(SweepSeries { points, config: cfg.clone() })
}

#[cfg(feature = "parallel")]
fn run_cells<F>(cells: &[(usize, usize)], f: F, threads: Option<usize>) -> Result<Vec<Result<SimulationReport>>>
where
    F: Fn(&(usize, usize)) -> Result<SimulationReport> + Sync,
{
    use rayon::prelude::*;
    let go = || cells.par_iter().map(&f).collect::<Vec<_>>();
    match threads {
        None => Ok(go()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(go))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_cells<F>(cells: &[(usize, usize)], f: F, _threads: Option<usize>) -> Result<Vec<Result<SimulationReport>>>
where
    F: Fn(&(usize, usize)) -> Result<SimulationReport>,
{
    Ok(cells.iter().map(f).collect())
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Two-column `x y` text, one pair per line.
pub fn two_column(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        let _ = writeln!(s, "{} {}", format_sig6(x), format_sig6(y));
    }
    s
}

pub fn meta_path(dat: &Path) -> PathBuf {
    dat.with_extension("meta")
}

/// Writes `x mean_error` lines to `path` and the resolved config and
/// per-point details to the companion `.meta` file.
pub fn emit_dat(series: &SweepSeries, path: &Path) -> Result<()> {
    if series.points.is_empty() {
        return Err(Error::EmptySeries(path.to_path_buf()));
    }
    write_file(path, &two_column(series.points.iter().map(|p| (p.x, p.mean_error))))?;
    let meta = serde_json::to_string_pretty(series).expect("series serializes");
    write_file(&meta_path(path), &(meta + "\n"))
}

/// `x,mean,std,floor` with an empty floor where the bound does not apply.
pub fn emit_csv(series: &SweepSeries, path: &Path) -> Result<()> {
    if series.points.is_empty() {
        return Err(Error::EmptySeries(path.to_path_buf()));
    }
    let mut s = String::from("x,mean,std,floor\n");
    for p in &series.points {
        let floor = p.risk_floor.map(format_sig6).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            format_sig6(p.x),
            format_sig6(p.mean_error),
            format_sig6(p.std_error),
            floor
        );
    }
    write_file(path, &s)
}

/// Iteration-indexed objective trace as two-column data.
pub fn emit_trace_dat(trace: &[f64], path: &Path) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::EmptySeries(path.to_path_buf()));
    }
    write_file(path, &two_column(trace.iter().enumerate().map(|(i, v)| (i as f64, *v))))
}

/// Built-in configurations: the full-size experiments and reduced
/// versions that run in seconds.
pub mod presets {
    use super::*;

    pub const NAMES: &[&str] = &[
        "setup1-linear-small",
        "setup1-linear-large",
        "setup1-linear-nt-small",
        "setup1-linear-nt-large",
        "setup1-net-small",
        "setup1-net-large",
        "setup2-linear",
        "setup2-net",
        "reduced-setup1-small",
        "reduced-setup1-large",
        "reduced-small-scaling",
        "reduced-setup2",
    ];

    fn covs() -> (MatrixSource, MatrixSource) {
        (MatrixSource::ScaledIdentity { scale: 2.0 }, MatrixSource::ScaledIdentity { scale: 1.0 })
    }

    fn linear(d: usize, k: usize, sigma: f64) -> ModelConfig {
        let (cov_source, cov_target) = covs();
        ModelConfig { kind: ModelKind::Linear, d, k, hidden: None, sigma, cov_source, cov_target, fixed: None }
    }

    /// `k = 1`, `ℓ = 30`, all-ones output layer.
    fn net(d: usize, sigma: f64) -> ModelConfig {
        let (cov_source, cov_target) = covs();
        ModelConfig {
            kind: ModelKind::NetFixedOutput,
            d,
            k: 1,
            hidden: Some(30),
            sigma,
            cov_source,
            cov_target,
            fixed: Some(MatrixSource::Constant { value: 1.0 }),
        }
    }

    fn recipe(perturbation_variance: f64, base: Domain) -> PairRecipe {
        PairRecipe {
            base_seed: 2021,
            entry_variance: 10.0,
            perturbation_variance,
            scale: 1.0,
            base,
            target_distance: None,
        }
    }

    fn geometric(from: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| from * 2f64.powi(i as i32)).collect()
    }

    fn base(model: ModelConfig, pair: PairRecipe, axis: SweepAxis, axis_values: Vec<f64>) -> SweepConfig {
        SweepConfig {
            model,
            pair,
            axis,
            axis_values,
            n_s: None,
            n_t: None,
            lambda: LambdaPolicy::Fixed { value: 1.0 },
            gd: GdConfig::default(),
            weighting: SourceWeighting::PerSet,
            common_random_numbers: false,
            trials: 10,
            n_test: 200,
            master_seed: 7,
            output: None,
            base_dir: None,
        }
    }

    const SMALL_VAR: f64 = 1e-3;
    const LARGE_VAR: f64 = 3.6e5;

    fn setup1(model: ModelConfig, var: f64, name: &str) -> SweepConfig {
        let mut c = base(model, recipe(var, Domain::Source), SweepAxis::NS, geometric(50.0, 7));
        c.n_t = Some(50);
        c.output = Some(PathBuf::from(format!("{name}.dat")));
        c
    }

    fn setup1_nt(var: f64, lambda: f64, name: &str) -> SweepConfig {
        let mut c = base(linear(200, 30, 1.0), recipe(var, Domain::Source), SweepAxis::NT, geometric(25.0, 7));
        c.n_s = Some(50);
        c.lambda = LambdaPolicy::Fixed { value: lambda };
        c.output = Some(PathBuf::from(format!("{name}.dat")));
        c
    }

    fn setup2(model: ModelConfig, d_values: Vec<f64>, name: &str) -> SweepConfig {
        let mut c = base(model, recipe(1e-4, Domain::Target), SweepAxis::DeltaScale, d_values);
        c.n_s = Some(300);
        c.n_t = Some(20);
        c.lambda = LambdaPolicy::Grid { values: vec![0.0, 0.25, 0.5, 0.75, 1.0], validation_size: 50 };
        c.common_random_numbers = true;
        c.trials = 20;
        c.output = Some(PathBuf::from(format!("{name}.dat")));
        c
    }

    /// Scales `1, 401, …, 139601` (step 400).
    fn full_scale_grid() -> Vec<f64> {
        (0..350).map(|j| 1.0 + 400.0 * j as f64).collect()
    }

    /// Reduced setup-1 pair at a prescribed transfer distance.
    fn reduced_setup1(rho: f64, name: &str) -> SweepConfig {
        let mut pair = recipe(1.0, Domain::Source);
        pair.target_distance = Some(rho);
        let mut c = base(linear(50, 10, 1.0), pair, SweepAxis::NS, geometric(100.0, 5));
        c.n_t = Some(50);
        c.weighting = SourceWeighting::PerSample;
        c.common_random_numbers = true;
        c.output = Some(PathBuf::from(format!("{name}.dat")));
        c
    }

    /// Scales `4^0, 4^1, …, 4^19` for the reduced perturbation sweep
    /// (`d = 20`, `k = 10`). With `n_T = d` the target-only fit has a heavy
    /// error tail, so the grid reaches far enough that every trial has
    /// switched to it well before the last quarter.
    pub fn reduced_setup2_scales() -> Vec<f64> {
        (0..20).map(|i| 4f64.powi(i)).collect()
    }

    pub fn get(name: &str) -> Option<SweepConfig> {
        Some(match name {
            "setup1-linear-small" => setup1(linear(200, 30, 1.0), SMALL_VAR, name),
            "setup1-linear-large" => setup1(linear(200, 30, 1.0), LARGE_VAR, name),
            "setup1-linear-nt-small" => setup1_nt(SMALL_VAR, 1.0, name),
            "setup1-linear-nt-large" => setup1_nt(LARGE_VAR, 0.001, name),
            "setup1-net-small" => setup1(net(200, 1.0), SMALL_VAR, name),
            "setup1-net-large" => setup1(net(200, 1.0), LARGE_VAR, name),
            "setup2-linear" => setup2(linear(50, 30, 0.3), full_scale_grid(), name),
            "setup2-net" => setup2(net(50, 0.3), full_scale_grid(), name),
            "reduced-setup1-small" => reduced_setup1(0.0183, name),
            "reduced-setup1-large" => reduced_setup1(116.694, name),
            "reduced-small-scaling" => {
                let mut c = base(linear(50, 10, 1.0), recipe(0.0, Domain::Source), SweepAxis::NS, vec![450.0, 950.0, 1950.0, 3950.0]);
                c.n_t = Some(50);
                c.weighting = SourceWeighting::PerSample;
                c.common_random_numbers = true;
                c.output = Some(PathBuf::from(format!("{name}.dat")));
                c
            }
            "reduced-setup2" => setup2(linear(20, 10, 0.3), reduced_setup2_scales(), name),
            _ => return None,
        })
    }
}
