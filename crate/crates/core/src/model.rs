//! The three transfer models, their parameters, and seeded data generation.
//!
//! | kind               | trainable       | output                |
//! |--------------------|-----------------|-----------------------|
//! | `Linear`           | `W` (k×d)       | `W x`                 |
//! | `NetFixedOutput`   | `W` (ℓ×d)       | `V φ(W x)`, `V` fixed |
//! | `NetFixedInput`    | `V` (k×ℓ)       | `V φ(W x)`, `W` fixed |
//!
//! Features are `N(0, Σ_S)` or `N(0, Σ_T)` depending on the domain, labels
//! carry i.i.d. `N(0, σ²)` noise per coordinate.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::numerics::{psd_power, Power, SymMatrix};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    NetFixedOutput,
    NetFixedInput,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::NetFixedOutput => "net-fixed-output",
            ModelKind::NetFixedInput => "net-fixed-input",
        }
    }

    /// Whether the training objective is quadratic in the trainable matrix.
    pub fn is_quadratic(self) -> bool {
        !matches!(self, ModelKind::NetFixedOutput)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "net-fixed-output" | "fixed-output" => Ok(ModelKind::NetFixedOutput),
            "net-fixed-input" | "fixed-input" => Ok(ModelKind::NetFixedInput),
            other => Err(Error::InvalidInput(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Which feature distribution a sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Source,
    Target,
    Validation,
    Test,
}

impl Role {
    pub(crate) fn tag(self) -> u64 {
        match self {
            Role::Source => 1,
            Role::Target => 2,
            Role::Validation => 3,
            Role::Test => 4,
        }
    }
}

/// A validated model description. Covariance square roots are cached.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    d: usize,
    k: usize,
    hidden: usize,
    sigma: f64,
    cov_source: SymMatrix,
    cov_target: SymMatrix,
    fixed: Option<DMatrix<f64>>,
    root_source: SymMatrix,
    root_target: SymMatrix,
}

impl ModelSpec {
    /// `hidden` is ignored for `Linear`; `fixed` is `V` (k×ℓ) for
    /// `NetFixedOutput`, `W` (ℓ×d) for `NetFixedInput`, absent for `Linear`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: ModelKind,
        d: usize,
        k: usize,
        hidden: usize,
        sigma: f64,
        cov_source: SymMatrix,
        cov_target: SymMatrix,
        fixed: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidInput("d and k must be positive".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("noise level must be positive, got {sigma}")));
        }
        for (name, c) in [("source", &cov_source), ("target", &cov_target)] {
            if c.order() != d {
                return Err(Error::shape(format!(
                    "{name} covariance has order {}, expected {d}",
                    c.order()
                )));
            }
            if !c.is_psd() {
                return Err(Error::InvalidMatrix(format!("{name} covariance is not PSD")));
            }
        }
        let hidden = match kind {
            ModelKind::Linear => {
                if fixed.is_some() {
                    return Err(Error::InvalidInput("the linear model has no fixed matrix".into()));
                }
                0
            }
            ModelKind::NetFixedOutput | ModelKind::NetFixedInput => {
                if hidden == 0 {
                    return Err(Error::InvalidInput("hidden width must be positive".into()));
                }
                let want = if kind == ModelKind::NetFixedOutput { (k, hidden) } else { (hidden, d) };
                match &fixed {
                    Some(m) if m.shape() == want => {
                        if m.iter().any(|v| !v.is_finite()) {
                            return Err(Error::InvalidMatrix("non-finite fixed matrix".into()));
                        }
                    }
                    Some(m) => {
                        return Err(Error::shape(format!(
                            "fixed matrix is {}x{}, expected {}x{}",
                            m.nrows(),
                            m.ncols(),
                            want.0,
                            want.1
                        )))
                    }
                    None => return Err(Error::InvalidInput(format!("{kind} needs a fixed matrix"))),
                }
                hidden
            }
        };
        let root_source = psd_power(&cov_source, Power::Half)?;
        let root_target = psd_power(&cov_target, Power::Half)?;
        Ok(ModelSpec {
            kind,
            d,
            k,
            hidden,
            sigma,
            cov_source,
            cov_target,
            fixed,
            root_source,
            root_target,
        })
    }

    pub fn linear(d: usize, k: usize, sigma: f64, cov_source: SymMatrix, cov_target: SymMatrix) -> Result<Self> {
        Self::new(ModelKind::Linear, d, k, 0, sigma, cov_source, cov_target, None)
    }

    /// Fixed hidden-to-output layer `v` (k×ℓ); `d` comes from the covariances.
    pub fn net_fixed_output(v: DMatrix<f64>, sigma: f64, cov_source: SymMatrix, cov_target: SymMatrix) -> Result<Self> {
        let (k, l) = v.shape();
        let d = cov_target.order();
        Self::new(ModelKind::NetFixedOutput, d, k, l, sigma, cov_source, cov_target, Some(v))
    }

    /// Fixed input-to-hidden layer `w` (ℓ×d).
    pub fn net_fixed_input(w: DMatrix<f64>, k: usize, sigma: f64, cov_source: SymMatrix, cov_target: SymMatrix) -> Result<Self> {
        let (l, d) = w.shape();
        Self::new(ModelKind::NetFixedInput, d, k, l, sigma, cov_source, cov_target, Some(w))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn hidden(&self) -> usize {
        self.hidden
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn cov_source(&self) -> &SymMatrix {
        &self.cov_source
    }
    pub fn cov_target(&self) -> &SymMatrix {
        &self.cov_target
    }
    pub fn fixed_matrix(&self) -> Option<&DMatrix<f64>> {
        self.fixed.as_ref()
    }

    pub fn cov(&self, domain: Domain) -> &SymMatrix {
        match domain {
            Domain::Source => &self.cov_source,
            Domain::Target => &self.cov_target,
        }
    }

    pub(crate) fn cov_root(&self, domain: Domain) -> &SymMatrix {
        match domain {
            Domain::Source => &self.root_source,
            Domain::Target => &self.root_target,
        }
    }

    /// Shape of the trainable matrix.
    pub fn param_shape(&self) -> (usize, usize) {
        match self.kind {
            ModelKind::Linear => (self.k, self.d),
            ModelKind::NetFixedOutput => (self.hidden, self.d),
            ModelKind::NetFixedInput => (self.k, self.hidden),
        }
    }

    /// Irreducible target risk `kσ²`.
    pub fn noise_floor(&self) -> f64 {
        self.k as f64 * self.sigma * self.sigma
    }

    pub(crate) fn fixed(&self) -> &DMatrix<f64> {
        self.fixed.as_ref().expect("network kinds carry a fixed matrix")
    }

    pub fn check_params(&self, p: &TaskParams) -> Result<()> {
        let want = self.param_shape();
        if p.0.shape() != want {
            return Err(Error::shape(format!(
                "{} parameters must be {}x{}, got {}x{}",
                self.kind,
                want.0,
                want.1,
                p.0.nrows(),
                p.0.ncols()
            )));
        }
        Ok(())
    }
}

/// Trainable matrix of one task: `W_S`/`W_T` or `V_S`/`V_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskParams(pub DMatrix<f64>);

impl TaskParams {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct TaskPair {
    pub spec: ModelSpec,
    pub source: TaskParams,
    pub target: TaskParams,
}

impl TaskPair {
    pub fn new(spec: ModelSpec, source: TaskParams, target: TaskParams) -> Result<Self> {
        spec.check_params(&source)?;
        spec.check_params(&target)?;
        Ok(TaskPair { spec, source, target })
    }

    pub fn params(&self, domain: Domain) -> &TaskParams {
        match domain {
            Domain::Source => &self.source,
            Domain::Target => &self.target,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// n×d
    pub features: DMatrix<f64>,
    /// n×k
    pub labels: DMatrix<f64>,
    pub role: Role,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

fn relu_in_place(m: &mut DMatrix<f64>) {
    m.apply(|v| *v = v.max(0.0));
}

/// Inputs of the quadratic kinds' regression: `X` itself for `Linear`,
/// hidden activations `φ(X Wᵀ)` for `NetFixedInput`.
pub fn regression_features(spec: &ModelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != spec.d {
        return Err(Error::shape(format!("features have {} columns, expected {}", x.ncols(), spec.d)));
    }
    match spec.kind {
        ModelKind::Linear => Ok(x.clone()),
        ModelKind::NetFixedInput => {
            let mut h = x * spec.fixed().transpose();
            relu_in_place(&mut h);
            Ok(h)
        }
        ModelKind::NetFixedOutput => Err(Error::InvalidInput(
            "net-fixed-output is not linear in its parameters".into(),
        )),
    }
}

/// Noiseless outputs for a batch of inputs (rows of `x`), n×k.
pub fn forward_batch(spec: &ModelSpec, params: &TaskParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.check_params(params)?;
    if x.ncols() != spec.d {
        return Err(Error::shape(format!("features have {} columns, expected {}", x.ncols(), spec.d)));
    }
    let p = &params.0;
    Ok(match spec.kind {
        ModelKind::Linear => x * p.transpose(),
        ModelKind::NetFixedOutput => {
            let mut h = x * p.transpose();
            relu_in_place(&mut h);
            h * spec.fixed().transpose()
        }
        ModelKind::NetFixedInput => {
            let mut h = x * spec.fixed().transpose();
            relu_in_place(&mut h);
            h * p.transpose()
        }
    })
}

/// Noiseless output `f(θ; x)` for a single input.
pub fn forward(spec: &ModelSpec, params: &TaskParams, x: &DVector<f64>) -> Result<DVector<f64>> {
    let row = DMatrix::from_row_slice(1, x.len(), x.as_slice());
    let out = forward_batch(spec, params, &row)?;
    Ok(DVector::from_iterator(out.ncols(), out.row(0).iter().copied()))
}

/// Draws `n` rows. Each row consumes `d` feature normals then `k` noise
/// normals, so a smaller draw from the same stream is a prefix of a larger.
pub(crate) fn draw_rows(
    rng: &mut ChaCha8Rng,
    spec: &ModelSpec,
    params: &TaskParams,
    domain: Domain,
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (d, k) = (spec.d, spec.k);
    let mut z = DMatrix::zeros(n, d);
    let mut noise = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..d {
            z[(i, j)] = rng.sample(StandardNormal);
        }
        for j in 0..k {
            noise[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let x = z * spec.cov_root(domain).as_matrix();
    let y = forward_batch(spec, params, &x)? + noise * spec.sigma;
    Ok((x, y))
}

/// `n` i.i.d. samples `(x, f(θ; x) + σ ε)` with `x ~ N(0, Σ_domain)`.
/// Deterministic in `seed`.
pub fn sample_dataset(
    spec: &ModelSpec,
    params: &TaskParams,
    n: usize,
    domain: Domain,
    role: Role,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset("requested zero samples".into()));
    }
    let mut rng = stream(seed);
    let (features, labels) = draw_rows(&mut rng, spec, params, domain, n)?;
    Ok(Dataset {
        features,
        labels,
        role,
        seed,
    })
}

/// Ground-truth pair generator: a base matrix with i.i.d. `N(0, entry_variance)`
/// entries and its counterpart `base + scale · M`, `M` i.i.d.
/// `N(0, perturbation_variance)`. Variances are variances, not deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecipe {
    pub base_seed: u64,
    pub entry_variance: f64,
    pub perturbation_variance: f64,
    #[serde(default = "one")]
    pub scale: f64,
    /// Which task gets the base matrix; the other is perturbed.
    #[serde(default = "source_domain")]
    pub base: Domain,
    /// When set, `M` is rescaled so the pair sits at exactly
    /// `scale · target_distance` in transfer distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_distance: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn source_domain() -> Domain {
    Domain::Source
}

impl PairRecipe {
    pub fn with_scale(&self, scale: f64) -> Self {
        PairRecipe { scale, ..self.clone() }
    }
}

fn gaussian_matrix(seed: u64, rows: usize, cols: usize, variance: f64) -> DMatrix<f64> {
    let mut rng = stream(seed);
    let sd = variance.sqrt();
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

pub fn make_synthetic_pair(spec: &ModelSpec, recipe: &PairRecipe) -> Result<TaskPair> {
    for (name, v) in [
        ("entry_variance", recipe.entry_variance),
        ("perturbation_variance", recipe.perturbation_variance),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput(format!("{name} must be a nonnegative number, got {v}")));
        }
    }
    if !recipe.scale.is_finite() {
        return Err(Error::InvalidInput("scale must be finite".into()));
    }
    let (r, c) = spec.param_shape();
    let base = gaussian_matrix(derive_seed(recipe.base_seed, &[1]), r, c, recipe.entry_variance);
    let mut pert = gaussian_matrix(derive_seed(recipe.base_seed, &[2]), r, c, recipe.perturbation_variance);
    if let Some(t) = recipe.target_distance {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidInput(format!("target_distance must be nonnegative, got {t}")));
        }
        let unit = metrics::difference_norm(spec, &pert)?;
        if unit == 0.0 {
            if t > 0.0 {
                return Err(Error::DegenerateModel(
                    "perturbation has zero transfer distance and cannot be rescaled".into(),
                ));
            }
        } else {
            pert *= t / unit;
        }
    }
    let counterpart = &base + pert * recipe.scale;
    let (source, target) = match recipe.base {
        Domain::Source => (base, counterpart),
        Domain::Target => (counterpart, base),
    };
    TaskPair::new(spec.clone(), TaskParams(source), TaskParams(target))
}
