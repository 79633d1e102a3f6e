//! Weighted empirical risk minimization and target-risk evaluation.
//!
//! The training objective is
//!
//! ```text
//! L(θ) = 1/(2 n_T) Σ_T ‖f(θ; x) − y‖² + c_S/2 Σ_S ‖f(θ; x) − y‖²
//! ```
//!
//! with `c_S = λ / n_S` ([`SourceWeighting::PerSet`], each set averaged
//! separately) or `c_S = λ / n_T` ([`SourceWeighting::PerSample`], every
//! source sample counts `λ` target samples). For the linear model and the
//! fixed-input network `L` is quadratic and solved exactly (minimum norm when
//! the normal equations are singular); the fixed-output network is trained by
//! full-batch gradient descent.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::relu_cross_moment;
use crate::metrics::{difference_norm, hidden_covariance};
use crate::model::{draw_rows, forward_batch, regression_features, Dataset, Domain, ModelKind, ModelSpec, TaskParams};
use crate::numerics::{input_gain, psd_power, weighted_frobenius, weighted_normal_solve, Power, SymMatrix};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub init_seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            step_size: 1e-3,
            max_iters: 5000,
            rel_tol: 1e-8,
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceWeighting {
    #[default]
    PerSet,
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErmConfig {
    pub lambda: f64,
    pub lambda_grid: Option<Vec<f64>>,
    pub gd: GdConfig,
    pub weighting: SourceWeighting,
    /// Keep the per-iteration objective of gradient descent.
    pub record_trace: bool,
}

impl Default for ErmConfig {
    fn default() -> Self {
        ErmConfig {
            lambda: 1.0,
            lambda_grid: None,
            gd: GdConfig::default(),
            weighting: SourceWeighting::PerSet,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(with = "crate::numerics::serde_rows")]
    pub params: DMatrix<f64>,
    pub lambda_used: f64,
    pub objective_trace: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Mean squared validation error, set by [`select_lambda`].
    pub validation_loss: Option<f64>,
}

impl FitResult {
    pub fn task_params(&self) -> TaskParams {
        TaskParams(self.params.clone())
    }
}

fn check_dataset(spec: &ModelSpec, ds: &Dataset, what: &str) -> Result<()> {
    if ds.features.nrows() != ds.labels.nrows() {
        return Err(Error::shape(format!(
            "{what} set has {} feature rows and {} label rows",
            ds.features.nrows(),
            ds.labels.nrows()
        )));
    }
    if ds.features.ncols() != spec.d() || ds.labels.ncols() != spec.k() {
        return Err(Error::shape(format!(
            "{what} set is {}→{}, model is {}→{}",
            ds.features.ncols(),
            ds.labels.ncols(),
            spec.d(),
            spec.k()
        )));
    }
    Ok(())
}

/// Per-sample weights `(1/n_T, c_S)`; `c_S = 0` when the source is unused.
fn set_weights(source: &Dataset, target: &Dataset, cfg: &ErmConfig) -> Result<(f64, f64)> {
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("λ must be nonnegative, got {}", cfg.lambda)));
    }
    let wt = 1.0 / target.len() as f64;
    if cfg.lambda == 0.0 {
        return Ok((wt, 0.0));
    }
    if source.is_empty() {
        return Err(Error::EmptyDataset("λ > 0 needs source samples".into()));
    }
    let ws = match cfg.weighting {
        SourceWeighting::PerSet => cfg.lambda / source.len() as f64,
        SourceWeighting::PerSample => cfg.lambda * wt,
    };
    Ok((wt, ws))
}

pub fn fit_weighted_erm(spec: &ModelSpec, source: &Dataset, target: &Dataset, cfg: &ErmConfig) -> Result<FitResult> {
    if target.is_empty() {
        return Err(Error::EmptyDataset("target set is empty".into()));
    }
    check_dataset(spec, target, "target")?;
    check_dataset(spec, source, "source")?;
    let (wt, ws) = set_weights(source, target, cfg)?;
    if spec.kind().is_quadratic() {
        fit_quadratic(spec, source, target, wt, ws, cfg.lambda)
    } else {
        fit_descent(spec, source, target, wt, ws, cfg)
    }
}

fn fit_quadratic(spec: &ModelSpec, source: &Dataset, target: &Dataset, wt: f64, ws: f64, lambda: f64) -> Result<FitResult> {
    let phi_t = regression_features(spec, &target.features)?;
    let mut gram = phi_t.transpose() * &phi_t * wt;
    let mut rhs = target.labels.transpose() * &phi_t * wt;
    if ws > 0.0 {
        let phi_s = regression_features(spec, &source.features)?;
        gram += phi_s.transpose() * &phi_s * ws;
        rhs += source.labels.transpose() * &phi_s * ws;
    }
    let params = weighted_normal_solve(&SymMatrix::new(gram)?, &rhs)?;
    Ok(FitResult {
        params,
        lambda_used: lambda,
        objective_trace: None,
        converged: true,
        iterations: 0,
        validation_loss: None,
    })
}

/// Objective and gradient of the fixed-output network on one data set,
/// scaled by the per-sample weight.
fn net_objective(v: &DMatrix<f64>, w: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>, weight: f64, grad: Option<&mut DMatrix<f64>>) -> f64 {
    let pre = x * w.transpose();
    let act = pre.map(|t| t.max(0.0));
    let resid = act * v.transpose() - y;
    if let Some(g) = grad {
        // ReLU subgradient at 0 is 0
        let back = (&resid * v).zip_map(&pre, |r, p| if p > 0.0 { r } else { 0.0 });
        *g += back.transpose() * x * weight;
    }
    0.5 * weight * resid.norm_squared()
}

struct NetProblem<'a> {
    v: &'a DMatrix<f64>,
    sets: Vec<(&'a DMatrix<f64>, &'a DMatrix<f64>, f64)>,
}

impl NetProblem<'_> {
    fn objective(&self, w: &DMatrix<f64>) -> f64 {
        self.sets.iter().map(|(x, y, wt)| net_objective(self.v, w, x, y, *wt, None)).sum()
    }

    fn objective_and_grad(&self, w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let mut g = DMatrix::zeros(w.nrows(), w.ncols());
        let f = self.sets.iter().map(|(x, y, wt)| net_objective(self.v, w, x, y, *wt, Some(&mut g))).sum();
        (f, g)
    }
}

/// Initial hidden weights, i.i.d. `N(0, 1/d)`.
pub fn init_hidden_weights(spec: &ModelSpec, seed: u64) -> DMatrix<f64> {
    let (l, d) = spec.param_shape();
    let sd = (1.0 / d as f64).sqrt();
    let mut rng = stream(seed);
    let mut w = DMatrix::zeros(l, d);
    for i in 0..l {
        for j in 0..d {
            w[(i, j)] = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    w
}

const MAX_HALVINGS: usize = 60;

fn fit_descent(spec: &ModelSpec, source: &Dataset, target: &Dataset, wt: f64, ws: f64, cfg: &ErmConfig) -> Result<FitResult> {
    let gd = &cfg.gd;
    if !(gd.step_size.is_finite() && gd.step_size > 0.0) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {}", gd.step_size)));
    }
    let mut sets = vec![(&target.features, &target.labels, wt)];
    if ws > 0.0 {
        sets.push((&source.features, &source.labels, ws));
    }
    let problem = NetProblem { v: spec.fixed(), sets };

    let mut w = init_hidden_weights(spec, gd.init_seed);
    let (mut f, mut g) = problem.objective_and_grad(&w);
    if !f.is_finite() {
        return Err(Error::DivergedOptimization { iteration: 0 });
    }
    let mut trace = cfg.record_trace.then(|| vec![f]);
    let mut step = gd.step_size;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < gd.max_iters {
        iterations += 1;
        // backtrack until the objective does not increase
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &w - &g * step;
            let fc = problem.objective(&cand);
            if fc.is_finite() && fc <= f {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            if !f.is_finite() {
                return Err(Error::DivergedOptimization { iteration: iterations });
            }
            // no descent at any representable step: stationary to working precision
            converged = true;
            break;
        };
        let rel = (f - fc) / f.max(f64::MIN_POSITIVE);
        w = cand;
        f = fc;
        if let Some(t) = trace.as_mut() {
            t.push(f);
        }
        if f == 0.0 || rel < gd.rel_tol {
            converged = true;
            break;
        }
        g = problem.objective_and_grad(&w).1;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedOptimization { iteration: iterations });
        }
    }

    Ok(FitResult {
        params: w,
        lambda_used: cfg.lambda,
        objective_trace: trace,
        converged,
        iterations,
        validation_loss: None,
    })
}

/// The weighted objective at `params`, for diagnostics and tests.
pub fn weighted_objective(spec: &ModelSpec, params: &TaskParams, source: &Dataset, target: &Dataset, cfg: &ErmConfig) -> Result<f64> {
    let (wt, ws) = set_weights(source, target, cfg)?;
    let rt = forward_batch(spec, params, &target.features)? - &target.labels;
    let mut f = 0.5 * wt * rt.norm_squared();
    if ws > 0.0 {
        let rs = forward_batch(spec, params, &source.features)? - &source.labels;
        f += 0.5 * ws * rs.norm_squared();
    }
    Ok(f)
}

/// Mean over samples of `‖f(θ; x) − y‖²`.
pub fn mean_squared_error(spec: &ModelSpec, params: &TaskParams, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("cannot evaluate on an empty set".into()));
    }
    let r = forward_batch(spec, params, &ds.features)? - &ds.labels;
    Ok(r.norm_squared() / ds.len() as f64)
}

/// Fits once per grid value and keeps the fit with the smallest validation
/// error; ties go to the smaller `λ`.
pub fn select_lambda(
    spec: &ModelSpec,
    source: &Dataset,
    target: &Dataset,
    validation: &Dataset,
    grid: &[f64],
    cfg: &ErmConfig,
) -> Result<FitResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("λ grid is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty".into()));
    }
    check_dataset(spec, validation, "validation")?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("λ grid entries must be distinct".into()));
    }
    let mut best: Option<FitResult> = None;
    for &lambda in &sorted {
        let mut fit = fit_weighted_erm(spec, source, target, &ErmConfig { lambda, ..cfg.clone() })?;
        let loss = mean_squared_error(spec, &fit.task_params(), validation)?;
        fit.validation_loss = Some(loss);
        if best.as_ref().is_none_or(|b| loss < b.validation_loss.unwrap_or(f64::INFINITY)) {
            best = Some(fit);
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Exact target risk `E‖ŷ − y‖²` of an estimate, noise included.
pub fn closed_form_risk(spec: &ModelSpec, estimate: &TaskParams, truth: &TaskParams) -> Result<f64> {
    Ok(closed_form_excess_risk(spec, estimate, truth)? + spec.noise_floor())
}

/// Target risk above the noise floor `kσ²`.
pub fn closed_form_excess_risk(spec: &ModelSpec, estimate: &TaskParams, truth: &TaskParams) -> Result<f64> {
    spec.check_params(estimate)?;
    spec.check_params(truth)?;
    match spec.kind() {
        ModelKind::Linear | ModelKind::NetFixedInput => {
            Ok(difference_norm(spec, &(&estimate.0 - &truth.0))?.powi(2))
        }
        ModelKind::NetFixedOutput => net_excess(spec, estimate, truth),
    }
}

/// `Σ_ij (VᵀV)_ij [κ(a_i,a_j) + κ(b_i,b_j) − κ(a_i,b_j) − κ(a_j,b_i)]` with
/// `a`, `b` the rows of `ŴΣ_T^{1/2}` and `W_TΣ_T^{1/2}`.
fn net_excess(spec: &ModelSpec, estimate: &TaskParams, truth: &TaskParams) -> Result<f64> {
    let root = psd_power(spec.cov_target(), Power::Half)?;
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (m * root.as_matrix()).row_iter().map(|r| r.iter().copied().collect()).collect()
    };
    let a = rows(&estimate.0);
    let b = rows(&truth.0);
    let v = spec.fixed();
    let vtv = v.transpose() * v;
    let l = a.len();
    let mut total = 0.0;
    for i in 0..l {
        for j in 0..l {
            let c = vtv[(i, j)];
            if c == 0.0 {
                continue;
            }
            let term = relu_cross_moment(&a[i], &a[j])? + relu_cross_moment(&b[i], &b[j])?
                - relu_cross_moment(&a[i], &b[j])?
                - relu_cross_moment(&a[j], &b[i])?;
            total += c * term;
        }
    }
    Ok(total.max(0.0))
}

/// `¼σ_min(V)²‖Σ_T^{1/2}(Ŵ − W_T)ᵀ‖²_F + kσ²`, the lower bound on the
/// fixed-output network's risk.
pub fn net_risk_lower_bound(spec: &ModelSpec, estimate: &TaskParams, truth: &TaskParams) -> Result<f64> {
    if spec.kind() != ModelKind::NetFixedOutput {
        return Err(Error::InvalidInput(format!("{} has an exact risk; no lower bound needed", spec.kind())));
    }
    spec.check_params(estimate)?;
    spec.check_params(truth)?;
    let smin = input_gain(spec.fixed())?;
    let dist = weighted_frobenius(&(&estimate.0 - &truth.0), spec.cov_target())?;
    Ok(0.25 * smin * smin * dist * dist + spec.noise_floor())
}

/// Rows per independently seeded Monte-Carlo chunk.
pub const MC_CHUNK: usize = 4096;

/// Mean `‖ŷ − y‖²` over `n_test` fresh target samples. Chunk `c` draws from
/// its own stream derived from `(seed, c)` and chunk sums are added in
/// order, so the value does not depend on the thread count.
pub fn mc_risk(spec: &ModelSpec, estimate: &TaskParams, truth: &TaskParams, n_test: usize, seed: u64) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::InvalidInput("n_test must be at least 1".into()));
    }
    spec.check_params(estimate)?;
    spec.check_params(truth)?;
    let chunks = n_test.div_ceil(MC_CHUNK);
    let chunk_sum = |c: usize| -> Result<f64> {
        let rows = MC_CHUNK.min(n_test - c * MC_CHUNK);
        let mut rng = stream(derive_seed(seed, &[c as u64]));
        let (x, y) = draw_rows(&mut rng, spec, truth, Domain::Target, rows)?;
        Ok((forward_batch(spec, estimate, &x)? - y).norm_squared())
    };
    #[cfg(feature = "parallel")]
    let sums: Vec<Result<f64>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(chunk_sum).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let sums: Vec<Result<f64>> = (0..chunks).map(chunk_sum).collect();
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    Ok(total / n_test as f64)
}

/// Excess risk of the ridge-free fixed-input network as a function of the
/// hidden covariance, exposed for callers that already hold `Σ̃_T`.
pub fn hidden_feature_excess(spec: &ModelSpec, estimate: &TaskParams, truth: &TaskParams) -> Result<f64> {
    let cov = hidden_covariance(spec, Domain::Target)?;
    Ok(weighted_frobenius(&(&estimate.0 - &truth.0), &cov.matrix)?.powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_dataset, Role};
    use approx::assert_relative_eq;

    fn id(n: usize) -> SymMatrix {
        SymMatrix::identity(n)
    }

    fn gauss(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
        let mut rng = stream(seed);
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn data(spec: &ModelSpec, p: &DMatrix<f64>, n: usize, dom: Domain, seed: u64) -> Dataset {
        let role = if dom == Domain::Source { Role::Source } else { Role::Target };
        sample_dataset(spec, &TaskParams(p.clone()), n, dom, role, seed).unwrap()
    }

    #[test]
    fn interpolates_noiseless_linear_data() {
        let spec = ModelSpec::linear(5, 3, 1e-12, id(5), id(5)).unwrap();
        let w = gauss(1, 3, 5);
        let t = data(&spec, &w, 8, Domain::Target, 2);
        let s = data(&spec, &gauss(9, 3, 5), 8, Domain::Source, 3);
        let fit = fit_weighted_erm(&spec, &s, &t, &ErmConfig { lambda: 0.0, ..Default::default() }).unwrap();
        assert!((&fit.params - &w).norm() < 1e-8);
    }

    /// Pooled direct solve: stack rows scaled by the square roots of their
    /// per-sample weights and take the least-squares solution by SVD.
    fn pooled_oracle(s: &Dataset, t: &Dataset, ws: f64, wt: f64) -> DMatrix<f64> {
        let n = s.len() + t.len();
        let d = s.features.ncols();
        let k = s.labels.ncols();
        let mut x = DMatrix::zeros(n, d);
        let mut y = DMatrix::zeros(n, k);
        for i in 0..t.len() {
            x.set_row(i, &(t.features.row(i) * wt.sqrt()));
            y.set_row(i, &(t.labels.row(i) * wt.sqrt()));
        }
        for i in 0..s.len() {
            x.set_row(t.len() + i, &(s.features.row(i) * ws.sqrt()));
            y.set_row(t.len() + i, &(s.labels.row(i) * ws.sqrt()));
        }
        x.svd(true, true).solve(&y, 1e-12).unwrap().transpose()
    }

    #[test]
    fn lambda_one_matches_pooled_per_set_normalized_solve() {
        let spec = ModelSpec::linear(4, 2, 0.5, id(4), id(4)).unwrap();
        let w = gauss(4, 2, 4);
        let s = data(&spec, &w, 30, Domain::Source, 5);
        let t = data(&spec, &w, 12, Domain::Target, 6);
        let fit = fit_weighted_erm(&spec, &s, &t, &ErmConfig { lambda: 1.0, ..Default::default() }).unwrap();
        let oracle = pooled_oracle(&s, &t, 1.0 / 30.0, 1.0 / 12.0);
        assert_relative_eq!(fit.params, oracle, max_relative = 1e-8);

        let cfg = ErmConfig { lambda: 1.0, weighting: SourceWeighting::PerSample, ..Default::default() };
        let fit = fit_weighted_erm(&spec, &s, &t, &cfg).unwrap();
        let oracle = pooled_oracle(&s, &t, 1.0, 1.0);
        assert_relative_eq!(fit.params, oracle, max_relative = 1e-8);
    }

    #[test]
    fn quadratic_fits_satisfy_normal_equations() {
        let v = gauss(7, 3, 6);
        let specs = [
            ModelSpec::linear(6, 3, 1.0, SymMatrix::scaled_identity(6, 2.0), id(6)).unwrap(),
            ModelSpec::net_fixed_input(gauss(8, 5, 6), 3, 1.0, id(6), id(6)).unwrap(),
        ];
        let _ = v;
        for spec in &specs {
            let (r, c) = spec.param_shape();
            let ps = gauss(10, r, c);
            let pt = gauss(11, r, c);
            let s = data(spec, &ps, 40, Domain::Source, 12);
            let t = data(spec, &pt, 15, Domain::Target, 13);
            let lambda = 0.75;
            let fit = fit_weighted_erm(spec, &s, &t, &ErmConfig { lambda, ..Default::default() }).unwrap();
            let ft = regression_features(spec, &t.features).unwrap();
            let fs = regression_features(spec, &s.features).unwrap();
            let gram = ft.transpose() * &ft / 15.0 + fs.transpose() * &fs * (lambda / 40.0);
            let rhs = t.labels.transpose() * &ft / 15.0 + s.labels.transpose() * &fs * (lambda / 40.0);
            let resid = (&fit.params * gram - &rhs).norm();
            assert!(resid <= 1e-8 * rhs.norm(), "{resid}");
        }
    }

    #[test]
    fn underdetermined_fit_is_min_norm() {
        let spec = ModelSpec::linear(10, 1, 0.1, id(10), id(10)).unwrap();
        let t = data(&spec, &gauss(1, 1, 10), 4, Domain::Target, 2);
        let fit = fit_weighted_erm(&spec, &t, &t, &ErmConfig { lambda: 0.0, ..Default::default() }).unwrap();
        // min-norm solution lies in the row space of X
        let x = &t.features;
        let proj = x.transpose() * x.clone().pseudo_inverse(1e-12).unwrap().transpose();
        let w = fit.params.transpose();
        assert!((&proj * &w - &w).norm() < 1e-8 * w.norm());
    }

    #[test]
    fn error_paths() {
        let spec = ModelSpec::linear(2, 1, 1.0, id(2), id(2)).unwrap();
        let t = data(&spec, &gauss(1, 1, 2), 5, Domain::Target, 1);
        let empty = Dataset {
            features: DMatrix::zeros(0, 2),
            labels: DMatrix::zeros(0, 1),
            role: Role::Source,
            seed: 0,
        };
        assert!(matches!(
            fit_weighted_erm(&spec, &t, &empty, &ErmConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            fit_weighted_erm(&spec, &empty, &t, &ErmConfig { lambda: 0.5, ..Default::default() }),
            Err(Error::EmptyDataset(_))
        ));
        assert!(fit_weighted_erm(&spec, &empty, &t, &ErmConfig { lambda: 0.0, ..Default::default() }).is_ok());
        assert!(select_lambda(&spec, &t, &t, &t, &[], &ErmConfig::default()).is_err());
        assert!(select_lambda(&spec, &t, &t, &t, &[0.5, 0.5], &ErmConfig::default()).is_err());
    }

    #[test]
    fn descent_diverges_cleanly_on_nonfinite_data() {
        let v = DMatrix::from_element(1, 1, 1.0);
        let spec = ModelSpec::net_fixed_output(v, 1.0, id(1), id(1)).unwrap();
        let mut t = data(&spec, &DMatrix::from_element(1, 1, 3.0), 5, Domain::Target, 1);
        t.labels[(0, 0)] = f64::INFINITY;
        let err = fit_weighted_erm(&spec, &t, &t, &ErmConfig { lambda: 0.0, ..Default::default() });
        assert!(matches!(err, Err(Error::DivergedOptimization { .. })));
    }

    #[test]
    fn one_dimensional_descent_reaches_the_optimum() {
        let v = DMatrix::from_element(1, 1, 1.0);
        let spec = ModelSpec::net_fixed_output(v, 1e-12, id(1), id(1)).unwrap();
        let truth = DMatrix::from_element(1, 1, 3.0);
        let t = data(&spec, &truth, 200, Domain::Target, 1);
        // N(0, 1/d) init with seed 0 starts on the live side of the ReLU
        assert!(init_hidden_weights(&spec, 0)[(0, 0)] > 0.0);
        let cfg = ErmConfig {
            lambda: 0.0,
            gd: GdConfig { step_size: 0.5, max_iters: 5000, rel_tol: 0.0, init_seed: 0 },
            record_trace: true,
            ..Default::default()
        };
        let fit = fit_weighted_erm(&spec, &t, &t, &cfg).unwrap();
        let trace = fit.objective_trace.as_ref().unwrap();
        assert!(*trace.last().unwrap() < 1e-6);
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        assert!((fit.params[(0, 0)] - 3.0).abs() < 1e-3);
    }

    fn finite_difference(spec: &ModelSpec, w: &DMatrix<f64>, s: &Dataset, t: &Dataset, cfg: &ErmConfig) -> DMatrix<f64> {
        let h = 1e-5;
        DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| {
            let mut p = w.clone();
            p[(i, j)] += h;
            let fp = weighted_objective(spec, &TaskParams(p.clone()), s, t, cfg).unwrap();
            p[(i, j)] -= 2.0 * h;
            let fm = weighted_objective(spec, &TaskParams(p), s, t, cfg).unwrap();
            (fp - fm) / (2.0 * h)
        })
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let v = gauss(3, 2, 4);
        let spec = ModelSpec::net_fixed_output(v.clone(), 0.5, id(3), id(3)).unwrap();
        let s = data(&spec, &gauss(4, 4, 3), 6, Domain::Source, 5);
        let t = data(&spec, &gauss(6, 4, 3), 5, Domain::Target, 7);
        let cfg = ErmConfig { lambda: 0.5, ..Default::default() };
        let (wt, ws) = set_weights(&s, &t, &cfg).unwrap();
        let problem = NetProblem { v: &v, sets: vec![(&t.features, &t.labels, wt), (&s.features, &s.labels, ws)] };
        let mut checked = 0;
        let mut seed = 100;
        while checked < 20 {
            seed += 1;
            let w = gauss(seed, 4, 3);
            let away_from_kinks = [&s.features, &t.features]
                .iter()
                .all(|x| (*x * w.transpose()).iter().all(|p| p.abs() > 1e-2));
            if !away_from_kinks {
                continue;
            }
            checked += 1;
            let (_, g) = problem.objective_and_grad(&w);
            let fd = finite_difference(&spec, &w, &s, &t, &cfg);
            assert!((&g - &fd).norm() <= 1e-4 * g.norm().max(1e-8), "{g} vs {fd}");
        }
    }

    #[test]
    fn exact_risk_examples() {
        let spec = ModelSpec::linear(3, 3, 1.0, id(3), id(3)).unwrap();
        let w = gauss(1, 3, 3);
        assert_relative_eq!(closed_form_risk(&spec, &TaskParams(w.clone()), &TaskParams(w.clone())).unwrap(), 3.0);
        let mut est = w.clone();
        est[(0, 0)] += 2.0;
        assert_relative_eq!(
            closed_form_risk(&spec, &TaskParams(est), &TaskParams(w)).unwrap(),
            7.0,
            max_relative = 1e-12
        );

        let v = gauss(2, 2, 3);
        let spec = ModelSpec::net_fixed_output(v, 0.3, id(4), id(4)).unwrap();
        let w = TaskParams(gauss(5, 3, 4));
        assert_relative_eq!(closed_form_risk(&spec, &w, &w).unwrap(), spec.noise_floor(), max_relative = 1e-12);
    }

    #[test]
    fn net_exact_risk_dominates_its_lower_bound() {
        for seed in 0..200u64 {
            // tall V has a positive gain; wide V makes the bound the noise floor
            let v = if seed % 2 == 0 { gauss(seed, 6, 4) } else { gauss(seed, 2, 4) };
            let b = gauss(seed + 1000, 5, 5);
            let cov = SymMatrix::new(&b * b.transpose()).unwrap();
            let spec = ModelSpec::net_fixed_output(v, 0.7, id(5), cov).unwrap();
            let est = TaskParams(gauss(seed + 2000, 4, 5));
            let truth = TaskParams(gauss(seed + 3000, 4, 5));
            let exact = closed_form_risk(&spec, &est, &truth).unwrap();
            let lower = net_risk_lower_bound(&spec, &est, &truth).unwrap();
            assert!(exact >= lower - 1e-10 * exact, "seed {seed}: {exact} < {lower}");
            assert!(exact >= spec.noise_floor());
        }
    }

    #[test]
    fn mc_risk_concentrates_on_noise() {
        let spec = ModelSpec::linear(3, 2, 1.0, id(3), id(3)).unwrap();
        let w = TaskParams(gauss(1, 2, 3));
        let r = mc_risk(&spec, &w, &w, 100_000, 4).unwrap();
        assert!((r - 2.0).abs() < 0.06, "{r}");
        let tiny = ModelSpec::linear(3, 2, 1e-6, id(3), id(3)).unwrap();
        assert!(mc_risk(&tiny, &w, &w, 1000, 4).unwrap() < 1e-9);
        assert_eq!(mc_risk(&spec, &w, &w, 5000, 9).unwrap(), mc_risk(&spec, &w, &w, 5000, 9).unwrap());
        assert!(mc_risk(&spec, &w, &w, 0, 9).is_err());
    }

    #[test]
    fn mc_risk_converges_to_linear_closed_form() {
        let b = gauss(3, 4, 4);
        let cov = SymMatrix::new(&b * b.transpose()).unwrap();
        let spec = ModelSpec::linear(4, 2, 0.5, id(4), cov).unwrap();
        let est = TaskParams(gauss(4, 2, 4));
        let truth = TaskParams(gauss(5, 2, 4));
        let exact = closed_form_risk(&spec, &est, &truth).unwrap();
        let mc = mc_risk(&spec, &est, &truth, 1_000_000, 6).unwrap();
        assert!((mc - exact).abs() <= 0.02 * exact, "{mc} vs {exact}");
    }

    #[test]
    fn fixed_input_excess_helpers_agree() {
        let spec = ModelSpec::net_fixed_input(gauss(1, 4, 3), 2, 1.0, id(3), id(3)).unwrap();
        let a = TaskParams(gauss(2, 2, 4));
        let b = TaskParams(gauss(3, 2, 4));
        assert_relative_eq!(
            closed_form_excess_risk(&spec, &a, &b).unwrap(),
            hidden_feature_excess(&spec, &a, &b).unwrap(),
            max_relative = 1e-12
        );
    }
}
