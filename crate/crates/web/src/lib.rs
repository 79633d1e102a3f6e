//! Browser bindings for the interactive demo in `www/`.
//!
//! Each export returns a JSON string; the page parses and plots it.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use transfer_bounds::bounds::{minimax_floor, BoundInput, Regime};
use transfer_bounds::harness::{presets, run_sweep, MatrixSource, ModelConfig};
use transfer_bounds::kernels::{relu_cross_moment, relu_discrepancy};
use transfer_bounds::ModelKind;

#[derive(Serialize)]
struct BoundPoint {
    delta: f64,
    b: f64,
    risk_floor: f64,
    regime: Regime,
}

#[derive(Serialize)]
struct BoundCurve {
    t_small: f64,
    t_large: f64,
    noise_floor: f64,
    points: Vec<BoundPoint>,
}

#[derive(Serialize)]
struct KernelPoint {
    theta: f64,
    cross_moment: f64,
    discrepancy: f64,
}

#[derive(Serialize)]
struct DeltaPoint {
    rho: f64,
    mean_error: f64,
    mean_lambda: f64,
    risk_floor: Option<f64>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Lower bound and risk floor for a linear model at `points` distances in
/// `[0, delta_max]`, with `Σ_S = source_scale·I` and `Σ_T = I`.
#[allow(clippy::too_many_arguments)]
pub fn bound_curve_json(
    d: usize,
    k: usize,
    sigma: f64,
    source_scale: f64,
    n_s: u64,
    n_t: u64,
    delta_max: f64,
    points: usize,
) -> Result<String, String> {
    if points < 2 {
        return Err("need at least two points".into());
    }
    if !(delta_max.is_finite() && delta_max > 0.0) {
        return Err(format!("Δ range must be positive, got {delta_max}"));
    }
    let cfg = ModelConfig {
        kind: ModelKind::Linear,
        d,
        k,
        hidden: None,
        sigma,
        cov_source: MatrixSource::ScaledIdentity { scale: source_scale },
        cov_target: MatrixSource::ScaledIdentity { scale: 1.0 },
        fixed: None,
    };
    let spec = cfg.build(None).map_err(|e| e.to_string())?;
    let mut curve = BoundCurve { t_small: 0.0, t_large: 0.0, noise_floor: spec.noise_floor(), points: vec![] };
    for i in 0..points {
        let delta = delta_max * i as f64 / (points - 1) as f64;
        let input = BoundInput::from_spec(&spec, delta, n_s, n_t).map_err(|e| e.to_string())?;
        let r = minimax_floor(&spec, &input).map_err(|e| e.to_string())?;
        curve.t_small = r.t_small;
        curve.t_large = r.t_large;
        curve.points.push(BoundPoint { delta, b: r.b, risk_floor: r.risk_floor, regime: r.regime });
    }
    Ok(to_json(&curve))
}

/// ReLU cross moment and discrepancy between a unit vector and one at
/// angle `θ ∈ [0, π]` with norm `ratio`.
pub fn kernel_curve_json(ratio: f64, points: usize) -> Result<String, String> {
    if points < 2 {
        return Err("need at least two points".into());
    }
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let theta = std::f64::consts::PI * i as f64 / (points - 1) as f64;
        let u = [1.0, 0.0];
        let v = [ratio * theta.cos(), ratio * theta.sin()];
        out.push(KernelPoint {
            theta,
            cross_moment: relu_cross_moment(&u, &v).map_err(|e| e.to_string())?,
            discrepancy: relu_discrepancy(&u, &v).map_err(|e| e.to_string())?,
        });
    }
    Ok(to_json(&out))
}

/// The reduced perturbation sweep (`d = 20`, `k = 10`, validated λ) over the
/// first `points` scales.
pub fn delta_sweep_json(points: usize, trials: usize, seed: u64) -> Result<String, String> {
    let mut cfg = presets::get("reduced-setup2").expect("preset exists");
    cfg.axis_values.truncate(points);
    cfg.trials = trials;
    cfg.master_seed = seed;
    let series = run_sweep(&cfg, None).map_err(|e| e.to_string())?;
    let out: Vec<DeltaPoint> = series
        .points
        .iter()
        .map(|p| DeltaPoint { rho: p.rho, mean_error: p.mean_error, mean_lambda: p.mean_lambda, risk_floor: p.risk_floor })
        .collect();
    Ok(to_json(&out))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn bound_curve(
    d: usize,
    k: usize,
    sigma: f64,
    source_scale: f64,
    n_s: u32,
    n_t: u32,
    delta_max: f64,
    points: usize,
) -> Result<String, JsError> {
    bound_curve_json(d, k, sigma, source_scale, n_s.into(), n_t.into(), delta_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn kernel_curve(ratio: f64, points: usize) -> Result<String, JsError> {
    kernel_curve_json(ratio, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn delta_sweep(points: usize, trials: usize, seed: u32) -> Result<String, JsError> {
    delta_sweep_json(points, trials, seed.into()).map_err(|e| JsError::new(&e))
}
