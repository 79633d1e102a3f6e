//! Three-regime minimax lower bound on the target risk.
//!
//! With `N = r_S n_S + r_T n_T`:
//!
//! ```text
//!        ⎧ σ²D / (256 r_T n_T)                          Δ ≥ t_large
//!   B =  ⎨ (Δ²/100)(1 − 0.8 r_T n_T Δ² / (σ²D))         t_small ≤ Δ < t_large
//!        ⎩ Δ²/1000 + (6/1000) Dσ² / N                   Δ < t_small
//!
//!   t_small = (1/45)·√(σ²D / N),  t_large = √(σ²D ln 2 / (r_T n_T))
//! ```
//!
//! The risk floor is `B + kσ²`, or `¼σ_min(V)²·B + kσ²` for the network
//! with a fixed output layer.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{effective_dimension, transfer_coefficients};
use crate::model::{ModelKind, ModelSpec};
use crate::numerics::input_gain;

/// The bound is stated only for effective dimensions at least this large.
pub const MIN_EFFECTIVE_DIMENSION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    pub delta: f64,
    pub eff_dim: usize,
    pub r_s: f64,
    pub r_t: f64,
    pub n_s: u64,
    pub n_t: u64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    LargeDistance,
    ModerateDistance,
    SmallDistance,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::LargeDistance => "LargeDistance",
            Regime::ModerateDistance => "ModerateDistance",
            Regime::SmallDistance => "SmallDistance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub regime: Regime,
    pub b: f64,
    pub risk_floor: f64,
    pub t_small: f64,
    pub t_large: f64,
    /// Multiplier applied to `B`: 1, or `¼σ_min(V)²`.
    pub weight: f64,
    pub noise_floor: f64,
    /// Set when `σ_min(V) = 0` makes the `B` term vanish.
    pub degenerate_fixed_matrix: bool,
}

impl BoundInput {
    /// Fills `D`, `r_S`, `r_T` and `σ` from the model.
    pub fn from_spec(spec: &ModelSpec, delta: f64, n_s: u64, n_t: u64) -> Result<Self> {
        let coeffs = transfer_coefficients(spec)?;
        Ok(BoundInput {
            delta,
            eff_dim: effective_dimension(spec)?,
            r_s: coeffs.r_s,
            r_t: coeffs.r_t,
            n_s,
            n_t,
            sigma: spec.sigma(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.eff_dim < MIN_EFFECTIVE_DIMENSION {
            return Err(Error::PreconditionViolated(format!(
                "effective dimension {} is below {MIN_EFFECTIVE_DIMENSION}",
                self.eff_dim
            )));
        }
        if self.n_t == 0 {
            return Err(Error::PreconditionViolated("n_T must be at least 1".into()));
        }
        if !(self.r_t.is_finite() && self.r_t > 0.0) {
            return Err(Error::PreconditionViolated(format!("r_T must be positive, got {}", self.r_t)));
        }
        if !(self.r_s.is_finite() && self.r_s >= 0.0) {
            return Err(Error::PreconditionViolated(format!("r_S must be nonnegative, got {}", self.r_s)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::PreconditionViolated(format!("σ must be positive, got {}", self.sigma)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::PreconditionViolated(format!("Δ must be nonnegative, got {}", self.delta)));
        }
        Ok(())
    }

    fn signal(&self) -> f64 {
        self.sigma * self.sigma * self.eff_dim as f64
    }

    fn effective_target(&self) -> f64 {
        self.r_t * self.n_t as f64
    }

    fn effective_total(&self) -> f64 {
        self.r_s * self.n_s as f64 + self.effective_target()
    }

    /// `(t_small, t_large)`.
    pub fn thresholds(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let t_small = (self.signal() / self.effective_total()).sqrt() / 45.0;
        let t_large = (self.signal() * std::f64::consts::LN_2 / self.effective_target()).sqrt();
        Ok((t_small, t_large))
    }
}

pub fn classify_regime(input: &BoundInput) -> Result<Regime> {
    let (t_small, t_large) = input.thresholds()?;
    Ok(if input.delta >= t_large {
        Regime::LargeDistance
    } else if input.delta < t_small {
        Regime::SmallDistance
    } else {
        Regime::ModerateDistance
    })
}

pub fn bound_b(input: &BoundInput) -> Result<f64> {
    let regime = classify_regime(input)?;
    let delta2 = input.delta * input.delta;
    Ok(match regime {
        Regime::LargeDistance => input.signal() / (256.0 * input.effective_target()),
        Regime::ModerateDistance => {
            delta2 / 100.0 * (1.0 - 0.8 * input.effective_target() * delta2 / input.signal())
        }
        Regime::SmallDistance => delta2 / 1000.0 + 6.0 / 1000.0 * input.signal() / input.effective_total(),
    })
}

/// Full report: regime, `B`, thresholds and the model-specific risk floor.
pub fn minimax_floor(spec: &ModelSpec, input: &BoundInput) -> Result<BoundReport> {
    if (input.sigma - spec.sigma()).abs() > 1e-12 * spec.sigma() {
        return Err(Error::PreconditionViolated(format!(
            "bound input σ = {} does not match the model's σ = {}",
            input.sigma,
            spec.sigma()
        )));
    }
    let regime = classify_regime(input)?;
    let (t_small, t_large) = input.thresholds()?;
    let b = bound_b(input)?;
    let weight = match spec.kind() {
        ModelKind::Linear | ModelKind::NetFixedInput => 1.0,
        ModelKind::NetFixedOutput => 0.25 * input_gain(spec.fixed())?.powi(2),
    };
    let noise_floor = spec.noise_floor();
    Ok(BoundReport {
        regime,
        b,
        risk_floor: weight * b + noise_floor,
        t_small,
        t_large,
        weight,
        noise_floor,
        degenerate_fixed_matrix: weight == 0.0,
    })
}

impl BoundReport {
    /// Flat `key=value` block, one entry per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "regime={}", self.regime);
        let _ = writeln!(s, "B={:e}", self.b);
        let _ = writeln!(s, "risk_floor={:e}", self.risk_floor);
        let _ = writeln!(s, "t_small={:e}", self.t_small);
        let _ = writeln!(s, "t_large={:e}", self.t_large);
        let _ = writeln!(s, "weight={:e}", self.weight);
        let _ = writeln!(s, "noise_floor={:e}", self.noise_floor);
        let _ = writeln!(s, "degenerate_fixed_matrix={}", self.degenerate_fixed_matrix);
        s
    }

    pub const CSV_HEADER: &'static str = "regime,B,risk_floor,t_small,t_large,weight,noise_floor,degenerate_fixed_matrix";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.regime,
            self.b,
            self.risk_floor,
            self.t_small,
            self.t_large,
            self.weight,
            self.noise_floor,
            self.degenerate_fixed_matrix
        )
    }
}
