//! Closed-form second moments of ReLU features under a Gaussian input
//! (the degree-one arc-cosine kernel).
//!
//! For `x ~ N(0, I)` and two directions `u`, `v` at angle `θ`:
//!
//! ```text
//! E[φ(uᵀx) φ(vᵀx)] = ‖u‖‖v‖ (sin θ + (π − θ) cos θ) / (2π)
//! E[|φ(aᵀx) − φ(bᵀx)|²] = ½‖a − b‖² − ‖a‖‖b‖ (sin θ − θ cos θ) / π
//! ```
//!
//! The angle is computed with the half-angle form
//! `θ = 2·atan2(‖û − v̂‖, ‖û + v̂‖)`, which stays accurate near collinearity
//! where `acos(γ)` loses half its digits. This is the same as clamping
//! `γ = cos θ` into `[−1, 1]` before `acos`, minus the cancellation.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{psd_power, Power, SymMatrix};

/// Second-moment matrix of `φ(W x)` for `x ~ N(0, Σ)`.
#[derive(Debug, Clone)]
pub struct ArcCosCovariance {
    pub matrix: SymMatrix,
    /// Rows `a_i` of `W Σ^{1/2}`.
    pub row_vectors: DMatrix<f64>,
}

fn check(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::shape(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite vector entry".into()));
    }
    Ok(())
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Angle between two nonzero vectors of known norms, with its sine and
/// cosine from the same half-angle lengths (exact at 0 and π).
fn angle(u: &[f64], nu: f64, v: &[f64], nv: f64) -> (f64, f64, f64) {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (x, y) = (a / nu, b / nv);
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    let total = diff + sum;
    let (dn, sn) = (diff.sqrt(), sum.sqrt());
    (2.0 * dn.atan2(sn), 2.0 * dn * sn / total, (sum - diff) / total)
}

/// `sin θ − θ cos θ`, with a series near zero where the two terms cancel.
fn sin_minus_theta_cos(theta: f64) -> f64 {
    if theta < 1e-2 {
        let t2 = theta * theta;
        theta * t2 * (1.0 / 3.0 - t2 / 30.0 + t2 * t2 / 840.0)
    } else {
        theta.sin() - theta * theta.cos()
    }
}

/// `E[φ(uᵀx) φ(vᵀx)]` for a standard normal `x`. Zero when either vector is zero.
pub fn relu_cross_moment(u: &[f64], v: &[f64]) -> Result<f64> {
    check(u, v)?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let (theta, sin, cos) = angle(u, nu, v, nv);
    let j = sin + (PI - theta) * cos;
    Ok((nu * nv * j / (2.0 * PI)).max(0.0))
}

/// `E[|φ(aᵀx) − φ(bᵀx)|²]` for a standard normal `x`.
pub fn relu_discrepancy(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let half_sq: f64 = 0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Ok(half_sq);
    }
    let (theta, _, _) = angle(a, na, b, nb);
    let val = half_sq - na * nb * sin_minus_theta_cos(theta) / PI;
    Ok(val.max(0.0))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Arc-cosine covariance of the rows of `weights · Σ^{1/2}`.
pub fn arccos_covariance(weights: &DMatrix<f64>, cov: &SymMatrix) -> Result<ArcCosCovariance> {
    if weights.ncols() != cov.order() {
        return Err(Error::shape(format!(
            "weights have {} columns but the covariance has order {}",
            weights.ncols(),
            cov.order()
        )));
    }
    let root = psd_power(cov, Power::Half)?;
    let a = weights * root.as_matrix();
    let rows = rows_of(&a);
    let n = rows.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = relu_cross_moment(&rows[i], &rows[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(ArcCosCovariance {
        matrix: SymMatrix::new(m)?,
        row_vectors: a,
    })
}
