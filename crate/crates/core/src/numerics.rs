//! Dense symmetric-matrix primitives.
//!
//! Every pseudo-inverse and root uses the same scale-invariant clamp: an
//! eigenvalue counts as zero when it is at most `CLAMP_RELATIVE * λ_max`.
//! Rank detection elsewhere in the crate goes through [`SymMatrix::rank`] so
//! the threshold stays consistent.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative eigenvalue clamp for roots, pseudo-inverses and rank.
pub const CLAMP_RELATIVE: f64 = 1e-10;

/// Inputs further than this (relative, Frobenius) from symmetric are rejected.
const ASYMMETRY_REJECT: f64 = 1e-6;

/// A dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Exponent accepted by [`psd_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Power {
    Half,
    /// Pseudo-inverse square root: clamped eigenvalues are excluded.
    NegHalf,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let asym = (&m - m.transpose()).norm();
        if asym > ASYMMETRY_REJECT * m.norm().max(1.0) {
            return Err(Error::InvalidMatrix(format!(
                "matrix is not symmetric (‖M − Mᵀ‖_F = {asym:e})"
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix(sym))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        SymMatrix(DMatrix::identity(n, n) * scale)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eig(&self) -> EigDecomp {
        let se = SymmetricEigen::new(self.0.clone());
        let n = self.order();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let values = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in idx.iter().enumerate() {
            vectors.set_column(dst, &se.eigenvectors.column(src));
        }
        EigDecomp { values, vectors }
    }

    /// Largest eigenvalue magnitude used as the clamp scale.
    fn clamp_threshold(values: &DVector<f64>) -> f64 {
        let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        CLAMP_RELATIVE * scale
    }

    /// Number of eigenvalues strictly above `1e-10 · λ_max`.
    pub fn rank(&self) -> usize {
        let e = self.eig();
        if e.values[0] <= 0.0 {
            return 0;
        }
        let tau = CLAMP_RELATIVE * e.values[0];
        e.values.iter().filter(|&&v| v > tau).count()
    }

    /// PSD up to the clamp tolerance.
    pub fn is_psd(&self) -> bool {
        let e = self.eig();
        let tau = Self::clamp_threshold(&e.values);
        e.values.iter().all(|&v| v >= -tau)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let e = self.eig();
        e.values[e.values.len() - 1]
    }
}

impl EigDecomp {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_rows(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let m = matrix_from_rows(&rows).map_err(serde::de::Error::custom)?;
        SymMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter storing a `DMatrix` as nested rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::matrix_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Square root or pseudo-inverse square root of a symmetric PSD matrix.
///
/// Eigenvalues at or below `1e-10 · λ_max` are treated as zero. Slightly
/// negative eigenvalues from round-off fall under the same clamp.
pub fn psd_power(m: &SymMatrix, p: Power) -> Result<SymMatrix> {
    let e = m.eig();
    let tau = SymMatrix::clamp_threshold(&e.values);
    let mut kept = 0usize;
    let mapped = e.values.map(|v| {
        if v > tau {
            kept += 1;
            match p {
                Power::Half => v.sqrt(),
                Power::NegHalf => 1.0 / v.sqrt(),
            }
        } else {
            0.0
        }
    });
    if kept == 0 && p == Power::NegHalf {
        return Err(Error::SingularMatrix);
    }
    let out = &e.vectors * DMatrix::from_diagonal(&mapped) * e.vectors.transpose();
    Ok(SymMatrix((&out + out.transpose()) * 0.5))
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.is_empty() {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

/// Gram matrix on the smaller side, so its eigenvalues are the squared
/// singular values of `m`.
fn small_gram(m: &DMatrix<f64>) -> SymMatrix {
    let g = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    SymMatrix((&g + g.transpose()) * 0.5)
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m)?;
    let e = small_gram(m).eig();
    Ok(e.values[0].max(0.0).sqrt())
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn min_singular_value(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m)?;
    let e = small_gram(m).eig();
    let smallest = e.values[e.values.len() - 1];
    if smallest <= CLAMP_RELATIVE * e.values[0].max(0.0) {
        return Ok(0.0);
    }
    Ok(smallest.sqrt())
}

/// `min ‖m z‖ / ‖z‖` over nonzero `z`: the smallest singular value when
/// `m` has at least as many rows as columns, zero otherwise.
pub fn input_gain(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m)?;
    if m.nrows() < m.ncols() {
        return Ok(0.0);
    }
    min_singular_value(m)
}

/// Minimum-Frobenius-norm `W` with `W · gram = rhs`, through the clamped
/// pseudo-inverse of `gram`. `rhs` stacks one right-hand side per row.
pub fn weighted_normal_solve(gram: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rhs.ncols() != gram.order() {
        return Err(Error::shape(format!(
            "rhs has {} columns but gram has order {}",
            rhs.ncols(),
            gram.order()
        )));
    }
    let e = gram.eig();
    let tau = SymMatrix::clamp_threshold(&e.values);
    let inv = e.values.map(|v| if v > tau { 1.0 / v } else { 0.0 });
    let projected = rhs * &e.vectors;
    let scaled = projected * DMatrix::from_diagonal(&inv);
    Ok(scaled * e.vectors.transpose())
}

/// `‖Σ^{1/2} Dᵀ‖_F`, evaluated as `sqrt(tr(D Σ Dᵀ))`.
pub fn weighted_frobenius(diff: &DMatrix<f64>, weight: &SymMatrix) -> Result<f64> {
    if diff.ncols() != weight.order() {
        return Err(Error::shape(format!(
            "difference has {} columns, weighting matrix has order {}",
            diff.ncols(),
            weight.order()
        )));
    }
    let quad = (diff * weight.as_matrix()).component_mul(diff).sum();
    Ok(quad.max(0.0).sqrt())
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::InvalidMatrix("no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(Error::InvalidMatrix("empty first row".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::InvalidMatrix(format!(
            "row {} has {} entries, expected {ncols}",
            i + 1,
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Parses the shared matrix text format: one row per line, whitespace
/// separated decimal entries, `#` lines and blank lines ignored.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::InvalidMatrix(format!("line {}: bad entry {tok:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let m = matrix_from_rows(&rows)?;
    check_finite(&m)?;
    Ok(m)
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}
