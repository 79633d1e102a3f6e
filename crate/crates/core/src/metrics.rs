//! Transfer distance, effective dimension, transfer coefficients and the KL
//! divergences between task distributions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{arccos_covariance, ArcCosCovariance};
use crate::model::{Domain, ModelKind, ModelSpec, TaskPair, TaskParams};
use crate::numerics::{operator_norm, psd_power, weighted_frobenius, Power, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferCoefficients {
    pub r_s: f64,
    pub r_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub rho: f64,
    /// Distance budget Δ the pair was checked against, if any.
    pub delta_bound: Option<f64>,
}

impl DistanceReport {
    pub fn with_budget(self, delta: f64) -> Self {
        DistanceReport {
            delta_bound: Some(delta),
            ..self
        }
    }

    /// Membership in the class of pairs with `ρ ≤ Δ` (inclusive).
    pub fn within_budget(&self) -> Option<bool> {
        self.delta_bound.map(|delta| self.rho <= delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlKind {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDivergence {
    pub value: f64,
    pub kind: KlKind,
}

/// Arc-cosine covariance `Σ̃` of the fixed input layer under one domain.
pub fn hidden_covariance(spec: &ModelSpec, domain: Domain) -> Result<ArcCosCovariance> {
    match spec.kind() {
        ModelKind::NetFixedInput => arccos_covariance(spec.fixed(), spec.cov(domain)),
        kind => Err(Error::InvalidInput(format!("{kind} has no hidden-feature covariance"))),
    }
}

/// Matrix that weights parameter differences for `domain`: `Σ` for the
/// models trained on the input layer, `Σ̃` for the fixed-input network.
fn weighting(spec: &ModelSpec, domain: Domain) -> Result<SymMatrix> {
    match spec.kind() {
        ModelKind::Linear | ModelKind::NetFixedOutput => Ok(spec.cov(domain).clone()),
        ModelKind::NetFixedInput => Ok(hidden_covariance(spec, domain)?.matrix),
    }
}

/// Transfer distance of a raw parameter difference.
pub fn difference_norm(spec: &ModelSpec, diff: &DMatrix<f64>) -> Result<f64> {
    let want = spec.param_shape();
    if diff.shape() != want {
        return Err(Error::shape(format!(
            "difference is {}x{}, expected {}x{}",
            diff.nrows(),
            diff.ncols(),
            want.0,
            want.1
        )));
    }
    weighted_frobenius(diff, &weighting(spec, Domain::Target)?)
}

pub fn parameter_distance(spec: &ModelSpec, a: &TaskParams, b: &TaskParams) -> Result<f64> {
    spec.check_params(a)?;
    spec.check_params(b)?;
    difference_norm(spec, &(&a.0 - &b.0))
}

/// `ρ = ‖Σ_T^{1/2}(θ_S − θ_T)ᵀ‖_F`, with `Σ̃_T` for the fixed-input network.
pub fn transfer_distance(pair: &TaskPair) -> Result<DistanceReport> {
    let rho = parameter_distance(&pair.spec, &pair.source, &pair.target)?;
    Ok(DistanceReport {
        rho,
        delta_bound: None,
    })
}

/// Whether the pair belongs to the class with transfer distance at most `delta`.
pub fn in_distance_class(pair: &TaskPair, delta: f64) -> Result<bool> {
    let report = transfer_distance(pair)?.with_budget(delta);
    Ok(report.within_budget().unwrap_or(false))
}

/// `rank(Σ_T)·k − 1`, `rank(Σ_T)·ℓ − 1` or `rank(Σ̃_T)·k − 1`.
pub fn effective_dimension(spec: &ModelSpec) -> Result<usize> {
    let (rank, width) = match spec.kind() {
        ModelKind::Linear => (spec.cov_target().rank(), spec.k()),
        ModelKind::NetFixedOutput => (spec.cov_target().rank(), spec.hidden()),
        ModelKind::NetFixedInput => (hidden_covariance(spec, Domain::Target)?.matrix.rank(), spec.k()),
    };
    if rank == 0 {
        return Err(Error::DegenerateModel("target covariance is zero".into()));
    }
    Ok(rank * width - 1)
}

/// `‖A^{1/2} B^{-1/2}‖²_op` with the pseudo-inverse root of `B`.
fn covariance_ratio(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    let ra = psd_power(a, Power::Half)?;
    let rb = psd_power(b, Power::NegHalf)?;
    let n = operator_norm(&(ra.as_matrix() * rb.as_matrix()))?;
    Ok(n * n)
}

pub fn transfer_coefficients(spec: &ModelSpec) -> Result<TransferCoefficients> {
    match spec.kind() {
        ModelKind::Linear => Ok(TransferCoefficients {
            r_s: covariance_ratio(spec.cov_source(), spec.cov_target())?,
            r_t: 1.0,
        }),
        ModelKind::NetFixedOutput => {
            let v2 = operator_norm(spec.fixed())?.powi(2);
            Ok(TransferCoefficients {
                r_s: covariance_ratio(spec.cov_source(), spec.cov_target())? * v2,
                r_t: v2,
            })
        }
        ModelKind::NetFixedInput => {
            let ks = hidden_covariance(spec, Domain::Source)?.matrix;
            let kt = hidden_covariance(spec, Domain::Target)?.matrix;
            Ok(TransferCoefficients {
                r_s: covariance_ratio(&ks, &kt)?,
                r_t: 1.0,
            })
        }
    }
}

/// KL divergence between the joint feature/label laws of two parameter
/// settings on one domain. Exact for the models linear in their parameters;
/// for the fixed-output network it is the `‖V‖²_op` Lipschitz upper bound.
pub fn kl_divergence(spec: &ModelSpec, pi: &TaskParams, pj: &TaskParams, domain: Domain) -> Result<KlDivergence> {
    spec.check_params(pi)?;
    spec.check_params(pj)?;
    let diff = &pi.0 - &pj.0;
    let two_var = 2.0 * spec.sigma() * spec.sigma();
    let sq = weighted_frobenius(&diff, &weighting(spec, domain)?)?.powi(2);
    Ok(match spec.kind() {
        ModelKind::Linear | ModelKind::NetFixedInput => KlDivergence {
            value: sq / two_var,
            kind: KlKind::Exact,
        },
        ModelKind::NetFixedOutput => KlDivergence {
            value: operator_norm(spec.fixed())?.powi(2) * sq / two_var,
            kind: KlKind::UpperBound,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn id(n: usize) -> SymMatrix {
        SymMatrix::identity(n)
    }

    fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn pair(spec: &ModelSpec, s: DMatrix<f64>, t: DMatrix<f64>) -> TaskPair {
        TaskPair::new(spec.clone(), TaskParams(s), TaskParams(t)).unwrap()
    }

    #[test]
    fn distance_examples() {
        let lin = ModelSpec::linear(2, 1, 1.0, id(2), id(2)).unwrap();
        let w = DMatrix::from_row_slice(1, 2, &[0.3, 0.7]);
        assert_eq!(transfer_distance(&pair(&lin, w.clone(), w.clone())).unwrap().rho, 0.0);

        let shifted = &w + DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        assert_relative_eq!(transfer_distance(&pair(&lin, shifted, w)).unwrap().rho, 5.0, epsilon = 1e-12);

        let nfi = ModelSpec::net_fixed_input(DMatrix::identity(2, 2), 1, 1.0, id(2), id(2)).unwrap();
        let p = pair(&nfi, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DMatrix::zeros(1, 2));
        assert_relative_eq!(transfer_distance(&p).unwrap().rho, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn class_membership_is_inclusive() {
        let lin = ModelSpec::linear(2, 1, 1.0, id(2), id(2)).unwrap();
        let p = pair(&lin, DMatrix::from_row_slice(1, 2, &[3.0, 4.0]), DMatrix::zeros(1, 2));
        assert!(in_distance_class(&p, 5.0).unwrap());
        assert!(!in_distance_class(&p, 4.999).unwrap());
    }

    #[test]
    fn distance_is_a_seminorm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = gauss(&mut rng, 5, 5);
        let cov = SymMatrix::new(&b * b.transpose()).unwrap();
        let specs = [
            ModelSpec::linear(5, 3, 1.0, id(5), cov.clone()).unwrap(),
            ModelSpec::net_fixed_output(gauss(&mut rng, 2, 4), 1.0, id(5), cov.clone()).unwrap(),
            ModelSpec::net_fixed_input(gauss(&mut rng, 4, 5), 3, 1.0, id(5), cov.clone()).unwrap(),
        ];
        for spec in &specs {
            let (r, c) = spec.param_shape();
            for _ in 0..30 {
                let a = TaskParams(gauss(&mut rng, r, c));
                let b = TaskParams(gauss(&mut rng, r, c));
                let m = TaskParams(gauss(&mut rng, r, c));
                let ab = parameter_distance(spec, &a, &b).unwrap();
                let ba = parameter_distance(spec, &b, &a).unwrap();
                assert_relative_eq!(ab, ba, max_relative = 1e-12);
                let am = parameter_distance(spec, &a, &m).unwrap();
                let mb = parameter_distance(spec, &m, &b).unwrap();
                assert!(ab <= am + mb + 1e-12);
            }
        }
    }

    #[test]
    fn distance_invariant_under_rotations_fixing_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ModelSpec::linear(6, 2, 1.0, id(6), id(6)).unwrap();
        for _ in 0..20 {
            let q = gauss(&mut rng, 6, 6).qr().q();
            let diff = gauss(&mut rng, 2, 6);
            let before = difference_norm(&spec, &diff).unwrap();
            let after = difference_norm(&spec, &(&diff * &q)).unwrap();
            assert_relative_eq!(before, after, max_relative = 1e-12);
        }
    }

    #[test]
    fn effective_dimension_examples() {
        let spec = ModelSpec::linear(200, 30, 1.0, id(200), id(200)).unwrap();
        assert_eq!(effective_dimension(&spec).unwrap(), 5999);
        let spec = ModelSpec::linear(2, 3, 1.0, id(2), SymMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        assert_eq!(effective_dimension(&spec).unwrap(), 2);
        let v = DMatrix::from_element(1, 30, 1.0);
        let spec = ModelSpec::net_fixed_output(v, 1.0, id(200), id(200)).unwrap();
        assert_eq!(effective_dimension(&spec).unwrap(), 5999);
        let zero = SymMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        let spec = ModelSpec::linear(2, 3, 1.0, id(2), zero).unwrap();
        assert!(matches!(effective_dimension(&spec), Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn effective_dimension_monotone_in_rank() {
        let mut diag = vec![3.0, 2.0, 1.0, 0.5, 0.25];
        let mut last = usize::MAX;
        for i in 0..4 {
            let spec = ModelSpec::linear(5, 4, 1.0, id(5), SymMatrix::from_diagonal(&diag)).unwrap();
            let d = effective_dimension(&spec).unwrap();
            assert!(d <= last);
            last = d;
            diag[4 - i] = 0.0;
        }
    }

    #[test]
    fn coefficient_examples() {
        let spec = ModelSpec::linear(4, 2, 1.0, SymMatrix::scaled_identity(4, 2.0), id(4)).unwrap();
        let c = transfer_coefficients(&spec).unwrap();
        assert_relative_eq!(c.r_s, 2.0, epsilon = 1e-12);
        assert_eq!(c.r_t, 1.0);

        let v = DMatrix::from_element(1, 30, 1.0);
        let spec = ModelSpec::net_fixed_output(v, 1.0, id(3), id(3)).unwrap();
        let c = transfer_coefficients(&spec).unwrap();
        assert_relative_eq!(c.r_s, 30.0, epsilon = 1e-10);
        assert_relative_eq!(c.r_t, 30.0, epsilon = 1e-10);

        let spec = ModelSpec::net_fixed_input(DMatrix::identity(3, 3), 2, 1.0, id(3), id(3)).unwrap();
        let c = transfer_coefficients(&spec).unwrap();
        assert_relative_eq!(c.r_s, 1.0, epsilon = 1e-10);
        assert_eq!(c.r_t, 1.0);

        let zero = SymMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        let spec = ModelSpec::linear(2, 1, 1.0, id(2), zero).unwrap();
        assert!(matches!(transfer_coefficients(&spec), Err(Error::SingularMatrix)));
    }

    #[test]
    fn kl_examples() {
        let spec = ModelSpec::linear(2, 2, 1.0, id(2), id(2)).unwrap();
        let a = TaskParams(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let kl = kl_divergence(&spec, &a, &a, Domain::Target).unwrap();
        assert_eq!(kl.value, 0.0);
        assert_eq!(kl.kind, KlKind::Exact);
        // ‖Θ_i − Θ_j‖_F = 2
        let b = TaskParams(&a.0 + DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert_relative_eq!(kl_divergence(&spec, &a, &b, Domain::Target).unwrap().value, 2.0, epsilon = 1e-12);

        let v = DMatrix::from_element(1, 2, 1.0);
        let nfo = ModelSpec::net_fixed_output(v, 1.0, id(2), id(2)).unwrap();
        let kl = kl_divergence(&nfo, &a, &b, Domain::Target).unwrap();
        assert_eq!(kl.kind, KlKind::UpperBound);
        assert_relative_eq!(kl.value, 2.0 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_kl_is_scaled_squared_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = gauss(&mut rng, 4, 4);
        let cov = SymMatrix::new(&b * b.transpose()).unwrap();
        let spec = ModelSpec::linear(4, 3, 0.7, id(4), cov).unwrap();
        let p = pair(&spec, gauss(&mut rng, 3, 4), gauss(&mut rng, 3, 4));
        let rho = transfer_distance(&p).unwrap().rho;
        let kl = kl_divergence(&spec, &p.source, &p.target, Domain::Target).unwrap().value;
        assert_relative_eq!(kl, rho * rho / (2.0 * 0.49), max_relative = 1e-12);
    }

    #[test]
    fn net_fixed_output_bound_dominates_sampled_kl() {
        // KL of the joint law = E‖V(φ(W_i x) − φ(W_j x))‖² / (2σ²)
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let (k, l, d) = (2, 3, 4);
            let b = gauss(&mut rng, d, d);
            let cov = SymMatrix::new(&b * b.transpose()).unwrap();
            let spec = ModelSpec::net_fixed_output(gauss(&mut rng, k, l), 1.3, id(d), cov.clone()).unwrap();
            let wi = TaskParams(gauss(&mut rng, l, d));
            let wj = TaskParams(gauss(&mut rng, l, d));
            let bound = kl_divergence(&spec, &wi, &wj, Domain::Target).unwrap().value;
            let root = psd_power(&cov, Power::Half).unwrap();
            let n = 20_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let x = root.as_matrix() * DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let hi = (&wi.0 * &x).map(|v| v.max(0.0));
                let hj = (&wj.0 * &x).map(|v| v.max(0.0));
                acc += (spec.fixed() * (hi - hj)).norm_squared();
            }
            let mc = acc / n as f64 / (2.0 * 1.69);
            assert!(mc <= bound * 1.02, "mc {mc} bound {bound}");
        }
    }
}
