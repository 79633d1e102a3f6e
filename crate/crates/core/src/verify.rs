//! Monte-Carlo oracle suite: every closed form in the crate checked against
//! brute-force sampling on random instances.

use std::f64::consts::LN_2;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bounds::{bound_b, BoundInput};
use crate::error::Result;
use crate::estimators::{closed_form_risk, mc_risk, net_risk_lower_bound};
use crate::kernels::{arccos_covariance, relu_discrepancy};
use crate::metrics::kl_divergence;
use crate::model::{Domain, ModelSpec, TaskParams};
use crate::numerics::{psd_power, Power, SymMatrix};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
    let b = gauss(rng, d, d);
    SymMatrix::new(&b * b.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1).expect("symmetric by construction")
}

/// `n × d` rows distributed as `N(0, Σ)`.
fn gaussian_rows(rng: &mut ChaCha8Rng, cov: &SymMatrix, n: usize) -> Result<DMatrix<f64>> {
    let root = psd_power(cov, Power::Half)?;
    Ok(gauss(rng, n, cov.order()) * root.as_matrix())
}

struct Counts {
    instances: usize,
    samples: usize,
    tol: f64,
}

fn counts(scale: Scale, full: Counts) -> Counts {
    match scale {
        Scale::Full => full,
        Scale::Quick => Counts {
            instances: full.instances.div_ceil(5),
            samples: full.samples / 10,
            tol: full.tol * 2.0,
        },
    }
}

fn kernel_oracle(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let c = counts(scale, Counts { instances: 20, samples: 2_000_000, tol: 0.02 });
    let mut rng = stream(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..c.instances {
        let w = gauss(&mut rng, 5, 8);
        let cov = random_psd(&mut rng, 8);
        let exact = arccos_covariance(&w, &cov)?.matrix.into_matrix();
        let mut acc = DMatrix::zeros(5, 5);
        let chunk = 50_000;
        let mut done = 0;
        while done < c.samples {
            let n = chunk.min(c.samples - done);
            let x = gaussian_rows(&mut rng, &cov, n)?;
            let h = (x * w.transpose()).map(|t| t.max(0.0));
            acc += h.transpose() * &h;
            done += n;
        }
        acc /= c.samples as f64;
        for (e, m) in exact.iter().zip(acc.iter()) {
            if e.abs() > 0.01 {
                worst = worst.max((m - e).abs() / e.abs());
            }
        }
    }
    Ok(CheckOutcome {
        name: "arc-cosine covariance matches sampled ReLU moments",
        passed: worst <= c.tol,
        detail: format!("worst relative error {worst:.4} (tolerance {})", c.tol),
    })
}

fn random_spec(rng: &mut ChaCha8Rng, which: usize) -> Result<ModelSpec> {
    let d = rng.random_range(2..=10);
    let k = rng.random_range(1..=4);
    let l = rng.random_range(1..=5);
    let sigma = rng.random_range(0.2..1.0);
    let cs = random_psd(rng, d);
    let ct = random_psd(rng, d);
    match which {
        0 => ModelSpec::linear(d, k, sigma, cs, ct),
        1 => ModelSpec::net_fixed_output(gauss(rng, k, l), sigma, cs, ct),
        _ => ModelSpec::net_fixed_input(gauss(rng, l, d), k, sigma, cs, ct),
    }
}

fn risk_oracle(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let c = counts(scale, Counts { instances: 10, samples: 1_000_000, tol: 0.02 });
    let mut rng = stream(seed);
    let mut worst: f64 = 0.0;
    for which in 0..3 {
        for i in 0..c.instances {
            let spec = random_spec(&mut rng, which)?;
            let (r, cols) = spec.param_shape();
            let est = TaskParams(gauss(&mut rng, r, cols));
            let truth = TaskParams(gauss(&mut rng, r, cols));
            let exact = closed_form_risk(&spec, &est, &truth)?;
            let mc = mc_risk(&spec, &est, &truth, c.samples, derive_seed(seed, &[which as u64, i as u64]))?;
            worst = worst.max((mc - exact).abs() / exact);
        }
    }
    Ok(CheckOutcome {
        name: "closed-form target risk matches Monte-Carlo risk",
        passed: worst <= c.tol,
        detail: format!("worst relative error {worst:.4} over three model kinds (tolerance {})", c.tol),
    })
}

fn discrepancy_floor(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let n = if scale == Scale::Full { 1000 } else { 200 };
    let mut rng = stream(seed);
    let mut violations = 0;
    for i in 0..n {
        let a: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = match i % 5 {
            0 => a.iter().map(|x| -x * 2.0).collect(),
            1 => a.iter().map(|x| x * 0.5 + 1e-9).collect(),
            2 => vec![0.0; 4],
            3 => {
                // orthogonal to a
                let r: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
                let dot: f64 = a.iter().zip(&r).map(|(p, q)| p * q).sum();
                let aa: f64 = a.iter().map(|p| p * p).sum();
                r.iter().zip(&a).map(|(q, p)| q - dot / aa * p).collect()
            }
            _ => (0..4).map(|_| rng.sample(StandardNormal)).collect(),
        };
        let lhs = relu_discrepancy(&a, &b)?;
        let quarter: f64 = 0.25 * a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        if lhs < quarter - 1e-12 {
            violations += 1;
        }
    }
    Ok(CheckOutcome {
        name: "ReLU discrepancy is at least a quarter of the squared distance",
        passed: violations == 0,
        detail: format!("{violations} violations in {n} pairs"),
    })
}

fn bound_identities(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let n = if scale == Scale::Full { 10_000 } else { 1000 };
    let mut rng = stream(seed);
    let mut bad = 0;
    for _ in 0..n {
        let input = BoundInput {
            delta: rng.random_range(0.0..50.0),
            eff_dim: rng.random_range(20..5000),
            r_s: rng.random_range(0.01..10.0),
            r_t: rng.random_range(0.01..10.0),
            n_s: rng.random_range(0..100_000),
            n_t: rng.random_range(1..100_000),
            sigma: rng.random_range(0.01..5.0),
        };
        let (ts, tl) = input.thresholds()?;
        if ts > tl {
            bad += 1;
        }
        let at_zero = bound_b(&BoundInput { delta: 0.0, ..input })?;
        let n_eff = input.r_s * input.n_s as f64 + input.r_t * input.n_t as f64;
        let want = 6.0 / 1000.0 * input.eff_dim as f64 * input.sigma * input.sigma / n_eff;
        if (at_zero - want).abs() > 1e-14 * want {
            bad += 1;
        }
        let large = BoundInput { delta: 1e6, ..input };
        let want = input.sigma * input.sigma * input.eff_dim as f64 / (256.0 * input.r_t * input.n_t as f64);
        if (bound_b(&large)? - want).abs() > 1e-14 * want || tl > (want * 256.0 * LN_2).sqrt() * (1.0 + 1e-12) {
            bad += 1;
        }
    }
    Ok(CheckOutcome {
        name: "bound branches and thresholds",
        passed: bad == 0,
        detail: format!("{bad} failures in {n} random inputs"),
    })
}

fn linear_kl(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let c = counts(scale, Counts { instances: 10, samples: 1_000_000, tol: 0.03 });
    let mut rng = stream(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..c.instances {
        let spec = random_spec(&mut rng, 0)?;
        let (r, cols) = spec.param_shape();
        let wi = gauss(&mut rng, r, cols);
        let wj = gauss(&mut rng, r, cols);
        let exact = kl_divergence(&spec, &TaskParams(wi.clone()), &TaskParams(wj.clone()), Domain::Target)?.value;
        // log p_i(y|x) − log p_j(y|x) under draws from p_i
        let x = gaussian_rows(&mut rng, spec.cov_target(), c.samples)?;
        let noise = gauss(&mut rng, c.samples, spec.k()) * spec.sigma();
        let mean_i = &x * wi.transpose();
        let y = &mean_i + noise;
        let ri = (&y - &mean_i).norm_squared();
        let rj = (&y - &x * wj.transpose()).norm_squared();
        let est = (rj - ri) / (2.0 * spec.sigma() * spec.sigma() * c.samples as f64);
        worst = worst.max((est - exact).abs() / exact);
    }
    Ok(CheckOutcome {
        name: "linear KL matches the sampled log-likelihood ratio",
        passed: worst <= c.tol,
        detail: format!("worst relative error {worst:.4} (tolerance {})", c.tol),
    })
}

fn net_kl_upper(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let (instances, samples) = if scale == Scale::Full { (50, 20_000) } else { (10, 5000) };
    let mut rng = stream(seed);
    let mut violations = 0;
    for _ in 0..instances {
        let spec = random_spec(&mut rng, 1)?;
        let (r, cols) = spec.param_shape();
        let wi = gauss(&mut rng, r, cols);
        let wj = gauss(&mut rng, r, cols);
        let bound = kl_divergence(&spec, &TaskParams(wi.clone()), &TaskParams(wj.clone()), Domain::Target)?.value;
        let x = gaussian_rows(&mut rng, spec.cov_target(), samples)?;
        let v = spec.fixed_matrix().expect("fixed-output model");
        let fi = (&x * wi.transpose()).map(|t| t.max(0.0)) * v.transpose();
        let fj = (&x * wj.transpose()).map(|t| t.max(0.0)) * v.transpose();
        let mc = (fi - fj).norm_squared() / (2.0 * spec.sigma() * spec.sigma() * samples as f64);
        if mc > bound * 1.02 {
            violations += 1;
        }
    }
    Ok(CheckOutcome {
        name: "fixed-output KL upper bound dominates sampled KL",
        passed: violations == 0,
        detail: format!("{violations} violations in {instances} instances"),
    })
}

fn net_lower_bound(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let n = if scale == Scale::Full { 200 } else { 50 };
    let mut rng = stream(seed);
    let mut violations = 0;
    for _ in 0..n {
        let spec = random_spec(&mut rng, 1)?;
        let (r, cols) = spec.param_shape();
        let est = TaskParams(gauss(&mut rng, r, cols));
        let truth = TaskParams(gauss(&mut rng, r, cols));
        let exact = closed_form_risk(&spec, &est, &truth)?;
        if exact < net_risk_lower_bound(&spec, &est, &truth)? * (1.0 - 1e-10) {
            violations += 1;
        }
    }
    Ok(CheckOutcome {
        name: "fixed-output exact risk dominates its quarter-gain lower bound",
        passed: violations == 0,
        detail: format!("{violations} violations in {n} instances"),
    })
}

fn root_oracle(scale: Scale, seed: u64) -> Result<CheckOutcome> {
    let n = if scale == Scale::Full { 200 } else { 50 };
    let mut rng = stream(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let d = rng.random_range(1..12);
        let m = random_psd(&mut rng, d);
        let r = psd_power(&m, Power::Half)?;
        let err = (r.as_matrix() * r.as_matrix() - m.as_matrix()).norm() / m.as_matrix().norm();
        worst = worst.max(err);
    }
    Ok(CheckOutcome {
        name: "PSD square root squares back",
        passed: worst <= 1e-10,
        detail: format!("worst relative residual {worst:.2e}"),
    })
}

/// Runs every check. An error inside a check is reported as a failure.
pub fn run(scale: Scale, seed: u64) -> Vec<CheckOutcome> {
    type Check = fn(Scale, u64) -> Result<CheckOutcome>;
    let checks: [(&'static str, Check); 8] = [
        ("PSD square root", root_oracle),
        ("arc-cosine covariance", kernel_oracle),
        ("closed-form risk", risk_oracle),
        ("ReLU discrepancy floor", discrepancy_floor),
        ("bound identities", bound_identities),
        ("linear KL", linear_kl),
        ("fixed-output KL bound", net_kl_upper),
        ("fixed-output risk lower bound", net_lower_bound),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            check(scale, derive_seed(seed, &[i as u64])).unwrap_or_else(|e| CheckOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
