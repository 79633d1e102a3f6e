use transfer_bounds::estimators::{closed_form_excess_risk, fit_weighted_erm, select_lambda, ErmConfig};
use transfer_bounds::model::{make_synthetic_pair, sample_dataset, Domain, PairRecipe, Role, TaskPair};
use transfer_bounds::rng::derive_seed;
use transfer_bounds::{ModelSpec, SymMatrix};

const GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn pair(d: usize, k: usize, perturbation_variance: f64) -> TaskPair {
    let spec = ModelSpec::linear(d, k, 1.0, SymMatrix::identity(d), SymMatrix::identity(d)).unwrap();
    let recipe = PairRecipe {
        base_seed: 11,
        entry_variance: 10.0,
        perturbation_variance,
        scale: 1.0,
        base: Domain::Source,
        target_distance: None,
    };
    make_synthetic_pair(&spec, &recipe).unwrap()
}

fn selected_lambdas(pair: &TaskPair, n_s: usize, n_t: usize, trials: u64) -> Vec<f64> {
    let spec = &pair.spec;
    (0..trials)
        .map(|t| {
            let seed = derive_seed(99, &[t]);
            let s = sample_dataset(spec, &pair.source, n_s, Domain::Source, Role::Source, derive_seed(seed, &[1])).unwrap();
            let tg = sample_dataset(spec, &pair.target, n_t, Domain::Target, Role::Target, derive_seed(seed, &[2])).unwrap();
            let v = sample_dataset(spec, &pair.target, 50, Domain::Target, Role::Validation, derive_seed(seed, &[3])).unwrap();
            select_lambda(spec, &s, &tg, &v, &GRID, &ErmConfig::default()).unwrap().lambda_used
        })
        .collect()
}

#[test]
fn singleton_grid_selects_its_value() {
    let p = pair(5, 2, 1.0);
    let s = sample_dataset(&p.spec, &p.source, 30, Domain::Source, Role::Source, 1).unwrap();
    let t = sample_dataset(&p.spec, &p.target, 10, Domain::Target, Role::Target, 2).unwrap();
    let fit = select_lambda(&p.spec, &s, &t, &t, &[0.0], &ErmConfig::default()).unwrap();
    assert_eq!(fit.lambda_used, 0.0);
    assert!(fit.validation_loss.is_some());
}

#[test]
fn identical_tasks_select_positive_weight() {
    let p = pair(20, 5, 0.0);
    let picks = selected_lambdas(&p, 400, 20, 20);
    let positive = picks.iter().filter(|l| **l > 0.0).count();
    assert!(positive >= 16, "{picks:?}");
}

#[test]
fn distant_tasks_select_small_weight() {
    let p = pair(20, 5, 3.6e5);
    let picks = selected_lambdas(&p, 400, 20, 20);
    let small = picks.iter().filter(|l| **l <= 0.25).count();
    assert!(small >= 16, "{picks:?}");
}

#[test]
fn source_weight_helps_when_tasks_coincide() {
    let p = pair(20, 5, 0.0);
    let spec = &p.spec;
    let trials = 50;
    let mut wins = 0;
    for t in 0..trials {
        let seed = derive_seed(5, &[t]);
        let s = sample_dataset(spec, &p.source, 10_000, Domain::Source, Role::Source, derive_seed(seed, &[1])).unwrap();
        let tg = sample_dataset(spec, &p.target, 20, Domain::Target, Role::Target, derive_seed(seed, &[2])).unwrap();
        let risk = |lambda: f64| {
            let fit = fit_weighted_erm(spec, &s, &tg, &ErmConfig { lambda, ..Default::default() }).unwrap();
            closed_form_excess_risk(spec, &fit.task_params(), &p.target).unwrap()
        };
        if risk(1.0) <= risk(0.0) {
            wins += 1;
        }
    }
    assert!(wins * 10 >= trials * 9, "{wins}/{trials}");
}
