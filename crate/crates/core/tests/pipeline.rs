use cqr_core::estimators::{EstimatorSpec, Family, Penalty, SUPPORT_THRESHOLD, SolveMode, fit_with, support};
use cqr_core::mc::{Cell, ExponentRule, MCConfig, MethodTemplate, generate_scenario, run_mc};
use cqr_core::model::Pairs;
use cqr_core::solver::{SolverConfig, export_mps, parse_mps, solve};
use cqr_core::tuning::{CVConfig, Candidate, PenaltyKind, cross_validate};
use cqr_core::{Dataset, FitResult};

fn scenario(seed: u64, n: usize, d: usize) -> Dataset {
    let cell = Cell { n, d, k_true: 2, rho: 5.0, exponent: ExponentRule::KTrue };
    generate_scenario(&cell, seed, 0).unwrap().dataset
}

fn check(ds: &Dataset, spec: &EstimatorSpec, fit: &FitResult) {
    let tol = match spec.mode {
        SolveMode::CuttingPlane { tol, .. } => tol + 1e-6,
        SolveMode::Full => 1e-6,
    };
    let report = fit.invariants(ds, spec.l0_penalty(ds.d()).unwrap());
    assert!(report.holds(tol), "{} broke an invariant: {report:?}", spec.name());
}

#[test]
fn all_six_estimators_satisfy_their_invariants() {
    let ds = scenario(1, 30, 4);
    let cfg = SolverConfig::default();
    for family in [Family::Quantile, Family::Expectile] {
        for penalty in [Penalty::None, Penalty::L1 { lambda: 0.1 }, Penalty::L0 { k: 2, big_m: 2.0 }] {
            let spec = EstimatorSpec::new(family, 0.7).unwrap().with_penalty(penalty);
            let fit = fit_with(&ds, &spec, &cfg).unwrap();
            check(&ds, &spec, &fit);
            if let Penalty::L0 { k, .. } = penalty {
                assert!(support(&fit, SUPPORT_THRESHOLD).len() <= k);
            }
        }
    }
}

#[test]
fn exported_model_solves_to_the_same_optimum() {
    let ds = scenario(2, 10, 3);
    let spec = EstimatorSpec::quantile(0.4).unwrap().with_penalty(Penalty::L0 { k: 1, big_m: 3.0 });
    let problem = spec.build(&ds, Pairs::All).unwrap();
    let back = parse_mps(&export_mps(&problem)).unwrap();
    let cfg = SolverConfig::default();
    let (a, b) = (solve(&problem, &cfg).unwrap(), solve(&back, &cfg).unwrap());
    assert!((a.objective - b.objective).abs() <= 1e-9);
    let direct = fit_with(&ds, &spec.with_mode(SolveMode::Full), &cfg).unwrap();
    assert!((direct.objective - a.objective).abs() <= 1e-7);
}

#[test]
fn cross_validation_scores_every_candidate() {
    let ds = scenario(3, 24, 3);
    let cv = CVConfig { folds: 3, lambdas: vec![0.01, 0.3, 5.0], ..CVConfig::default() };
    let base = EstimatorSpec::quantile(0.5).unwrap();
    let report = cross_validate(&ds, &base, PenaltyKind::L1, &cv, &SolverConfig::default()).unwrap();
    assert_eq!(report.scores.len(), 3);
    assert!(report.scores.iter().all(|s| s.error.is_none() && s.fold_losses.len() == 3));
    let best = report.scores.iter().map(|s| s.mean).fold(f64::INFINITY, f64::min);
    let chosen = report.scores.iter().find(|s| s.candidate == report.chosen).unwrap();
    assert_eq!(chosen.mean, best);
    assert!(matches!(report.chosen, Candidate::L1 { .. }));
}

#[test]
fn monte_carlo_reports_are_reproducible() {
    let cfg = MCConfig {
        ns: vec![25],
        ds: vec![3],
        k_trues: vec![1],
        rhos: vec![2.0],
        taus: vec![0.5],
        replications: 2,
        seed: 5,
        exponent: ExponentRule::KTrue,
    };
    let cv = CVConfig { folds: 2, lambdas: vec![0.05, 1.0], ..CVConfig::default() };
    let methods = [MethodTemplate::new(Family::Quantile, PenaltyKind::L1)];
    let solver = SolverConfig::default();
    let a = run_mc(&cfg, &methods, &cv, &solver).unwrap();
    let b = run_mc(&cfg, &methods, &cv, &solver).unwrap();
    assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    assert_eq!(a.rows.len(), 2);
    assert!(a.failures.is_empty());
    assert!(a.rows.iter().all(|r| r.reps == 2));
}
