//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always print. Set
//! `CQR_ACCEPTANCE=1,5,9` to run a subset.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cqr_core::Dataset;
use cqr_core::cuts::InitStrategy;
use cqr_core::estimators::{EstimatorSpec, Family, Penalty, SolveMode, anchor_big_m, fit_with, l0_oracle};
use cqr_core::mc::{Cell, ExponentRule, MCConfig, MethodTemplate, generate_scenario, prediction_error, run_mc};
use cqr_core::model::{Pairs, add_l1_ball};
use cqr_core::solver::{SolverConfig, solve, solve_qp};
use cqr_core::tuning::{CVConfig, PenaltyKind, log_grid};

type Verdict = Result<String, String>;

fn cfg() -> SolverConfig {
    SolverConfig::from_env()
}

fn full(spec: EstimatorSpec) -> EstimatorSpec {
    spec.with_mode(SolveMode::Full)
}

fn instance(seed: u64, n: usize, d: usize, rho: f64) -> Dataset {
    let cell = Cell { n, d, k_true: 1.max(d / 2), rho, exponent: ExponentRule::KTrue };
    generate_scenario(&cell, seed, 0).expect("valid cell").dataset
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Small instances of the oracle check, reused by the round-trip check.
fn oracle_instances() -> Vec<(Dataset, usize)> {
    (0..20u64)
        .map(|s| {
            let n = 6 + (s as usize * 5) % 7;
            let d = 2 + (s as usize) % 3;
            let k = 1 + (s as usize / 3) % 2;
            (instance(100 + s, n, d, 2.0), k)
        })
        .collect()
}

fn oracle_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    // when the best subset fit needs slopes above M, the big-M rows bind and
    // the two problems differ; those cases are re-checked against an
    // enumeration with the slopes capped at M
    let (mut binding, mut capped_worst) = (Vec::new(), 0.0f64);
    for (t, (ds, k)) in oracle_instances().into_iter().enumerate() {
        for family in [Family::Quantile, Family::Expectile] {
            let at = |e: cqr_core::Error| format!("instance {t} {family:?}: {e}");
            let plain = full(EstimatorSpec::new(family, 0.5).map_err(err)?);
            let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).map_err(at)?;
            let mip = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k, big_m: m }), &cfg()).map_err(at)?;
            let oracle = l0_oracle(&ds, &plain, k, &cfg()).map_err(at)?;
            let gap = (mip.objective - oracle.objective).abs();
            worst = worst.max(gap);
            if gap > 1e-6 {
                let sub = ds.select_columns(&oracle.subset).map_err(at)?;
                let steepest = fit_with(&sub, &plain, &cfg()).map_err(at)?.beta.iter().copied().fold(0.0, f64::max);
                binding.push(format!("instance {t} {family:?} gap {gap:.2e}, slope {steepest:.2} > M {m:.2}"));
                let mut capped = f64::INFINITY;
                for cols in subsets(ds.d(), k) {
                    let sub = ds.select_columns(&cols).map_err(at)?;
                    let spec = plain.with_penalty(Penalty::L0 { k: cols.len(), big_m: m });
                    capped = capped.min(fit_with(&sub, &spec, &cfg()).map_err(at)?.objective);
                }
                capped_worst = capped_worst.max((mip.objective - capped).abs());
            }
        }
    }
    let mut msg = format!("max |MIP - enumeration| = {worst:.2e} over 40 fits (limit 1e-6)");
    if !binding.is_empty() {
        msg += &format!(
            "; M = 10x anchor binds on {}; there MIP vs slope-capped enumeration {capped_worst:.2e}",
            binding.join(", ")
        );
    }
    if worst <= 1e-6 { Ok(msg) } else { Err(msg) }
}

fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    (1u32..1 << d)
        .filter(|mask| mask.count_ones() as usize <= k)
        .map(|mask| (0..d).filter(|j| mask & (1 << j) != 0).collect())
        .collect()
}

fn non_binding_cardinality() -> Verdict {
    let mut worst = 0.0f64;
    for s in 0..10u64 {
        let d = 2 + (s as usize) % 3;
        let ds = instance(200 + s, 10 + s as usize, d, 2.0);
        let family = if s % 2 == 0 { Family::Quantile } else { Family::Expectile };
        let plain = full(EstimatorSpec::new(family, 0.5).map_err(err)?);
        let base = fit_with(&ds, &plain, &cfg()).map_err(err)?;
        let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).map_err(err)?;
        let l0 = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k: d, big_m: m }), &cfg()).map_err(err)?;
        worst = worst.max((l0.objective - base.objective).abs());
    }
    let msg = format!("max |L0(k=d) - unpenalized| = {worst:.2e} on 10 instances (limit 1e-6)");
    if worst <= 1e-6 { Ok(msg) } else { Err(msg) }
}

fn relaxation_bound() -> Verdict {
    let mut worst = f64::INFINITY;
    for s in 0..10u64 {
        let ds = instance(300 + s, 10, 3, 2.0);
        let k = 1 + (s as usize) % 2;
        let family = if s < 5 { Family::Quantile } else { Family::Expectile };
        let plain = full(EstimatorSpec::new(family, 0.5).map_err(err)?);
        // the anchor itself keeps M binding, so the bound is informative
        let m = anchor_big_m(&ds, &plain, &cfg()).map_err(err)?;
        let l0 = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k, big_m: m }), &cfg()).map_err(err)?;
        let ball = add_l1_ball(plain.build(&ds, Pairs::All).map_err(err)?, m * k as f64).map_err(err)?;
        let relaxed = solve(&ball, &cfg()).map_err(err)?;
        worst = worst.min(l0.objective - relaxed.objective);
    }
    let msg = format!("min (L0 - L1 ball) = {worst:.2e} on 10 instances (limit -1e-8)");
    if worst >= -1e-8 { Ok(msg) } else { Err(msg) }
}

fn cutting_plane_exactness() -> Verdict {
    let (n, d) = (100, 6);
    let all = n * (n - 1);
    let (mut gap, mut rows) = (0.0f64, 0usize);
    for s in 0..10u64 {
        let ds = instance(400 + s, n, d, 2.0);
        for tau in [0.5, 0.9] {
            // comparisons with the full solve tighten the loop tolerance
            let tight = SolveMode::CuttingPlane { strategy: InitStrategy::Mst, tol: 1e-4 };
            let spec = EstimatorSpec::quantile(tau).map_err(err)?.with_mode(tight);
            let cut = fit_with(&ds, &spec, &cfg()).map_err(err)?;
            let exact = fit_with(&ds, &full(spec), &cfg()).map_err(err)?;
            gap = gap.max((cut.objective - exact.objective).abs());
            rows = rows.max(cut.meta.constraints);
        }
    }
    let msg = format!(
        "max objective gap {gap:.2e} (limit 1e-4), max rows {rows} of {all} (limit {})",
        all as f64 * 0.25
    );
    if gap <= 1e-4 && (rows as f64) < 0.25 * all as f64 { Ok(msg) } else { Err(msg) }
}

fn zero_noise_exactness() -> Verdict {
    let start = Instant::now();
    let x = instance(500, 50, 2, 2.0).inputs().clone();
    let y: Vec<f64> = x.rows().into_iter().map(|r| r.sum()).collect();
    let ds = Dataset::new(x, y.clone()).map_err(err)?;
    let f = fit_with(&ds, &EstimatorSpec::quantile(0.5).map_err(err)?, &cfg()).map_err(err)?;
    let pe = prediction_error(&f.y_hat, &y).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("objective {:.2e}, prediction error {pe:.2e} (limits 1e-6), {secs:.2} s (limit 10 s)", f.objective);
    if f.objective <= 1e-6 && pe <= 1e-6 && secs < 10.0 { Ok(msg) } else { Err(msg) }
}

fn lambda_path() -> Verdict {
    let ds = instance(600, 50, 4, 2.0);
    let tau = 0.5;
    let (mut fid_drop, mut l1_rise) = (0.0f64, 0.0f64);
    let mut last: Option<(f64, f64)> = None;
    for lambda in log_grid(1e-3, 10.0, 20) {
        let spec = full(EstimatorSpec::quantile(tau).map_err(err)?.with_penalty(Penalty::L1 { lambda }));
        let f = fit_with(&ds, &spec, &cfg()).map_err(err)?;
        let (fid, l1) = (f.check_fidelity(tau), f.beta_l1());
        if let Some((pf, pl)) = last {
            fid_drop = fid_drop.max(pf - fid);
            l1_rise = l1_rise.max(l1 - pl);
        }
        last = Some((fid, l1));
    }
    let msg = format!("worst fidelity decrease {fid_drop:.2e}, worst slope-mass increase {l1_rise:.2e} (limits 1e-8)");
    if fid_drop <= 1e-8 && l1_rise <= 1e-8 { Ok(msg) } else { Err(msg) }
}

fn mc(rhos: Vec<f64>, tau: f64, methods: &[PenaltyKind]) -> Result<cqr_core::mc::MetricsReport, String> {
    let cfg = MCConfig {
        ns: vec![100],
        ds: vec![6],
        k_trues: vec![2],
        rhos,
        taus: vec![tau],
        replications: 10,
        seed: 0,
        exponent: ExponentRule::KTrue,
    };
    let methods: Vec<MethodTemplate> = methods.iter().map(|&p| MethodTemplate::new(Family::Quantile, p)).collect();
    let report = run_mc(&cfg, &methods, &CVConfig::default(), &SolverConfig::from_env()).map_err(err)?;
    if let Some(f) = report.failures.first() {
        return Err(format!("{} replications failed, first: {}", report.failures.len(), f.message));
    }
    Ok(report)
}

fn mc_direction() -> Verdict {
    let report = mc(vec![10.0], 0.9, &[PenaltyKind::L0, PenaltyKind::L1])?;
    let l0 = report.mean("L0-CQR", "accuracy", |_| true).ok_or("no L0-CQR rows")?;
    let l1 = report.mean("L1-CQR", "accuracy", |_| true).ok_or("no L1-CQR rows")?;
    let msg = format!("accuracy L0-CQR {l0:.1} vs L1-CQR {l1:.1} (need L0 >= L1), L0 within 56 +/- 25");
    if l0 >= l1 && (l0 - 56.0).abs() <= 25.0 { Ok(msg) } else { Err(msg) }
}

fn snr_effect() -> Verdict {
    let report = mc(vec![0.5, 10.0], 0.5, &[PenaltyKind::L0])?;
    let pe = |rho: f64| report.mean("L0-CQR", "prediction_error", |r| r.rho == rho);
    let (low, high) = (pe(0.5).ok_or("no rho = 0.5 row")?, pe(10.0).ok_or("no rho = 10 row")?);
    let msg = format!("L0-CQR prediction error {high:.4} at rho = 10 vs {low:.4} at rho = 0.5");
    if high < low { Ok(msg) } else { Err(msg) }
}

fn expectile_median() -> Verdict {
    let mut worst = 0.0f64;
    for s in 0..5u64 {
        let ds = instance(900 + s, 12 + s as usize, 2 + s as usize % 2, 2.0);
        let cer = full(EstimatorSpec::expectile(0.5).map_err(err)?).build(&ds, Pairs::All).map_err(err)?;
        let mut ls = cer.clone();
        let layout = ls.layout().ok_or("CER problem without a regression layout")?;
        for i in 0..ds.n() {
            ls.set_quadratic(layout.eps_plus(i), 1.0).map_err(err)?;
            ls.set_quadratic(layout.eps_minus(i), 1.0).map_err(err)?;
        }
        let a = solve_qp(&cer, &cfg()).map_err(err)?;
        let b = solve_qp(&ls, &cfg()).map_err(err)?;
        worst = worst.max((a.objective - 0.5 * b.objective).abs());
    }
    let msg = format!("max |CER(0.5) - LS/2| = {worst:.2e} on 5 instances (limit 1e-6)");
    if worst <= 1e-6 { Ok(msg) } else { Err(msg) }
}

fn cqr(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cqr")).args(args).output().map_err(err)?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("cqr {} exited {:?}: {}", args[0], out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn write_csv(ds: &Dataset, path: &Path) -> Result<(), String> {
    let mut s = (1..=ds.d()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",") + ",y\n";
    for i in 0..ds.n() {
        let row: Vec<String> = ds.x(i).iter().map(f64::to_string).collect();
        s += &format!("{},{}\n", row.join(","), ds.y(i));
    }
    fs::write(path, s).map_err(err)
}

fn determinism_and_round_trip() -> Verdict {
    let dir = tempfile::TempDir::new().map_err(err)?;
    let p = |name: &str| dir.path().join(name).to_str().expect("utf-8 temp path").to_string();
    let sim = |out: &str| {
        cqr(&[
            "simulate", "--n", "30", "--d", "3", "--k-true", "1,2", "--rho", "2", "--tau", "0.3,0.7", "--reps", "2",
            "--seed", "11", "--methods", "l1-cqr,l0-cer", "--lambdas", "0.05,0.5", "--ks", "1,2", "--m-mults", "1,2",
            "--folds", "3", "--out", out,
        ])
    };
    sim(&p("a.csv"))?;
    sim(&p("b.csv"))?;
    let (a, b) = (fs::read(p("a.csv")).map_err(err)?, fs::read(p("b.csv")).map_err(err)?);
    if a != b {
        return Err("simulate output differs between two runs with the same seed".into());
    }

    let mut fits = Vec::new();
    for (t, (ds, k)) in oracle_instances().into_iter().enumerate() {
        let m = (1.0 + t as f64 * 0.1).to_string();
        let k = k.to_string();
        fits.push((ds.clone(), vec!["--mode", "full", "--penalty", "l0", "--k", &k, "--big-m", &m].join(" ")));
        fits.push((ds, "--family expectile --level 0.7 --penalty l1 --lambda 0.1".to_string()));
    }
    let lin = instance(500, 50, 2, 2.0);
    let y: Vec<f64> = lin.inputs().rows().into_iter().map(|r| r.sum()).collect();
    fits.push((Dataset::new(lin.inputs().clone(), y).map_err(err)?, "--level 0.5".into()));
    fits.push((instance(400, 100, 6, 2.0), "--level 0.9".into()));
    fits.push((instance(401, 100, 6, 2.0), "--family expectile --level 0.9 --penalty l0 --k 2 --m-mult 1".into()));

    for (i, (ds, flags)) in fits.iter().enumerate() {
        let (data, doc) = (p(&format!("d{i}.csv")), p(&format!("r{i}.json")));
        write_csv(ds, Path::new(&data))?;
        let mut args = vec!["fit", "--data", &data, "--out", &doc];
        args.extend(flags.split(' '));
        cqr(&args).map_err(|e| format!("fit {i} ({flags}): {e}"))?;
        cqr(&["verify", &doc]).map_err(|e| format!("verify {i} ({flags}): {e}"))?;
    }
    Ok(format!(
        "simulate CSV identical across runs ({} bytes); {} fit -> JSON -> verify round trips passed",
        a.len(),
        fits.len()
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "non-binding cardinality", non_binding_cardinality),
        (3, "relaxation bound", relaxation_bound),
        (4, "cutting-plane exactness", cutting_plane_exactness),
        (5, "zero-noise exactness", zero_noise_exactness),
        (6, "lambda-path monotonicity", lambda_path),
        (7, "Monte Carlo direction", mc_direction),
        (8, "SNR effect", snr_effect),
        (9, "expectile median equivalence", expectile_median),
        (10, "determinism and round trip", determinism_and_round_trip),
    ];
    let only: Option<Vec<u32>> = std::env::var("CQR_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("criterion {id:>2} {name}: PASS  {msg}  [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL  {msg}  [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
