use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use cqr_core::cuts::InitStrategy;
use cqr_core::estimators::{EstimatorSpec, Family, Penalty, SolveMode, anchor_big_m, fit_with};
use cqr_core::mc::{ExponentRule, MCConfig, MethodTemplate, run_mc};
use cqr_core::model::Pairs;
use cqr_core::solver::{SolverConfig, Status, export_mps};
use cqr_core::tuning::{CVConfig, PenaltyKind, cross_validate};
use cqr_core::{Dataset, FitResult};

use crate::CliError;
use crate::args::{
    DataArgs, ExponentArg, ExportArgs, FamilyArg, FitArgs, FormatArg, GridArgs, InitArg, ModeArg, ModelArgs,
    PenaltyArg, PenaltyArgs, PresetArg, SimulateArgs, TuneArgs, VerifyArgs,
};
use crate::document::{BigMEcho, ResultDocument};
use crate::input::{self, Columns};

fn columns(a: &DataArgs) -> Columns {
    Columns { output: a.output_col.clone(), id: a.id_col.clone(), inputs: a.inputs.clone() }
}

fn load(a: &DataArgs) -> Result<(Dataset, String), CliError> {
    let cols = columns(a);
    Ok((input::load(&a.data, &cols)?, input::output_name(&a.data, &cols)?))
}

fn base_spec(m: &ModelArgs) -> Result<EstimatorSpec, CliError> {
    let family = match m.family {
        FamilyArg::Quantile => Family::Quantile,
        FamilyArg::Expectile => Family::Expectile,
    };
    let mode = match m.mode {
        ModeArg::Full => SolveMode::Full,
        ModeArg::CuttingPlane => {
            if !(m.tol > 0.0 && m.tol.is_finite()) {
                return Err(CliError::Flags(format!("--tol {} must be finite and positive", m.tol)));
            }
            let strategy = match m.init {
                InitArg::Mst => InitStrategy::Mst,
                InitArg::SpanningPath => InitStrategy::SpanningPath,
            };
            SolveMode::CuttingPlane { strategy, tol: m.tol }
        }
    };
    let spec = EstimatorSpec::new(family, m.level).map_err(|e| CliError::Flags(format!("--level: {e}")))?;
    Ok(spec.with_mode(mode))
}

/// Resolves the penalty flags, running the anchor fit when M is given as a
/// multiple.
fn penalty(
    p: &PenaltyArgs,
    ds: &Dataset,
    base: &EstimatorSpec,
    cfg: &SolverConfig,
) -> Result<(Penalty, Option<BigMEcho>), CliError> {
    let unused = |flag: &str, set: bool| {
        if set { Err(CliError::Flags(format!("{flag} does not apply to --penalty {:?}", p.penalty))) } else { Ok(()) }
    };
    match p.penalty {
        PenaltyArg::None => {
            unused("--lambda", p.lambda.is_some())?;
            unused("--k", p.k.is_some())?;
            unused("--m-mult/--big-m", p.m_mult.is_some() || p.big_m.is_some())?;
            Ok((Penalty::None, None))
        }
        PenaltyArg::L1 => {
            unused("--k", p.k.is_some())?;
            unused("--m-mult/--big-m", p.m_mult.is_some() || p.big_m.is_some())?;
            let lambda = p.lambda.ok_or_else(|| CliError::Flags("--penalty l1 needs --lambda".into()))?;
            Ok((Penalty::L1 { lambda }, None))
        }
        PenaltyArg::L0 => {
            unused("--lambda", p.lambda.is_some())?;
            let k = p.k.ok_or_else(|| CliError::Flags("--penalty l0 needs --k".into()))?;
            let (big_m, echo) = match (p.m_mult, p.big_m) {
                (Some(mult), None) => {
                    if !(mult > 0.0 && mult.is_finite()) {
                        return Err(CliError::Flags(format!("--m-mult {mult} must be finite and positive")));
                    }
                    let anchor = anchor_big_m(ds, base, cfg)?;
                    (mult * anchor, BigMEcho { anchor: Some(anchor), multiplier: Some(mult) })
                }
                (None, Some(m)) => (m, BigMEcho { anchor: None, multiplier: None }),
                _ => return Err(CliError::Flags("--penalty l0 needs --m-mult or --big-m".into())),
            };
            Ok((Penalty::L0 { k, big_m }, Some(echo)))
        }
    }
}

fn full_spec(
    ds: &Dataset,
    model: &ModelArgs,
    p: &PenaltyArgs,
    cfg: &SolverConfig,
) -> Result<(EstimatorSpec, Option<BigMEcho>), CliError> {
    let base = base_spec(model)?;
    // parameter errors are flag errors, so check before the anchor solve
    let check = |pen: Penalty| base.with_penalty(pen).validate(ds.d()).map_err(|e| CliError::Flags(e.to_string()));
    if let (PenaltyArg::L0, Some(k)) = (p.penalty, p.k) {
        check(Penalty::L0 { k, big_m: p.big_m.unwrap_or(1.0) })?;
    }
    let (pen, echo) = penalty(p, ds, &base, cfg)?;
    let spec = base.with_penalty(pen);
    check(pen)?;
    Ok((spec, echo))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Csv(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A column of per-variable slope averages and fit summaries.
pub fn summary_table(doc: &ResultDocument, fit: &FitResult) -> String {
    let mut s = String::new();
    let level = match doc.spec.family {
        Family::Quantile => format!("tau = {}", doc.spec.level),
        Family::Expectile => format!(
            "tilde_tau = {} (quantile {:.3})",
            doc.spec.level,
            doc.converted_quantile.unwrap_or(f64::NAN)
        ),
    };
    let _ = writeln!(s, "{}  {level}  n = {}", doc.estimator, fit.n());
    let width = doc.variables.iter().map(String::len).max().unwrap_or(0).max(9);
    for (j, name) in doc.variables.iter().enumerate() {
        let mean = fit.beta.column(j).mean().unwrap_or(f64::NAN);
        let mark = if doc.support.contains(name) { "" } else { "  (dropped)" };
        let _ = writeln!(s, "  {name:<width$}  {mean:>12.6}{mark}");
    }
    let n = fit.n() as f64;
    let mean_alpha = fit.alpha.iter().sum::<f64>() / n;
    let min_alpha = fit.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let max_alpha = fit.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(s, "  {:<width$}  {mean_alpha:>12.6}  [{min_alpha:.6}, {max_alpha:.6}]", "alpha");
    match doc.spec.penalty {
        Penalty::None => {}
        Penalty::L1 { lambda } => {
            let _ = writeln!(s, "  {:<width$}  {lambda:>12.6}", "lambda");
        }
        Penalty::L0 { k, big_m } => {
            let _ = writeln!(s, "  {:<width$}  {k:>12}", "k");
            let _ = writeln!(s, "  {:<width$}  {big_m:>12.6}", "M");
        }
    }
    let _ = writeln!(s, "  {:<width$}  {:>12.6}", "objective", fit.objective);
    let _ = writeln!(s, "  {:<width$}  {}", "support", doc.support.join(", "));
    s
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let (ds, output) = load(&a.data)?;
    let cfg = SolverConfig::from_env();
    let (spec, echo) = full_spec(&ds, &a.model, &a.penalty, &cfg)?;
    let fit = fit_with(&ds, &spec, &cfg)?;
    if fit.meta.status != Status::Optimal {
        return Err(CliError::Solver(format!("solver stopped with status {:?}", fit.meta.status)));
    }
    let doc = ResultDocument::new(spec, echo, output, &ds, &fit);
    let table = summary_table(&doc, &fit);
    // keep stdout clean for the document when it is not written to a file
    if a.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    emit(a.out.as_deref(), &(doc.to_json() + "\n"))
}

fn cv_config(g: &GridArgs) -> CVConfig {
    let mut cv = match g.preset {
        PresetArg::Default => CVConfig::default(),
        PresetArg::Sdg => CVConfig::sdg(),
    };
    cv.folds = g.folds;
    cv.seed = g.cv_seed;
    if let Some(l) = &g.lambdas {
        cv.lambdas = l.clone();
    }
    if let Some(m) = &g.m_mults {
        cv.m_multipliers = m.clone();
    }
    if let Some(k) = &g.ks {
        cv.ks = Some(k.clone());
    }
    cv
}

fn kind(p: PenaltyArg) -> PenaltyKind {
    match p {
        PenaltyArg::None => PenaltyKind::None,
        PenaltyArg::L1 => PenaltyKind::L1,
        PenaltyArg::L0 => PenaltyKind::L0,
    }
}

pub fn tune(a: &TuneArgs) -> Result<(), CliError> {
    let (ds, _) = load(&a.data)?;
    let cfg = SolverConfig::from_env();
    let base = base_spec(&a.model)?;
    let report = cross_validate(&ds, &base, kind(a.penalty), &cv_config(&a.grid), &cfg)?;
    let json = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    let best = report.scores.iter().find(|s| s.candidate == report.chosen);
    let line = format!(
        "chosen {}  mean held-out loss {:.6}\n",
        serde_json::to_string(&report.chosen).expect("candidates serialize"),
        best.map_or(f64::NAN, |s| s.mean)
    );
    if a.out.is_some() {
        print!("{line}");
    } else {
        eprint!("{line}");
    }
    emit(a.out.as_deref(), &json)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let methods = a
        .methods
        .iter()
        .map(|m| MethodTemplate::from_str(m).map_err(|e| CliError::Flags(format!("--methods: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = MCConfig {
        ns: a.n.clone(),
        ds: a.d.clone(),
        k_trues: a.k_true.clone(),
        rhos: a.rho.clone(),
        taus: a.tau.clone(),
        replications: a.reps,
        seed: a.seed,
        exponent: match a.exponent {
            ExponentArg::KTrue => ExponentRule::KTrue,
            ExponentArg::Position => ExponentRule::Position,
        },
    };
    let report = run_mc(&cfg, &methods, &cv_config(&a.grid), &SolverConfig::from_env())?;
    for f in &report.failures {
        eprintln!(
            "warning: {} tau={} n={} d={} k_true={} rho={} rep={}: {}",
            f.method, f.tau, f.n, f.d, f.k_true, f.rho, f.rep, f.message
        );
    }
    let text = match a.format {
        FormatArg::Csv => report.to_csv_string()?,
        FormatArg::Json => report.to_json()? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

pub fn export(a: &ExportArgs) -> Result<(), CliError> {
    let (ds, _) = load(&a.data)?;
    let cfg = SolverConfig::from_env();
    let (spec, _) = full_spec(&ds, &a.model, &a.penalty, &cfg)?;
    // the cutting-plane loop only ever solves subsets of these rows
    let problem = spec.build(&ds, Pairs::All)?;
    emit(a.out.as_deref(), &export_mps(&problem))
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.document).map_err(|e| CliError::Csv(format!("{}: {e}", a.document.display())))?;
    let doc = ResultDocument::from_json(&text)?;
    let v = doc.verify()?;
    let r = &v.report;
    println!(
        "afriat {:.3e}  residual {:.3e}  intercept {:.3e}  sign {:.3e}  big_m {:.3e}  cardinality {:.3e}",
        r.afriat, r.residual, r.intercept, r.sign, r.big_m, r.cardinality
    );
    if v.passed() {
        println!("ok: {} observations, {}", doc.observations.len(), doc.estimator);
        Ok(())
    } else {
        Err(CliError::Solver(format!("document failed verification: {}", v.failures.join("; "))))
    }
}
