//! Monte Carlo study: Cobb-Douglas scenarios with a sparse true support,
//! cross-validated penalized fits, and the prediction-error and accuracy
//! statistics averaged over replications.

use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, Family, SUPPORT_THRESHOLD, SolveMode, support};
use crate::model::Dataset;
use crate::solver::SolverConfig;
use crate::tuning::{CVConfig, Candidate, PenaltyKind, cross_validate, fit_candidate};

/// How the exponents of the true inputs are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentRule {
    /// `0.8 / k_true` on every true input, so the exponents sum to 0.8.
    #[default]
    KTrue,
    /// `0.8 / t` on the `t`-th true input (in index order).
    Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub k_trues: Vec<usize>,
    pub rhos: Vec<f64>,
    pub taus: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub exponent: ExponentRule,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            ns: vec![100, 500],
            ds: vec![6, 8, 10, 12],
            k_trues: vec![2, 4],
            rhos: vec![0.5, 2.0, 10.0],
            taus: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            replications: 10,
            seed: 0,
            exponent: ExponentRule::KTrue,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if [self.ns.len(), self.ds.len(), self.k_trues.len(), self.rhos.len(), self.taus.len()].contains(&0) {
            return bad("every simulation grid needs at least one value".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return bad(format!("n = {n} is below 2"));
        }
        if let Some(&k) = self.k_trues.iter().find(|&&k| k == 0) {
            return bad(format!("k_true = {k} must be at least 1"));
        }
        let max_k = *self.k_trues.iter().max().unwrap();
        if let Some(&d) = self.ds.iter().find(|&&d| d < max_k) {
            return bad(format!("k_true = {max_k} exceeds d = {d}"));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return bad(format!("signal-to-noise ratio {r} must be finite and positive"));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return bad(format!("τ = {t} is outside (0, 1)"));
        }
        Ok(())
    }

    /// Every `(n, d, k_true, ρ)` combination in grid order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &d in &self.ds {
                for &k_true in &self.k_trues {
                    for &rho in &self.rhos {
                        out.push(Cell { n, d, k_true, rho, exponent: self.exponent });
                    }
                }
            }
        }
        out
    }
}

/// One design point of the study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    pub rho: f64,
    pub exponent: ExponentRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCScenario {
    pub dataset: Dataset,
    /// True support, ascending.
    pub support: Vec<usize>,
    pub sigma: f64,
    /// Noise-free output `f(x_i)`.
    pub signal: Vec<f64>,
    /// The drawn noise `v_i`.
    pub noise: Vec<f64>,
}

impl MCScenario {
    /// True conditional quantile `f(x_i) + σ Φ⁻¹(τ)` at every observation.
    pub fn q_star(&self, tau: f64) -> Vec<f64> {
        let shift = self.sigma * std_normal().inverse_cdf(tau);
        self.signal.iter().map(|f| f + shift).collect()
    }
}

fn std_normal() -> StdNormal {
    StdNormal::standard()
}

/// Draws replication `rep` of `cell`. The stream depends only on
/// `(seed, rep)`, so cells that differ only in ρ share support, inputs and
/// standardized noise.
pub fn generate_scenario(cell: &Cell, seed: u64, rep: u64) -> Result<MCScenario> {
    let Cell { n, d, k_true, rho, exponent } = *cell;
    if k_true == 0 || k_true > d || n < 2 || !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid simulation cell {cell:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);

    let mut support = rand::seq::index::sample(&mut rng, d, k_true).into_vec();
    support.sort_unstable();
    let unif = Uniform::new(1.0, 10.0).expect("valid range");
    let inputs: ndarray::Array2<f64> = ndarray::Array2::from_shape_fn((n, d), |_| unif.sample(&mut rng));
    let std_noise: Vec<f64> = {
        let z = Normal::new(0.0, 1.0).expect("unit normal");
        (0..n).map(|_| z.sample(&mut rng)).collect()
    };

    let power = |t: usize| match exponent {
        ExponentRule::KTrue => 0.8 / k_true as f64,
        ExponentRule::Position => 0.8 / (t + 1) as f64,
    };
    let signal: Vec<f64> = (0..n)
        .map(|i| support.iter().enumerate().map(|(t, &j)| inputs[[i, j]].powf(power(t))).product())
        .collect();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let var = signal.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n as f64;
    let sigma = (var / rho).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::InvalidData("simulated signal has zero variance".into()));
    }
    let noise: Vec<f64> = std_noise.iter().map(|z| sigma * z).collect();
    let output = signal.iter().zip(&noise).map(|(f, v)| f + v).collect();
    let dataset = Dataset::new(inputs, output)?;
    Ok(MCScenario { dataset, support, sigma, signal, noise })
}

/// `‖q̂ − q*‖² / ‖q*‖²`.
pub fn prediction_error(q_hat: &[f64], q_star: &[f64]) -> Result<f64> {
    if q_hat.len() != q_star.len() {
        return Err(Error::InvalidParameter(format!(
            "prediction has {} values, truth has {}",
            q_hat.len(),
            q_star.len()
        )));
    }
    let den: f64 = q_star.iter().map(|q| q * q).sum();
    if den == 0.0 {
        return Err(Error::InvalidParameter("true quantiles are all zero".into()));
    }
    let num: f64 = q_hat.iter().zip(q_star).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(num / den)
}

/// `|ω̂ ∩ ω*| / |ω*| × 100`.
pub fn accuracy(support_hat: &[usize], support_true: &[usize]) -> f64 {
    if support_true.is_empty() {
        return 0.0;
    }
    let hits = support_true.iter().filter(|j| support_hat.contains(j)).count();
    100.0 * hits as f64 / support_true.len() as f64
}

/// Expectile level whose population expectile of normal noise equals its
/// `τ`-quantile: with `u = Φ⁻¹(τ)`, `τ̃ = B / (A + B)` for
/// `A = φ(u) − u(1 − Φ(u))` and `B = φ(u) + uΦ(u)`.
pub fn expectile_level_for_quantile(tau: f64) -> f64 {
    let nd = std_normal();
    let u = nd.inverse_cdf(tau);
    let (pdf, cdf) = (nd.pdf(u), nd.cdf(u));
    let a = pdf - u * (1.0 - cdf);
    let b = pdf + u * cdf;
    b / (a + b)
}

/// A method of the study: family and penalty kind; parameters come from CV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodTemplate {
    pub family: Family,
    pub penalty: PenaltyKind,
    pub mode: SolveMode,
}

impl MethodTemplate {
    pub fn new(family: Family, penalty: PenaltyKind) -> Self {
        Self { family, penalty, mode: SolveMode::default() }
    }

    pub fn name(&self) -> String {
        let prefix = match self.penalty {
            PenaltyKind::None => "",
            PenaltyKind::L1 => "L1-",
            PenaltyKind::L0 => "L0-",
        };
        format!("{prefix}{}", self.family.acronym())
    }

    /// Fitting level for quantile `tau`: τ itself, or the matching expectile.
    pub fn level(&self, tau: f64) -> f64 {
        match self.family {
            Family::Quantile => tau,
            Family::Expectile => expectile_level_for_quantile(tau),
        }
    }
}

impl FromStr for MethodTemplate {
    type Err = Error;

    /// Parses names such as `l0-cqr`, `L1-CER` or `cqr`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (penalty, rest) = match lower.split_once('-') {
            Some(("l1", rest)) => (PenaltyKind::L1, rest),
            Some(("l0", rest)) => (PenaltyKind::L0, rest),
            None => (PenaltyKind::None, lower.as_str()),
            Some(_) => return Err(Error::InvalidParameter(format!("unknown method {s:?}"))),
        };
        let family = match rest {
            "cqr" => Family::Quantile,
            "cer" => Family::Expectile,
            _ => return Err(Error::InvalidParameter(format!("unknown method {s:?}"))),
        };
        Ok(Self::new(family, penalty))
    }
}

/// Scores of one method on one replication at one τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub method: String,
    pub family: Family,
    pub tau: f64,
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    pub rho: f64,
    pub rep: u64,
    pub prediction_error: f64,
    pub accuracy: f64,
    pub chosen: Candidate,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub method: String,
    pub tau: f64,
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    pub rho: f64,
    pub rep: u64,
    pub message: String,
}

/// Long-format row: one statistic of one method in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub family: Family,
    pub tau: f64,
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    pub rho: f64,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub records: Vec<RepRecord>,
    pub failures: Vec<RepFailure>,
}

impl MetricsReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Mean of `metric` for `method` over the rows matching `filter`.
    pub fn mean(&self, method: &str, metric: &str, filter: impl Fn(&MetricRow) -> bool) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric && filter(r)).map(|r| r.mean)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn run_one(
    scenario: &MCScenario,
    cell: &Cell,
    rep: u64,
    method: &MethodTemplate,
    tau: f64,
    cv: &CVConfig,
    cfg: &SolverConfig,
) -> Result<RepRecord> {
    let ds = &scenario.dataset;
    let base = EstimatorSpec::new(method.family, method.level(tau))?.with_mode(method.mode);
    let cv = CVConfig { seed: cv.seed.wrapping_add(rep), ..cv.clone() };
    let chosen = match method.penalty {
        PenaltyKind::None => Candidate::None,
        kind => cross_validate(ds, &base, kind, &cv, cfg)?.chosen,
    };
    let fit = fit_candidate(ds, &base, chosen, cfg)?;
    let picked = support(&fit, SUPPORT_THRESHOLD);
    Ok(RepRecord {
        method: method.name(),
        family: method.family,
        tau,
        n: cell.n,
        d: cell.d,
        k_true: cell.k_true,
        rho: cell.rho,
        rep,
        prediction_error: prediction_error(&fit.y_hat, &scenario.q_star(tau))?,
        accuracy: accuracy(&picked, &scenario.support),
        chosen,
        support: picked,
    })
}

/// Runs every cell × replication × method × τ, tuning each fit by
/// cross-validation, and averages the statistics over replications.
/// Failed fits are reported in `failures` and left out of the averages.
pub fn run_mc(cfg: &MCConfig, methods: &[MethodTemplate], cv: &CVConfig, solver: &SolverConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods to simulate".into()));
    }
    let cells = cfg.cells();
    let mut jobs = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for rep in 0..cfg.replications as u64 {
            jobs.push((c, *cell, rep));
        }
    }
    let outcomes: Vec<Vec<std::result::Result<RepRecord, RepFailure>>> = jobs
        .par_iter()
        .map(|(_, cell, rep)| {
            let scenario = generate_scenario(cell, cfg.seed, *rep);
            let mut out = Vec::new();
            for method in methods {
                for &tau in &cfg.taus {
                    let result = scenario
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|s| run_one(s, cell, *rep, method, tau, cv, solver).map_err(|e| e.to_string()));
                    out.push(result.map_err(|message| {
                        log::warn!("replication {rep} of {} at τ = {tau} failed: {message}", method.name());
                        RepFailure {
                            method: method.name(),
                            tau,
                            n: cell.n,
                            d: cell.d,
                            k_true: cell.k_true,
                            rho: cell.rho,
                            rep: *rep,
                            message,
                        }
                    }));
                }
            }
            out
        })
        .collect();

    let (mut records, mut failures) = (Vec::new(), Vec::new());
    for r in outcomes.into_iter().flatten() {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }

    let mut rows = Vec::new();
    for cell in &cells {
        for method in methods {
            for &tau in &cfg.taus {
                let name = method.name();
                let mine: Vec<&RepRecord> = records
                    .iter()
                    .filter(|r| {
                        r.method == name
                            && r.tau == tau
                            && r.n == cell.n
                            && r.d == cell.d
                            && r.k_true == cell.k_true
                            && r.rho == cell.rho
                    })
                    .collect();
                if mine.is_empty() {
                    continue;
                }
                let stats: [(&str, Vec<f64>); 2] = [
                    ("prediction_error", mine.iter().map(|r| r.prediction_error).collect()),
                    ("accuracy", mine.iter().map(|r| r.accuracy).collect()),
                ];
                for (metric, values) in stats {
                    let (mean, sd) = mean_sd(&values);
                    rows.push(MetricRow {
                        method: name.clone(),
                        family: method.family,
                        tau,
                        n: cell.n,
                        d: cell.d,
                        k_true: cell.k_true,
                        rho: cell.rho,
                        metric: metric.to_string(),
                        mean,
                        sd,
                        reps: values.len(),
                    });
                }
            }
        }
    }
    Ok(MetricsReport { rows, records, failures })
}
