//! k-fold cross-validation over λ, or over (k, M multiplier) pairs.

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, Penalty, WarmStart, anchor_big_m_seeded, fit_seeded};
use crate::model::{Dataset, FitResult};
use crate::solver::{SolverConfig, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    L1,
    L0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVConfig {
    pub folds: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    /// Multipliers of the largest unpenalized slope giving the big-M value.
    pub m_multipliers: Vec<f64>,
    /// Subset sizes; `None` means `1..d` (or `{1}` when `d = 1`).
    pub ks: Option<Vec<usize>>,
}

/// `count` values from `lo` to `hi`, evenly spaced on a log scale.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// `count` values from `lo` to `hi`, evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

impl Default for CVConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            lambdas: log_grid(1e-3, 10.0, 100),
            m_multipliers: vec![0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0],
            ks: None,
        }
    }
}

impl CVConfig {
    /// Grids used for the country-level SDG application: 100 values of λ in
    /// `[0.1, 3]`, k from 1 to 11 and ten M multipliers.
    pub fn sdg() -> Self {
        Self {
            lambdas: linear_grid(0.1, 3.0, 100),
            m_multipliers: vec![0.1, 0.5, 0.8, 1.0, 1.5, 1.8, 2.0, 2.5, 3.0, 5.0],
            ks: Some((1..=11).collect()),
            ..Self::default()
        }
    }

    /// Subset sizes for `d` inputs; the SDG range is capped at `d`.
    pub fn k_grid(&self, d: usize) -> Vec<usize> {
        match &self.ks {
            Some(ks) => ks.clone(),
            None if d == 1 => vec![1],
            None => (1..d).collect(),
        }
    }

    pub fn candidates(&self, kind: PenaltyKind, d: usize) -> Vec<Candidate> {
        match kind {
            PenaltyKind::None => vec![Candidate::None],
            PenaltyKind::L1 => self.lambdas.iter().map(|&lambda| Candidate::L1 { lambda }).collect(),
            PenaltyKind::L0 => {
                let mut out = Vec::new();
                for k in self.k_grid(d) {
                    for &m_mult in &self.m_multipliers {
                        out.push(Candidate::L0 { k, m_mult });
                    }
                }
                out
            }
        }
    }

    fn validate(&self, kind: PenaltyKind, n: usize, d: usize) -> Result<()> {
        if self.folds < 2 || self.folds > n {
            return Err(Error::InvalidParameter(format!("folds = {} must lie in [2, n = {n}]", self.folds)));
        }
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match kind {
            PenaltyKind::None => {}
            PenaltyKind::L1 => {
                if self.lambdas.is_empty() {
                    return bad("λ grid is empty".into());
                }
                if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                    return bad(format!("λ = {l} is not a finite nonnegative value"));
                }
            }
            PenaltyKind::L0 => {
                if self.m_multipliers.is_empty() {
                    return bad("M multiplier grid is empty".into());
                }
                if let Some(m) = self.m_multipliers.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
                    return bad(format!("M multiplier {m} must be finite and positive"));
                }
                let ks = self.k_grid(d);
                if ks.is_empty() {
                    return bad("k grid is empty".into());
                }
                if let Some(k) = ks.iter().find(|&&k| k == 0 || k > d) {
                    return bad(format!("k = {k} is outside [1, d = {d}]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Candidate {
    None,
    L1 { lambda: f64 },
    L0 { k: usize, m_mult: f64 },
}

impl Candidate {
    /// The penalty for a fit whose unpenalized largest slope is `anchor`.
    pub fn penalty(self, anchor: f64) -> Penalty {
        match self {
            Candidate::None => Penalty::None,
            Candidate::L1 { lambda } => Penalty::L1 { lambda },
            Candidate::L0 { k, m_mult } => Penalty::L0 { k, big_m: m_mult * anchor },
        }
    }

    /// Orders candidates from most to least regularized: larger λ, then
    /// smaller k, then smaller M.
    fn parsimony(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
        match (a, b) {
            (Candidate::L1 { lambda: x }, Candidate::L1 { lambda: y }) => y.total_cmp(x),
            (Candidate::L0 { k: k1, m_mult: m1 }, Candidate::L0 { k: k2, m_mult: m2 }) => {
                k1.cmp(k2).then(m1.total_cmp(m2))
            }
            _ => std::cmp::Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    /// Mean held-out loss per fold; empty when a fold failed.
    pub fold_losses: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub spec: EstimatorSpec,
    pub scores: Vec<CandidateScore>,
    pub chosen: Candidate,
    /// Fold index of each observation.
    pub assignment: Vec<usize>,
}

/// Random partition of `0..n` into `folds` groups whose sizes differ by at
/// most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds == 0 || folds > n {
        return Err(Error::InvalidParameter(format!("cannot split {n} observations into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Ok(assignment)
}

/// Value of the fitted concave envelope `min_i α̂_i + β̂_i'x` at a new point.
pub fn oof_predict(fit: &FitResult, x_new: &[f64]) -> f64 {
    fit.envelope(x_new)
}

/// Fits `candidate` on `dataset`; for L0 the big-M anchor comes from an
/// unpenalized fit of the same data.
pub fn fit_candidate(
    dataset: &Dataset,
    base: &EstimatorSpec,
    candidate: Candidate,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    let (anchor, pairs) = match candidate {
        Candidate::L0 { .. } => anchor_big_m_seeded(dataset, base, cfg)?,
        _ => (1.0, None),
    };
    let warm = WarmStart { pairs, ..WarmStart::default() };
    fit_seeded(dataset, &base.with_penalty(candidate.penalty(anchor)), cfg, warm).map(|(fit, _)| fit)
}

fn fold_losses(
    dataset: &Dataset,
    base: &EstimatorSpec,
    candidates: &[Candidate],
    assignment: &[usize],
    fold: usize,
    cfg: &SolverConfig,
) -> Vec<std::result::Result<f64, String>> {
    let train: Vec<usize> = (0..dataset.n()).filter(|&i| assignment[i] != fold).collect();
    let test: Vec<usize> = (0..dataset.n()).filter(|&i| assignment[i] == fold).collect();
    let train_ds = match dataset.select_rows(&train) {
        Ok(ds) => ds,
        Err(e) => return vec![Err(e.to_string()); candidates.len()],
    };
    let needs_anchor = candidates.iter().any(|c| matches!(c, Candidate::L0 { .. }));
    // Afriat pairs found for one candidate are valid rows for every other, so
    // each cut loop starts from the pairs accumulated so far on this fold, and
    // the previous selection is offered as the first L0 incumbent.
    let mut warm = WarmStart::default();
    let anchor = if needs_anchor {
        match anchor_big_m_seeded(&train_ds, base, cfg) {
            Ok((a, pairs)) => {
                warm.pairs = pairs;
                a
            }
            Err(e) => return vec![Err(e.to_string()); candidates.len()],
        }
    } else {
        1.0
    };
    // Within one k, a smaller M only shrinks the feasible set, so visiting M
    // from the largest down makes each optimum a lower bound for the next.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| match (candidates[a], candidates[b]) {
        (Candidate::L0 { k: ka, m_mult: ma }, Candidate::L0 { k: kb, m_mult: mb }) => {
            ka.cmp(&kb).then(mb.total_cmp(&ma)).then(a.cmp(&b))
        }
        _ => a.cmp(&b),
    });
    let mut out = vec![Err(String::new()); candidates.len()];
    let mut previous: Option<(Candidate, f64)> = None;
    for c in order {
        let cand = candidates[c];
        warm.lower_bound = match (previous, cand) {
            (Some((Candidate::L0 { k: kp, m_mult: mp }, objective)), Candidate::L0 { k, m_mult })
                if kp == k && mp >= m_mult =>
            {
                Some(objective)
            }
            _ => None,
        };
        let spec = base.with_penalty(cand.penalty(anchor));
        out[c] = match fit_seeded(&train_ds, &spec, cfg, warm.clone()) {
            Ok((fit, found)) => {
                if found.is_some() {
                    warm.pairs = found;
                }
                warm.selection = fit.z.clone();
                // only a proven optimum bounds the next problem
                previous = (fit.meta.status == Status::Optimal).then_some((cand, fit.objective));
                let mut total = 0.0;
                for &i in &test {
                    assert_eq!(assignment[i], fold, "held-out point outside its fold");
                    let x: Vec<f64> = dataset.x(i).to_vec();
                    total += base.family.loss(dataset.y(i) - oof_predict(&fit, &x), base.level);
                }
                Ok(total / test.len() as f64)
            }
            Err(e) => {
                previous = None;
                Err(e.to_string())
            }
        };
    }
    out
}

/// Scores every candidate of `kind` by mean held-out loss of the estimator's
/// own asymmetric loss and picks the lowest, breaking ties towards the more
/// regularized candidate.
pub fn cross_validate(
    dataset: &Dataset,
    base: &EstimatorSpec,
    kind: PenaltyKind,
    cv: &CVConfig,
    cfg: &SolverConfig,
) -> Result<CVReport> {
    let (n, d) = (dataset.n(), dataset.d());
    cv.validate(kind, n, d)?;
    let base = base.with_penalty(Penalty::None);
    base.validate(d)?;
    let assignment = kfold_split(n, cv.folds, cv.seed)?;
    let candidates = cv.candidates(kind, d);

    let per_fold: Vec<Vec<std::result::Result<f64, String>>> = (0..cv.folds)
        .into_par_iter()
        .map(|f| fold_losses(dataset, &base, &candidates, &assignment, f, cfg))
        .collect();

    let scores: Vec<CandidateScore> = candidates
        .iter()
        .enumerate()
        .map(|(c, &candidate)| {
            let mut losses = Vec::with_capacity(cv.folds);
            for fold in &per_fold {
                match &fold[c] {
                    Ok(v) => losses.push(*v),
                    Err(e) => {
                        return CandidateScore {
                            candidate,
                            fold_losses: Vec::new(),
                            mean: f64::NAN,
                            std_error: f64::NAN,
                            error: Some(e.clone()),
                        };
                    }
                }
            }
            let k = losses.len() as f64;
            let mean = losses.iter().sum::<f64>() / k;
            let var = losses.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            CandidateScore { candidate, fold_losses: losses, mean, std_error: (var / k).sqrt(), error: None }
        })
        .collect();

    let best = scores
        .iter()
        .filter(|s| s.error.is_none())
        .map(|s| s.mean)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NoValidCandidate);
    }
    let tie = 1e-12 * best.abs().max(1.0);
    let chosen = scores
        .iter()
        .filter(|s| s.error.is_none() && s.mean <= best + tie)
        .map(|s| s.candidate)
        .min_by(Candidate::parsimony)
        .expect("the best candidate is among the ties");
    Ok(CVReport { spec: base, scores, chosen, assignment })
}
