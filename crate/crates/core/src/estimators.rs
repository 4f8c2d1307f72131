//! The six estimators (CQR, CER and their L1 and L0 variants), support
//! extraction, the expectile-to-quantile readout and an exhaustive-subset
//! oracle for the L0 problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cuts::{ConstraintSet, CutOptions, InitStrategy, solve_with_cuts};
use crate::error::{Error, Result};
use crate::model::{
    Dataset, ExpectileLevel, FitResult, L0Penalty, L1Penalty, OptProblem, Pairs, QuantileLevel, add_l0, add_l1,
    build_cer, build_cqr,
};
use crate::solver::{SolverConfig, SolverSession, Status};

/// Default threshold below which an estimated slope counts as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

/// Largest number of subsets [`l0_oracle`] will enumerate.
pub const ORACLE_SUBSET_LIMIT: u128 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Quantile,
    Expectile,
}

impl Family {
    /// `"CQR"` or `"CER"`.
    pub fn acronym(self) -> &'static str {
        match self {
            Family::Quantile => "CQR",
            Family::Expectile => "CER",
        }
    }

    /// Asymmetric loss of a residual at `level`: check loss for quantiles,
    /// asymmetric squared loss for expectiles.
    pub fn loss(self, residual: f64, level: f64) -> f64 {
        let w = if residual > 0.0 { level } else { 1.0 - level };
        match self {
            Family::Quantile => w * residual.abs(),
            Family::Expectile => w * residual * residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Penalty {
    None,
    L1 { lambda: f64 },
    L0 { k: usize, big_m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolveMode {
    /// All `n(n − 1)` Afriat rows at once.
    Full,
    CuttingPlane { strategy: InitStrategy, tol: f64 },
}

impl Default for SolveMode {
    fn default() -> Self {
        SolveMode::CuttingPlane { strategy: InitStrategy::Mst, tol: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub family: Family,
    /// τ for quantiles, τ̃ for expectiles.
    pub level: f64,
    pub penalty: Penalty,
    pub mode: SolveMode,
}

impl EstimatorSpec {
    pub fn new(family: Family, level: f64) -> Result<Self> {
        let spec = Self { family, level, penalty: Penalty::None, mode: SolveMode::default() };
        spec.check_level()?;
        Ok(spec)
    }

    pub fn quantile(tau: f64) -> Result<Self> {
        Self::new(Family::Quantile, tau)
    }

    pub fn expectile(tilde_tau: f64) -> Result<Self> {
        Self::new(Family::Expectile, tilde_tau)
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_mode(mut self, mode: SolveMode) -> Self {
        self.mode = mode;
        self
    }

    /// e.g. `"L0-CER"`, or `"CQR"` without a penalty.
    pub fn name(&self) -> String {
        match self.penalty {
            Penalty::None => self.family.acronym().to_string(),
            Penalty::L1 { .. } => format!("L1-{}", self.family.acronym()),
            Penalty::L0 { .. } => format!("L0-{}", self.family.acronym()),
        }
    }

    fn check_level(&self) -> Result<()> {
        match self.family {
            Family::Quantile => QuantileLevel::new(self.level).map(|_| ()),
            Family::Expectile => ExpectileLevel::new(self.level).map(|_| ()),
        }
    }

    /// Checks the level, penalty and mode against a dataset with `d` inputs.
    pub fn validate(&self, d: usize) -> Result<()> {
        self.check_level()?;
        match self.penalty {
            Penalty::None => {}
            Penalty::L1 { lambda } => {
                L1Penalty::new(lambda)?;
            }
            Penalty::L0 { k, big_m } => {
                L0Penalty::new(k, big_m, d)?;
            }
        }
        if let SolveMode::CuttingPlane { tol, .. } = self.mode {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Error::InvalidParameter(format!("cut tolerance {tol} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }

    pub fn l0_penalty(&self, d: usize) -> Result<Option<L0Penalty>> {
        match self.penalty {
            Penalty::L0 { k, big_m } => L0Penalty::new(k, big_m, d).map(Some),
            _ => Ok(None),
        }
    }

    /// Builds the problem this spec solves over `pairs`.
    pub fn build(&self, dataset: &Dataset, pairs: Pairs<'_>) -> Result<OptProblem> {
        let base = match self.family {
            Family::Quantile => build_cqr(dataset, QuantileLevel::new(self.level)?, pairs)?,
            Family::Expectile => build_cer(dataset, ExpectileLevel::new(self.level)?, pairs)?,
        };
        match self.penalty {
            Penalty::None => Ok(base),
            Penalty::L1 { lambda } => add_l1(base, L1Penalty::new(lambda)?),
            Penalty::L0 { k, big_m } => add_l0(base, L0Penalty::new(k, big_m, dataset.d())?),
        }
    }
}

/// Fits `spec` with solver limits taken from the environment.
pub fn fit(dataset: &Dataset, spec: &EstimatorSpec) -> Result<FitResult> {
    fit_with(dataset, spec, &SolverConfig::from_env())
}

pub fn fit_with(dataset: &Dataset, spec: &EstimatorSpec, cfg: &SolverConfig) -> Result<FitResult> {
    fit_seeded(dataset, spec, cfg, WarmStart::default()).map(|(fit, _)| fit)
}

/// Results of an earlier fit on the same observations that can shorten a new one.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    /// Afriat pairs to start the cutting-plane loop from.
    pub pairs: Option<ConstraintSet>,
    /// Variable selection tried first as an L0 incumbent.
    pub selection: Option<Vec<bool>>,
    /// A lower bound on the new optimum, valid when the new problem is at
    /// least as constrained as the one that produced it on the same pairs.
    pub lower_bound: Option<f64>,
}

/// Like [`fit_with`], starting from `warm`; in cutting-plane mode the final
/// pair set is returned for reuse on the same data.
pub fn fit_seeded(
    dataset: &Dataset,
    spec: &EstimatorSpec,
    cfg: &SolverConfig,
    warm: WarmStart,
) -> Result<(FitResult, Option<ConstraintSet>)> {
    spec.validate(dataset.d())?;
    let hint = match (spec.penalty, warm.selection) {
        (Penalty::L0 { .. }, Some(z)) if z.len() == dataset.d() => {
            Some(z.iter().map(|&on| if on { 1.0 } else { 0.0 }).collect::<Vec<f64>>())
        }
        _ => None,
    };
    match spec.mode {
        SolveMode::Full => {
            let problem = spec.build(dataset, Pairs::All)?;
            let mut session = SolverSession::new(problem, cfg.clone());
            if let Some(h) = hint {
                session.suggest(h, warm.lower_bound);
            }
            let sol = session.solve()?;
            if !matches!(sol.status, Status::Optimal | Status::IterationLimit) || sol.x.is_empty() {
                // a constant fit is always feasible and the loss is bounded below
                return Err(Error::UnexpectedStatus(format!("{:?}", sol.status)));
            }
            Ok((FitResult::from_solution(session.problem(), dataset, &sol)?, None))
        }
        SolveMode::CuttingPlane { strategy, tol } => {
            let opts = CutOptions { strategy, tol, max_master_solves: None, seed: warm.pairs, hint, lower_bound: warm.lower_bound };
            let (fit, _, set) = solve_with_cuts(|set| spec.build(dataset, Pairs::Subset(set)), dataset, &opts, cfg)?;
            Ok((fit, Some(set)))
        }
    }
}

/// Indices `j` whose slopes exceed `threshold` for some observation; for L0
/// fits only selected variables count.
pub fn support(fit: &FitResult, threshold: f64) -> Vec<usize> {
    (0..fit.d())
        .filter(|&j| fit.z.as_ref().is_none_or(|z| z[j]))
        .filter(|&j| fit.beta.column(j).iter().any(|&b| b > threshold))
        .collect()
}

/// Largest slope of the unpenalized fit of the same family and level; the
/// big-M value is a multiple of this. Falls back to 1 when every slope is zero.
pub fn anchor_big_m(dataset: &Dataset, spec: &EstimatorSpec, cfg: &SolverConfig) -> Result<f64> {
    anchor_big_m_seeded(dataset, spec, cfg).map(|(anchor, _)| anchor)
}

/// [`anchor_big_m`] together with the pair set of the unpenalized fit, a
/// good starting point for the penalized loops on the same data.
pub fn anchor_big_m_seeded(
    dataset: &Dataset,
    spec: &EstimatorSpec,
    cfg: &SolverConfig,
) -> Result<(f64, Option<ConstraintSet>)> {
    let plain = spec.with_penalty(Penalty::None);
    let (fit, pairs) = fit_seeded(dataset, &plain, cfg, WarmStart::default())?;
    let max = fit.beta.iter().copied().fold(0.0, f64::max);
    Ok((if max > 1e-12 { max } else { 1.0 }, pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub objective: f64,
    pub subset: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All subsets of `0..d` with `1..=k` elements, in lexicographic order.
fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for j in start..d {
            cur.push(j);
            out.push(cur.clone());
            if cur.len() < k {
                extend(j + 1, d, k, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, d, k, &mut Vec::new(), &mut out);
    out
}

/// Solves the unpenalized problem of `spec` on every column subset of size at
/// most `k` and returns the best. Objectives within `1e-9` of each other are
/// treated as tied and the lexicographically smallest subset wins.
pub fn l0_oracle(dataset: &Dataset, spec: &EstimatorSpec, k: usize, cfg: &SolverConfig) -> Result<OracleResult> {
    let d = dataset.d();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("subset size k = {k} must lie in [1, {d}]")));
    }
    let needed = binomial(d, k);
    if needed > ORACLE_SUBSET_LIMIT {
        return Err(Error::TooManySubsets { needed, limit: ORACLE_SUBSET_LIMIT });
    }
    let plain = spec.with_penalty(Penalty::None);
    let results: Vec<(Vec<usize>, f64)> = subsets(d, k)
        .into_par_iter()
        .map(|cols| {
            let restricted = dataset.select_columns(&cols)?;
            let fit = fit_with(&restricted, &plain, cfg)?;
            Ok((cols, fit.objective))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (cols, obj) in results {
        let better = match &best {
            None => true,
            Some((bc, bo)) => obj < bo - 1e-9 || ((obj - bo).abs() <= 1e-9 && cols < *bc),
        };
        if better {
            best = Some((cols, obj));
        }
    }
    let (subset, objective) = best.expect("at least one subset");
    Ok(OracleResult { objective, subset })
}

/// Share of observations with a strictly negative residual (`ε⁻ > 10⁻⁶`),
/// the empirical quantile an expectile fit corresponds to.
pub fn expectile_to_quantile(fit: &FitResult) -> f64 {
    let below = fit.eps_minus.iter().filter(|&&e| e > 1e-6).count();
    below as f64 / fit.n() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnsToScale {
    Increasing,
    Constant,
    Decreasing,
}

/// Reads returns to scale off the sign of each intercept.
pub fn returns_to_scale(fit: &FitResult) -> Vec<ReturnsToScale> {
    fit.alpha.iter().map(|&a| rts_label(a)).collect()
}

pub fn rts_label(alpha: f64) -> ReturnsToScale {
    if alpha < -1e-6 {
        ReturnsToScale::Increasing
    } else if alpha > 1e-6 {
        ReturnsToScale::Decreasing
    } else {
        ReturnsToScale::Constant
    }
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::{SolveMeta, add_l1_ball};
    use crate::solver::solve;

    fn data(seed: u64, n: usize, d: usize, noise: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(1.0..10.0));
        let y = (0..n)
            .map(|i| {
                let f: f64 = x.row(i).iter().take(2).map(|v: &f64| v.powf(0.4)).product();
                f + noise * rng.random_range(-1.0..1.0)
            })
            .collect();
        Dataset::new(x, y).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn full(spec: EstimatorSpec) -> EstimatorSpec {
        spec.with_mode(SolveMode::Full)
    }

    fn bare_fit(beta: Array2<f64>, eps_minus: Vec<f64>, alpha: Vec<f64>, z: Option<Vec<bool>>) -> FitResult {
        let n = beta.nrows();
        FitResult {
            alpha,
            beta,
            eps_plus: vec![0.0; n],
            eps_minus,
            y_hat: vec![0.0; n],
            z,
            objective: 0.0,
            meta: SolveMeta {
                status: Status::Optimal,
                iterations: 0,
                nodes: 0,
                constraints: 0,
                wall_time_ms: 0.0,
                master_solves: 1,
            },
        }
    }

    #[test]
    fn names() {
        let s = EstimatorSpec::expectile(0.9).unwrap().with_penalty(Penalty::L0 { k: 2, big_m: 1.0 });
        assert_eq!(s.name(), "L0-CER");
        assert_eq!(EstimatorSpec::quantile(0.5).unwrap().name(), "CQR");
        assert!(EstimatorSpec::quantile(1.0).is_err());
    }

    #[test]
    fn noiseless_additive_data_is_fit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((20, 2), |_| rng.random_range(1.0..10.0));
        let y: Vec<f64> = (0..20).map(|i| x[[i, 0]] + x[[i, 1]]).collect();
        let ds = Dataset::new(x, y.clone()).unwrap();
        for mode in [SolveMode::Full, SolveMode::default()] {
            let f = fit_with(&ds, &EstimatorSpec::quantile(0.5).unwrap().with_mode(mode), &cfg()).unwrap();
            assert!(f.objective <= 1e-6);
            let num: f64 = f.y_hat.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = y.iter().map(|b| b * b).sum();
            assert!(num / den <= 1e-6);
            assert!(f.invariants(&ds, None).holds(1e-6));
        }
    }

    #[test]
    fn huge_lambda_gives_a_constant() {
        let ds = data(2, 15, 2, 0.0);
        let spec = full(EstimatorSpec::quantile(0.5).unwrap().with_penalty(Penalty::L1 { lambda: 1e6 }));
        let f = fit_with(&ds, &spec, &cfg()).unwrap();
        assert!(f.beta.iter().all(|&b| b <= 1e-9));
        assert!(support(&f, SUPPORT_THRESHOLD).is_empty());
    }

    #[test]
    fn tiny_big_m_gives_a_constant() {
        let ds = data(3, 10, 3, 0.1);
        for k in 1..=3 {
            let spec = full(EstimatorSpec::quantile(0.5).unwrap().with_penalty(Penalty::L0 { k, big_m: 1e-9 }));
            let f = fit_with(&ds, &spec, &cfg()).unwrap();
            assert!(f.beta.iter().all(|&b| b <= 1e-9 + 1e-9), "k = {k}");
        }
    }

    #[test]
    fn full_cardinality_matches_the_plain_fit() {
        let ds = data(4, 10, 3, 0.3);
        for family in [Family::Quantile, Family::Expectile] {
            let plain = full(EstimatorSpec::new(family, 0.5).unwrap());
            let base = fit_with(&ds, &plain, &cfg()).unwrap();
            let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).unwrap();
            let l0 = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k: 3, big_m: m }), &cfg()).unwrap();
            assert!((l0.objective - base.objective).abs() <= 1e-6, "{family:?}");
        }
    }

    #[test]
    fn oracle_with_all_columns_is_the_plain_fit() {
        let ds = data(5, 10, 3, 0.3);
        let plain = full(EstimatorSpec::quantile(0.5).unwrap());
        let o = l0_oracle(&ds, &plain, 3, &cfg()).unwrap();
        let base = fit_with(&ds, &plain, &cfg()).unwrap();
        assert!((o.objective - base.objective).abs() <= 1e-6);
    }

    #[test]
    fn oracle_single_columns() {
        let ds = data(6, 10, 3, 0.3);
        let plain = full(EstimatorSpec::quantile(0.5).unwrap());
        let o = l0_oracle(&ds, &plain, 1, &cfg()).unwrap();
        let singles: Vec<f64> = (0..3)
            .map(|j| fit_with(&ds.select_columns(&[j]).unwrap(), &plain, &cfg()).unwrap().objective)
            .collect();
        let best = singles.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((o.objective - best).abs() <= 1e-12);
        assert_eq!(o.subset.len(), 1);

        let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).unwrap();
        let mip = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k: 1, big_m: m }), &cfg()).unwrap();
        assert!((mip.objective - o.objective).abs() <= 1e-6);
    }

    #[test]
    fn oracle_guard() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..20).map(|j| (i + j) as f64).collect()).collect();
        let ds = Dataset::from_rows(&rows, vec![1.0, 2.0, 3.0]).unwrap();
        let plain = full(EstimatorSpec::quantile(0.5).unwrap());
        assert!(matches!(l0_oracle(&ds, &plain, 10, &cfg()), Err(Error::TooManySubsets { needed: 184756, .. })));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(subsets(3, 2), vec![vec![0], vec![0, 1], vec![0, 2], vec![1], vec![1, 2], vec![2]]);
        assert_eq!(binomial(20, 10), 184756);
        assert_eq!(binomial(4, 4), 1);
    }

    #[test]
    fn support_rules() {
        let zero = bare_fit(Array2::zeros((3, 2)), vec![0.0; 3], vec![0.0; 3], None);
        assert!(support(&zero, SUPPORT_THRESHOLD).is_empty());
        let tiny = bare_fit(Array2::from_elem((3, 2), 1e-9), vec![0.0; 3], vec![0.0; 3], None);
        assert!(support(&tiny, SUPPORT_THRESHOLD).is_empty());
        let mut beta = Array2::zeros((3, 2));
        beta[[1, 1]] = 0.5;
        beta[[0, 0]] = 0.5;
        let masked = bare_fit(beta, vec![0.0; 3], vec![0.0; 3], Some(vec![false, true]));
        assert_eq!(support(&masked, SUPPORT_THRESHOLD), [1]);
    }

    #[test]
    fn l0_with_one_variable_has_small_support() {
        let ds = data(7, 12, 4, 0.2);
        let plain = EstimatorSpec::expectile(0.7).unwrap();
        let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).unwrap();
        let f = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k: 1, big_m: m }), &cfg()).unwrap();
        assert!(support(&f, SUPPORT_THRESHOLD).len() <= 1);
        assert!(f.invariants(&ds, Some(L0Penalty::new(1, m, 4).unwrap())).holds(1e-6));
    }

    #[test]
    fn quantile_share_of_expectile_fit() {
        let all_pos = bare_fit(Array2::zeros((4, 1)), vec![0.0; 4], vec![0.0; 4], None);
        assert_eq!(expectile_to_quantile(&all_pos), 0.0);
        let half = bare_fit(Array2::zeros((10, 1)), (0..10).map(|i| (i % 2) as f64).collect(), vec![0.0; 10], None);
        assert_eq!(expectile_to_quantile(&half), 0.5);
    }

    #[test]
    fn returns_to_scale_labels() {
        assert_eq!(rts_label(-10.249), ReturnsToScale::Increasing);
        assert_eq!(rts_label(0.0), ReturnsToScale::Constant);
        assert_eq!(rts_label(0.5), ReturnsToScale::Decreasing);
    }

    #[test]
    fn lambda_of_0_95_shifts_each_slope_cost() {
        let ds = data(8, 4, 2, 0.0);
        let base = EstimatorSpec::quantile(0.5).unwrap();
        let p0 = base.build(&ds, Pairs::All).unwrap();
        let p1 = base.with_penalty(Penalty::L1 { lambda: 0.95 }).build(&ds, Pairs::All).unwrap();
        let layout = p0.layout().unwrap();
        for v in 0..p0.num_vars() {
            let delta = if layout.beta_vars().contains(&v) { 0.95 } else { 0.0 };
            assert_eq!(p1.cost()[v], p0.cost()[v] + delta);
        }
    }

    #[test]
    fn expectile_objective_is_reproducible() {
        let ds = data(9, 25, 3, 0.5);
        let spec = EstimatorSpec::expectile(0.8).unwrap();
        let a = fit_with(&ds, &spec, &cfg()).unwrap();
        let b = fit_with(&ds, &full(spec), &cfg()).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-8);
        assert!(a.y_hat.iter().zip(&b.y_hat).all(|(u, v)| (u - v).abs() <= 1e-4));
    }

    #[test]
    fn lasso_path_is_monotone() {
        let ds = data(10, 30, 3, 0.4);
        let tau = 0.5;
        let mut last: Option<(f64, f64)> = None;
        for step in 0..12 {
            let lambda = 0.01 * 1.8f64.powi(step);
            let spec = full(EstimatorSpec::quantile(tau).unwrap().with_penalty(Penalty::L1 { lambda }));
            let f = fit_with(&ds, &spec, &cfg()).unwrap();
            let (fid, l1) = (f.check_fidelity(tau), f.beta_l1());
            if let Some((pf, pl)) = last {
                assert!(fid >= pf - 1e-8, "fidelity fell at λ = {lambda}");
                assert!(l1 <= pl + 1e-8, "slope mass grew at λ = {lambda}");
            }
            last = Some((fid, l1));
        }
    }

    #[test]
    fn l1_ball_relaxation_bounds_l0_from_below() {
        let ds = data(11, 10, 3, 0.3);
        let plain = full(EstimatorSpec::quantile(0.5).unwrap());
        let m = anchor_big_m(&ds, &plain, &cfg()).unwrap();
        for k in 1..=2 {
            let l0 = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k, big_m: m }), &cfg()).unwrap();
            let relaxed = add_l1_ball(plain.build(&ds, Pairs::All).unwrap(), m * k as f64).unwrap();
            let r = solve(&relaxed, &cfg()).unwrap();
            assert!(r.objective <= l0.objective + 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn mip_matches_subset_enumeration(seed in 0u64..10_000, n in 6usize..11, d in 2usize..5, k in 1usize..3, expectile in any::<bool>()) {
            let ds = data(seed, n, d, 0.3);
            let plain = full(if expectile { EstimatorSpec::expectile(0.5) } else { EstimatorSpec::quantile(0.5) }.unwrap());
            let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).unwrap();
            let mip = fit_with(&ds, &plain.with_penalty(Penalty::L0 { k, big_m: m }), &cfg()).unwrap();
            let oracle = l0_oracle(&ds, &plain, k, &cfg()).unwrap();
            prop_assert!((mip.objective - oracle.objective).abs() <= 1e-6, "{} vs {}", mip.objective, oracle.objective);
        }

        #[test]
        fn residuals_are_complementary(seed in 0u64..10_000, tau in 0.05f64..0.95) {
            let ds = data(seed, 12, 2, 0.5);
            let f = fit_with(&ds, &EstimatorSpec::quantile(tau).unwrap(), &cfg()).unwrap();
            for (p, m) in f.eps_plus.iter().zip(&f.eps_minus) {
                prop_assert!(p.min(*m) <= 1e-7);
            }
        }

        #[test]
        fn l0_objective_falls_with_k(seed in 0u64..10_000) {
            let ds = data(seed, 9, 3, 0.4);
            let plain = full(EstimatorSpec::quantile(0.3).unwrap());
            let m = 10.0 * anchor_big_m(&ds, &plain, &cfg()).unwrap();
            let objs: Vec<f64> = (1..=3)
                .map(|k| fit_with(&ds, &plain.with_penalty(Penalty::L0 { k, big_m: m }), &cfg()).unwrap().objective)
                .collect();
            prop_assert!(objs[1] <= objs[0] + 1e-8 && objs[2] <= objs[1] + 1e-8);
        }
    }
}
