//! Constraint generation for the Afriat system.
//!
//! A reduced master with only some of the `n(n − 1)` concavity rows is solved,
//! every hyperplane is scanned for the observation it undercuts most, and those
//! pairs are appended until no hyperplane undercuts any point by more than the
//! tolerance.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FitResult, OptProblem};
use crate::solver::{SolverConfig, SolverSession, Status};

/// Ordered Afriat pairs `(i, h)`: hyperplane `i` must dominate point `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    n: usize,
    pairs: Vec<(usize, usize)>,
    seen: HashSet<(usize, usize)>,
}

impl ConstraintSet {
    pub fn new(n: usize) -> Self {
        Self { n, pairs: Vec::new(), seen: HashSet::new() }
    }

    /// Every ordered pair with `i ≠ h`.
    pub fn full(n: usize) -> Self {
        let mut set = Self::new(n);
        for i in 0..n {
            for h in (0..n).filter(|&h| h != i) {
                set.pairs.push((i, h));
                set.seen.insert((i, h));
            }
        }
        set
    }

    /// Adds `(i, h)`; returns `false` when it was already present.
    pub fn insert(&mut self, i: usize, h: usize) -> Result<bool> {
        if i >= self.n || h >= self.n || i == h {
            return Err(Error::InvalidParameter(format!(
                "Afriat pair ({i}, {h}) is not a distinct pair of indices below {}",
                self.n
            )));
        }
        if !self.seen.insert((i, h)) {
            return Ok(false);
        }
        self.pairs.push((i, h));
        Ok(true)
    }

    pub fn contains(&self, i: usize, h: usize) -> bool {
        self.seen.contains(&(i, h))
    }

    /// Pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of observations the pairs index into.
    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Both directions of each edge of the Euclidean minimum spanning tree.
    #[default]
    Mst,
    /// Greedy nearest-neighbour path from observation 0, one direction.
    SpanningPath,
}

fn sq_dist(ds: &Dataset, a: usize, b: usize) -> f64 {
    ds.x(a).iter().zip(ds.x(b).iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Starting pairs for the reduced master.
pub fn initial_constraints(dataset: &Dataset, strategy: InitStrategy) -> ConstraintSet {
    let n = dataset.n();
    let mut set = ConstraintSet::new(n);
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    match strategy {
        InitStrategy::Mst => {
            // Prim's algorithm; ties go to the lowest index.
            let mut best: Vec<(f64, usize)> = (0..n).map(|v| (sq_dist(dataset, 0, v), 0)).collect();
            for _ in 1..n {
                let mut next = None;
                for v in (0..n).filter(|&v| !in_tree[v]) {
                    if next.is_none_or(|u: usize| best[v].0 < best[u].0) {
                        next = Some(v);
                    }
                }
                let v = next.expect("a vertex remains outside the tree");
                in_tree[v] = true;
                let parent = best[v].1;
                set.insert(parent, v).expect("tree edge joins distinct vertices");
                set.insert(v, parent).expect("tree edge joins distinct vertices");
                for u in (0..n).filter(|&u| !in_tree[u]) {
                    let dist = sq_dist(dataset, v, u);
                    if dist < best[u].0 {
                        best[u] = (dist, v);
                    }
                }
            }
        }
        InitStrategy::SpanningPath => {
            let mut at = 0;
            for _ in 1..n {
                let mut next: Option<(usize, f64)> = None;
                for v in (0..n).filter(|&v| !in_tree[v]) {
                    let dist = sq_dist(dataset, at, v);
                    if next.is_none_or(|(_, d)| dist < d) {
                        next = Some((v, dist));
                    }
                }
                let (v, _) = next.expect("a vertex remains off the path");
                in_tree[v] = true;
                set.insert(at, v).expect("path step joins distinct vertices");
                at = v;
            }
        }
    }
    set
}

/// The observation hyperplane `i` undercuts most, with the signed amount
/// `ŷ_i − ŷ_m + β_i'(x_m − x_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub m: usize,
    pub value: f64,
}

/// For each `i`, the minimiser `m(i)` of `ŷ_i − ŷ_m + β_i'(x_m − x_i)` over all
/// observations (lowest index on ties).
fn most_undercut(fit: &FitResult, dataset: &Dataset) -> Vec<Violation> {
    let n = dataset.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let bi = fit.beta.row(i);
            let xi = dataset.x(i);
            let base = fit.y_hat[i] - bi.dot(&xi);
            let mut best = Violation { i, m: i, value: 0.0 };
            for m in 0..n {
                let value = base + bi.dot(&dataset.x(m)) - fit.y_hat[m];
                if value < best.value || (m < best.m && value == best.value) {
                    best = Violation { i, m, value };
                }
            }
            best
        })
        .collect()
}

/// Hyperplanes whose most undercut observation lies more than `tol` above
/// them, in order of `i`.
pub fn separate(fit: &FitResult, dataset: &Dataset, tol: f64) -> Vec<Violation> {
    most_undercut(fit, dataset).into_iter().filter(|v| v.value < -tol).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLoopStats {
    /// Master solves performed.
    pub iterations: usize,
    /// Pairs appended after each master solve (the last entry is 0 on success).
    pub added: Vec<usize>,
    /// Master objective after each solve.
    pub objectives: Vec<f64>,
    pub final_constraints: usize,
    /// Smallest `ŷ_i − ŷ_h + β_i'(x_h − x_i)` over all pairs at the final fit;
    /// at least `−tol` when the loop converged.
    pub final_max_violation: f64,
}

#[derive(Debug, Clone)]
pub struct CutOptions {
    pub strategy: InitStrategy,
    pub tol: f64,
    /// Cap on master solves; `None` means `max(n²/2, 1)`.
    pub max_master_solves: Option<usize>,
    /// Pairs to start from instead of `strategy`, e.g. pairs found by an
    /// earlier solve on the same observations.
    pub seed: Option<ConstraintSet>,
    /// Integer values suggested to the first master solve.
    pub hint: Option<Vec<f64>>,
    /// A lower bound on the first master's optimum.
    pub lower_bound: Option<f64>,
}

impl Default for CutOptions {
    fn default() -> Self {
        Self { strategy: InitStrategy::Mst, tol: 0.01, max_master_solves: None, seed: None, hint: None, lower_bound: None }
    }
}

/// Runs the reduced-master loop. `builder` maps the current pair set to the
/// master problem; its solution must carry a regression layout for `dataset`.
pub fn solve_with_cuts<B>(
    builder: B,
    dataset: &Dataset,
    opts: &CutOptions,
    cfg: &SolverConfig,
) -> Result<(FitResult, CutLoopStats, ConstraintSet)>
where
    B: Fn(&ConstraintSet) -> Result<OptProblem>,
{
    if !(opts.tol >= 0.0 && opts.tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("cut tolerance {} must be finite and ≥ 0", opts.tol)));
    }
    let n = dataset.n();
    let start = Instant::now();
    let mut set = match &opts.seed {
        Some(seed) if seed.n() != n => {
            return Err(Error::InvalidParameter(format!(
                "seed pairs index {} observations, dataset has {n}",
                seed.n()
            )));
        }
        Some(seed) => seed.clone(),
        None => initial_constraints(dataset, opts.strategy),
    };
    let cap = opts.max_master_solves.unwrap_or(n * n / 2).max(1);
    let mut session = SolverSession::new(builder(&set)?, cfg.clone());
    if let Some(hint) = &opts.hint {
        session.suggest(hint.clone(), opts.lower_bound);
    }
    let mut stats = CutLoopStats {
        iterations: 0,
        added: Vec::new(),
        objectives: Vec::new(),
        final_constraints: 0,
        final_max_violation: 0.0,
    };
    let (mut iterations, mut nodes) = (0, 0);

    loop {
        let sol = session.solve()?;
        stats.iterations += 1;
        iterations += sol.iterations;
        nodes += sol.nodes;
        if !matches!(sol.status, Status::Optimal | Status::IterationLimit) {
            return Err(Error::UnexpectedStatus(format!("{:?} in reduced master", sol.status)));
        }
        let mut fit = FitResult::from_solution(session.problem(), dataset, &sol)?;
        let scan = most_undercut(&fit, dataset);
        let violated: Vec<&Violation> = scan.iter().filter(|v| v.value < -opts.tol).collect();
        stats.objectives.push(fit.objective);
        stats.final_constraints = set.len();
        stats.final_max_violation = scan.iter().map(|v| v.value).fold(0.0, f64::min);
        fit.meta.iterations = iterations;
        fit.meta.nodes = nodes;
        fit.meta.master_solves = stats.iterations;
        fit.meta.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

        if violated.is_empty() {
            stats.added.push(0);
            return Ok((fit, stats, set));
        }
        if stats.iterations >= cap {
            return Err(Error::CutLimit { cap, best: Box::new(fit), stats });
        }
        let mut added = 0;
        for v in violated {
            if set.insert(v.i, v.m)? {
                added += 1;
            }
        }
        stats.added.push(added);
        if added == 0 {
            return Err(Error::UnexpectedStatus(format!(
                "master solution violates its own rows by {:e}",
                -stats.final_max_violation
            )));
        }
        session.update(builder(&set)?)?;
    }
}
