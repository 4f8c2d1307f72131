//! Embedded solving of the LP, QP and small-binary MIP problems built by
//! [`crate::model`].
//!
//! Linear relaxations run on a sparse revised simplex (microlp) that keeps its
//! basis between edits, so appended cuts and branching fixings are
//! warm-started. Problems with a quadratic objective go through an interior
//! point method (clarabel). Branch-and-bound over the integer variables is
//! implemented here on top of either relaxation.

mod bnb;
mod lp;
mod mps;
mod qp;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{OptProblem, RowTag};

pub use mps::{export_mps, parse_mps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Primal values; empty when no point is available.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
    pub nodes: u64,
    pub wall_time: Duration,
    /// Dual objective, when the backend certified one.
    pub dual_objective: Option<f64>,
}

impl Solution {
    fn without_point(status: Status, iterations: u64, wall_time: Duration) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            iterations,
            nodes: 0,
            wall_time,
            dual_objective: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("{0}")]
    WrongProblemClass(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("duality gap {gap:e} between primal {primal} and dual {dual}")]
    DualityGap { primal: f64, dual: f64, gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchRule {
    MostFractional,
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnBConfig {
    /// Nodes whose relaxation bound is within this of the incumbent are pruned.
    pub gap: f64,
    pub node_limit: u64,
    pub branching: BranchRule,
}

impl Default for BnBConfig {
    fn default() -> Self {
        Self { gap: 1e-6, node_limit: 1_000_000, branching: BranchRule::MostFractional }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Wall-clock budget per simplex call.
    pub lp_time_limit: Option<Duration>,
    pub qp_max_iter: u32,
    /// Gap and feasibility tolerance handed to the interior point method.
    pub qp_tol: f64,
    /// Re-solve every optimal LP with the interior point method and compare
    /// the simplex objective with its dual objective.
    pub check_duality: bool,
    pub bnb: BnBConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lp_time_limit: None,
            qp_max_iter: 100_000,
            qp_tol: 1e-10,
            check_duality: false,
            bnb: BnBConfig::default(),
        }
    }
}

impl SolverConfig {
    /// Defaults overridden by `CQR_NODE_LIMIT`, `CQR_QP_MAX_ITER` and
    /// `CQR_LP_TIME_LIMIT` (seconds).
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(v) = env_parse::<u64>("CQR_NODE_LIMIT") {
            cfg.bnb.node_limit = v.max(1);
        }
        if let Some(v) = env_parse::<u32>("CQR_QP_MAX_ITER") {
            cfg.qp_max_iter = v.max(1);
        }
        if let Some(v) = env_parse::<f64>("CQR_LP_TIME_LIMIT") {
            if v > 0.0 {
                cfg.lp_time_limit = Some(Duration::from_secs_f64(v));
            }
        }
        cfg
    }
}

fn env_parse<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok()?.trim().parse().ok()
}

/// Solves a pure LP (no integer variables, no quadratic term).
pub fn solve_lp(problem: &OptProblem, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    if problem.is_mip() || problem.has_quadratic() {
        return Err(SolverError::WrongProblemClass(
            "solve_lp needs a continuous problem with a linear objective".into(),
        ));
    }
    let mut model = lp::LpModel::build(problem, cfg)?;
    model.solution(cfg)
}

/// Solves a continuous problem with a diagonal convex quadratic objective.
pub fn solve_qp(problem: &OptProblem, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    if problem.is_mip() {
        return Err(SolverError::WrongProblemClass("solve_qp does not handle integer variables".into()));
    }
    qp::solve(problem, None, cfg)
}

/// Branch-and-bound over the integer variables of `problem`.
pub fn solve_mip(problem: &OptProblem, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    SolverSession::new(problem.clone(), cfg.clone()).solve()
}

/// Dispatches on the problem class.
pub fn solve(problem: &OptProblem, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    if problem.is_mip() {
        solve_mip(problem, cfg)
    } else if problem.has_quadratic() {
        solve_qp(problem, cfg)
    } else {
        solve_lp(problem, cfg)
    }
}

/// A problem that is re-solved after rows are appended.
///
/// Rows are identified by their [`RowTag`]; when [`SolverSession::update`]
/// receives a problem that only adds rows to the previous one, the simplex
/// basis is kept and the new rows are inserted with warm re-solves.
///
/// For problems with integer variables the previous optimum also carries
/// over: its integer values are tried first as an incumbent, and its
/// objective is a lower bound for the more constrained problem.
pub struct SolverSession {
    problem: OptProblem,
    cfg: SolverConfig,
    lp: Option<lp::LpModel>,
    warm: bnb::WarmInfo,
    last: Option<Solution>,
}

impl SolverSession {
    pub fn new(problem: OptProblem, cfg: SolverConfig) -> Self {
        Self { problem, cfg, lp: None, warm: bnb::WarmInfo::default(), last: None }
    }

    pub fn problem(&self) -> &OptProblem {
        &self.problem
    }

    /// Replaces the problem, keeping the warm simplex state when the new
    /// problem has the same columns and objective and a superset of the rows.
    pub fn update(&mut self, next: OptProblem) -> Result<(), SolverError> {
        let same_columns = next.vars() == self.problem.vars()
            && next.cost() == self.problem.cost()
            && next.quadratic() == self.problem.quadratic();
        let known: HashSet<RowTag> = self.problem.rows().iter().map(|r| r.tag).collect();
        let next_tags: HashSet<RowTag> = next.rows().iter().map(|r| r.tag).collect();
        let superset = known.len() == self.problem.num_rows() && known.is_subset(&next_tags);
        let last = self.last.take();
        if same_columns && superset {
            if let Some(model) = &mut self.lp {
                for row in next.rows().iter().filter(|r| !known.contains(&r.tag)) {
                    model.add_row(row, &self.cfg)?;
                }
            }
            self.warm = match last.filter(|s| s.is_optimal()) {
                Some(prev) => bnb::WarmInfo {
                    hint: Some(next.integer_vars().iter().map(|&v| prev.x[v].round()).collect()),
                    lower_bound: Some(prev.objective),
                },
                None => bnb::WarmInfo::default(),
            };
        } else {
            self.lp = None;
            self.warm = bnb::WarmInfo::default();
        }
        self.problem = next;
        Ok(())
    }

    /// Integer values to try first as an incumbent on the next solve, e.g.
    /// the optimum of a related problem; infeasible suggestions cost one
    /// relaxation and are otherwise ignored. `lower_bound`, when known (say
    /// from a less constrained problem), ends the search once met.
    pub fn suggest(&mut self, integer_values: Vec<f64>, lower_bound: Option<f64>) {
        self.warm.hint = Some(integer_values);
        self.warm.lower_bound = lower_bound;
    }

    pub fn solve(&mut self) -> Result<Solution, SolverError> {
        let start = Instant::now();
        let mut sol = if self.problem.has_quadratic() {
            if self.problem.is_mip() {
                let root = qp::QpRelaxation::new(&self.problem, &self.cfg);
                bnb::branch_and_bound(root, &self.problem, &self.cfg, &self.warm)?
            } else {
                qp::solve(&self.problem, None, &self.cfg)?
            }
        } else {
            if self.lp.is_none() {
                self.lp = Some(lp::LpModel::build(&self.problem, &self.cfg)?);
            }
            let model = self.lp.as_mut().expect("model was just built");
            if self.problem.is_mip() {
                bnb::branch_and_bound(model.clone(), &self.problem, &self.cfg, &self.warm)?
            } else {
                model.solution(&self.cfg)?
            }
        };
        sol.wall_time = start.elapsed();
        self.last = Some(sol.clone());
        Ok(sol)
    }
}
