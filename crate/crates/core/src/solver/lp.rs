use std::time::Instant;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, SolveOutcome};

use crate::model::{Constraint, OptProblem, Sense};

use super::bnb::Relaxation;
use super::{Solution, SolverConfig, SolverError, Status, qp};

#[derive(Clone)]
enum State {
    Pending(Problem),
    Solved(microlp::Solution),
    Infeasible,
    Unbounded,
    Interrupted,
}

/// Simplex model of the continuous relaxation of an [`OptProblem`].
///
/// `mirror` tracks the problem as edited (rows added, variables fixed) so the
/// model can be rebuilt from scratch and cross-checked.
#[derive(Clone)]
pub(crate) struct LpModel {
    vars: Vec<microlp::Variable>,
    state: State,
    mirror: OptProblem,
    iterations_before: u64,
    /// Iterations already reported by earlier solves of this model or the
    /// model it was cloned from.
    reported: u64,
    /// Fixings not yet applied to the simplex state; applied on the next solve
    /// so nodes pruned by their parent's bound are never re-optimized.
    pending_fixes: Vec<(usize, f64)>,
    /// Whether the simplex state was edited in place since the last solve
    /// from scratch. microlp can report a warm re-solve infeasible when the
    /// model is not, so such verdicts are confirmed cold.
    warm_edits: bool,
}

fn op(sense: Sense) -> ComparisonOp {
    match sense {
        Sense::Le => ComparisonOp::Le,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Eq => ComparisonOp::Eq,
    }
}

fn expr(vars: &[microlp::Variable], row: &Constraint) -> LinearExpr {
    let mut e = LinearExpr::empty();
    for &(v, a) in &row.coeffs {
        e.add(vars[v], a);
    }
    e
}

fn classify(result: Result<SolveOutcome, microlp::Error>) -> Result<State, SolverError> {
    match result {
        Ok(outcome) => Ok(match outcome.into_solution() {
            Ok(sol) => State::Solved(sol),
            Err(_) => State::Interrupted,
        }),
        Err(microlp::Error::Infeasible) => Ok(State::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(State::Unbounded),
        Err(e) => Err(SolverError::Backend(e.to_string())),
    }
}

impl LpModel {
    pub(crate) fn build(problem: &OptProblem, cfg: &SolverConfig) -> Result<Self, SolverError> {
        let (vars, lp) = Self::translate(problem, cfg);
        Ok(Self { vars, state: State::Pending(lp), mirror: problem.clone(), iterations_before: 0, reported: 0, pending_fixes: Vec::new(), warm_edits: false })
    }

    fn translate(problem: &OptProblem, cfg: &SolverConfig) -> (Vec<microlp::Variable>, Problem) {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        if let Some(limit) = cfg.lp_time_limit {
            lp.set_time_limit(limit);
        }
        let vars: Vec<_> = problem
            .vars()
            .iter()
            .zip(problem.cost())
            .map(|(v, &c)| lp.add_var(c, (v.lower, v.upper)))
            .collect();
        for row in problem.rows() {
            lp.add_constraint(expr(&vars, row), op(row.sense), row.rhs);
        }
        (vars, lp)
    }

    fn rebuild(&mut self, cfg: &SolverConfig) {
        let (vars, lp) = Self::translate(&self.mirror, cfg);
        self.iterations_before += self.iterations();
        self.vars = vars;
        self.state = State::Pending(lp);
        self.pending_fixes.clear();
        self.warm_edits = false;
    }

    fn iterations(&self) -> u64 {
        match &self.state {
            State::Solved(s) => s.stats().lp_iterations,
            _ => 0,
        }
    }

    fn ensure_solved(&mut self, cfg: &SolverConfig) -> Result<(), SolverError> {
        if let State::Pending(lp) = &self.state {
            self.state = classify(lp.solve())?;
        }
        for (var, value) in std::mem::take(&mut self.pending_fixes) {
            match std::mem::replace(&mut self.state, State::Interrupted) {
                State::Solved(sol) => {
                    self.state = classify(sol.fix_var(self.vars[var], value))?;
                    self.warm_edits = true;
                }
                State::Infeasible => self.state = State::Infeasible,
                _ => {
                    // the mirror already holds every fixing
                    self.rebuild(cfg);
                    return self.ensure_solved(cfg);
                }
            }
        }
        if self.warm_edits && matches!(self.state, State::Infeasible) {
            self.rebuild(cfg);
            return self.ensure_solved(cfg);
        }
        Ok(())
    }

    pub(crate) fn add_row(&mut self, row: &Constraint, cfg: &SolverConfig) -> Result<(), SolverError> {
        self.mirror
            .add_row(row.clone())
            .map_err(|e| SolverError::Backend(e.to_string()))?;
        if !self.pending_fixes.is_empty() {
            self.rebuild(cfg);
        }
        match std::mem::replace(&mut self.state, State::Interrupted) {
            State::Pending(mut lp) => {
                lp.add_constraint(expr(&self.vars, row), op(row.sense), row.rhs);
                self.state = State::Pending(lp);
            }
            State::Solved(sol) => {
                self.state = classify(sol.add_constraint(expr(&self.vars, row), op(row.sense), row.rhs))?;
                self.warm_edits = true;
            }
            State::Infeasible => self.state = State::Infeasible,
            State::Unbounded | State::Interrupted => self.rebuild(cfg),
        }
        Ok(())
    }

    pub(crate) fn solution(&mut self, cfg: &SolverConfig) -> Result<Solution, SolverError> {
        let start = Instant::now();
        self.ensure_solved(cfg)?;
        let total = self.iterations_before + self.iterations();
        let iterations = total - self.reported.min(total);
        self.reported = total;
        let sol = match &self.state {
            State::Solved(s) => {
                let x: Vec<f64> = self.vars.iter().map(|&v| s.var_value_raw(v)).collect();
                Solution {
                    status: Status::Optimal,
                    objective: self.mirror.objective_value(&x),
                    x,
                    iterations,
                    nodes: 0,
                    wall_time: start.elapsed(),
                    dual_objective: None,
                }
            }
            State::Infeasible => Solution::without_point(Status::Infeasible, iterations, start.elapsed()),
            State::Unbounded => Solution::without_point(Status::Unbounded, iterations, start.elapsed()),
            State::Interrupted => Solution::without_point(Status::IterationLimit, iterations, start.elapsed()),
            State::Pending(_) => unreachable!("model solved above"),
        };
        if cfg.check_duality && sol.status == Status::Optimal {
            return certify(sol, &self.mirror, cfg);
        }
        Ok(sol)
    }
}

/// Attaches the interior point dual objective to an optimal simplex solution
/// and fails when the two disagree.
fn certify(mut sol: Solution, problem: &OptProblem, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    let check = qp::solve(problem, None, &SolverConfig { check_duality: false, ..cfg.clone() })?;
    let dual = check
        .dual_objective
        .ok_or_else(|| SolverError::Backend(format!("duality check returned {:?}", check.status)))?;
    let gap = (sol.objective - dual).abs();
    if gap > 1e-6 * sol.objective.abs().max(1.0) {
        return Err(SolverError::DualityGap { primal: sol.objective, dual, gap });
    }
    sol.dual_objective = Some(dual);
    Ok(sol)
}

impl Relaxation for LpModel {
    fn fix(&mut self, var: usize, value: f64, _cfg: &SolverConfig) -> Result<(), SolverError> {
        self.mirror.set_bounds(var, value, value);
        self.pending_fixes.push((var, value));
        Ok(())
    }

    fn solve(&mut self, cfg: &SolverConfig) -> Result<Solution, SolverError> {
        self.solution(cfg)
    }
}
