use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::model::{OptProblem, Sense};

use super::bnb::Relaxation;
use super::{Solution, SolverConfig, SolverError, Status};

/// Triplet builder for the conic form `Ax + s = b`, `s ∈ {0}ᵖ × ℝ₊ᵐ`.
struct ConicRows {
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    ineq: Vec<(Vec<(usize, f64)>, f64)>,
}

impl ConicRows {
    fn assemble(self, ncols: usize) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
        let (p, m) = (self.eq.len(), self.ineq.len());
        let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::with_capacity(p + m));
        for (r, (coeffs, rhs)) in self.eq.into_iter().chain(self.ineq).enumerate() {
            for (c, a) in coeffs {
                ri.push(r);
                ci.push(c);
                vals.push(a);
            }
            b.push(rhs);
        }
        let a = CscMatrix::new_from_triplets(p + m, ncols, ri, ci, vals);
        let mut cones = Vec::new();
        if p > 0 {
            cones.push(SupportedConeT::ZeroConeT(p));
        }
        if m > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(m));
        }
        (a, b, cones)
    }
}

/// Solves the continuous problem (integrality ignored) by interior point.
/// `bounds` overrides the variable bounds of `problem` when given.
pub(crate) fn solve(
    problem: &OptProblem,
    bounds: Option<&[(f64, f64)]>,
    cfg: &SolverConfig,
) -> Result<Solution, SolverError> {
    let start = Instant::now();
    let n = problem.num_vars();
    let bounds: Vec<(f64, f64)> = match bounds {
        Some(b) => b.to_vec(),
        None => problem.vars().iter().map(|v| (v.lower, v.upper)).collect(),
    };
    if bounds.iter().any(|&(l, u)| l > u) {
        return Ok(Solution::without_point(Status::Infeasible, 0, start.elapsed()));
    }

    let mut rows = ConicRows { eq: Vec::new(), ineq: Vec::new() };
    for row in problem.rows() {
        let coeffs = row.coeffs.clone();
        match row.sense {
            Sense::Eq => rows.eq.push((coeffs, row.rhs)),
            Sense::Le => rows.ineq.push((coeffs, row.rhs)),
            Sense::Ge => rows.ineq.push((coeffs.into_iter().map(|(c, a)| (c, -a)).collect(), -row.rhs)),
        }
    }
    for (j, &(l, u)) in bounds.iter().enumerate() {
        if l == u {
            rows.eq.push((vec![(j, 1.0)], l));
            continue;
        }
        if l.is_finite() {
            rows.ineq.push((vec![(j, -1.0)], -l));
        }
        if u.is_finite() {
            rows.ineq.push((vec![(j, 1.0)], u));
        }
    }
    let (a, b, cones) = rows.assemble(n);

    let (pi, pv): (Vec<usize>, Vec<f64>) = problem
        .quadratic()
        .map(|q| q.iter().enumerate().filter(|&(_, &w)| w > 0.0).map(|(j, &w)| (j, 2.0 * w)).unzip())
        .unwrap_or_default();
    let p = CscMatrix::new_from_triplets(n, n, pi.clone(), pi, pv);

    // Degenerate masters (fixed binaries, duplicated points) can stall the
    // interior point short of a very tight gap; retry with looser targets.
    let mut ladder = vec![cfg.qp_tol];
    ladder.extend([1e-9, 1e-8, 1e-7].into_iter().filter(|&t| t > cfg.qp_tol));
    let mut iterations = 0;
    let mut solved = None;
    for (attempt, &tol) in ladder.iter().enumerate() {
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(cfg.qp_max_iter)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .presolve_enable(false)
            .build()
            .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, problem.cost(), &a, &b, &cones, settings)
            .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        solver.solve();
        iterations += u64::from(solver.solution.iterations);
        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => Status::IterationLimit,
            other if attempt + 1 == ladder.len() => {
                return Err(SolverError::Backend(format!("interior point stopped with {other:?}")));
            }
            _ => continue,
        };
        solved = Some((status, solver.solution));
        break;
    }
    let (status, out) = solved.expect("the last attempt returns or breaks");
    if status != Status::Optimal {
        return Ok(Solution::without_point(status, iterations, start.elapsed()));
    }
    // Bounds hold exactly; rows keep the solver's feasibility tolerance.
    let x: Vec<f64> = out.x.iter().zip(&bounds).map(|(&v, &(l, u))| v.clamp(l, u)).collect();
    Ok(Solution {
        status,
        objective: problem.objective_value(&x),
        x,
        iterations,
        nodes: 0,
        wall_time: start.elapsed(),
        dual_objective: Some(out.obj_val_dual),
    })
}

/// Continuous relaxation handled by re-solving from scratch with edited bounds.
#[derive(Clone)]
pub(crate) struct QpRelaxation<'a> {
    problem: &'a OptProblem,
    bounds: Vec<(f64, f64)>,
}

impl<'a> QpRelaxation<'a> {
    pub(crate) fn new(problem: &'a OptProblem, _cfg: &SolverConfig) -> Self {
        let bounds = problem.vars().iter().map(|v| (v.lower, v.upper)).collect();
        Self { problem, bounds }
    }
}

impl Relaxation for QpRelaxation<'_> {
    fn fix(&mut self, var: usize, value: f64, _cfg: &SolverConfig) -> Result<(), SolverError> {
        self.bounds[var] = (value, value);
        Ok(())
    }

    fn solve(&mut self, cfg: &SolverConfig) -> Result<Solution, SolverError> {
        solve(self.problem, Some(&self.bounds), cfg)
    }
}
