use std::time::Instant;

use crate::model::OptProblem;

use super::{BranchRule, Solution, SolverConfig, SolverError, Status};

/// Values closer than this to an integer count as integral.
const INTEGRALITY_TOL: f64 = 1e-9;

/// A continuous relaxation that can be narrowed by fixing variables.
pub(crate) trait Relaxation: Clone {
    fn fix(&mut self, var: usize, value: f64, cfg: &SolverConfig) -> Result<(), SolverError>;
    fn solve(&mut self, cfg: &SolverConfig) -> Result<Solution, SolverError>;
}

fn pick_branch(x: &[f64], ints: &[usize], rule: BranchRule) -> Option<usize> {
    let fractional = ints.iter().copied().filter(|&v| (x[v] - x[v].round()).abs() > INTEGRALITY_TOL);
    match rule {
        BranchRule::LowestIndex => fractional.min(),
        BranchRule::MostFractional => {
            let mut best: Option<(usize, f64)> = None;
            for v in fractional {
                let score = (x[v] - x[v].floor()).min(x[v].ceil() - x[v]);
                // strict comparison keeps the lowest index on ties
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((v, score));
                }
            }
            best.map(|(v, _)| v)
        }
    }
}

/// Known facts about the optimum from an earlier, less constrained solve.
#[derive(Debug, Clone, Default)]
pub(crate) struct WarmInfo {
    /// Integer values to try first as an incumbent.
    pub hint: Option<Vec<f64>>,
    /// A valid lower bound on the optimum.
    pub lower_bound: Option<f64>,
}

/// Depth-first branch-and-bound over the integer variables of `problem`,
/// diving first into the child nearer the relaxation value.
pub(crate) fn branch_and_bound<R: Relaxation>(
    root: R,
    problem: &OptProblem,
    cfg: &SolverConfig,
    warm: &WarmInfo,
) -> Result<Solution, SolverError> {
    let start = Instant::now();
    let ints = problem.integer_vars();
    let bnb = &cfg.bnb;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let (mut nodes, mut iterations) = (0u64, 0u64);
    let mut limited = false;

    if let Some(hint) = warm.hint.as_ref().filter(|h| h.len() == ints.len()) {
        let mut probe = root.clone();
        for (&v, &value) in ints.iter().zip(hint) {
            probe.fix(v, value, cfg)?;
        }
        let relax = probe.solve(cfg)?;
        nodes += 1;
        iterations += relax.iterations;
        if relax.status == Status::Optimal {
            let mut x = relax.x;
            for &v in &ints {
                x[v] = x[v].round();
            }
            incumbent = Some((problem.objective_value(&x), x));
        }
    }
    // the hint may already meet a known lower bound; any incumbent within the
    // pruning gap of it ends the search
    let tight = |best: f64| {
        warm.lower_bound.is_some_and(|lb| best <= lb + bnb.gap)
    };
    let proven = incumbent.as_ref().is_some_and(|(best, _)| tight(*best));
    // each node carries its parent's relaxation value, a lower bound for it
    let mut stack = if proven { Vec::new() } else { vec![(f64::NEG_INFINITY, root)] };

    while let Some((parent_bound, mut node)) = stack.pop() {
        if incumbent.as_ref().is_some_and(|(best, _)| parent_bound >= best - bnb.gap) {
            continue;
        }
        if nodes >= bnb.node_limit {
            limited = true;
            break;
        }
        let relax = node.solve(cfg)?;
        nodes += 1;
        iterations += relax.iterations;
        match relax.status {
            Status::Optimal => {}
            Status::Infeasible => continue,
            Status::Unbounded => {
                return Ok(Solution { nodes, ..Solution::without_point(Status::Unbounded, iterations, start.elapsed()) });
            }
            Status::IterationLimit => {
                limited = true;
                continue;
            }
        }
        if let Some((best, _)) = &incumbent {
            if relax.objective >= best - bnb.gap {
                continue;
            }
        }
        match pick_branch(&relax.x, &ints, bnb.branching) {
            None => {
                let mut x = relax.x;
                for &v in &ints {
                    x[v] = x[v].round();
                }
                let obj = problem.objective_value(&x);
                if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
                    incumbent = Some((obj, x));
                    if tight(obj) {
                        break;
                    }
                }
            }
            Some(v) => {
                let up_first = relax.x[v] >= 0.5;
                let (floor, ceil) = (relax.x[v].floor(), relax.x[v].ceil());
                let mut down = node.clone();
                down.fix(v, floor, cfg)?;
                node.fix(v, ceil, cfg)?;
                // the stack pops the preferred child first
                let bound = relax.objective;
                if up_first {
                    stack.push((bound, down));
                    stack.push((bound, node));
                } else {
                    stack.push((bound, node));
                    stack.push((bound, down));
                }
            }
        }
    }

    let wall_time = start.elapsed();
    Ok(match incumbent {
        Some((objective, x)) => Solution {
            status: if limited { Status::IterationLimit } else { Status::Optimal },
            x,
            objective,
            iterations,
            nodes,
            wall_time,
            dual_objective: None,
        },
        None => {
            let status = if limited { Status::IterationLimit } else { Status::Infeasible };
            Solution { nodes, ..Solution::without_point(status, iterations, wall_time) }
        }
    })
}
