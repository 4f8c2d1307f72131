//! Translation of the regression formulations into [`OptProblem`]s.
//!
//! Every problem is built in the fitted-value form: the decision variables are
//! `ŷ_i`, `β_i ≥ 0` and the residual split `ε⁺_i, ε⁻_i ≥ 0`, with intercepts
//! recovered afterwards as `α_i = ŷ_i − β_i'x_i`. Concavity enters through
//! Afriat rows `ŷ_i + β_i'(x_h − x_i) ≥ ŷ_h`, which lets the full and the
//! cutting-plane solves share one constraint shape.

use crate::cuts::ConstraintSet;
use crate::error::{Error, Result};

use super::dataset::Dataset;
use super::params::{ExpectileLevel, L0Penalty, L1Penalty, QuantileLevel};
use super::problem::{Constraint, OptProblem, RegressionLayout, RowTag, Sense};

/// Which Afriat rows to emit.
#[derive(Debug, Clone, Copy)]
pub enum Pairs<'a> {
    /// All `n(n − 1)` ordered pairs.
    All,
    Subset(&'a ConstraintSet),
}

/// The Afriat row for pair `(i, h)`: hyperplane `i` dominates point `h`.
pub fn afriat_row(dataset: &Dataset, layout: &RegressionLayout, i: usize, h: usize) -> Constraint {
    let (xi, xh) = (dataset.x(i), dataset.x(h));
    let mut coeffs = Vec::with_capacity(layout.d + 2);
    coeffs.push((layout.y_hat(i), 1.0));
    coeffs.push((layout.y_hat(h), -1.0));
    for j in 0..layout.d {
        let diff = xh[j] - xi[j];
        if diff != 0.0 {
            coeffs.push((layout.beta(i, j), diff));
        }
    }
    Constraint { coeffs, sense: Sense::Ge, rhs: 0.0, tag: RowTag::Afriat { i, h } }
}

fn base_problem(dataset: &Dataset, pairs: Pairs<'_>, plus: f64, minus: f64, squared: bool) -> Result<OptProblem> {
    let (n, d) = (dataset.n(), dataset.d());
    let layout = RegressionLayout::new(n, d);
    let mut p = OptProblem::new();
    for _ in 0..n {
        p.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
    }
    for _ in 0..n * d {
        p.add_var(0.0, f64::INFINITY, 0.0);
    }
    let (lin_plus, lin_minus) = if squared { (0.0, 0.0) } else { (plus, minus) };
    for _ in 0..n {
        p.add_var(0.0, f64::INFINITY, lin_plus);
    }
    for _ in 0..n {
        p.add_var(0.0, f64::INFINITY, lin_minus);
    }
    if squared {
        for i in 0..n {
            p.set_quadratic(layout.eps_plus(i), plus)?;
            p.set_quadratic(layout.eps_minus(i), minus)?;
        }
    }
    for i in 0..n {
        p.add_row(Constraint {
            coeffs: vec![(layout.y_hat(i), 1.0), (layout.eps_plus(i), 1.0), (layout.eps_minus(i), -1.0)],
            sense: Sense::Eq,
            rhs: dataset.y(i),
            tag: RowTag::Fidelity(i),
        })?;
    }
    match pairs {
        Pairs::All => {
            for i in 0..n {
                for h in (0..n).filter(|&h| h != i) {
                    p.add_row(afriat_row(dataset, &layout, i, h))?;
                }
            }
        }
        Pairs::Subset(set) => {
            if set.n() != n {
                return Err(Error::InvalidParameter(format!(
                    "constraint set is over {} observations, dataset has {n}",
                    set.n()
                )));
            }
            for (i, h) in set.iter() {
                p.add_row(afriat_row(dataset, &layout, i, h))?;
            }
        }
    }
    p.set_layout(layout);
    Ok(p)
}

/// Convex quantile regression LP: `min τ Σε⁺ + (1 − τ) Σε⁻`.
pub fn build_cqr(dataset: &Dataset, tau: QuantileLevel, pairs: Pairs<'_>) -> Result<OptProblem> {
    base_problem(dataset, pairs, tau.value(), 1.0 - tau.value(), false)
}

/// Convex expectile regression QP: `min τ̃ Σ(ε⁺)² + (1 − τ̃) Σ(ε⁻)²`.
pub fn build_cer(dataset: &Dataset, tilde_tau: ExpectileLevel, pairs: Pairs<'_>) -> Result<OptProblem> {
    base_problem(dataset, pairs, tilde_tau.value(), 1.0 - tilde_tau.value(), true)
}

fn regression_layout(problem: &OptProblem) -> Result<RegressionLayout> {
    problem
        .layout()
        .ok_or_else(|| Error::InvalidParameter("problem was not built by a regression builder".into()))
}

/// Adds `λ Σ_i Σ_j β_{j,i}` to the objective. Since `β ≥ 0` the absolute
/// values drop out and only the cost row changes.
pub fn add_l1(mut problem: OptProblem, penalty: L1Penalty) -> Result<OptProblem> {
    let layout = regression_layout(&problem)?;
    if penalty.lambda() != 0.0 {
        for v in layout.beta_vars() {
            problem.add_cost(v, penalty.lambda());
        }
    }
    Ok(problem)
}

/// Adds the big-M cardinality block: binaries `z_j`, rows
/// `β_{j,i} − M z_j ≤ 0` for every observation and variable, and `Σ z_j ≤ k`.
pub fn add_l0(mut problem: OptProblem, penalty: L0Penalty) -> Result<OptProblem> {
    let mut layout = regression_layout(&problem)?;
    if layout.selection.is_some() {
        return Err(Error::InvalidParameter("problem already carries an L0 block".into()));
    }
    if penalty.k() > layout.d {
        return Err(Error::InvalidParameter(format!("k = {} exceeds d = {}", penalty.k(), layout.d)));
    }
    let offset = problem.num_vars();
    for _ in 0..layout.d {
        problem.add_binary(0.0);
    }
    layout.selection = Some(offset);
    for i in 0..layout.n {
        for j in 0..layout.d {
            problem.add_row(Constraint {
                coeffs: vec![(layout.beta(i, j), 1.0), (offset + j, -penalty.big_m())],
                sense: Sense::Le,
                rhs: 0.0,
                tag: RowTag::BigM { var: j, obs: i },
            })?;
        }
    }
    problem.add_row(Constraint {
        coeffs: (0..layout.d).map(|j| (offset + j, 1.0)).collect(),
        sense: Sense::Le,
        rhs: penalty.k() as f64,
        tag: RowTag::Cardinality,
    })?;
    problem.set_layout(layout);
    Ok(problem)
}

/// Adds `Σ_j β_{j,i} ≤ radius` for every observation: the convex relaxation
/// of the L0 block with `radius = M·k`.
pub fn add_l1_ball(mut problem: OptProblem, radius: f64) -> Result<OptProblem> {
    let layout = regression_layout(&problem)?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("L1 radius {radius} must be finite and ≥ 0")));
    }
    for i in 0..layout.n {
        problem.add_row(Constraint {
            coeffs: (0..layout.d).map(|j| (layout.beta(i, j), 1.0)).collect(),
            sense: Sense::Le,
            rhs: radius,
            tag: RowTag::L1Ball(i),
        })?;
    }
    Ok(problem)
}
