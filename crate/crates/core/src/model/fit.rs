use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Solution, Status};

use super::dataset::Dataset;
use super::params::L0Penalty;
use super::problem::OptProblem;

/// Solver diagnostics attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub status: Status,
    pub iterations: u64,
    pub nodes: u64,
    /// Afriat rows in the last solved master.
    pub constraints: usize,
    pub wall_time_ms: f64,
    /// Master solves performed by the cutting-plane loop (1 for full solves).
    pub master_solves: usize,
}

/// Per-observation supporting hyperplanes and residuals of a solved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: Vec<f64>,
    /// `n × d`, row `i` is `β_i`.
    pub beta: Array2<f64>,
    pub eps_plus: Vec<f64>,
    pub eps_minus: Vec<f64>,
    pub y_hat: Vec<f64>,
    /// Selection indicators; present for L0 fits only.
    pub z: Option<Vec<bool>>,
    pub objective: f64,
    pub meta: SolveMeta,
}

/// Worst-case measurements of the fit invariants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Largest `ŷ_h − ŷ_i − β_i'(x_h − x_i)` over all pairs.
    pub afriat: f64,
    /// Largest `|y_i − ŷ_i − (ε⁺_i − ε⁻_i)|`.
    pub residual: f64,
    /// Largest `|α_i + β_i'x_i − ŷ_i|`.
    pub intercept: f64,
    /// Most negative entry of β, ε⁺ or ε⁻, reported as a positive amount.
    pub sign: f64,
    /// Largest `β_{j,i} − M z_j`; 0 without an L0 block.
    pub big_m: f64,
    /// `Σ z_j − k` when positive.
    pub cardinality: f64,
}

impl InvariantReport {
    pub fn worst(&self) -> f64 {
        [self.afriat, self.residual, self.intercept, self.sign, self.big_m, self.cardinality]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

impl FitResult {
    /// Reads the regression variables out of a solved problem.
    pub fn from_solution(problem: &OptProblem, dataset: &Dataset, solution: &Solution) -> Result<Self> {
        if solution.x.is_empty() || !matches!(solution.status, Status::Optimal | Status::IterationLimit) {
            return Err(Error::UnexpectedStatus(format!("{:?}", solution.status)));
        }
        let layout = problem
            .layout()
            .ok_or_else(|| Error::InvalidParameter("problem has no regression layout".into()))?;
        if layout.n != dataset.n() || layout.d != dataset.d() {
            return Err(Error::InvalidParameter("problem and dataset dimensions differ".into()));
        }
        let x = &solution.x;
        let (n, d) = (layout.n, layout.d);
        let y_hat: Vec<f64> = (0..n).map(|i| x[layout.y_hat(i)]).collect();
        let beta = Array2::from_shape_fn((n, d), |(i, j)| x[layout.beta(i, j)]);
        let alpha = (0..n).map(|i| y_hat[i] - beta.row(i).dot(&dataset.x(i))).collect();
        let z = layout
            .selection
            .map(|_| (0..d).map(|j| x[layout.z(j).unwrap()] > 0.5).collect());
        let afriat = problem.count_rows(|t| matches!(t, super::RowTag::Afriat { .. }));
        Ok(Self {
            alpha,
            beta,
            eps_plus: (0..n).map(|i| x[layout.eps_plus(i)]).collect(),
            eps_minus: (0..n).map(|i| x[layout.eps_minus(i)]).collect(),
            y_hat,
            z,
            objective: solution.objective,
            meta: SolveMeta {
                status: solution.status,
                iterations: solution.iterations,
                nodes: solution.nodes,
                constraints: afriat,
                wall_time_ms: solution.wall_time.as_secs_f64() * 1e3,
                master_solves: 1,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.beta.nrows()
    }

    pub fn d(&self) -> usize {
        self.beta.ncols()
    }

    /// Measures every fit invariant against `dataset`. Pass the L0 penalty
    /// used for the fit to also check the big-M and cardinality rows.
    pub fn invariants(&self, dataset: &Dataset, l0: Option<L0Penalty>) -> InvariantReport {
        let n = self.n();
        let mut rep = InvariantReport::default();
        for i in 0..n {
            let bi = self.beta.row(i);
            let xi = dataset.x(i);
            for h in 0..n {
                let lift = self.y_hat[i] + bi.dot(&(&dataset.x(h) - &xi));
                rep.afriat = rep.afriat.max(self.y_hat[h] - lift);
            }
            let resid = dataset.y(i) - self.y_hat[i] - (self.eps_plus[i] - self.eps_minus[i]);
            rep.residual = rep.residual.max(resid.abs());
            rep.intercept = rep.intercept.max((self.alpha[i] + bi.dot(&xi) - self.y_hat[i]).abs());
        }
        let min_sign = self
            .beta
            .iter()
            .chain(&self.eps_plus)
            .chain(&self.eps_minus)
            .fold(0.0_f64, |m, &v| m.min(v));
        rep.sign = -min_sign;
        if let (Some(pen), Some(z)) = (l0, &self.z) {
            for ((_, j), &b) in self.beta.indexed_iter() {
                let cap = if z[j] { pen.big_m() } else { 0.0 };
                rep.big_m = rep.big_m.max(b - cap);
            }
            let chosen = z.iter().filter(|&&s| s).count();
            rep.cardinality = (chosen as f64 - pen.k() as f64).max(0.0);
        }
        rep
    }

    /// Evaluates the concave envelope `min_i α_i + β_i'x` at `x`.
    pub fn envelope(&self, x: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| self.alpha[i] + self.beta.row(i).iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Fidelity part of the objective: `τ Σε⁺ + (1 − τ) Σε⁻`.
    pub fn check_fidelity(&self, tau: f64) -> f64 {
        tau * self.eps_plus.iter().sum::<f64>() + (1.0 - tau) * self.eps_minus.iter().sum::<f64>()
    }

    pub fn beta_l1(&self) -> f64 {
        self.beta.iter().map(|b| b.abs()).sum()
    }
}
