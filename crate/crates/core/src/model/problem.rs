use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// What a row encodes. Tags let a solver session recognise rows it has
/// already seen, so appending cuts can reuse the previous basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowTag {
    /// `ŷ_i + ε⁺_i − ε⁻_i = y_i`
    Fidelity(usize),
    /// `ŷ_i + β_i'(x_h − x_i) ≥ ŷ_h`
    Afriat { i: usize, h: usize },
    /// `β_{j,i} − M z_j ≤ 0`
    BigM { var: usize, obs: usize },
    /// `Σ z_j ≤ k`
    Cardinality,
    /// `Σ_j β_{j,i} ≤ r`
    L1Ball(usize),
    Generic(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

/// Where the regression variables live inside an [`OptProblem`].
///
/// Columns are ordered `ŷ (n) | β (n·d, observation-major) | ε⁺ (n) | ε⁻ (n)`,
/// followed by the `d` selection binaries when an L0 block is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionLayout {
    pub n: usize,
    pub d: usize,
    pub selection: Option<usize>,
}

impl RegressionLayout {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d, selection: None }
    }

    pub fn base_vars(&self) -> usize {
        self.n * (self.d + 3)
    }

    pub fn y_hat(&self, i: usize) -> usize {
        i
    }

    pub fn beta(&self, i: usize, j: usize) -> usize {
        self.n + i * self.d + j
    }

    pub fn eps_plus(&self, i: usize) -> usize {
        self.n * (self.d + 1) + i
    }

    pub fn eps_minus(&self, i: usize) -> usize {
        self.n * (self.d + 2) + i
    }

    pub fn z(&self, j: usize) -> Option<usize> {
        self.selection.map(|off| off + j)
    }

    pub fn beta_vars(&self) -> std::ops::Range<usize> {
        self.n..self.n * (self.d + 1)
    }
}

/// Backend-neutral minimisation problem:
/// `min c'x + Σ q_j x_j²` subject to linear rows, bounds and integrality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptProblem {
    vars: Vec<Variable>,
    cost: Vec<f64>,
    quadratic: Option<Vec<f64>>,
    rows: Vec<Constraint>,
    layout: Option<RegressionLayout>,
}

impl Default for OptProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl OptProblem {
    pub fn new() -> Self {
        Self { vars: Vec::new(), cost: Vec::new(), quadratic: None, rows: Vec::new(), layout: None }
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.push_var(Variable { lower, upper, integer: false }, cost)
    }

    pub fn add_binary(&mut self, cost: f64) -> usize {
        self.push_var(Variable { lower: 0.0, upper: 1.0, integer: true }, cost)
    }

    fn push_var(&mut self, var: Variable, cost: f64) -> usize {
        self.vars.push(var);
        self.cost.push(cost);
        if let Some(q) = &mut self.quadratic {
            q.push(0.0);
        }
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, row: Constraint) -> Result<()> {
        if let Some(&(v, _)) = row.coeffs.iter().find(|&&(v, _)| v >= self.vars.len()) {
            return Err(Error::InvalidParameter(format!(
                "row references variable {v} but only {} are declared",
                self.vars.len()
            )));
        }
        if !row.rhs.is_finite() || row.coeffs.iter().any(|&(_, a)| !a.is_finite()) {
            return Err(Error::InvalidParameter("row has non-finite data".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Sets the weight of `x_var²` in the objective. Weights must be ≥ 0 so the
    /// objective stays convex.
    pub fn set_quadratic(&mut self, var: usize, weight: f64) -> Result<()> {
        if var >= self.vars.len() {
            return Err(Error::InvalidParameter(format!("variable {var} out of range")));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("quadratic weight {weight} must be finite and ≥ 0")));
        }
        let n = self.vars.len();
        self.quadratic.get_or_insert_with(|| vec![0.0; n])[var] = weight;
        Ok(())
    }

    pub fn add_cost(&mut self, var: usize, delta: f64) {
        self.cost[var] += delta;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.vars[var].lower = lower;
        self.vars[var].upper = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn quadratic(&self) -> Option<&[f64]> {
        self.quadratic.as_deref()
    }

    pub fn has_quadratic(&self) -> bool {
        self.quadratic.as_ref().is_some_and(|q| q.iter().any(|&w| w > 0.0))
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn layout(&self) -> Option<RegressionLayout> {
        self.layout
    }

    pub fn set_layout(&mut self, layout: RegressionLayout) {
        self.layout = Some(layout);
    }

    pub fn integer_vars(&self) -> Vec<usize> {
        self.vars.iter().enumerate().filter(|(_, v)| v.integer).map(|(i, _)| i).collect()
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    pub fn count_rows(&self, pred: impl Fn(&RowTag) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.tag)).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.cost.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self
            .quadratic
            .as_ref()
            .map_or(0.0, |q| q.iter().zip(x).map(|(w, v)| w * v * v).sum());
        lin + quad
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &val)| (v.lower - val).max(val - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}
