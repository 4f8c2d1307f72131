//! Penalized convex quantile and expectile regression.
//!
//! Shape-constrained (monotone, concave) production function estimators with
//! L1 shrinkage or L0 best-subset selection of input variables, solved through
//! an embedded LP/QP/MIP layer and a cutting-plane loop over the Afriat
//! inequalities. Cross-validation and a Monte Carlo harness sit on top.

pub mod cuts;
pub mod error;
pub mod estimators;
pub mod mc;
pub mod model;
pub mod solver;
pub mod tuning;

pub use error::{Error, Result};
pub use model::{Dataset, FitResult, OptProblem};
