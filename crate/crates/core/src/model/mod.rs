//! Domain types and the regression formulations.

mod builders;
mod dataset;
mod fit;
mod loss;
mod params;
mod problem;

pub use builders::{Pairs, add_l0, add_l1, add_l1_ball, afriat_row, build_cer, build_cqr};
pub use dataset::Dataset;
pub use fit::{FitResult, InvariantReport, SolveMeta};
pub use loss::{check_loss, expectile_loss};
pub use params::{ExpectileLevel, L0Penalty, L1Penalty, QuantileLevel};
pub use problem::{Constraint, OptProblem, RegressionLayout, RowTag, Sense, Variable};
