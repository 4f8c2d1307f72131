use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie strictly between 0 and 1")))
    }
}

/// Quantile order τ ∈ (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        check_unit_interval("tau", tau)?;
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Expectile order τ̃ ∈ (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExpectileLevel(f64);

impl ExpectileLevel {
    pub fn new(tilde_tau: f64) -> Result<Self> {
        check_unit_interval("tilde_tau", tilde_tau)?;
        Ok(Self(tilde_tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

macro_rules! f64_conversions {
    ($t:ty) => {
        impl TryFrom<f64> for $t {
            type Error = Error;
            fn try_from(v: f64) -> Result<Self> {
                Self::new(v)
            }
        }
        impl From<$t> for f64 {
            fn from(v: $t) -> f64 {
                v.0
            }
        }
    };
}
f64_conversions!(QuantileLevel);
f64_conversions!(ExpectileLevel);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Penalty {
    lambda: f64,
}

impl L1Penalty {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda >= 0.0 && lambda.is_finite() {
            Ok(Self { lambda })
        } else {
            Err(Error::InvalidParameter(format!("lambda = {lambda} must be finite and ≥ 0")))
        }
    }

    pub fn lambda(self) -> f64 {
        self.lambda
    }
}

/// Cardinality bound `k` on the selected inputs with big-M constant `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L0Penalty {
    k: usize,
    big_m: f64,
}

impl L0Penalty {
    /// `d` is the number of inputs of the dataset the penalty will apply to.
    pub fn new(k: usize, big_m: f64, d: usize) -> Result<Self> {
        if k < 1 || k > d {
            return Err(Error::InvalidParameter(format!("subset size k = {k} must lie in [1, {d}]")));
        }
        if !(big_m > 0.0 && big_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("big-M = {big_m} must be finite and > 0")));
        }
        Ok(Self { k, big_m })
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn big_m(self) -> f64 {
        self.big_m
    }
}
