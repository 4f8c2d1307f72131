use cqr_core::estimators::{
    EstimatorSpec, Family, Penalty, ReturnsToScale, SUPPORT_THRESHOLD, SolveMode, expectile_to_quantile, rts_label,
    support,
};
use cqr_core::model::{InvariantReport, SolveMeta};
use cqr_core::{Dataset, FitResult};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub x: Vec<f64>,
    pub y: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub y_hat: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub returns_to_scale: ReturnsToScale,
}

/// How the big-M value was set, kept next to the spec so a fit can be
/// reproduced from its document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigMEcho {
    /// Largest slope of the unpenalized fit; absent when M was given directly.
    pub anchor: Option<f64>,
    pub multiplier: Option<f64>,
}

/// Everything a fit produced, self-contained so it can be re-checked offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub spec: EstimatorSpec,
    pub estimator: String,
    pub big_m: Option<BigMEcho>,
    pub output: String,
    pub variables: Vec<String>,
    /// Set for quantile fits.
    pub tau: Option<f64>,
    /// Set for expectile fits.
    pub tilde_tau: Option<f64>,
    /// Share of observations below the expectile frontier.
    pub converted_quantile: Option<f64>,
    pub objective: f64,
    /// Names of the variables with a nonzero slope somewhere.
    pub support: Vec<String>,
    pub selection: Option<Vec<bool>>,
    pub observations: Vec<Observation>,
    pub meta: SolveMeta,
}

impl ResultDocument {
    pub fn new(spec: EstimatorSpec, big_m: Option<BigMEcho>, output: String, ds: &Dataset, fit: &FitResult) -> Self {
        let variables: Vec<String> = (0..ds.d()).map(|j| ds.variable_name(j)).collect();
        let observations = (0..ds.n())
            .map(|i| Observation {
                id: ds.observation_ids().map_or_else(|| (i + 1).to_string(), |ids| ids[i].clone()),
                x: ds.x(i).to_vec(),
                y: ds.y(i),
                alpha: fit.alpha[i],
                beta: fit.beta.row(i).to_vec(),
                y_hat: fit.y_hat[i],
                eps_plus: fit.eps_plus[i],
                eps_minus: fit.eps_minus[i],
                returns_to_scale: rts_label(fit.alpha[i]),
            })
            .collect();
        let (tau, tilde_tau, converted) = match spec.family {
            Family::Quantile => (Some(spec.level), None, None),
            Family::Expectile => (None, Some(spec.level), Some(expectile_to_quantile(fit))),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            spec,
            estimator: spec.name(),
            big_m,
            output,
            support: support(fit, SUPPORT_THRESHOLD).into_iter().map(|j| variables[j].clone()).collect(),
            variables,
            tau,
            tilde_tau,
            converted_quantile: converted,
            objective: fit.objective,
            selection: fit.z.clone(),
            observations,
            meta: fit.meta.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: Self = serde_json::from_str(text).map_err(|e| CliError::Csv(format!("result document: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Csv(format!(
                "result document has schema version {}, this tool reads {SCHEMA_VERSION}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    /// Rebuilds the dataset and fit the document describes.
    pub fn restore(&self) -> Result<(Dataset, FitResult), CliError> {
        let bad = |m: String| CliError::Csv(format!("result document: {m}"));
        let d = self.variables.len();
        if self.observations.iter().any(|o| o.x.len() != d || o.beta.len() != d) {
            return Err(bad(format!("every observation needs {d} inputs and slopes")));
        }
        let rows: Vec<Vec<f64>> = self.observations.iter().map(|o| o.x.clone()).collect();
        let y = self.observations.iter().map(|o| o.y).collect();
        let ds = Dataset::from_rows(&rows, y)
            .and_then(|ds| ds.with_variable_names(self.variables.clone()))
            .and_then(|ds| ds.with_observation_ids(self.observations.iter().map(|o| o.id.clone()).collect()))
            .map_err(|e| bad(e.to_string()))?;
        let n = self.observations.len();
        let beta = Array2::from_shape_vec((n, d), self.observations.iter().flat_map(|o| o.beta.clone()).collect())
            .map_err(|e| bad(e.to_string()))?;
        let fit = FitResult {
            alpha: self.observations.iter().map(|o| o.alpha).collect(),
            beta,
            eps_plus: self.observations.iter().map(|o| o.eps_plus).collect(),
            eps_minus: self.observations.iter().map(|o| o.eps_minus).collect(),
            y_hat: self.observations.iter().map(|o| o.y_hat).collect(),
            z: self.selection.clone(),
            objective: self.objective,
            meta: self.meta.clone(),
        };
        Ok((ds, fit))
    }

    /// Re-measures the fit invariants from the document alone.
    pub fn verify(&self) -> Result<Verification, CliError> {
        let (ds, fit) = self.restore()?;
        let l0 = self
            .spec
            .l0_penalty(ds.d())
            .map_err(|e| CliError::Csv(format!("result document: {e}")))?;
        let report = fit.invariants(&ds, l0);
        let scale = ds.output().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let numeric = 1e-6 * scale;
        // cutting-plane fits satisfy the Afriat rows only to the loop tolerance
        let afriat_tol = match self.spec.mode {
            SolveMode::CuttingPlane { tol, .. } => tol + numeric,
            SolveMode::Full => numeric,
        };
        let mut failures = Vec::new();
        let mut check = |name: &str, value: f64, tol: f64| {
            if !(value <= tol) {
                failures.push(format!("{name} violated by {value:.3e} (tolerance {tol:.1e})"));
            }
        };
        check("afriat", report.afriat, afriat_tol);
        check("residual", report.residual, numeric);
        check("intercept", report.intercept, numeric);
        check("sign", report.sign, numeric);
        check("big_m", report.big_m, numeric);
        check("cardinality", report.cardinality, 0.0);
        if let Penalty::L0 { .. } = self.spec.penalty {
            if self.selection.is_none() {
                failures.push("L0 fit without a selection".into());
            }
        }
        Ok(Verification { report, failures })
    }
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub report: InvariantReport,
    pub failures: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use cqr_core::estimators::fit_with;
    use cqr_core::solver::SolverConfig;

    use super::*;

    fn sample() -> (Dataset, EstimatorSpec, FitResult) {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0 + i as f64 * 0.7, 2.0 + ((i * 5) % 7) as f64]).collect();
        let y = rows.iter().map(|r| r[0].sqrt() + 0.5 * r[1].ln() + 0.1 * (r[0] * 3.0).sin()).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let spec = EstimatorSpec::quantile(0.7).unwrap().with_penalty(Penalty::L0 { k: 1, big_m: 2.0 });
        let fit = fit_with(&ds, &spec, &SolverConfig::default()).unwrap();
        (ds, spec, fit)
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let (ds, spec, fit) = sample();
        let doc = ResultDocument::new(spec, None, "y".into(), &ds, &fit);
        let back = ResultDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let (ds2, fit2) = back.restore().unwrap();
        assert_eq!(fit2, fit);
        assert_eq!(ds2.inputs(), ds.inputs());
    }

    #[test]
    fn verify_passes_and_catches_tampering() {
        let (ds, spec, fit) = sample();
        let mut doc = ResultDocument::new(spec, None, "y".into(), &ds, &fit);
        assert!(doc.verify().unwrap().passed());
        doc.observations[3].y_hat += 5.0;
        let v = doc.verify().unwrap();
        assert!(!v.passed());
        assert!(v.failures.iter().any(|f| f.starts_with("afriat")));
    }

    #[test]
    fn other_schema_versions_are_rejected() {
        let (ds, spec, fit) = sample();
        let mut doc = ResultDocument::new(spec, None, "y".into(), &ds, &fit);
        doc.schema_version = 99;
        assert_eq!(ResultDocument::from_json(&doc.to_json()).unwrap_err().code(), 2);
    }
}
