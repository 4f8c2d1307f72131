use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations of `d` nonnegative inputs and one real output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Array2<f64>,
    output: Vec<f64>,
    variable_names: Option<Vec<String>>,
    observation_ids: Option<Vec<String>>,
}

impl Dataset {
    /// `inputs` is `n × d`, one row per observation.
    pub fn new(inputs: Array2<f64>, output: Vec<f64>) -> Result<Self> {
        let (n, d) = inputs.dim();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 observations, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidData("need at least 1 input variable".into()));
        }
        if output.len() != n {
            return Err(Error::InvalidData(format!(
                "output has {} entries but inputs have {n} rows",
                output.len()
            )));
        }
        for ((i, j), &v) in inputs.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("input ({i}, {j}) is not finite")));
            }
            if v < 0.0 {
                return Err(Error::InvalidData(format!("input ({i}, {j}) = {v} is negative")));
            }
        }
        if let Some(i) = output.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidData(format!("output {i} is not finite")));
        }
        Ok(Self { inputs, output, variable_names: None, observation_ids: None })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], output: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged input rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let inputs = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        Self::new(inputs, output)
    }

    pub fn with_variable_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::InvalidData(format!(
                "{} variable names for {} inputs",
                names.len(),
                self.d()
            )));
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    pub fn with_observation_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::InvalidData(format!(
                "{} observation ids for {} observations",
                ids.len(),
                self.n()
            )));
        }
        self.observation_ids = Some(ids);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn d(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn x(&self, i: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(i)
    }

    pub fn y(&self, i: usize) -> f64 {
        self.output[i]
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    pub fn observation_ids(&self) -> Option<&[String]> {
        self.observation_ids.as_deref()
    }

    /// Label for variable `j`, falling back to `x{j+1}`.
    pub fn variable_name(&self, j: usize) -> String {
        match &self.variable_names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    /// Keeps only the listed input columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.d()) {
            return Err(Error::InvalidParameter(format!("column {bad} out of range")));
        }
        let mut out = Self::new(self.inputs.select(Axis(1), cols), self.output.clone())?;
        out.variable_names = self
            .variable_names
            .as_ref()
            .map(|names| cols.iter().map(|&c| names[c].clone()).collect());
        out.observation_ids = self.observation_ids.clone();
        Ok(out)
    }

    /// Keeps only the listed observations, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::InvalidParameter(format!("row {bad} out of range")));
        }
        let output = rows.iter().map(|&r| self.output[r]).collect();
        let mut out = Self::new(self.inputs.select(Axis(0), rows), output)?;
        out.variable_names = self.variable_names.clone();
        out.observation_ids = self
            .observation_ids
            .as_ref()
            .map(|ids| rows.iter().map(|&r| ids[r].clone()).collect());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_negative_and_nonfinite() {
        assert!(Dataset::new(array![[1.0], [-0.5]], vec![1.0, 2.0]).is_err());
        assert!(Dataset::new(array![[1.0], [f64::NAN]], vec![1.0, 2.0]).is_err());
        assert!(Dataset::new(array![[1.0], [2.0]], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Dataset::new(array![[1.0]], vec![1.0]).is_err());
        assert!(Dataset::new(Array2::zeros((3, 0)), vec![1.0; 3]).is_err());
        assert!(Dataset::new(array![[1.0], [2.0]], vec![1.0]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0, 2.0], vec![1.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn column_and_row_selection() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]], vec![1.0, 2.0, 3.0])
            .unwrap()
            .with_variable_names(vec!["a".into(), "b".into(), "c".into()])
            .unwrap();
        let cols = ds.select_columns(&[2, 0]).unwrap();
        assert_eq!(cols.d(), 2);
        assert_eq!(cols.x(1).to_vec(), vec![6.0, 4.0]);
        assert_eq!(cols.variable_name(0), "c");
        let rows = ds.select_rows(&[2, 0]).unwrap();
        assert_eq!(rows.output(), &[3.0, 1.0]);
        assert!(ds.select_rows(&[0]).is_err());
    }
}
