use std::path::Path;

use cqr_core::Dataset;

use crate::CliError;

/// Which CSV columns play which role.
#[derive(Debug, Clone, Default)]
pub struct Columns {
    /// Output column; the last column when not given.
    pub output: Option<String>,
    pub id: Option<String>,
    /// Input columns; every remaining column when not given.
    pub inputs: Option<Vec<String>>,
}

fn find(headers: &[String], name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Flags(format!("no column named {name:?}; the header has {}", headers.join(", "))))
}

/// Reads a headed CSV file into a dataset. Every input and output cell must
/// parse as a finite number; errors name the line and column.
pub fn load(path: &Path, cols: &Columns) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Csv(format!("{}: missing header row", path.display())));
    }

    let output = match &cols.output {
        Some(name) => find(&headers, name)?,
        None => headers.len() - 1,
    };
    let id = cols.id.as_deref().map(|name| find(&headers, name)).transpose()?;
    let inputs: Vec<usize> = match &cols.inputs {
        Some(names) => names.iter().map(|n| find(&headers, n)).collect::<Result<_, _>>()?,
        None => (0..headers.len()).filter(|&c| c != output && Some(c) != id).collect(),
    };
    if inputs.is_empty() {
        return Err(CliError::Csv(format!("{}: no input columns", path.display())));
    }
    if inputs.contains(&output) || id.is_some_and(|c| inputs.contains(&c) || c == output) {
        return Err(CliError::Flags("input, output and id columns must be distinct".into()));
    }

    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut ids = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |c: usize| -> Result<f64, CliError> {
            let raw = record.get(c).ok_or_else(|| {
                CliError::Csv(format!("{}: line {line}: missing column {:?}", path.display(), headers[c]))
            })?;
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Csv(format!(
                    "{}: line {line}, column {:?}: {raw:?} is not a finite number",
                    path.display(),
                    headers[c]
                ))
            })
        };
        rows.push(inputs.iter().map(|&c| cell(c)).collect::<Result<Vec<f64>, _>>()?);
        y.push(cell(output)?);
        if let Some(c) = id {
            ids.push(record.get(c).unwrap_or_default().to_string());
        }
    }

    let names = inputs.iter().map(|&c| headers[c].clone()).collect();
    let mut ds = Dataset::from_rows(&rows, y)
        .and_then(|ds| ds.with_variable_names(names))
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    if id.is_some() {
        ds = ds.with_observation_ids(ids).map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    }
    Ok(ds)
}

/// Name of the output column actually used.
pub fn output_name(path: &Path, cols: &Columns) -> Result<String, CliError> {
    if let Some(name) = &cols.output {
        return Ok(name.clone());
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    Ok(headers.iter().last().unwrap_or_default().trim().to_string())
}
