//! Fixed-format MPS export, with a QMATRIX section for quadratic objectives.
//!
//! Rows are named `R0000001…` and columns `C0000001…` in problem order so
//! names fit the 8-character fields; numbers are written in the 12-character
//! value fields with as many significant digits as fit.

use std::fmt::Write as _;

use crate::model::{Constraint, OptProblem, RowTag, Sense};

use super::SolverError;

const OBJ: &str = "OBJ";

fn row_name(r: usize) -> String {
    format!("R{:07}", r + 1)
}

fn col_name(c: usize) -> String {
    format!("C{:07}", c + 1)
}

/// Decimal form of `v` that fits a 12-character MPS value field, choosing
/// between plain and exponent notation by round-trip error.
fn number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let mut candidates = Vec::new();
    for digits in 0..=11 {
        let fixed = format!("{v:.digits$}");
        if fixed.len() <= 12 {
            candidates.push(fixed);
        }
        let sci = format!("{v:.digits$e}");
        if sci.len() <= 12 {
            candidates.push(sci);
        }
    }
    candidates
        .into_iter()
        .min_by(|a, b| {
            let err = |s: &str| (s.parse::<f64>().unwrap_or(f64::INFINITY) - v).abs();
            err(a).total_cmp(&err(b))
        })
        .unwrap_or(plain)
}

fn entry(out: &mut String, col: &str, row: &str, value: f64) {
    let _ = writeln!(out, "    {col:<8}  {row:<8}  {:>12}", number(value));
}

fn marker(out: &mut String, kind: &str) {
    let _ = writeln!(out, "    MARKER    'MARKER'                 '{kind}'");
}

fn bound(out: &mut String, kind: &str, col: &str, value: Option<f64>) {
    match value {
        Some(v) => {
            let _ = writeln!(out, " {kind} BND       {col:<8}  {:>12}", number(v));
        }
        None => {
            let _ = writeln!(out, " {kind} BND       {col}");
        }
    }
}

/// Writes `problem` as fixed-format MPS text (minimisation).
pub fn export_mps(problem: &OptProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          CQRMODEL");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ}");
    for (r, row) in problem.rows().iter().enumerate() {
        let kind = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {kind}  {}", row_name(r));
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_vars()];
    for (r, row) in problem.rows().iter().enumerate() {
        for &(c, a) in &row.coeffs {
            by_col[c].push((r, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (c, var) in problem.vars().iter().enumerate() {
        if var.integer != in_int {
            marker(&mut out, if var.integer { "INTORG" } else { "INTEND" });
            in_int = var.integer;
        }
        let name = col_name(c);
        entry(&mut out, &name, OBJ, problem.cost()[c]);
        for &(r, a) in &by_col[c] {
            entry(&mut out, &name, &row_name(r), a);
        }
    }
    if in_int {
        marker(&mut out, "INTEND");
    }

    out.push_str("RHS\n");
    for (r, row) in problem.rows().iter().enumerate() {
        if row.rhs != 0.0 {
            entry(&mut out, "RHS", &row_name(r), row.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for (c, var) in problem.vars().iter().enumerate() {
        let name = col_name(c);
        let (l, u) = (var.lower, var.upper);
        if l == u {
            bound(&mut out, "FX", &name, Some(l));
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => bound(&mut out, "FR", &name, None),
            (false, true) => {
                bound(&mut out, "MI", &name, None);
                bound(&mut out, "UP", &name, Some(u));
            }
            (true, _) => {
                if l != 0.0 || var.integer {
                    bound(&mut out, "LO", &name, Some(l));
                }
                if u.is_finite() {
                    bound(&mut out, "UP", &name, Some(u));
                }
            }
        }
    }

    if let Some(q) = problem.quadratic().filter(|_| problem.has_quadratic()) {
        out.push_str("QMATRIX\n");
        for (c, &w) in q.iter().enumerate().filter(|&(_, &w)| w > 0.0) {
            let name = col_name(c);
            entry(&mut out, &name, &name, 2.0 * w);
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> SolverError {
    SolverError::Backend(format!("MPS line {line}: {msg}"))
}

fn parse_num(tok: &str, line: usize) -> Result<f64, SolverError> {
    tok.parse().map_err(|_| parse_err(line, format!("bad number {tok:?}")))
}

/// Reads MPS text of the shape written by [`export_mps`] (also accepts free
/// format with the same sections). Row tags come back as
/// [`RowTag::Generic`] and the regression layout is not recovered.
pub fn parse_mps(text: &str) -> Result<OptProblem, SolverError> {
    use std::collections::HashMap;

    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Quad,
    }
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Constraint> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut problem = OptProblem::new();
    let mut pending_cost: Vec<f64> = Vec::new();
    let mut quad: Vec<(usize, f64)> = Vec::new();
    let mut integer = false;

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if !raw.starts_with(' ') {
            let head = raw.split_whitespace().next().unwrap_or("");
            section = match head {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "QMATRIX" => Section::Quad,
                "ENDATA" => break,
                other => return Err(parse_err(ln, format!("unsupported section {other}"))),
            };
            continue;
        }
        let t: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                let [kind, name] = t[..] else { return Err(parse_err(ln, "expected row type and name")) };
                let sense = match kind {
                    "N" => {
                        obj_row.get_or_insert_with(|| name.to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(parse_err(ln, format!("unknown row type {other}"))),
                };
                row_index.insert(name.to_string(), rows.len());
                rows.push(Constraint { coeffs: Vec::new(), sense, rhs: 0.0, tag: RowTag::Generic(rows.len()) });
            }
            Section::Columns => {
                if t.len() >= 3 && t[1] == "'MARKER'" {
                    integer = t[2] == "'INTORG'";
                    continue;
                }
                if t.len() < 3 || t.len() % 2 == 0 {
                    return Err(parse_err(ln, "expected column name and (row, value) pairs"));
                }
                let col = *col_index.entry(t[0].to_string()).or_insert_with(|| {
                    pending_cost.push(0.0);
                    if integer { problem.add_binary(0.0) } else { problem.add_var(0.0, f64::INFINITY, 0.0) }
                });
                if integer {
                    // explicit bounds follow in BOUNDS
                    problem.set_bounds(col, 0.0, f64::INFINITY);
                }
                for pair in t[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        pending_cost[col] += v;
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| parse_err(ln, format!("unknown row {}", pair[0])))?;
                        rows[r].coeffs.push((col, v));
                    }
                }
            }
            Section::Rhs => {
                for pair in t[1..].chunks(2) {
                    if pair.len() < 2 {
                        return Err(parse_err(ln, "dangling RHS entry"));
                    }
                    if let Some(&r) = row_index.get(pair[0]) {
                        rows[r].rhs = parse_num(pair[1], ln)?;
                    }
                }
            }
            Section::Bounds => {
                if t.len() < 3 {
                    return Err(parse_err(ln, "short bound line"));
                }
                let col = *col_index.get(t[2]).ok_or_else(|| parse_err(ln, format!("unknown column {}", t[2])))?;
                let v = t.get(3).map(|s| parse_num(s, ln)).transpose()?;
                let var = problem.vars()[col];
                let need = |v: Option<f64>| v.ok_or_else(|| parse_err(ln, "bound needs a value"));
                let (l, u) = match t[0] {
                    "FR" => (f64::NEG_INFINITY, f64::INFINITY),
                    "MI" => (f64::NEG_INFINITY, var.upper),
                    "PL" => (var.lower, f64::INFINITY),
                    "LO" => (need(v)?, var.upper),
                    "UP" => (var.lower, need(v)?),
                    "FX" => (need(v)?, need(v)?),
                    "BV" => (0.0, 1.0),
                    other => return Err(parse_err(ln, format!("unsupported bound type {other}"))),
                };
                problem.set_bounds(col, l, u);
            }
            Section::Quad => {
                let [a, b, v] = t[..] else { return Err(parse_err(ln, "expected two columns and a value")) };
                let (ca, cb) = (col_index.get(a), col_index.get(b));
                match (ca, cb) {
                    (Some(&ca), Some(&cb)) if ca == cb => quad.push((ca, parse_num(v, ln)? / 2.0)),
                    (Some(_), Some(_)) => return Err(parse_err(ln, "off-diagonal quadratic terms are not supported")),
                    _ => return Err(parse_err(ln, "unknown column in QMATRIX")),
                }
            }
            Section::None => {}
        }
    }
    for (c, cost) in pending_cost.into_iter().enumerate() {
        problem.add_cost(c, cost);
    }
    for row in rows {
        problem.add_row(row).map_err(|e| SolverError::Backend(e.to_string()))?;
    }
    for (c, w) in quad {
        problem.set_quadratic(c, w).map_err(|e| SolverError::Backend(e.to_string()))?;
    }
    Ok(problem)
}
