//! Correlation-matrix and dataset CSV. Columns in errors are 1-based field
//! positions.

use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::{Error, Result};
use crate::graph::{is_identifier, NodeName};
use crate::sem::CorrelationMatrix;
use crate::simulate::Dataset;

fn records(text: &str) -> Result<Vec<(usize, StringRecord)>> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, 1, "syntax", e.to_string())
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn header_names(line: usize, fields: impl Iterator<Item = (usize, String)>) -> Result<Vec<NodeName>> {
    let mut names: Vec<NodeName> = Vec::new();
    for (col, f) in fields {
        if !is_identifier(&f) {
            return Err(Error::parse(line, col, "invalid_name", format!("`{f}` is not a valid node name")));
        }
        let n = NodeName::new(f)?;
        if names.contains(&n) {
            return Err(Error::parse(line, col, "duplicate_node", format!("column `{n}` appears twice")));
        }
        names.push(n);
    }
    Ok(names)
}

fn number(line: usize, col: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, col, "non_numeric", format!("`{field}` is not a finite number"))),
    }
}

/// Parses a square matrix: a header row of names (the first cell is
/// ignored), then one row per name beginning with that name.
pub fn parse_correlation_csv(text: &str) -> Result<CorrelationMatrix> {
    let recs = records(text)?;
    let Some((hline, header)) = recs.first() else {
        return Err(Error::parse(1, 1, "syntax", "empty correlation matrix"));
    };
    let names = header_names(*hline, header.iter().enumerate().skip(1).map(|(i, f)| (i + 1, f.to_string())))?;
    let k = names.len();
    let body = &recs[1..];
    if body.len() != k {
        let line = body.last().map_or(*hline, |r| r.0);
        return Err(Error::parse(
            line,
            1,
            "ragged_rows",
            format!("{} rows for {k} named columns", body.len()),
        ));
    }
    let mut rows = Vec::with_capacity(k);
    for (i, (line, rec)) in body.iter().enumerate() {
        if rec.len() != k + 1 {
            return Err(Error::parse(
                *line,
                rec.len().min(k + 1) + 1,
                "ragged_rows",
                format!("row has {} fields, expected {}", rec.len(), k + 1),
            ));
        }
        if rec[0] != *names[i].as_str() {
            return Err(Error::parse(
                *line,
                1,
                "name_mismatch",
                format!("row `{}` where `{}` was expected", &rec[0], names[i]),
            ));
        }
        rows.push(
            rec.iter()
                .enumerate()
                .skip(1)
                .map(|(j, f)| number(*line, j + 1, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let locate = |name: &str| {
        let i = names.iter().position(|n| n.as_str() == name).unwrap_or(0);
        (body[i].0, i + 2)
    };
    CorrelationMatrix::new(names.clone(), rows).map_err(|err| {
        let (line, column) = match &err {
            Error::NotSymmetric { row, col } | Error::OutOfRange { row, col, .. } => (locate(row).0, locate(col).1),
            Error::NotUnitDiagonal(n) => locate(n),
            _ => (*hline, 1),
        };
        Error::parse(line, column, err.code(), err.to_string())
    })
}

pub fn write_correlation_csv(r: &CorrelationMatrix) -> String {
    let mut out = String::new();
    for n in r.names() {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for (n, row) in r.names().iter().zip(r.rows()) {
        out.push_str(n.as_str());
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Reads a header of node names followed by numeric rows. An empty body
/// gives a dataset with no rows.
pub fn read_dataset_csv(text: &str) -> Result<Dataset> {
    let recs = records(text)?;
    let Some((hline, header)) = recs.first() else {
        return Err(Error::parse(1, 1, "syntax", "missing header row"));
    };
    let names = header_names(*hline, header.iter().enumerate().map(|(i, f)| (i + 1, f.to_string())))?;
    let mut columns = vec![Vec::with_capacity(recs.len() - 1); names.len()];
    for (line, rec) in &recs[1..] {
        if rec.len() != names.len() {
            return Err(Error::parse(
                *line,
                rec.len().min(names.len()) + 1,
                "ragged_rows",
                format!("row has {} fields, expected {}", rec.len(), names.len()),
            ));
        }
        for (j, f) in rec.iter().enumerate() {
            columns[j].push(number(*line, j + 1, f)?);
        }
    }
    Ok(Dataset::from_columns(names, columns)?.with_provenance("read from CSV"))
}

/// Writes every value with 17 significant digits, enough to round-trip.
pub fn write_dataset_csv(d: &Dataset) -> String {
    let mut out = String::with_capacity(d.n() * d.names().len() * 25);
    let header: Vec<&str> = d.names().iter().map(NodeName::as_str).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..d.n() {
        for (j, col) in d.columns().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", col[r]);
        }
        out.push('\n');
    }
    out
}
