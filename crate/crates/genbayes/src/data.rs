//! CSV readers for the input formats.
//!
//! Every reader skips lines starting with `#`, so tables written by this
//! tool can be fed back in.

use std::path::Path;

use genbayes_core::quantiles::GroupedSample;
use genbayes_core::survival::SurvivalDataset;
use genbayes_core::Datum;

use crate::error::{CliError, Result};

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input { path: path.to_path_buf(), message: e.to_string() })
}

fn input_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Input { path: path.to_path_buf(), message: message.into() }
}

fn headers(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    let h = rdr.headers().map_err(|e| input_error(path, e.to_string()))?;
    Ok(h.iter().map(str::to_owned).collect())
}

/// Parses one cell; `row` counts file lines from one, header included.
fn number(path: &Path, row: u64, column: &str, cell: &str) -> Result<f64> {
    let value: f64 = cell.parse().map_err(|_| CliError::Cell {
        path: path.to_path_buf(),
        row,
        column: column.to_owned(),
        message: format!("`{cell}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(CliError::Cell { path: path.to_path_buf(), row, column: column.to_owned(), message: "value is not finite".into() });
    }
    Ok(value)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// A numeric table: column names and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = reader(path)?;
    let columns = headers(path, &mut rdr)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| input_error(path, e.to_string()))?;
        let line = line_of(&record);
        let row = record.iter().zip(&columns).map(|(cell, col)| number(path, line, col, cell)).collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(input_error(path, "no data rows"));
    }
    Ok(Table { columns, rows })
}

/// Data for the generic fit: one column gives scalar data, more columns give
/// regression pairs with the first column as response.
pub fn read_fit_data(path: &Path) -> Result<(Vec<String>, Vec<Datum>)> {
    let table = read_table(path)?;
    let data = if table.columns.len() == 1 {
        table.rows.iter().map(|r| Datum::Scalar(r[0])).collect()
    } else {
        table.rows.iter().map(|r| Datum::Regression { response: r[0], covariates: r[1..].to_vec() }).collect()
    };
    Ok((table.columns, data))
}

/// Survival table with header `time,event,x1,...,xp`; returns the marker names.
pub fn read_survival(path: &Path) -> Result<(Vec<String>, SurvivalDataset)> {
    let mut rdr = reader(path)?;
    let columns = headers(path, &mut rdr)?;
    if columns.len() < 3 || columns[0] != "time" || columns[1] != "event" {
        return Err(input_error(path, "survival header must be `time,event,x1,...,xp`"));
    }
    let p = columns.len() - 2;
    let (mut times, mut events, mut covariates) = (Vec::new(), Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| input_error(path, e.to_string()))?;
        let line = line_of(&record);
        times.push(number(path, line, "time", &record[0])?);
        events.push(match &record[1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(CliError::Cell {
                    path: path.to_path_buf(),
                    row: line,
                    column: "event".into(),
                    message: format!("`{other}` is not 0 or 1"),
                })
            }
        });
        for (cell, col) in record.iter().zip(&columns).skip(2) {
            covariates.push(number(path, line, col, cell)?);
        }
    }
    if times.is_empty() {
        return Err(input_error(path, "no data rows"));
    }
    let data = SurvivalDataset::from_row_major(times, events, covariates, p)?;
    Ok((columns[2..].to_vec(), data))
}

/// Grouped table with header `group,value`.
pub fn read_grouped(path: &Path) -> Result<GroupedSample> {
    let mut rdr = reader(path)?;
    let columns = headers(path, &mut rdr)?;
    if columns != ["group", "value"] {
        return Err(input_error(path, "grouped header must be `group,value`"));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| input_error(path, e.to_string()))?;
        let value = number(path, line_of(&record), "value", &record[1])?;
        rows.push((record[0].to_owned(), value));
    }
    if rows.is_empty() {
        return Err(input_error(path, "no data rows"));
    }
    Ok(GroupedSample::from_rows(rows)?)
}
