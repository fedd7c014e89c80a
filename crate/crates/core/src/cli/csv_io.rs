//! CSV ingestion: header `z,a,y,<covariates...>` in any column order;
//! every column other than z/a/y becomes a named covariate.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ObservationRow, ObservationTable};

/// A table plus the covariate column names from the CSV header.
#[derive(Debug, Clone)]
pub struct NamedTable {
    pub table: ObservationTable,
    pub covariate_names: Vec<String>,
}

pub fn read_table(path: &Path) -> Result<NamedTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path.display().to_string(), format!("missing required column '{name}'")))
    };
    let z_col = find("z")?;
    let a_col = find("a")?;
    let y_col = find("y")?;

    let mut covariate_cols = Vec::new();
    let mut covariate_names = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i != z_col && i != a_col && i != y_col {
            covariate_cols.push(i);
            covariate_names.push(h.to_string());
        }
    }

    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::parse(format!("{}:{}", path.display(), row_idx + 2), e.to_string()))?;
        let loc = |col: usize| format!("{}:{} column '{}'", path.display(), row_idx + 2, &headers[col]);
        let field = |col: usize| -> Result<f64> {
            record
                .get(col)
                .ok_or_else(|| Error::parse(loc(col), "missing field"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(loc(col), e.to_string()))
        };
        let z = parse_binary(field(z_col)?, row_idx, "z")?;
        let a = parse_binary(field(a_col)?, row_idx, "a")?;
        let y = field(y_col)?;
        let x: Vec<f64> = covariate_cols
            .iter()
            .map(|&c| field(c))
            .collect::<Result<_>>()?;
        rows.push(ObservationRow::new(z, a, y, x));
    }

    let table = ObservationTable::new(rows)?;
    Ok(NamedTable {
        table,
        covariate_names,
    })
}

fn parse_binary(v: f64, row: usize, name: &str) -> Result<u8> {
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::MalformedRow {
            row,
            reason: format!("{name} must be 0 or 1, got {v}"),
        })
    }
}
