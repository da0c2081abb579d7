//! CSV ingestion with orientation handling and optional header row/column.

use std::path::Path;

use ndarray::Array2;

use crate::config::Orientation;
use crate::error::{CliError, Result};

/// A parsed numeric table plus any names found in a header row/column.
#[derive(Debug, Clone)]
pub struct IngestedMatrix {
    /// Observations x variables, after applying the requested orientation.
    pub values: Array2<f64>,
    /// One name per variable when the file carried them.
    pub variable_names: Option<Vec<String>>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Read a rectangular CSV into observations x variables order.
///
/// A first row (or first column) containing any non-numeric cell is treated
/// as a header of names; every remaining cell must parse as a number.
pub fn ingest_csv(path: &Path, orientation: Orientation) -> Result<IngestedMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "file is empty".into(),
        });
    }

    // a header row/column reveals itself by failing to parse as numbers
    let header_row = rows[0].iter().skip(1).any(|c| parse_cell(c).is_none());
    let first_data_row = usize::from(header_row);
    let header_col = rows
        .iter()
        .skip(first_data_row)
        .any(|r| r.first().map(|c| parse_cell(c).is_none()).unwrap_or(false));

    let first_data_col = usize::from(header_col);
    let width = rows[first_data_row].len();
    for (i, row) in rows.iter().enumerate().skip(first_data_row) {
        if row.len() != width {
            return Err(CliError::RaggedRows {
                path: path.to_path_buf(),
                line: i + 1,
                got: row.len(),
                expected: width,
            });
        }
    }

    let n_rows = rows.len() - first_data_row;
    let n_cols = width - first_data_col;
    if n_rows == 0 || n_cols == 0 {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no numeric body".into(),
        });
    }

    let mut values = Array2::zeros((n_rows, n_cols));
    for (r, row) in rows.iter().enumerate().skip(first_data_row) {
        for (c, cell) in row.iter().enumerate().skip(first_data_col) {
            match parse_cell(cell) {
                Some(v) => values[[r - first_data_row, c - first_data_col]] = v,
                None => {
                    return Err(CliError::NonNumericCell {
                        path: path.to_path_buf(),
                        line: r + 1,
                        column: c + 1,
                        cell: cell.clone(),
                    })
                }
            }
        }
    }

    let row_names: Option<Vec<String>> = header_col.then(|| {
        rows.iter()
            .skip(first_data_row)
            .map(|r| r[0].clone())
            .collect()
    });
    let col_names: Option<Vec<String>> = header_row.then(|| {
        rows[0]
            .iter()
            .skip(first_data_col)
            .map(|s| s.to_string())
            .collect()
    });

    // after orienting, variables are columns; names follow the file axis
    let (values, variable_names) = match orientation {
        Orientation::RowsAreObservations => (values, col_names),
        Orientation::ColumnsAreObservations => (values.reversed_axes().as_standard_layout().to_owned(), row_names),
    };

    Ok(IngestedMatrix {
        values,
        variable_names,
    })
}
