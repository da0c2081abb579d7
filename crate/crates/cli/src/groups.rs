//! Grouping-file parsing: a two-column CSV of (variable name or 1-based
//! index, group id). Variables absent from the file become singleton groups.

use std::collections::HashMap;
use std::path::Path;

use pmclust_core::Grouping;

use crate::error::{CliError, Result};

pub fn read_grouping(
    path: &Path,
    n_vars: usize,
    variable_names: Option<&[String]>,
    group_means: bool,
    group_variances: bool,
) -> Result<Grouping> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;

    let name_index: HashMap<&str, usize> = variable_names
        .map(|names| {
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_str(), i))
                .collect()
        })
        .unwrap_or_default();

    // group labels in the file are arbitrary; remap densely in first
    // appearance order, leaving room for singleton ids afterwards
    let mut label_to_id: HashMap<String, usize> = HashMap::new();
    let mut assignment: Vec<Option<usize>> = vec![None; n_vars];

    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(CliError::RaggedRows {
                path: path.to_path_buf(),
                line: i + 1,
                got: record.len(),
                expected: 2,
            });
        }
        let var_field = record[0].trim();
        let group_field = record[1].trim().to_string();

        let var = match var_field.parse::<usize>() {
            Ok(idx1) if idx1 >= 1 && idx1 <= n_vars => idx1 - 1,
            Ok(idx1) => {
                return Err(CliError::Config(format!(
                    "grouping file line {}: variable index {idx1} out of 1..={n_vars}",
                    i + 1
                )))
            }
            Err(_) => match name_index.get(var_field) {
                Some(&idx) => idx,
                None => {
                    return Err(CliError::Config(format!(
                        "grouping file line {}: unknown variable {var_field:?}",
                        i + 1
                    )))
                }
            },
        };
        if assignment[var].is_some() {
            return Err(CliError::Config(format!(
                "grouping file line {}: variable {var_field:?} assigned twice",
                i + 1
            )));
        }
        let next_id = label_to_id.len();
        let id = *label_to_id.entry(group_field).or_insert(next_id);
        assignment[var] = Some(id);
    }

    let mut next_singleton = label_to_id.len();
    let group_of: Vec<usize> = assignment
        .into_iter()
        .map(|a| {
            a.unwrap_or_else(|| {
                let id = next_singleton;
                next_singleton += 1;
                id
            })
        })
        .collect();

    Grouping::new(group_of, group_means, group_variances).map_err(CliError::from)
}
