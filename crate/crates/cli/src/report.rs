//! The `report` command: render a run's JSON artifact as human-readable text.

use std::path::Path;

use pmclust_core::BenchSummary;

use crate::error::{CliError, Result};

pub fn render_report(path: &Path) -> Result<String> {
    let raw = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;

    match value.get("kind").and_then(|k| k.as_str()) {
        Some("fit") => Ok(render_fit(&value)),
        Some("bench") => {
            let summary: BenchSummary = serde_json::from_value(
                value.get("summary").cloned().unwrap_or_default(),
            )
            .map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("not a benchmark summary: {e}"),
            })?;
            Ok(render_bench(&summary))
        }
        other => Err(CliError::Config(format!(
            "unrecognized result kind {other:?} in {}",
            path.display()
        ))),
    }
}

fn render_fit(value: &serde_json::Value) -> String {
    let best = &value["best"];
    let mut out = String::new();
    out.push_str(&format!(
        "fit of {}\n",
        value["config"]["input"].as_str().unwrap_or("?")
    ));
    out.push_str(&format!(
        "selected g = {} at lambda1 = {:.4}, lambda2 = {:.4}\n",
        best["g"],
        best["lambda1"].as_f64().unwrap_or(f64::NAN),
        best["lambda2"].as_f64().unwrap_or(f64::NAN)
    ));
    out.push_str(&format!(
        "BIC {:.4}  loglik {:.4}  penalized {:.4}  iterations {}\n",
        best["bic"].as_f64().unwrap_or(f64::NAN),
        best["loglik"].as_f64().unwrap_or(f64::NAN),
        best["penalized_loglik"].as_f64().unwrap_or(f64::NAN),
        best["iterations"]
    ));
    out.push_str(&format!(
        "mixing proportions: {}\n",
        best["pi"]
            .as_array()
            .map(|a| a
                .iter()
                .map(|p| format!("{:.4}", p.as_f64().unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
                .join(", "))
            .unwrap_or_default()
    ));
    let noise = best["noise_variables"].as_array().map(|a| a.len()).unwrap_or(0);
    out.push_str(&format!("noise variables: {noise}\n"));
    out
}

fn render_bench(summary: &BenchSummary) -> String {
    let mut out = format!(
        "benchmark {} ({} replicates, seed {})\n",
        summary.design, summary.replications, summary.seed
    );
    out.push_str(&summary.to_tsv());
    out
}
