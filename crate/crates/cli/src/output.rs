//! Writers for the run directory: a JSON model file plus TSV tables.
//! Machine-readable numbers carry 17 significant digits; every file embeds
//! the resolved run configuration so any artifact reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use pmclust_core::{effective_df, CellRow, FitStatus, SelectionResult};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// 17 significant digits: exact round-trip for f64.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct BestModel<'a> {
    g: usize,
    lambda1: f64,
    lambda2: f64,
    bic: f64,
    d_e: usize,
    status: FitStatus,
    penalized_loglik: f64,
    loglik: f64,
    iterations: usize,
    variance_floor_hit: bool,
    zero_mean_count: usize,
    unit_variance_count: usize,
    pi: Vec<f64>,
    mu: &'a ndarray::Array2<f64>,
    sigma2: &'a ndarray::Array2<f64>,
    noise_variables: Vec<usize>,
}

#[derive(Serialize)]
struct StageOneFile<'a> {
    best_cell: (usize, f64, f64),
    best_bic: f64,
    table: &'a [CellRow],
}

#[derive(Serialize)]
struct ModelFile<'a> {
    kind: &'static str,
    config: &'a RunConfig,
    seed: u64,
    variable_names: &'a Option<Vec<String>>,
    /// 1-based original indices of variables surviving preprocessing.
    kept_variables: &'a Option<Vec<usize>>,
    best: BestModel<'a>,
    stage_one: Option<StageOneFile<'a>>,
    bic_table: &'a [CellRow],
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(CliError::io(path))
}

fn config_banner(config: &RunConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("# config {json}\n")
}

pub struct FitOutputs<'a> {
    pub config: &'a RunConfig,
    pub selection: &'a SelectionResult,
    pub variable_names: Option<Vec<String>>,
    pub kept_variables: Option<Vec<usize>>,
}

impl FitOutputs<'_> {
    /// Write model.json, assignments.tsv, bic_table.tsv, variables.tsv and
    /// plot_mean_var.tsv into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let sel = self.selection;
        let fit = &sel.best;
        let mut written = Vec::new();

        let model = ModelFile {
            kind: "fit",
            config: self.config,
            seed: self.config.seed,
            variable_names: &self.variable_names,
            kept_variables: &self.kept_variables,
            best: BestModel {
                g: sel.best_cell.0,
                lambda1: sel.best_cell.1,
                lambda2: sel.best_cell.2,
                bic: sel.best_bic,
                d_e: effective_df(&fit.params, 0.0),
                status: fit.status,
                penalized_loglik: fit.penalized_loglik,
                loglik: fit.loglik,
                iterations: fit.iterations,
                variance_floor_hit: fit.variance_floor_hit,
                zero_mean_count: fit.zero_mean_count,
                unit_variance_count: fit.unit_variance_count,
                pi: fit.params.pi.to_vec(),
                mu: &fit.params.mu,
                sigma2: &fit.params.sigma2,
                noise_variables: fit.noise_variable_indices.iter().map(|&k| k + 1).collect(),
            },
            stage_one: sel.stage_one.as_ref().map(|s| StageOneFile {
                best_cell: s.best_cell,
                best_bic: s.best_bic,
                table: &s.table,
            }),
            bic_table: &sel.table,
        };
        let path = dir.join("model.json");
        let mut json = serde_json::to_string_pretty(&model).expect("model serializes");
        json.push('\n');
        write_file(&path, &json)?;
        written.push(path);

        written.push(self.write_assignments(dir)?);
        written.push(self.write_bic_table(dir)?);
        written.push(self.write_variables(dir)?);
        written.push(self.write_plot_table(dir)?);
        Ok(written)
    }

    fn variable_label(&self, k: usize) -> String {
        match &self.variable_names {
            Some(names) => names[k].clone(),
            None => format!("v{}", k + 1),
        }
    }

    fn write_assignments(&self, dir: &Path) -> Result<PathBuf> {
        let fit = &self.selection.best;
        let labels = fit.tau.hard_labels();
        let mut out = config_banner(self.config);
        out.push_str("observation\tcluster");
        for i in 0..fit.params.g {
            out.push_str(&format!("\ttau{}", i + 1));
        }
        out.push('\n');
        for (j, &label) in labels.iter().enumerate() {
            out.push_str(&format!("{}\t{}", j + 1, label + 1));
            for i in 0..fit.params.g {
                out.push('\t');
                out.push_str(&fmt_full(fit.tau.tau[[j, i]]));
            }
            out.push('\n');
        }
        let path = dir.join("assignments.tsv");
        write_file(&path, &out)?;
        Ok(path)
    }

    fn write_bic_table(&self, dir: &Path) -> Result<PathBuf> {
        let mut out = config_banner(self.config);
        out.push_str("g\tlambda1\tlambda2\tbic\td_e\tpenalized_loglik\tstatus\n");
        for row in &self.selection.table {
            let status = match row.status {
                pmclust_core::CellStatus::Ok => "ok",
                pmclust_core::CellStatus::AllStartsDegenerate => "all-starts-degenerate",
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                row.g,
                fmt_full(row.lambda1),
                fmt_full(row.lambda2),
                row.bic.map(fmt_full).unwrap_or_else(|| "-".into()),
                row.d_e.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
                row.penalized_loglik
                    .map(fmt_full)
                    .unwrap_or_else(|| "-".into()),
                status
            ));
        }
        let path = dir.join("bic_table.tsv");
        write_file(&path, &out)?;
        Ok(path)
    }

    fn write_variables(&self, dir: &Path) -> Result<PathBuf> {
        let fit = &self.selection.best;
        let k = fit.params.n_vars();
        let mut out = config_banner(self.config);
        out.push_str("variable\tname\tstatus\n");
        for kk in 0..k {
            let status = if fit.noise_variable_indices.contains(&kk) {
                "noise"
            } else {
                "selected"
            };
            out.push_str(&format!("{}\t{}\t{}\n", kk + 1, self.variable_label(kk), status));
        }
        let path = dir.join("variables.tsv");
        write_file(&path, &out)?;
        Ok(path)
    }

    fn write_plot_table(&self, dir: &Path) -> Result<PathBuf> {
        let fit = &self.selection.best;
        let mut out = config_banner(self.config);
        out.push_str("cluster\tvariable\tname\tmean\tvariance\n");
        for i in 0..fit.params.g {
            for kk in 0..fit.params.n_vars() {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    i + 1,
                    kk + 1,
                    self.variable_label(kk),
                    fmt_full(fit.params.mu[[i, kk]]),
                    fmt_full(fit.params.sigma2[[i, kk]])
                ));
            }
        }
        let path = dir.join("plot_mean_var.tsv");
        write_file(&path, &out)?;
        Ok(path)
    }
}

/// Human-readable one-screen summary of a fit, for stdout.
pub fn fit_summary(selection: &SelectionResult) -> String {
    let fit = &selection.best;
    let (g, l1, l2) = selection.best_cell;
    format!(
        "selected g = {g} at lambda1 = {l1:.4}, lambda2 = {l2:.4}\n\
         BIC {:.4}, penalized log-likelihood {:.4}, {} iterations ({:?})\n\
         {} of {} variables identified as noise\n",
        selection.best_bic,
        fit.penalized_loglik,
        fit.iterations,
        fit.status,
        fit.noise_variable_indices.len(),
        fit.params.n_vars()
    )
}
