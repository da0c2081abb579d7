use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pmclust_cli::config::{CovModeArg, GroupTarget, Orientation, RunConfig, SchemeArg};
use pmclust_cli::error::{CliError, Result};
use pmclust_cli::groups::read_grouping;
use pmclust_cli::ingest::ingest_csv;
use pmclust_cli::output::{fit_summary, fmt_full, FitOutputs};
use pmclust_cli::preprocess::preprocess_microarray;
use pmclust_cli::report::render_report;
use pmclust_core::{
    adaptive_pipeline, default_lambda_grid, grid_search, run_benchmark, standardize, BenchConfig,
    BenchSummary, CovMode, Design, GridSpec, MethodSpec, PenaltyConfig, StopRule,
};

/// Penalized Gaussian mixture clustering with variable selection.
#[derive(Parser)]
#[command(name = "pmclust", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit penalized mixtures to a CSV and select g and the penalties by BIC.
    Fit(Box<FitArgs>),
    /// Run the seeded simulation benchmark harness.
    Bench(BenchArgs),
    /// Run the expression preprocessing pipeline and write the reduced matrix.
    Preprocess(PreprocessArgs),
    /// Render a run's JSON artifact as readable text.
    Report(ReportArgs),
}

fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| format!("{part:?} is not a number"))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(out)
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (comma-separated, optional header row/column).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rows")]
    orientation: Orientation,
    #[arg(long, value_enum, default_value = "unequal")]
    cov_mode: CovModeArg,
    #[arg(long, value_enum, default_value = "var1")]
    scheme: SchemeArg,
    /// Two-stage fit with weights from a pilot run.
    #[arg(long)]
    adaptive: bool,
    /// Two-column CSV mapping variables (name or 1-based index) to group ids.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    group_target: GroupTarget,
    #[arg(long, default_value_t = 1)]
    g_min: usize,
    #[arg(long, default_value_t = 3)]
    g_max: usize,
    /// Comma-separated lambda1 grid; defaults to the built-in scale-aware grid.
    #[arg(long, value_parser = parse_grid)]
    lambda1_grid: Option<Vec<f64>>,
    /// Comma-separated lambda2 grid; defaults to the built-in scale-aware grid.
    #[arg(long, value_parser = parse_grid)]
    lambda2_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Apply truncation / filtering / top-variance screening before fitting.
    #[arg(long)]
    preprocess: bool,
    #[arg(long, default_value_t = 1.0)]
    truncate_low: f64,
    #[arg(long, default_value_t = 16000.0)]
    truncate_high: f64,
    #[arg(long, default_value_t = 5.0)]
    filter_ratio: f64,
    #[arg(long, default_value_t = 500.0)]
    filter_span: f64,
    #[arg(long, default_value_t = 2000)]
    top_k_variance: usize,
    /// Run directory for the output files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Simulation family: 1 (single informative block) or 2 (three blocks).
    #[arg(long)]
    case: u8,
    /// Case-1 set-up id (1 = null, 2 = mean shift, 3 = variance, 4 = both).
    #[arg(long, default_value_t = 2)]
    setup: u8,
    /// Case-2 informative block width (5, 7 or 10).
    #[arg(long, default_value_t = 10)]
    k1: usize,
    /// Total number of variables.
    #[arg(long, default_value_t = 300)]
    k: usize,
    /// Case-1 informative variable count.
    #[arg(long, default_value_t = 21)]
    informative: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, default_value_t = 1)]
    g_min: usize,
    #[arg(long, default_value_t = 3)]
    g_max: usize,
    /// Comma-separated lambda grid shared by the penalized methods.
    #[arg(long, value_parser = parse_grid)]
    lambda_grid: Option<Vec<f64>>,
    /// Methods: unpenalized, means, vars, both, logvar, equal0, equal-l1, adaptive.
    #[arg(long, default_value = "unpenalized,both")]
    methods: String,
    /// Add grouped methods (case 2 only): none, means, both.
    #[arg(long, default_value = "none")]
    group: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rows")]
    orientation: Orientation,
    #[arg(long, default_value_t = 1.0)]
    truncate_low: f64,
    #[arg(long, default_value_t = 16000.0)]
    truncate_high: f64,
    #[arg(long, default_value_t = 5.0)]
    filter_ratio: f64,
    #[arg(long, default_value_t = 500.0)]
    filter_span: f64,
    #[arg(long, default_value_t = 2000)]
    top_k_variance: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// model.json or summary.json produced by `fit` or `bench`.
    #[arg(long)]
    file: PathBuf,
}

fn run_fit(args: &FitArgs) -> Result<()> {
    if args.g_min == 0 || args.g_min > args.g_max {
        return Err(CliError::Config("need 1 <= g-min <= g-max".into()));
    }
    let ingested = ingest_csv(&args.input, args.orientation)?;
    let mut values = ingested.values;
    let mut variable_names = ingested.variable_names;

    let mut kept_variables = None;
    if args.preprocess {
        let pre = preprocess_microarray(
            &values,
            args.truncate_low,
            args.truncate_high,
            args.filter_ratio,
            args.filter_span,
            args.top_k_variance,
        );
        if pre.short_of_top_k {
            eprintln!(
                "warning: only {} variables survive the filter (top-k asked for {})",
                pre.kept.len(),
                args.top_k_variance
            );
        }
        variable_names = variable_names
            .map(|names| pre.kept.iter().map(|&k| names[k].clone()).collect());
        kept_variables = Some(pre.kept.iter().map(|&k| k + 1).collect::<Vec<_>>());
        values = pre.values;
    }

    let data = standardize(&values)?;
    let n = data.n();

    let lambda1_grid = args
        .lambda1_grid
        .clone()
        .unwrap_or_else(|| default_lambda_grid(n));
    let lambda2_grid = match (&args.lambda2_grid, args.cov_mode) {
        (Some(grid), _) => grid.clone(),
        (None, CovModeArg::Equal) => vec![0.0],
        (None, CovModeArg::Unequal) => default_lambda_grid(n),
    };

    let config = RunConfig {
        input: args.input.display().to_string(),
        orientation: args.orientation,
        cov_mode: args.cov_mode,
        scheme: args.scheme,
        adaptive: args.adaptive,
        groups_file: args.groups.as_ref().map(|p| p.display().to_string()),
        group_target: args.group_target,
        g_values: (args.g_min..=args.g_max).collect(),
        lambda1_grid: lambda1_grid.clone(),
        lambda2_grid: lambda2_grid.clone(),
        n_starts: args.starts,
        seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
        preprocess: args.preprocess,
        truncate_low: args.truncate_low,
        truncate_high: args.truncate_high,
        filter_ratio: args.filter_ratio,
        filter_span: args.filter_span,
        top_k_variance: args.top_k_variance,
        output_dir: args.out.display().to_string(),
    };

    let (cov_mode, scheme) = config.to_core();
    let stop = StopRule {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let spec = GridSpec::new(
        config.g_values.clone(),
        lambda1_grid,
        lambda2_grid,
        args.starts,
        args.seed,
    );

    let selection = if args.adaptive {
        if cov_mode == CovMode::Equal {
            return Err(CliError::Config(
                "adaptive penalization uses the unequal-covariance model".into(),
            ));
        }
        if args.groups.is_some() {
            return Err(CliError::Config(
                "adaptive penalization is not combined with grouped penalties".into(),
            ));
        }
        adaptive_pipeline(&data, &spec, &stop)?
    } else {
        let mut template = PenaltyConfig::new(0.0, 0.0, scheme);
        if let Some(groups_path) = &args.groups {
            let (gm, gv) = match args.group_target {
                GroupTarget::Means => (true, false),
                GroupTarget::Variances => (false, true),
                GroupTarget::Both => (true, true),
            };
            let grouping = read_grouping(
                groups_path,
                data.n_vars(),
                variable_names.as_deref(),
                gm,
                gv,
            )?;
            template = template.with_grouping(grouping);
        }
        grid_search(&data, &spec, &template, cov_mode, &stop)?
    };

    let outputs = FitOutputs {
        config: &config,
        selection: &selection,
        variable_names,
        kept_variables,
    };
    let written = outputs.write(&args.out)?;
    print!("{}", fit_summary(&selection));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_methods(spec: &str) -> Result<Vec<MethodSpec>> {
    let mut methods = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m = match name {
            "unpenalized" => MethodSpec::unequal_unpenalized(),
            "means" => MethodSpec::unequal_means_only(),
            "vars" => MethodSpec::unequal_vars_only(),
            "both" => MethodSpec::unequal_both(),
            "logvar" => MethodSpec::unequal_both_logvar(),
            "equal0" => MethodSpec::equal_unpenalized(),
            "equal-l1" => MethodSpec::equal_means(),
            "adaptive" => MethodSpec::adaptive(),
            other => {
                return Err(CliError::Config(format!(
                    "unknown method {other:?}; see --help for the roster"
                )))
            }
        };
        methods.push(m);
    }
    Ok(methods)
}

#[derive(Serialize)]
struct BenchFile<'a> {
    kind: &'static str,
    summary: &'a BenchSummary,
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let design = match args.case {
        1 => {
            if !(1..=4).contains(&args.setup) {
                return Err(CliError::Config(format!(
                    "case-1 setup must be 1..4, got {}",
                    args.setup
                )));
            }
            Design::CaseOne {
                setup: args.setup,
                k: args.k,
                informative: args.informative,
            }
        }
        2 => Design::CaseTwo {
            k1: args.k1,
            k: args.k,
        },
        other => {
            return Err(CliError::Config(format!("case must be 1 or 2, got {other}")));
        }
    };

    let mut methods = parse_methods(&args.methods)?;
    match args.group.as_str() {
        "none" => {}
        "means" => methods.push(MethodSpec::grouped_means()),
        "both" => methods.push(MethodSpec::grouped_means_and_variances()),
        other => {
            return Err(CliError::Config(format!(
                "--group must be none, means or both, got {other:?}"
            )))
        }
    }
    if methods.is_empty() {
        return Err(CliError::Config("no methods requested".into()));
    }

    let cfg = BenchConfig {
        replications: args.reps,
        seed: args.seed,
        n_starts: args.starts,
        g_values: (args.g_min..=args.g_max).collect(),
        lambda_grid: args
            .lambda_grid
            .clone()
            .unwrap_or_else(|| default_lambda_grid(100)),
        stop: StopRule {
            tol: args.tol,
            max_iter: args.max_iter,
        },
    };

    let summary = run_benchmark(&design, &methods, &cfg)?;

    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let tsv_path = args.out.join("summary.tsv");
    std::fs::write(&tsv_path, summary.to_tsv()).map_err(CliError::io(&tsv_path))?;
    let json_path = args.out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&BenchFile {
        kind: "bench",
        summary: &summary,
    })
    .expect("summary serializes");
    json.push('\n');
    std::fs::write(&json_path, json).map_err(CliError::io(&json_path))?;

    print!("{}", summary.to_tsv());
    println!("wrote {}", tsv_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}

fn run_preprocess(args: &PreprocessArgs) -> Result<()> {
    let ingested = ingest_csv(&args.input, args.orientation)?;
    let pre = preprocess_microarray(
        &ingested.values,
        args.truncate_low,
        args.truncate_high,
        args.filter_ratio,
        args.filter_span,
        args.top_k_variance,
    );
    if pre.short_of_top_k {
        eprintln!(
            "warning: only {} variables survive the filter (top-k asked for {})",
            pre.kept.len(),
            args.top_k_variance
        );
    }

    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    let names: Vec<String> = match &ingested.variable_names {
        Some(all) => pre.kept.iter().map(|&k| all[k].clone()).collect(),
        None => pre.kept.iter().map(|&k| format!("v{}", k + 1)).collect(),
    };

    let csv_path = args.out.join("processed.csv");
    let mut out = names.join(",");
    out.push('\n');
    for row in pre.values.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_full(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(&csv_path, out).map_err(CliError::io(&csv_path))?;

    let kept_path = args.out.join("kept_variables.tsv");
    let mut kept = String::from("variable\tname\n");
    for (&k, name) in pre.kept.iter().zip(&names) {
        kept.push_str(&format!("{}\t{}\n", k + 1, name));
    }
    std::fs::write(&kept_path, kept).map_err(CliError::io(&kept_path))?;

    println!(
        "kept {} of {} variables",
        pre.kept.len(),
        ingested.values.ncols()
    );
    println!("wrote {}", csv_path.display());
    println!("wrote {}", kept_path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Bench(args) => run_bench(args),
        Command::Preprocess(args) => run_preprocess(args),
        Command::Report(args) => {
            print!("{}", render_report(&args.file)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
