use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cmtf_core::config::FitConfig;
use cmtf_core::error::{CmtfError, Result};
use cmtf_core::experiments::{run_experiment, Exp2Variant, Experiment, ExperimentOptions, ExperimentReport};
use cmtf_core::io::write_matrix_csv;
use cmtf_core::metrics::fit_percentage;
use cmtf_core::solver::{multi_init_fit, Feasibility, FitResult, ProblemSpec, RunSummary, TerminationReason};
use cmtf_core::synthgen::write_decomposition;

#[derive(Debug, Parser)]
#[command(name = "cmtf", version, about = "PARAFAC2-based coupled matrix and tensor factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulated experiment and write its report.
    Experiment(ExperimentArgs),
    /// Fit datasets declared in a JSON config.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentName {
    Exp1,
    Exp2,
    Exp3,
}

impl From<ExperimentName> for Experiment {
    fn from(e: ExperimentName) -> Self {
        match e {
            ExperimentName::Exp1 => Experiment::Exp1,
            ExperimentName::Exp2 => Experiment::Exp2,
            ExperimentName::Exp3 => Experiment::Exp3,
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    name: ExperimentName,
    /// Noise level; defaults to the experiment's own level.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Random initializations per fit.
    #[arg(long)]
    inits: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "cmtf-results")]
    out: PathBuf,
    /// Experiment 2: only the coupled models.
    #[arg(long, conflicts_with = "uncoupled")]
    coupling: bool,
    /// Experiment 2: only the uncoupled models.
    #[arg(long)]
    uncoupled: bool,
    /// Experiment 2: only the ridge-regularized models.
    #[arg(long, conflicts_with = "no_ridge")]
    ridge: bool,
    /// Experiment 2: only the models without ridge.
    #[arg(long)]
    no_ridge: bool,
    /// Experiment 3: skip the fit without smoothness.
    #[arg(long)]
    smooth_only: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "cmtf-fit")]
    out: PathBuf,
}

fn pick(only_on: bool, only_off: bool) -> Vec<bool> {
    match (only_on, only_off) {
        (true, _) => vec![true],
        (_, true) => vec![false],
        _ => vec![false, true],
    }
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let experiment = Experiment::from(args.name);
    let mut options = ExperimentOptions::new(experiment);
    if let Some(noise) = args.noise {
        options.noise = noise;
    }
    options.replicates = args.replicates;
    options.solver.seed = args.seed;
    if let Some(n) = args.inits {
        options.solver.initializations = n;
    }
    options.exp2_variants = Exp2Variant::grid(&pick(args.coupling, args.uncoupled), &pick(args.ridge, args.no_ridge));
    options.exp3_compare_unsmoothed = !args.smooth_only;
    let report = run_experiment(experiment, &options)?;
    report.write(&args.out)?;
    print_averages(&report);
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_averages(report: &ExperimentReport) {
    println!("{:<20} {}", "variant", report.columns.join(" "));
    for row in report.rows.iter().filter(|r| r.replicate.is_none()) {
        let values: Vec<String> = report
            .columns
            .iter()
            .zip(&row.values)
            .map(|(c, v)| format!("{v:>w$.4}", w = c.len()))
            .collect();
        println!("{:<20} {}", row.variant, values.join(" "));
    }
}

#[derive(Debug, Serialize)]
struct DatasetDiagnostics {
    name: String,
    fit_percentage: f64,
}

#[derive(Debug, Serialize)]
struct FitDiagnostics {
    seed: u64,
    iterations: usize,
    termination: TerminationReason,
    final_objective: f64,
    feasibility: Feasibility,
    datasets: Vec<DatasetDiagnostics>,
    runs: Vec<RunSummary>,
}

fn write_fit_outputs(dir: &Path, problem: &ProblemSpec, result: &FitResult) -> Result<()> {
    let io_err = |p: &Path, e: std::io::Error| CmtfError::Io {
        path: p.to_path_buf(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut datasets = Vec::with_capacity(problem.datasets.len());
    for (ds, dec) in problem.datasets.iter().zip(&result.decompositions) {
        write_decomposition(dir, &ds.name, dec)?;
        datasets.push(DatasetDiagnostics {
            name: ds.name.clone(),
            fit_percentage: fit_percentage(&ds.data, &dec.reconstruct()?)?,
        });
    }
    if let Some(delta) = &result.dictionary {
        write_matrix_csv(&dir.join("dictionary.csv"), delta)?;
    }
    let diagnostics = FitDiagnostics {
        seed: result.seed,
        iterations: result.iterations,
        termination: result.termination,
        final_objective: result.final_objective(),
        feasibility: result.feasibility,
        datasets,
        runs: result.runs.clone(),
    };
    let path = dir.join("diagnostics.json");
    let text = serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    let mut trace = String::from("iteration,objective\n");
    for (i, v) in result.objective_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{v:?}\n"));
    }
    let path = dir.join("objective_trace.csv");
    fs::write(&path, trace).map_err(|e| io_err(&path, e))
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let config = FitConfig::from_path(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let problem = config.build_problem(base)?;
    let result = multi_init_fit(&problem, &config.solver)?;
    write_fit_outputs(&args.out, &problem, &result)?;
    println!(
        "objective {:.6e} after {} iterations ({:?}), seed {}",
        result.final_objective(),
        result.iterations,
        result.termination,
        result.seed
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Experiment(args) => cmd_experiment(args),
        Command::Fit(args) => cmd_fit(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { 2 } else { 1 })
        }
    }
}
