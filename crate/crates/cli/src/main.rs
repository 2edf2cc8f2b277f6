//! `taskrate`: run solve-rate estimators and experiments from the command
//! line. CSV goes to `--out` (or stdout), an optional JSON summary to
//! `--json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use taskrate_core::estimators::{
    corrected_is_estimate, end_to_end_estimate, expert_bon_estimate, milestone_estimate,
    EstimatorConfig, Method,
};
use taskrate_core::harness::{
    bon_bias_experiment, calibration_experiment, run_replications, trivial_step_experiment,
    variance_comparison_experiment, BonBiasTable, CalibrationTable, SuiteConfig,
};
use taskrate_core::report::{self, CsvTable, EstimateRecord, EstimateRow, VarianceRow};
use taskrate_core::{ingest_paper_table, ChainTaskSpec, Error, GradingRegime, TaskSpec};

#[derive(Parser)]
#[command(name = "taskrate", version, about = "Solve-rate estimators for sequential agent tasks")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON summary file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Suite TOML file, or `default` for the bundled suite.
    #[arg(long)]
    suite: Option<String>,

    /// Master seed; overrides the one in the suite file.
    #[arg(long, required_unless_present = "fixture")]
    seed: Option<u64>,

    /// Override the suite's replication count.
    #[arg(long)]
    replications: Option<usize>,

    /// Replay a published results table instead of simulating.
    #[arg(long, conflicts_with_all = ["suite", "replications"])]
    fixture: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One estimate of one task.
    Estimate {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        method: Method,
        /// Rollouts (end-to-end, best-of-N) or trials per milestone.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "idealized")]
        regime: GradingRegime,
        #[command(flatten)]
        output: Output,
    },
    /// Replicated estimates of every task in a suite.
    Replicate {
        #[command(flatten)]
        suite: SuiteArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Milestone estimates against idealized and outcome-based truths.
    Calibrate {
        #[command(flatten)]
        suite: SuiteArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Expert best-of-N and corrected estimates against the truth.
    BonBias {
        #[command(flatten)]
        suite: SuiteArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Append always-productive steps to a best-of-N task.
    TrivialStep {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        extra: usize,
        #[arg(long)]
        rollouts: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Closed-form and empirical variances of end-to-end vs milestone.
    Variance {
        /// Comma-separated per-milestone probabilities.
        #[arg(long, value_delimiter = ',', required = true)]
        probs: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "chain")]
        name: String,
        #[command(flatten)]
        output: Output,
    },
    /// Validate a published results table and echo it.
    Ingest {
        #[arg(long)]
        path: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit<T: CsvTable, J: Serialize>(output: &Output, rows: &[T], summary: &J) -> Result<(), Error> {
    let csv = report::to_csv_string(rows)?;
    match &output.out {
        Some(path) => fs::write(path, csv)?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    if let Some(path) = &output.json {
        fs::write(path, report::to_json_string(summary)?)?;
    }
    Ok(())
}

fn load_suite(args: &SuiteArgs) -> Result<SuiteConfig, Error> {
    let mut suite = match args.suite.as_deref() {
        None | Some("default") => SuiteConfig::default_suite(),
        Some(path) => SuiteConfig::load(Path::new(path))?,
    };
    if let Some(seed) = args.seed {
        suite.master_seed = seed;
    }
    if let Some(r) = args.replications {
        suite.replications = r;
    }
    suite.validate()?;
    Ok(suite)
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    task: &'a str,
    estimate: EstimateRecord,
    absent_reason: Option<&'a str>,
    stage_successes: &'a [usize],
    truncated_at_stage: Option<usize>,
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Estimate {
            task,
            method,
            n,
            seed,
            regime,
            output,
        } => {
            let spec = TaskSpec::load(&task)?;
            let config = EstimatorConfig::default();
            let report = match (&spec, method) {
                (TaskSpec::Bon(t), Method::ExpertBon) => expert_bon_estimate(t, n, seed)?,
                (TaskSpec::Bon(t), Method::CorrectedIs) => corrected_is_estimate(t, n, seed)?,
                (TaskSpec::Bon(_), m) => {
                    return Err(Error::InvalidArgument(format!("{m} needs a chain or graph task")))
                }
                (_, Method::EndToEnd) => {
                    let t = spec.as_milestone_task().expect("milestone task");
                    end_to_end_estimate(t, regime, n, seed, &config)?
                }
                (_, Method::Milestone) => {
                    let t = spec.as_milestone_task().expect("milestone task");
                    milestone_estimate(t, n, seed, &config)?
                }
                (_, m) => return Err(Error::InvalidArgument(format!("{m} needs a best-of-N task"))),
            };
            let summary = EstimateSummary {
                task: &report.task,
                estimate: EstimateRecord::from(&report),
                absent_reason: report.absent_reason.as_deref(),
                stage_successes: &report.stage_successes,
                truncated_at_stage: report.truncated_at_stage,
            };
            emit(&output, &[EstimateRow::from(&report)], &summary)
        }
        Command::Replicate { suite, output } => {
            let suite = load_suite(&suite)?;
            let rows = run_replications(&suite)?;
            emit(&output, &rows, &rows)
        }
        Command::Calibrate { suite, output } => {
            let table = match &suite.fixture {
                Some(path) => CalibrationTable::from_published(&ingest_paper_table(path)?),
                None => calibration_experiment(&load_suite(&suite)?)?,
            };
            emit(&output, &table.rows, &table)
        }
        Command::BonBias { suite, output } => {
            let table = match &suite.fixture {
                Some(path) => BonBiasTable::from_published(&ingest_paper_table(path)?),
                None => bon_bias_experiment(&load_suite(&suite)?)?,
            };
            emit(&output, &table.rows, &table)
        }
        Command::TrivialStep {
            task,
            extra,
            rollouts,
            seed,
            output,
        } => {
            let TaskSpec::Bon(base) = TaskSpec::load(&task)? else {
                return Err(Error::InvalidArgument("trivial-step needs a best-of-N task".into()));
            };
            let report = trivial_step_experiment(&base, extra, rollouts, seed)?;
            emit(&output, std::slice::from_ref(&report), &report)
        }
        Command::Variance {
            probs,
            n,
            r,
            seed,
            name,
            output,
        } => {
            let chain = ChainTaskSpec::with_tight_budget(name, probs)?;
            let breakdown = variance_comparison_experiment(&chain, n, r, seed)?;
            emit(&output, &VarianceRow::from_breakdown(&breakdown), &breakdown)
        }
        Command::Ingest { path, output } => {
            let rows = ingest_paper_table(&path)?;
            emit(&output, &rows, &rows)
        }
    }
}
