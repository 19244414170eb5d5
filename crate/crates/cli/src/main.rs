use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use symcomplete_cli::{run, CliError, ExperimentConfig, Mode, EXIT_OK};

/// Symmetric tensor completion and product-mixture learning.
///
/// Exit codes: 0 success, 2 invalid input or config, 3 numerical failure.
#[derive(Parser)]
#[command(name = "symcomplete", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative tolerance of the completion solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of the completion solver.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct ReportArg {
    /// Write the JSON report here (timings go to `<report>.timings.json`).
    /// Printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random mixture and write it as JSON.
    GenMixture {
        /// Dimension.
        #[arg(long)]
        n: usize,
        /// Number of centers.
        #[arg(long)]
        k: usize,
        /// Bound on the incoherence of the centers' span. Centers get random
        /// signs and magnitudes in [0.3, 0.9]; without it biases are uniform
        /// in [-1, 1].
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        seed: u64,
        /// Mixture file to write (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Draw samples from a mixture, one +-1 row per line.
    Sample {
        /// Mixture JSON file.
        #[arg(long)]
        mixture: PathBuf,
        /// Number of samples.
        #[arg(long = "n")]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Sample file to write (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Empirical multilinear moments of a sample file.
    Moments {
        /// Sample file.
        #[arg(long)]
        samples: PathBuf,
        /// Tensor order.
        #[arg(long)]
        order: usize,
        /// Tensor file to write (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Complete a matrix from the entries revealed by a 0/1 mask.
    CompleteMatrix {
        /// Matrix CSV (first line `rows,cols`).
        #[arg(long)]
        input: PathBuf,
        /// Mask CSV of the same shape, 1 = revealed.
        #[arg(long)]
        mask: PathBuf,
        /// Frobenius noise radius of the revealed entries.
        #[arg(long)]
        delta: Option<f64>,
        /// Rank of the target, for the alpha/beta diagnostics.
        #[arg(long)]
        rank: Option<usize>,
        /// Incoherence of the target, for the alpha/beta diagnostics.
        #[arg(long)]
        mu: Option<f64>,
        /// The lambda of beta; beta and the error bound need it.
        #[arg(long)]
        lambda: Option<f64>,
        /// Completed matrix CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Complete a symmetric tensor from its multilinear entries.
    CompleteTensor {
        /// Tensor file (`symtensor v1` format with presence flags).
        #[arg(long)]
        input: PathBuf,
        /// Rank of the target (estimated when absent).
        #[arg(long)]
        rank: Option<usize>,
        /// Incoherence of the target (estimated when absent).
        #[arg(long)]
        mu: Option<f64>,
        /// Entrywise noise level of the input.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Completed tensor file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Learn a mixture from samples.
    Learn {
        /// Sample file.
        #[arg(long)]
        samples: PathBuf,
        /// Number of centers.
        #[arg(long)]
        k: usize,
        /// Separation of the centers (1 when absent).
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: u64,
        /// Failure probability of the moment estimates.
        #[arg(long)]
        delta: Option<f64>,
        /// Target moment accuracy; warns when the samples fall short.
        #[arg(long)]
        epsilon: Option<f64>,
        /// True mixture, to score the result.
        #[arg(long)]
        mixture: Option<PathBuf>,
        /// Power iteration restarts per component.
        #[arg(long)]
        restarts: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Learn a mixture from its exact moments and score the result.
    LearnExact {
        /// Mixture JSON file.
        #[arg(long)]
        mixture: PathBuf,
        /// Odd power m; moments of order 2m and 3m are used.
        #[arg(long)]
        m: usize,
        /// Seed of the power iteration restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only multilinear moment entries and complete the rest.
        #[arg(long)]
        multilinear: bool,
        /// Power iteration restarts per component.
        #[arg(long)]
        restarts: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Score a learn report against the true mixture.
    Eval {
        /// Mixture JSON file.
        #[arg(long)]
        mixture: PathBuf,
        /// Report JSON written by `learn` or `learn-exact`.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn with_solver(mut c: ExperimentConfig, s: SolverArgs) -> ExperimentConfig {
    c.tol = s.tol;
    c.max_iterations = s.max_iterations;
    c
}

fn to_config(command: Command) -> Result<ExperimentConfig, CliError> {
    Ok(match command {
        Command::GenMixture { n, k, mu, seed, out, report } => ExperimentConfig {
            n: Some(n),
            k: Some(k),
            mu,
            seed: Some(seed),
            out,
            report: report.report,
            ..ExperimentConfig::new(Mode::GenMixture)
        },
        Command::Sample { mixture, count, seed, out, report } => ExperimentConfig {
            mixture: Some(mixture),
            count: Some(count),
            seed: Some(seed),
            out,
            report: report.report,
            ..ExperimentConfig::new(Mode::Sample)
        },
        Command::Moments { samples, order, out, report } => ExperimentConfig {
            samples: Some(samples),
            m: Some(order),
            out,
            report: report.report,
            ..ExperimentConfig::new(Mode::Moments)
        },
        Command::CompleteMatrix { input, mask, delta, rank, mu, lambda, out, solver, report } => with_solver(
            ExperimentConfig {
                input: Some(input),
                mask: Some(mask),
                noise_radius: delta,
                r: rank,
                mu,
                lambda,
                out,
                report: report.report,
                ..ExperimentConfig::new(Mode::CompleteMatrix)
            },
            solver,
        ),
        Command::CompleteTensor { input, rank, mu, epsilon, out, solver, report } => with_solver(
            ExperimentConfig {
                input: Some(input),
                r: rank,
                mu,
                epsilon,
                out,
                report: report.report,
                ..ExperimentConfig::new(Mode::CompleteTensor)
            },
            solver,
        ),
        Command::Learn { samples, k, eta, seed, delta, epsilon, mixture, restarts, solver, report } => with_solver(
            ExperimentConfig {
                samples: Some(samples),
                k: Some(k),
                eta,
                seed: Some(seed),
                delta,
                epsilon,
                mixture,
                restarts,
                report: report.report,
                ..ExperimentConfig::new(Mode::Learn)
            },
            solver,
        ),
        Command::LearnExact { mixture, m, seed, multilinear, restarts, solver, report } => with_solver(
            ExperimentConfig {
                mixture: Some(mixture),
                m: Some(m),
                seed: Some(seed),
                multilinear: multilinear.then_some(true),
                restarts,
                report: report.report,
                ..ExperimentConfig::new(Mode::LearnExact)
            },
            solver,
        ),
        Command::Eval { mixture, input, report } => ExperimentConfig {
            mixture: Some(mixture),
            input: Some(input),
            report: report.report,
            ..ExperimentConfig::new(Mode::Eval)
        },
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|source| CliError::Io { path: config, source })?;
            ExperimentConfig::from_json(&text)?
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = to_config(cli.command).and_then(|config| {
        let output = run(&config)?;
        let data_on_stdout = output.data.is_some();
        if let Some(data) = &output.data {
            print!("{data}");
        }
        if config.report.is_none() {
            // keep stdout clean for data
            if data_on_stdout {
                eprint!("{}", output.report);
            } else {
                print!("{}", output.report);
            }
        }
        Ok(())
    });
    match outcome {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
