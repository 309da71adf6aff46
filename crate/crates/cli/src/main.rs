//! `persuade`: solve, check and simulate dynamic persuasion problems.
//!
//! Exit codes: 0 success, 2 invalid problem or arguments, 3 I/O failure,
//! 4 solver failure, 5 oracle failure, 6 simulation failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Io(String),
    Solver(String),
    Oracle(String),
    Sim(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
            Failure::Solver(_) => 4,
            Failure::Oracle(_) => 5,
            Failure::Sim(_) => 6,
        }
    }

    fn describe(&self) -> String {
        match self {
            Failure::Validation(m) => format!("validation error: {m}"),
            Failure::Io(m) => format!("i/o error: {m}"),
            Failure::Solver(m) => format!("solver error: {m}"),
            Failure::Oracle(m) => format!("oracle error: {m}"),
            Failure::Sim(m) => format!("simulation error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "persuade",
    version,
    about = "Optimal dynamic persuasion with a two-state Markov world"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Problem document (JSON with lambda0, lambda1, r, cuts, levels).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output directory; a manifest.json is written beside the results.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Period length of the discrete game.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Largest gap of the belief grid.
    #[arg(long = "grid-gap", default_value_t = 2.5e-4)]
    grid_gap: f64,
    /// Sup-norm tolerance on the value.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap.
    #[arg(long = "max-iter", default_value_t = 10_000_000)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Period length (default 0.01 / (lambda0 + lambda1 + r)).
    #[arg(long)]
    delta: Option<f64>,
    /// Number of periods (default: tail bound below 1e-9 of the level range).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail when the discounted tail beyond the horizon exceeds this bound.
    #[arg(long = "max-tail")]
    max_tail: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a problem document and print its derived constants.
    Validate(ConfigArg),
    /// Solve the continuous-time game; writes solution.json and solution.csv.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        /// Number of uniform sample points in the CSV (cuts and cutoffs are added).
        #[arg(long, default_value_t = 1001)]
        samples: usize,
    },
    /// Run discrete-time value iteration; writes oracle.csv and oracle.json.
    Oracle {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Monte-Carlo simulation of one policy; writes simulation.json and calibration.csv.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        /// sigma_star, myopic, slide_only, full_disclosure or a policy JSON file.
        #[arg(long, default_value = "sigma_star")]
        policy: String,
        /// Initial belief.
        #[arg(long, default_value_t = 0.5)]
        belief: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Simulate several policies at several beliefs against the solver; writes comparison.csv.
    Compare {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        /// Policies to compare (repeat or comma-separate).
        #[arg(long, value_delimiter = ',', default_values_t = ["sigma_star".to_string(), "myopic".to_string(), "slide_only".to_string()])]
        policy: Vec<String>,
        /// Beliefs at which to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
        beliefs: Vec<f64>,
        #[arg(long = "grid-gap", default_value_t = 1e-3)]
        grid_gap: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Errors of the discrete game against the solver over a list of period lengths; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.03, 0.01, 0.003])]
        deltas: Vec<f64>,
        #[arg(long = "grid-gap", default_value_t = 2.5e-4)]
        grid_gap: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = 10_000_000)]
        max_iter: usize,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("PERSUADE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Validation(format!(
            "PERSUADE_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Validation(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Validate(c) => commands::validate(&c.config),
        Command::Solve {
            config,
            out,
            samples,
        } => commands::solve(&config.config, &out.out, samples),
        Command::Oracle {
            config,
            out,
            oracle,
        } => commands::oracle(
            &config.config,
            &out.out,
            commands::OracleSettings {
                delta: oracle.delta,
                grid_gap: oracle.grid_gap,
                tol: oracle.tol,
                max_iter: oracle.max_iter,
            },
        ),
        Command::Simulate {
            config,
            out,
            policy,
            belief,
            sim,
        } => commands::simulate(&config.config, &out.out, &policy, belief, &sim.into()),
        Command::Compare {
            config,
            out,
            policy,
            beliefs,
            grid_gap,
            tol,
            sim,
        } => commands::compare(
            &config.config,
            &out.out,
            &policy,
            &beliefs,
            grid_gap,
            tol,
            &sim.into(),
        ),
        Command::Sweep {
            config,
            out,
            deltas,
            grid_gap,
            tol,
            max_iter,
        } => commands::sweep(&config.config, &out.out, &deltas, grid_gap, tol, max_iter),
    }
}

impl From<SimArgs> for commands::SimSettings {
    fn from(a: SimArgs) -> Self {
        Self {
            delta: a.delta,
            horizon: a.horizon,
            paths: a.paths,
            seed: a.seed,
            max_tail: a.max_tail,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.describe());
            ExitCode::from(f.code())
        }
    }
}
