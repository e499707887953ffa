//! Command-line front end: `solve` and `generate`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::generate;
use crate::io::{parse_problem, problem_to_json, result_to_json, trace_to_csv, write_atomic};
use crate::model::Problem;
use crate::solver::{solve, Mode, SolverConfig, Status};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_LINE_SEARCH_FAILURE: i32 = 3;
pub const EXIT_INVALID_INPUT: i32 = 4;
/// Output could not be written.
pub const EXIT_IO: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "convexflows", version, about = "Dual solver for convex network flow problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a problem file.
    Solve(SolveArgs),
    /// Write a generated benchmark instance.
    #[command(subcommand)]
    Generate(GenerateCommand),
}

#[derive(Args, Debug)]
struct SolveArgs {
    problem: PathBuf,
    /// Result JSON path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    tol_gap: Option<f64>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value = "auto")]
    mode: Mode,
    #[arg(long, env = "CONVEXFLOWS_THREADS", default_value_t = 1)]
    threads: usize,
    /// Accepted for scripting symmetry; the solver draws no random numbers.
    #[arg(long)]
    seed: Option<u64>,
    /// Zero the wall-clock fields so repeated runs produce identical files.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand, Debug)]
enum GenerateCommand {
    /// Power-flow network on a random planar grid.
    Opf {
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        periods: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Three-node scenario: two users, one generator, a battery at user 1.
        #[arg(long)]
        preset: bool,
        /// Drop the battery from the preset.
        #[arg(long, requires = "preset")]
        no_battery: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Arbitrage across two-asset market makers.
    Cfmm {
        #[arg(long, default_value_t = 100)]
        markets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Penalize trades below zero on every edge.
        #[arg(long)]
        penalties: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fisher market with square-root utilities.
    Fisher {
        #[arg(long, default_value_t = 5)]
        buyers: usize,
        #[arg(long, default_value_t = 5)]
        goods: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OPTIMAL;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error: {}", one_line(msg.lines().next().unwrap_or("").trim_start_matches("error: ")));
            return EXIT_INVALID_INPUT;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => solve_command(args),
        Command::Generate(cmd) => generate_command(cmd).map(|()| EXIT_OPTIMAL),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            EXIT_INVALID_INPUT
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            EXIT_IO
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(|e| Failure::Io(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve_command(args: SolveArgs) -> std::result::Result<i32, Failure> {
    let problem = parse_problem(&args.problem).map_err(|e| match e {
        Error::Io(io) => Failure::Invalid(format!("reading {}: {io}", args.problem.display())),
        Error::Schema { path, message } if path.is_empty() => {
            Failure::Invalid(format!("{}: {message}", args.problem.display()))
        }
        Error::Schema { path, message } => Failure::Invalid(format!("{}: {path}: {message}", args.problem.display())),
        other => Failure::Invalid(format!("{}: {other}", args.problem.display())),
    })?;
    let defaults = SolverConfig::default();
    let cfg = SolverConfig {
        mode: args.mode,
        tol_gap: args.tol_gap.unwrap_or(defaults.tol_gap),
        tol_grad: args.tol_grad.unwrap_or(defaults.tol_grad),
        max_iter: args.max_iters.unwrap_or(defaults.max_iter),
        threads: args.threads,
        record_time: !args.deterministic,
        ..defaults
    };
    let result = solve(&problem, &cfg)?;
    if let Some(trace) = &args.trace {
        emit(Some(trace), &trace_to_csv(&result.trace, args.deterministic))?;
    }
    emit(args.out.as_deref(), &result_to_json(&result, args.deterministic))?;
    let summary = format!(
        "{} after {} iterations, dual {:e}, relative gap {:e}",
        result.status, result.iterations, result.dual_value, result.relative_gap
    );
    Ok(match result.status {
        Status::Optimal => EXIT_OPTIMAL,
        Status::MaxIter => {
            eprintln!("warning: {summary}");
            EXIT_MAX_ITER
        }
        Status::LineSearchFailure => {
            eprintln!("warning: {summary}");
            EXIT_LINE_SEARCH_FAILURE
        }
    })
}

const RNG_NAME: &str = "xoshiro256++";

fn generate_command(cmd: GenerateCommand) -> std::result::Result<(), Failure> {
    let (problem, comment, out): (Result<Problem>, String, Option<PathBuf>) = match cmd {
        GenerateCommand::Opf {
            nodes,
            periods,
            seed,
            preset,
            no_battery,
            out,
        } => {
            if preset {
                let comment = format!("opf preset periods={periods} battery={}", !no_battery);
                (generate::three_node_preset(periods, !no_battery), comment, out)
            } else {
                let comment = format!("opf nodes={nodes} periods={periods} seed={seed} rng={RNG_NAME}");
                (generate::generate_opf(nodes, periods, seed), comment, out)
            }
        }
        GenerateCommand::Cfmm {
            markets,
            seed,
            penalties,
            out,
        } => (
            generate::generate_cfmm(markets, seed, penalties),
            format!("cfmm markets={markets} penalties={penalties} seed={seed} rng={RNG_NAME}"),
            out,
        ),
        GenerateCommand::Fisher {
            buyers,
            goods,
            seed,
            out,
        } => (
            generate::generate_fisher(buyers, goods, seed),
            format!("fisher buyers={buyers} goods={goods} seed={seed} rng={RNG_NAME}"),
            out,
        ),
    };
    let text = problem_to_json(&problem?, Some(comment))?;
    emit(out.as_deref(), &text)
}
