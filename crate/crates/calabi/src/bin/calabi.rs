//! Command-line front end: configured flow runs, sweeps, the identity
//! checker, and the class-data report. All orchestration lives in
//! `calabi::runner`; this file only parses arguments, routes errors to
//! stderr, and turns outcomes into process exit codes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use calabi::config::{CheckConfig, RunConfig, SweepConfig};
use calabi::runner::{
    self, cohomology_report, execute_check, execute_run, execute_sweep, exit_code_for,
};

#[derive(Parser)]
#[command(name = "calabi", version, about = "Calabi flow laboratory on flat complex tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory experiments driven by a config file.
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    /// Randomized identity and inequality checks.
    Check { config: PathBuf },
    /// Class-level report (mu, psi) from intersection pairings.
    Cohomology(CohomologyArgs),
}

#[derive(Subcommand)]
enum FlowAction {
    /// One configured run; writes a trajectory CSV and a summary JSON.
    Run { config: PathBuf },
    /// A grid of independent runs; writes one CSV row per grid point.
    Sweep { config: PathBuf },
}

#[derive(Args)]
// Negative pairings are legitimate input; let them reach range validation
// instead of dying in the parser.
#[command(allow_negative_numbers = true)]
struct CohomologyArgs {
    /// Complex dimension.
    #[arg(long)]
    n: usize,
    /// Pairing of the first Chern class with the (n-1)-th class power.
    #[arg(long)]
    c1w: f64,
    /// Pairing of the squared first Chern class with the (n-2)-th power.
    #[arg(long)]
    c1sq: f64,
    /// Class volume (must be positive).
    #[arg(long)]
    wn: f64,
    /// Threshold below which a negative psi is flagged.
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
}

fn main() {
    std::process::exit(dispatch());
}

fn dispatch() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Help and version requests print and exit 0 here; anything else is
        // a malformed invocation and lands in the config-error exit class.
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return runner::EXIT_CONFIG;
        }
        Err(e) => e.exit(),
    };
    match cli.command {
        Command::Flow { action } => match action {
            FlowAction::Run { config } => flow_run(&config),
            FlowAction::Sweep { config } => flow_sweep(&config),
        },
        Command::Check { config } => check(&config),
        Command::Cohomology(args) => cohomology(&args),
    }
}

fn flow_run(path: &Path) -> i32 {
    let config = match RunConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    match execute_run(&config) {
        Ok(artifacts) => {
            let s = &artifacts.summary;
            println!(
                "outcome: {} (Ca {:e} -> {:e}, {} accepted / {} rejected, t = {:e})",
                s.outcome,
                s.initial_calabi,
                s.final_calabi,
                s.steps_accepted,
                s.steps_rejected,
                s.t_final
            );
            println!("trajectory: {}", artifacts.trajectory_path.display());
            println!("summary: {}", artifacts.summary_path.display());
            if let Some(ck) = &artifacts.checkpoint_path {
                println!("checkpoint: {}", ck.display());
            }
            artifacts.exit_code
        }
        Err(e) => run_error(&e),
    }
}

fn flow_sweep(path: &Path) -> i32 {
    let config = match SweepConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    match execute_sweep(&config) {
        Ok(artifacts) => {
            println!(
                "sweep: {} run(s), table at {}",
                artifacts.rows.len(),
                artifacts.csv_path.display()
            );
            artifacts.exit_code
        }
        Err(e) => run_error(&e),
    }
}

fn check(path: &Path) -> i32 {
    let config = match CheckConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    match execute_check(&config) {
        Ok(artifacts) => {
            print!("{}", artifacts.table);
            let failed = artifacts.reports.iter().filter(|r| !r.pass).count();
            if failed == 0 {
                println!("all {} checks passed", artifacts.reports.len());
            } else {
                println!("{failed} check(s) FAILED");
            }
            artifacts.exit_code
        }
        Err(e) => run_error(&e),
    }
}

fn cohomology(args: &CohomologyArgs) -> i32 {
    match cohomology_report(args.n, args.c1w, args.c1sq, args.wn, args.epsilon) {
        Ok(report) => {
            print!("{}", report.render());
            runner::EXIT_CONVERGED
        }
        Err(e) => config_error(&e),
    }
}

fn config_error(e: &calabi::Error) -> i32 {
    eprintln!("error: {e}");
    runner::EXIT_CONFIG
}

fn run_error(e: &calabi::Error) -> i32 {
    eprintln!("error: {e}");
    exit_code_for(e)
}
