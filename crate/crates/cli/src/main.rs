//! `hjreach` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hjreach::runner::{self, Command};
use hjreach::scenario::Scenario;
use hjreach::Error;

#[derive(Parser)]
#[command(name = "hjreach", version, about = "Hamilton-Jacobi reach-avoid solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a single-system scenario on its grid.
    Solve(RunArgs),
    /// Run the two-stage multi-aircraft sweep with conflict detection.
    Algorithm1(RunArgs),
    /// Run the dynamic-programming oracle and compare it with the solver.
    Oracle(RunArgs),
    /// Compare two exported tube directories.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Fail with exit code 1 when the largest difference exceeds this.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for node-parallel updates.
    #[arg(long)]
    threads: Option<usize>,
    /// Record every K-th solver step.
    #[arg(long = "record-every")]
    record_every: Option<usize>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &Error) -> ExitCode {
    ExitCode::from(if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    })
}

fn run(command: Command, args: RunArgs) -> ExitCode {
    let fallback = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let fail = |out: &Path, err: Error| {
        eprintln!("hjreach {}: {err}", command.name());
        if let Err(e) = runner::write_diagnostic(out, command.name(), &err) {
            eprintln!("could not write {}: {e}", out.join("error.txt").display());
        }
        exit_code(&err)
    };
    let mut scenario = match Scenario::from_file(&args.scenario) {
        Ok(s) => s,
        Err(e) => return fail(&fallback, e),
    };
    if let Some(k) = args.record_every {
        if k == 0 {
            return fail(&fallback, Error::Config("--record-every must be at least 1".into()));
        }
        scenario.solver.record_every = k;
    }
    let out = match (&args.out, &scenario.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => scenario.resolve(o),
        (None, None) => fallback.clone(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return fail(&out, Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(&out, Error::Config(format!("thread pool: {e}"))),
    };
    match pool.install(|| runner::run(command, &scenario, &out)) {
        Ok(m) => {
            for key in ["reference_linf", "oracle_linf", "oracle_mask_mismatch", "oracle_band_ok", "conflict_events"] {
                if let Some(v) = m.get(key) {
                    println!("{key} = {v}");
                }
            }
            for w in m.get_all("warning") {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", out.join("manifest.txt").display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&out, e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Solve(a) => run(Command::Solve, a),
        Cmd::Algorithm1(a) => run(Command::Algorithm1, a),
        Cmd::Oracle(a) => run(Command::Oracle, a),
        Cmd::Diff { a, b, tolerance } => match runner::diff(&a, &b) {
            Ok((linf, mismatch)) => {
                println!("linf = {linf:e}");
                println!("mask_mismatch = {mismatch}");
                match tolerance {
                    Some(tol) if linf > tol => ExitCode::from(1),
                    _ => ExitCode::SUCCESS,
                }
            }
            Err(e) => {
                eprintln!("hjreach diff: {e}");
                exit_code(&e)
            }
        },
    }
}
