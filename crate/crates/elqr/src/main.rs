use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elqr::commands::{
    self, parse_sdp_kind, CommandOutput, DareMode, DissipativityMode, GlobalOptions, MpcMode, MpcOptions,
};
use elqr::{CliError, ToleranceOverrides};

/// Riccati, dissipativity and receding-horizon analysis of economic
/// linear-quadratic control problems.
///
/// Exit codes: 0 success (strictly pre-dissipative with a stable optimal
/// loop, for `analyze`); 1 input error; 2 pre-dissipative only, or a
/// check that failed; 3 no certificate, or a solver failure.
#[derive(Parser, Debug)]
#[command(name = "elqr", version)]
struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Relative rank threshold for singular values.
    #[arg(long, global = true, value_name = "X")]
    tol_rank: Option<f64>,
    /// Relative margin for (semi)definiteness decisions.
    #[arg(long, global = true, value_name = "X")]
    tol_psd: Option<f64>,
    /// Relative stopping threshold for Riccati iterations.
    #[arg(long, global = true, value_name = "X")]
    tol_conv: Option<f64>,
    /// Iteration limit for Riccati iterations.
    #[arg(long, global = true, value_name = "N")]
    tol_maxit: Option<usize>,
    /// Eigenvalues this close to the unit circle count as marginal.
    #[arg(long, global = true, value_name = "X")]
    tol_margin: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full analysis: controllability, certificate, Riccati solutions, closed-loop verdict.
    Analyze { file: PathBuf },
    /// Riccati equation solvers.
    Dare {
        #[command(subcommand)]
        which: DareCommand,
    },
    /// Receding-horizon control.
    Mpc {
        #[command(subcommand)]
        which: MpcCommand,
    },
    /// Pre-dissipativity certificates.
    Dissipativity {
        #[command(subcommand)]
        which: DissipativityCommand,
    },
}

#[derive(Subcommand, Debug)]
enum DareCommand {
    /// Stabilizing solution of the regularized equation.
    Stabilizing { file: PathBuf },
    /// Antistabilizing solution, via the time-reversed problem.
    Antistabilizing { file: PathBuf },
    /// Check a candidate P (matrix text file) against the constrained equation.
    Verify {
        file: PathBuf,
        #[arg(long, value_name = "FILE")]
        p: PathBuf,
    },
}

#[derive(Args, Debug)]
struct MpcArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Terminal cost margin over the antistabilizing solution.
    #[arg(long, default_value_t = 1e-3)]
    margin: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Initial state, e.g. `1,1` (default: all ones).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Free input: `zero`, `feedback:<matrix>` (v = -L x; `-I`, `0.5I` or `a,b;c,d`) or `file:<path>`.
    #[arg(long, default_value = "zero", allow_hyphen_values = true)]
    v: String,
    /// Output file (CSV for simulate, matrix text for design).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum MpcCommand {
    /// Terminal cost above the antistabilizing solution.
    Design(MpcArgs),
    /// Closed-loop simulation, written as CSV.
    Simulate(MpcArgs),
    /// Stability verdict of the receding-horizon loop.
    Report(MpcArgs),
}

#[derive(Subcommand, Debug)]
enum DissipativityCommand {
    /// Certificate tier, optionally checking a given rotation.
    Check {
        file: PathBuf,
        /// Candidate rotation Lambda (matrix text file).
        #[arg(long, value_name = "FILE")]
        lambda: Option<PathBuf>,
    },
    /// Certificate SDP in SDPA sparse format.
    ExportSdp {
        file: PathBuf,
        #[arg(long, default_value = "slack")]
        kind: String,
        /// Upper bound b in L1 - L2 <= b I (must be positive).
        #[arg(long, allow_hyphen_values = true)]
        bound: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn mpc_options(a: &MpcArgs) -> MpcOptions {
    MpcOptions {
        horizon: a.horizon,
        margin: a.margin,
        steps: a.steps,
        x0: a.x0.clone(),
        v: a.v.clone(),
        out: a.out.clone(),
    }
}

fn run(cli: &Cli) -> Result<CommandOutput, CliError> {
    let opts = GlobalOptions {
        tolerances: ToleranceOverrides {
            rank_rel_tol: cli.tol_rank,
            psd_tol: cli.tol_psd,
            convergence_tol: cli.tol_conv,
            max_iterations: cli.tol_maxit,
            spectral_margin: cli.tol_margin,
        },
        json: cli.json,
    };
    match &cli.command {
        Command::Analyze { file } => commands::analyze(file, &opts),
        Command::Dare { which } => match which {
            DareCommand::Stabilizing { file } => commands::dare(file, &DareMode::Stabilizing, &opts),
            DareCommand::Antistabilizing { file } => commands::dare(file, &DareMode::Antistabilizing, &opts),
            DareCommand::Verify { file, p } => commands::dare(file, &DareMode::Verify(p.clone()), &opts),
        },
        Command::Mpc { which } => {
            let (mode, args) = match which {
                MpcCommand::Design(a) => (MpcMode::Design, a),
                MpcCommand::Simulate(a) => (MpcMode::Simulate, a),
                MpcCommand::Report(a) => (MpcMode::Report, a),
            };
            commands::mpc(&args.file, mode, &mpc_options(args), &opts)
        }
        Command::Dissipativity { which } => match which {
            DissipativityCommand::Check { file, lambda } => {
                commands::dissipativity(file, &DissipativityMode::Check { lambda: lambda.clone() }, &opts)
            }
            DissipativityCommand::ExportSdp { file, kind, bound, out } => {
                let mode = DissipativityMode::ExportSdp { kind: parse_sdp_kind(kind)?, bound: *bound, out: out.clone() };
                commands::dissipativity(file, &mode, &opts)
            }
        },
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1, like other input errors; clap would use 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            let report = &out.report;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let text = if cli.json {
                report.to_json()
            } else if let Some(data) = &out.data {
                eprintln!("{}", report.outcome.summary);
                data.clone()
            } else {
                report.to_text()
            };
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
