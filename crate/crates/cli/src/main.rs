//! `flagcrit` command-line front end.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flagcrit::critpoints::{CaMode, MultiEigenModel};
use flagcrit::varieties::{FlagSignature, Model};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "flagcrit", version, about = "Flag varieties, their polynomial systems and critical point counts")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for path tracking (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative rank tolerance of first-order certificates.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Do not print the report.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Dimension and ambient sizes of a flag variety.
    Dim {
        #[arg(long)]
        sig: FlagSignature,
    },
    /// Defining polynomials in one coordinate model.
    Generators {
        #[arg(long)]
        model: Model,
        #[arg(long)]
        sig: FlagSignature,
        /// Isospectral spectrum, comma separated (default: seeded generic).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        spectrum: Option<Vec<f64>>,
    },
    /// Converts a point between coordinate models.
    Convert {
        /// Point JSON; without it a seeded random Stiefel point of `--sig` is used.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, required_unless_present = "input")]
        sig: Option<FlagSignature>,
        #[arg(long)]
        to: Model,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        spectrum: Option<Vec<f64>>,
    },
    /// Closed-form critical points with certificates.
    Enumerate(EnumerateArgs),
    /// Counts critical points with the homotopy solver.
    Solve(SolveArgs),
    /// Certifies points against a problem.
    Verify {
        /// Points file: `{problem, points}` or a report from `enumerate`.
        #[arg(long)]
        points: PathBuf,
        /// Problem file overriding the one in the points file.
        #[arg(long)]
        problem: Option<PathBuf>,
    },
    /// Runs a reproduction target and prints the expected-versus-observed table.
    Reproduce {
        target: String,
        /// Skip the slow solver instances.
        #[arg(long)]
        fast: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EnumerateProblem {
    MultiEigen,
    Iso,
    #[value(name = "hetero-diag-3-2")]
    #[serde(rename = "hetero-diag-3-2")]
    HeteroDiag32,
    Cca,
    Ca,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EigenModelArg {
    Stiefel,
    Projection,
}

impl From<EigenModelArg> for MultiEigenModel {
    fn from(m: EigenModelArg) -> Self {
        match m {
            EigenModelArg::Stiefel => MultiEigenModel::StiefelOrbitReps,
            EigenModelArg::Projection => MultiEigenModel::Projection,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum CaModeArg {
    OrbitReps,
    MatrixForm,
}

impl From<CaModeArg> for CaMode {
    fn from(m: CaModeArg) -> Self {
        match m {
            CaModeArg::OrbitReps => CaMode::OrbitReps,
            CaModeArg::MatrixForm => CaMode::MatrixForm,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct EnumerateArgs {
    problem: EnumerateProblem,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Flag type for `iso` (default: complete flag of `--n`).
    #[arg(long)]
    sig: Option<FlagSignature>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    spectrum: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = EigenModelArg::Projection)]
    model: EigenModelArg,
    #[arg(long, value_enum, default_value_t = CaModeArg::MatrixForm)]
    mode: CaModeArg,
    /// Block-orthogonal samples per isospectral orbit.
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// JSON file with the input matrix or matrices (row-major arrays).
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SolveProblem {
    Hetero,
    LoPgr,
    LoIso,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    problem: SolveProblem,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Flag type for `lo-iso`.
    #[arg(long)]
    sig: Option<FlagSignature>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    spectrum: Option<Vec<f64>>,
    /// Seeded diagonal input matrices.
    #[arg(long)]
    diagonal: bool,
    /// JSON file with the input matrices.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
