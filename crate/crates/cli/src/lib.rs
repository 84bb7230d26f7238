//! The `stochdual` command line: problem and certificate files, and the
//! solve, verify, dualize and report commands.

pub mod commands;
pub mod error;
pub mod format;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use stochdual::solve::Backend;

pub use commands::Options;
pub use error::{code, CliError};
pub use format::{CertificateFile, ProblemFile, Spec};

#[derive(Debug, Parser)]
#[command(name = "stochdual", version, about = "Solve and certify stochastic programs on scenario trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Absolute tolerance for gaps and certificate checks [default: 1e-8]
    #[arg(long, env = "STOCHDUAL_TOL")]
    tol: Option<f64>,
    /// auto, qp-interior-point or proximal-gradient
    #[arg(long, default_value = "auto", value_parser = parse_backend)]
    backend: Backend,
    /// Output path (certificate for solve, text otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate probabilities exactly and record exact values where known
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem and write its certificate
    Solve {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check a certificate against its problem
    Verify {
        file: PathBuf,
        certificate: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the dual problem
    Dualize {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Diagnose the duality gap
    Report {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: stochdual::Error| e.to_string())
}

impl Common {
    fn options(&self) -> Options {
        Options { tol: self.tol.unwrap_or(commands::DEFAULT_TOL), backend: self.backend, exact: self.exact }
    }
}

/// What a command printed and how it exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Outcome {
        Outcome { code, stdout, stderr: String::new() }
    }

    fn err(e: CliError) -> Outcome {
        Outcome { code: e.code, stdout: String::new(), stderr: format!("error: {}\n", e.message) }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::new(code::NO_INPUT, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::new(code::CANT_CREATE, format!("cannot write {}: {e}", path.display())))
}

pub fn load_problem(path: &Path) -> Result<ProblemFile, CliError> {
    ProblemFile::parse(&read(path)?)
}

/// `dir/name.json` becomes `dir/name.cert.json`.
pub fn default_certificate_path(problem: &Path) -> PathBuf {
    let stem = problem.file_stem().map_or_else(|| "problem".into(), |s| s.to_string_lossy().into_owned());
    problem.with_file_name(format!("{stem}.cert.json"))
}

fn emit(text: String, out: &Option<PathBuf>) -> Result<String, CliError> {
    match out {
        Some(path) => {
            write(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Solve { file, common } => {
            let problem = load_problem(&file)?;
            let (cert, code) = commands::solve_problem(&problem, &common.options())?;
            let path = common.out.clone().unwrap_or_else(|| default_certificate_path(&file));
            write(&path, &cert.canonical())?;
            let text = format!("{}certificate: {}\n", commands::solve_summary(&cert), path.display());
            Ok(Outcome::ok(code, text))
        }
        Command::Verify { file, certificate, common } => {
            let problem = load_problem(&file)?;
            let cert = CertificateFile::parse(&read(&certificate)?)?;
            let (text, code) = commands::verify_certificate(&problem, &cert, common.tol)?;
            Ok(Outcome::ok(code, emit(text, &common.out)?))
        }
        Command::Dualize { file, common } => {
            let problem = load_problem(&file)?;
            Ok(Outcome::ok(code::OK, emit(commands::dualize(&problem)?, &common.out)?))
        }
        Command::Report { file, common } => {
            let problem = load_problem(&file)?;
            Ok(Outcome::ok(code::OK, emit(commands::report(&problem, &common.options())?, &common.out)?))
        }
    }
}

/// Runs the command line. Usage errors exit 64; `--help` and `--version` exit 0.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { code::PARSE } else { code::OK };
            let text = e.render().to_string();
            return if code == code::OK {
                Outcome::ok(code, text)
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    dispatch(cli.command).unwrap_or_else(Outcome::err)
}
