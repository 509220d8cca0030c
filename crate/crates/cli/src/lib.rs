//! Command line front end for `lingrid`: scenario files, sweeps, criteria
//! reports and the figure presets.
//!
//! Exit codes: 0 success (or criteria satisfied), 1 criteria marginal,
//! 2 criteria violated, 3 any error including bad arguments.

pub mod commands;
pub mod figures;
pub mod scenario;
pub mod table;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;

use crate::commands::ReportFormat;
use crate::figures::{Figure, FigureOptions};
use crate::scenario::{Scenario, SweepParam};

pub const EXIT_ERROR: i32 = 3;
pub const THREADS_ENV: &str = "LINGRID_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{param} = {value}: {source}")]
    Point { param: &'static str, value: f64, source: Box<CliError> },
    #[error(transparent)]
    Solver(#[from] lingrid::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

const EXIT_CODES: &str = "Exit codes: 0 success or criteria satisfied, 1 marginal, 2 violated, 3 error.
Set LINGRID_THREADS to cap the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "lingrid", version, about = "Transition probabilities in truncated linear potential grids", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full S-matrix for one scenario, with the criteria report as comments
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transition probabilities over the scenario's [sweep] section
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the swept parameter (g0, dV or t)
        #[arg(long)]
        param: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the CSV of one figure preset, or all of them
    Figure {
        #[arg(value_enum)]
        name: FigureName,
        #[arg(long)]
        out: PathBuf,
        /// Number of sweep points (default 200, 400 for fig4*)
        #[arg(long)]
        points: Option<usize>,
        /// Sweep range as FROM,TO
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
    },
    /// Applicability report; the exit code carries the verdict
    Criteria {
        #[arg(long)]
        config: PathBuf,
    },
    /// Diagnostic dumps
    Report {
        #[command(subcommand)]
        what: ReportCommand,
    },
    /// Evaluate 1F1(a, b, z) and its derivative
    #[command(name = "specfun-eval", hide = true)]
    SpecfunEval {
        /// RE,IM
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        /// RE,IM
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = lingrid::specfun::DEFAULT_REL_TOL)]
        tol: f64,
    },
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    /// X, Y, g, Va, Vb and the gap ratios
    Decouple {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigureName {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig4c,
    All,
}

fn pair(s: &str, what: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("{what}: expected two comma-separated numbers, got '{s}'"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { config, out } => {
            let s = Scenario::load(&config)?;
            emit(out.as_deref(), &commands::solve(&s)?)?;
        }
        Command::Sweep { config, param, out } => {
            let s = Scenario::load(&config)?;
            let param = param.as_deref().map(SweepParam::parse).transpose()?;
            emit(out.as_deref(), &commands::sweep(&s, param)?)?;
        }
        Command::Figure { name, out, points, range } => {
            let figs: Vec<Figure> = match name {
                FigureName::All => Figure::ALL.to_vec(),
                other => vec![Figure::parse(&format!("{other:?}").to_lowercase()).expect("names match")],
            };
            let range = range.as_deref().map(|r| pair(r, "--range")).transpose()?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            for f in figs {
                let text = f.render(FigureOptions { points, range })?;
                let path = out.join(f.file_name());
                std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Criteria { config } => {
            let s = Scenario::load(&config)?;
            let (report, text) = commands::criteria_report(&s)?;
            print!("{text}");
            return Ok(report.verdict.exit_code());
        }
        Command::Report { what: ReportCommand::Decouple { config, format, out } } => {
            let s = Scenario::load(&config)?;
            let format = match format {
                Format::Text => ReportFormat::Text,
                Format::Csv => ReportFormat::Csv,
            };
            emit(out.as_deref(), &commands::report_decouple(&s, format)?)?;
        }
        Command::SpecfunEval { a, b, z, tol } => {
            let (ar, ai) = pair(&a, "--a")?;
            let (zr, zi) = pair(&z, "--z")?;
            print!("{}", commands::specfun_eval(C64::new(ar, ai), b, C64::new(zr, zi), tol)?);
        }
    }
    Ok(0)
}

/// Worker count from `LINGRID_THREADS`; `None` leaves the default.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(cap: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cap.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_cap: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    Ok(f())
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let result = thread_cap().and_then(|cap| with_threads(cap, || dispatch(cli))).and_then(|r| r);
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
