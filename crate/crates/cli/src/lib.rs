//! `heartcast forecast`: run a scenario file and write the report.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use heartcast_core::forecast::Report;
use heartcast_core::{run_forecast, Error, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INSUFFICIENT_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "heartcast", version, about = "Forecast match odds and value romantic options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its report.
    Forecast(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmitFormat {
    Json,
    CsvBundle,
}

#[derive(Debug, clap::Args)]
pub struct RunConfig {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Report file (json) or output directory (csv-bundle).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    emit: EmitFormat,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "mc-suitors")]
    mc_suitors: Option<usize>,
    #[arg(long = "mc-realizations")]
    mc_realizations: Option<usize>,
    /// Print a summary to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Forecast(cfg) => match forecast(&cfg) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Validation { .. } | Error::Ingestion { .. } => EXIT_VALIDATION,
        Error::InsufficientData { relaxation_log, .. } => {
            if !relaxation_log.is_empty() {
                eprintln!("relaxation log:");
                for s in relaxation_log {
                    eprintln!("  step {}: {} -> {} in-window members", s.step, s.action, s.in_window);
                }
            }
            EXIT_INSUFFICIENT_DATA
        }
    }
}

fn forecast(cfg: &RunConfig) -> Result<(), Error> {
    if cfg.out.as_os_str().is_empty() {
        return Err(Error::validation("--out", "must not be empty"));
    }
    let mut scenario = Scenario::load(&cfg.scenario)?;
    if let Some(seed) = cfg.seed {
        scenario.seed = seed;
    }
    if let Some(n) = cfg.mc_suitors {
        scenario.mc.suitors = n;
    }
    if let Some(n) = cfg.mc_realizations {
        scenario.mc.realizations = n;
    }
    scenario.validate()?;
    let report = run_forecast(&scenario)?;
    match cfg.emit {
        EmitFormat::Json => write_file(&cfg.out, report.to_json().as_bytes())?,
        EmitFormat::CsvBundle => write_bundle(&cfg.out, &report)?,
    }
    if cfg.verbose > 0 {
        summarize(&report);
    }
    Ok(())
}

fn summarize(report: &Report) {
    let r = &report.recommendation;
    eprintln!("recommendation: {} (margin {:.4})", r.option.as_str(), r.margin);
    for o in &report.options {
        eprintln!("  {:<22} V = {:.6}", o.kind.as_str(), o.value);
    }
    if let Some(c) = report.forecast.total.last() {
        eprintln!("  match probability by horizon: {c:.4}");
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Seventeen significant digits: every f64 round-trips exactly.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn file_stem(key: &str) -> String {
    key.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn curve_csv(months: &[f64], value: &[f64], band: Option<(&[f64], &[f64])>) -> String {
    let mut out = String::from(if band.is_some() { "t_months,value,p10,p90\n" } else { "t_months,value\n" });
    for (k, m) in months.iter().enumerate() {
        out.push_str(&format_number(*m));
        out.push(',');
        out.push_str(&format_number(value[k]));
        if let Some((lo, hi)) = band {
            out.push(',');
            out.push_str(&format_number(lo[k]));
            out.push(',');
            out.push_str(&format_number(hi[k]));
        }
        out.push('\n');
    }
    out
}

/// One CSV per curve in `dir`.
pub fn bundle_files(report: &Report) -> Vec<(String, String)> {
    let months = &report.months;
    let mut files = vec![("cumulative_total.csv".to_string(), curve_csv(months, &report.forecast.total, None))];
    for s in &report.forecast.by_group {
        files.push((format!("cumulative_by_group_{}.csv", file_stem(&s.key)), curve_csv(months, &s.values, None)));
    }
    for s in &report.forecast.by_quality {
        files.push((format!("cumulative_by_quality_{}.csv", file_stem(&s.key)), curve_csv(months, &s.values, None)));
    }
    for o in &report.options {
        let band = match (&o.curve.p10, &o.curve.p90) {
            (Some(lo), Some(hi)) => Some((lo.as_slice(), hi.as_slice())),
            _ => None,
        };
        files.push((format!("option_{}.csv", o.kind.as_str()), curve_csv(months, &o.curve.mean, band)));
    }
    files
}

fn write_bundle(dir: &Path, report: &Report) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, content) in bundle_files(report) {
        write_file(&dir.join(name), content.as_bytes())?;
    }
    Ok(())
}
