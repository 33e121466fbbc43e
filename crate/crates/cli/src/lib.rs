//! Command-line front end of the Finsler optics engine: scene files, the
//! `trace`, `verify`, `compare` and `tensors` commands, and their output
//! formats.
//!
//! Exit codes: `0` success, `1` a verified identity failed, `2` a
//! configuration, parse or domain error (including mismatched trajectory
//! grids), `3` every ray ended on the singular locus.

pub mod commands;
pub mod error;
pub mod output;
pub mod scene;
pub mod tensors;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use finsler_core::media::{build_metric, MediumSpec};
use finsler_core::spinoptics::SpinConstants;
use serde::Serialize;

pub use error::{CliError, CliResult};

/// Environment variable overriding `--threads`.
pub const THREADS_ENV: &str = "FINSLER_THREADS";

/// Exit code of a failed verification.
pub const EXIT_VERIFY_FAILED: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Ray tracing and identity checks in Finsler optical media")]
pub struct Cli {
    /// Worker threads for ray batches and sampling (default: logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate every ray of a scene and write one trajectory file per ray.
    Trace { config: PathBuf },

    /// Check the structural identities at seeded random supporting elements.
    Verify {
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Transverse separation of opposite helicities, from a spin scene or
    /// from two trajectory files.
    Compare {
        #[arg(required_unless_present_all = ["plus", "minus"], conflicts_with_all = ["plus", "minus"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "minus")]
        plus: Option<PathBuf>,
        #[arg(long, requires = "plus")]
        minus: Option<PathBuf>,
    },

    /// Print every tensor at one supporting element.
    Tensors {
        spec: PathBuf,
        /// Position `a,b,c`.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        x: [f64; 3],
        /// Direction `d,e,f`.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        y: [f64; 3],
        /// Spin `s`; adds the spin tensor, Δ and Σ.
        #[arg(long, allow_negative_numbers = true)]
        spin: Option<f64>,
        /// Color `p` (with `--spin`).
        #[arg(long, default_value_t = 1.0)]
        color: f64,
    },
}

/// Thread count from `FINSLER_THREADS`, else `--threads`.
pub fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

pub fn load_medium(path: &Path) -> CliResult<MediumSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))
}

/// `a,b,c` → `[a, b, c]`.
pub fn parse_triple(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated numbers, got {text:?}"));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    Ok([num(a)?, num(b)?, num(c)?])
}

/// Run a parsed command, writing its report to `out`; returns the exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<i32> {
    if let Some(n) = thread_count(cli.threads)? {
        // a pool can only be installed once per process; later calls keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Trace { config } => {
            let cfg = scene::SceneConfig::load(config)?;
            let (summary, code) = commands::trace(&cfg)?;
            print_json(out, &summary)?;
            Ok(code)
        }
        Command::Verify { spec, samples, seed } => {
            let medium = load_medium(spec)?;
            let metric = build_metric(&medium)?;
            let report = verify::verify(&metric, medium.kind(), *samples, *seed);
            print_json(out, &report)?;
            Ok(if report.pass { 0 } else { EXIT_VERIFY_FAILED })
        }
        Command::Compare { config, plus, minus } => {
            let (records, code) = match (config, plus, minus) {
                (Some(c), _, _) => commands::compare(&scene::SceneConfig::load(c)?)?,
                (None, Some(p), Some(m)) => (commands::compare_files(p, m)?, 0),
                _ => return Err(CliError::Usage("compare needs a config or --plus and --minus".into())),
            };
            print_json(out, &records)?;
            Ok(code)
        }
        Command::Tensors {
            spec,
            x,
            y,
            spin,
            color,
        } => {
            let metric = build_metric(&load_medium(spec)?)?;
            let constants = spin.map(|s| SpinConstants {
                p: *color,
                s,
                tol_delta: None,
                tol_sigma: None,
            });
            let dump = tensors::dump(&metric, *x, *y, constants)?;
            print_json(out, &dump)?;
            Ok(0)
        }
    }
}

/// Entry point shared by the binary: errors go to stderr and become exit code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
