//! Command-line batch runner.
//!
//! ```text
//! nmcool run <config> [--jobs N] [--out DIR]
//! nmcool validate <config>
//! nmcool params <config>
//! ```
//!
//! Exit status is 0 on success, 1 for configuration problems (including
//! unreadable files) and 2 when a solver fails.

pub mod check;
pub mod config;
pub mod output;
pub mod quantity;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use check::{validate_text, Finding, Report, Severity};
pub use config::{ConfigError, ExperimentConfig, RunMode};
pub use run::{execute, RunError, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nmcool", version, about = "Laser cooling of nuclear magnons in a cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads for sweeps and multi-run configs.
        #[arg(long)]
        jobs: Option<NonZeroUsize>,
        /// Output directory (default: `out` next to the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without solving anything.
    Validate { config: PathBuf },
    /// Print the resolved model parameters.
    Params { config: PathBuf },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text, &stem(path))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Run { config, jobs, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(stderr, "config error at {e}");
                    return EXIT_CONFIG;
                }
            };
            let out_dir = out.unwrap_or_else(|| {
                config
                    .parent()
                    .map(|p| p.join("out"))
                    .unwrap_or_else(|| PathBuf::from("out"))
            });
            match execute(&cfg, &out_dir, jobs) {
                Ok(report) => {
                    for line in &report.lines {
                        let _ = writeln!(stdout, "{line}");
                    }
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(stderr, "{e}");
                    match e {
                        RunError::Solver(_) => EXIT_SOLVER,
                        RunError::Config(_) | RunError::Io(..) => EXIT_CONFIG,
                    }
                }
            }
        }
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(stderr, "cannot read {}: {e}", config.display());
                    return EXIT_CONFIG;
                }
            };
            let report = validate_text(&text, &stem(&config));
            for f in &report.findings {
                let _ = writeln!(stdout, "{f}");
            }
            if report.is_clean() {
                let _ = writeln!(stdout, "ok");
                EXIT_OK
            } else {
                EXIT_CONFIG
            }
        }
        Command::Params { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(stderr, "config error at {e}");
                    return EXIT_CONFIG;
                }
            };
            match cfg.resolve_all() {
                Ok(runs) => {
                    for r in &runs {
                        for line in run::describe(r) {
                            let _ = writeln!(stdout, "{line}");
                        }
                    }
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(stderr, "config error at {e}");
                    EXIT_CONFIG
                }
            }
        }
    }
}
