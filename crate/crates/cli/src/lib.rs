//! Command-line front end for `uniconn`: JSON configs in, JSON (or indented
//! text) reports out.
//!
//! Exit codes: `0` every check passed, `1` some residual exceeded its
//! tolerance, `2` the configuration or the command line was invalid.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use uniconn::curvature::Fault;

pub use commands::{Outcome, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
pub use config::{load_config, parse_config, ConfigError, OutputFormat, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "uniconn", version, about = "Verify unified connections on coordinate charts")]
pub struct Cli {
    /// Report format; overrides the config's `output` key.
    #[arg(long, value_enum, global = true)]
    pub output: Option<OutputFormat>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check torsion, non-metricity, T̃′, antisymmetry and curvature at every point.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// One threshold for the identity and curvature checks.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Double one named H term or curvature group (fault injection).
        #[arg(long, value_name = "NAME")]
        corrupt_term: Option<String>,
    },
    /// Dump g, Γ, H, Γ̃, T̃, ∇̃g and both curvature tensors at every point.
    Tensors {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the catalogue of particular connections.
    Cases,
    /// Term contribution table and minimal failing configuration search.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, value_name = "NAME")]
        corrupt_term: Option<String>,
    },
}

/// Rendered output of one invocation.
#[derive(Clone, Debug)]
pub struct Run {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

fn parse_fault(name: Option<&str>) -> Result<Option<Fault>, String> {
    name.map(|n| {
        Fault::from_name(n).ok_or_else(|| format!("unknown term `{n}`; expected one of: {}", Fault::all_names().join(", ")))
    })
    .transpose()
}

fn render(v: &serde_json::Value, fmt: OutputFormat) -> String {
    match fmt {
        OutputFormat::Json => report::to_json(v),
        OutputFormat::Pretty => report::to_pretty(v),
    }
}

fn config_error(msg: impl std::fmt::Display) -> Run {
    Run {
        stdout: String::new(),
        stderr: format!("error: {msg}\n"),
        code: EXIT_CONFIG,
    }
}

pub fn run(cli: &Cli) -> Run {
    let (path, tolerance, fault) = match &cli.command {
        Command::Cases => {
            let fmt = cli.output.unwrap_or(OutputFormat::Json);
            return Run {
                stdout: render(&commands::cmd_cases().report, fmt),
                stderr: String::new(),
                code: EXIT_PASS,
            };
        }
        Command::Verify {
            config,
            tolerance,
            corrupt_term,
        }
        | Command::Ablate {
            config,
            tolerance,
            corrupt_term,
        } => (config, *tolerance, corrupt_term.as_deref()),
        Command::Tensors { config } => (config, None, None),
    };
    let fault = match parse_fault(fault) {
        Ok(f) => f,
        Err(e) => return config_error(e),
    };
    if let Some(t) = tolerance {
        if !(t.is_finite() && t > 0.0) {
            return config_error(format!("--tolerance must be a positive number, got {t}"));
        }
    }
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let fmt = cli.output.or(cfg.output).unwrap_or(OutputFormat::Json);
    let outcome = match &cli.command {
        Command::Verify { .. } => commands::cmd_verify(&cfg, tolerance, fault),
        Command::Ablate { .. } => commands::cmd_ablate(&cfg, tolerance, fault),
        Command::Tensors { .. } => commands::cmd_tensors(&cfg),
        Command::Cases => unreachable!(),
    };
    match outcome {
        Ok(o) => Run {
            stdout: render(&o.report, fmt),
            stderr: String::new(),
            code: o.code,
        },
        Err(e) => config_error(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_fault_names_are_rejected() {
        assert!(parse_fault(Some("h_f3")).is_err());
        assert_eq!(parse_fault(Some("grad_f2")).unwrap().unwrap().name(), "grad_f2");
    }
}
