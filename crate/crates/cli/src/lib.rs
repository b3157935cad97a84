//! Configuration-driven experiments on top of the `dynwave` toolkit.

pub mod commands;
pub mod config;
pub mod defaults;
pub mod error;

use std::path::Path;

use serde_json::json;

pub use config::ExperimentConfig;
pub use error::{CliError, Issue};

/// `dynwave <version> (<git describe>)`, embedded in every report.
pub const BUILD_ID: &str = concat!("dynwave ", env!("CARGO_PKG_VERSION"), " (", env!("DYNWAVE_GIT_DESCRIBE"), ")");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CertifyGeometry,
    Counterexample,
    AuditCarleman,
    InvertSource,
    ObservabilitySweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CertifyGeometry => "certify-geometry",
            Command::Counterexample => "counterexample",
            Command::AuditCarleman => "audit-carleman",
            Command::InvertSource => "invert-source",
            Command::ObservabilitySweep => "observability-sweep",
        }
    }
}

/// Runs one subcommand and writes `report.json` next to its other outputs.
pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<serde_json::Value, CliError> {
    std::fs::create_dir_all(out)?;
    let result = match command {
        Command::CertifyGeometry => commands::certify_geometry(cfg, out)?,
        Command::Counterexample => commands::counterexample(cfg, out)?,
        Command::AuditCarleman => commands::audit_carleman(cfg, out)?,
        Command::InvertSource => commands::invert_source(cfg, out)?,
        Command::ObservabilitySweep => commands::observability(cfg, out)?,
    };
    let report = json!({
        "build": BUILD_ID,
        "command": command.name(),
        "config": cfg,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(out.join("report.json"), text)?;
    Ok(report)
}
