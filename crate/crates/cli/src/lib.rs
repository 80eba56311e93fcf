//! Configuration, experiment dispatch and artifact writers behind the
//! `evarkit` binary.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use epower_lab::LabError;
use evariables::EVarError;
use serde_json::json;
use thiserror::Error;

pub use config::{
    default_grid, load_config, parse_config, validate_config, Diagnostic, ExperimentKind,
    ModelKind, Overrides, RunConfig, Severity,
};
pub use run::{build_plan, execute, gauss_projection, validity_ok, GaussProjection, RunOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}:{column}: {message}", path.as_ref().map_or("<config>".to_string(), |p| p.display().to_string()))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid configuration: {}", .0.iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    EVar(#[from] EVarError),
    #[error(transparent)]
    TwoSample(#[from] two_sample::TwoSampleError),
    #[error(transparent)]
    Gauss(#[from] gauss_analytic::GaussError),
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Ripr(#[from] ripr_solver::RiprError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn evar_is_solver(e: &EVarError) -> bool {
    matches!(e, EVarError::NotConverged { .. } | EVarError::Ripr(_))
}

impl CliError {
    /// Stable tag for the machine-readable error record.
    pub fn kind(&self) -> &'static str {
        use two_sample::TwoSampleError as T;
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Config(_) | CliError::Invalid(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::TwoSample(T::Unsupported(_))
            | CliError::EVar(EVarError::TwoSample(T::Unsupported(_))) => "unknown-family",
            CliError::Ripr(_) => "solver",
            CliError::EVar(e) if evar_is_solver(e) => "solver",
            CliError::Lab(LabError::EVar(e))
            | CliError::Lab(LabError::Replicate { source: e, .. })
                if evar_is_solver(e) =>
            {
                "solver"
            }
            CliError::Lab(LabError::Ripr(_)) => "solver",
            CliError::Lab(LabError::InvalidPlan(_)) => "config",
            CliError::Csv(_) | CliError::Json(_) => "io",
            _ => "runtime",
        }
    }

    /// 2 for problems with the invocation or configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "parse" | "config" | "usage" | "unknown-family" => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Parse {
                path, line, column, ..
            } => {
                v["line"] = json!(line);
                v["column"] = json!(column);
                if let Some(p) = path {
                    v["path"] = json!(p.display().to_string());
                }
            }
            CliError::Invalid(diags) => v["diagnostics"] = json!(diags),
            CliError::Io { path, .. } => v["path"] = json!(path.display().to_string()),
            _ => {}
        }
        json!({ "error": v })
    }
}
