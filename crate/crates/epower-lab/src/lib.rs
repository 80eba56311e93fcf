//! E-power experiments: closed-form predictions, Monte-Carlo curves,
//! exhaustive validity checks and the e-process cross-expectation test.

pub mod eprocess;
pub mod predict;
pub mod sim;
pub mod validity;

pub use eprocess::{eprocess_counterexample, EProcessReport, EProcessSetting, EProcessVerdict};
pub use predict::{o_a, o_b, o_c, predicted_epower, Case, PredictParams, Prediction, Remainder};
pub use sim::{
    monte_carlo, CertificateSummary, CurvePoint, EPowerCurve, GaussSetting, Model, SimPlan,
    TwoSampleSetting, DEFAULT_REPLICATES, DEFAULT_SEQ_RIP_CAP, IDENTITY_REPLICATES,
};
pub use validity::{brute_validity, ValidityReport, MAX_BRUTE_N};

use evariables::EVarError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("unknown prediction case '{0}'")]
    UnknownCase(String),
    #[error("case {case} needs {what}")]
    MissingParameter {
        case: &'static str,
        what: &'static str,
    },
    #[error("case {case} does not apply: {why}")]
    Inapplicable { case: &'static str, why: String },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("replicate {index}: {source}")]
    Replicate { index: usize, source: EVarError },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    EVar(#[from] EVarError),
    #[error(transparent)]
    Gauss(#[from] gauss_analytic::GaussError),
    #[error(transparent)]
    TwoSample(#[from] two_sample::TwoSampleError),
    #[error(transparent)]
    Ripr(#[from] ripr_solver::RiprError),
}
