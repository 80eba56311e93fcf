//! Log e-values for composite exponential-family nulls.
//!
//! Everything is kept on the natural-log scale; exponentiate only when
//! checking validity on small instances.

pub mod gauss;
pub mod twosample;

pub use gauss::{GaussModel, Regime};
pub use twosample::{RipNumericOptions, TwoSampleEvaluator};

use std::fmt;
use std::str::FromStr;

use expfam_core::{log_lik, log_lik_max, Family};
use ripr_solver::DiscretePrior;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EVarError {
    #[error("unknown e-variable kind '{0}'")]
    UnknownKind(String),
    #[error("{kind} needs {what}")]
    MissingParameter { kind: EVarKind, what: &'static str },
    #[error("{kind} is not available for {setting}")]
    Unsupported { kind: EVarKind, setting: String },
    #[error("RIPr prior covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("covariance difference has eigenvalues of both signs ({min:e}, {max:e})")]
    MixedRegime { min: f64, max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty data")]
    EmptyData,
    #[error("data length {len} is not a multiple of {width}")]
    Ragged { len: usize, width: usize },
    #[error("projection did not converge: gap {gap:e} > tol {tol:e}")]
    NotConverged { gap: f64, tol: f64 },
    #[error(transparent)]
    Gauss(#[from] gauss_analytic::GaussError),
    #[error(transparent)]
    ExpFam(#[from] expfam_core::ExpFamError),
    #[error(transparent)]
    TwoSample(#[from] two_sample::TwoSampleError),
    #[error(transparent)]
    Ripr(#[from] ripr_solver::RiprError),
}

/// The e-statistics that can be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EVarKind {
    /// Fixed alternative over the maximized null likelihood.
    UiSimple,
    /// Prequential plug-in numerator.
    UiPlugin,
    /// Bayes-mixture numerator over W1.
    UiMixture,
    Cond,
    SeqRip,
    /// Closed-form Gaussian RIPr statistic.
    Rip,
    /// RIPr statistic with a numerically projected W0.
    RipNumeric,
    Haar,
    /// q_W1 / p_W1; not an e-variable in general.
    PseudoW1,
}

pub const ALL_KINDS: [EVarKind; 9] = [
    EVarKind::UiSimple,
    EVarKind::UiPlugin,
    EVarKind::UiMixture,
    EVarKind::Cond,
    EVarKind::SeqRip,
    EVarKind::Rip,
    EVarKind::RipNumeric,
    EVarKind::Haar,
    EVarKind::PseudoW1,
];

impl EVarKind {
    pub fn name(self) -> &'static str {
        match self {
            EVarKind::UiSimple => "ui-simple",
            EVarKind::UiPlugin => "ui-plugin",
            EVarKind::UiMixture => "ui-mixture",
            EVarKind::Cond => "cond",
            EVarKind::SeqRip => "seq-rip",
            EVarKind::Rip => "rip",
            EVarKind::RipNumeric => "rip-numeric",
            EVarKind::Haar => "haar",
            EVarKind::PseudoW1 => "pseudo-w1",
        }
    }

    pub fn is_pseudo(self) -> bool {
        self == EVarKind::PseudoW1
    }

    pub fn needs_plugin(self) -> bool {
        matches!(self, EVarKind::UiPlugin | EVarKind::SeqRip)
    }

    pub fn needs_prior(self) -> bool {
        matches!(
            self,
            EVarKind::UiMixture | EVarKind::RipNumeric | EVarKind::PseudoW1
        )
    }
}

impl fmt::Display for EVarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EVarKind {
    type Err = EVarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "ui" => "ui-simple",
            "ui-w1" => "ui-mixture",
            "pseudo" => "pseudo-w1",
            "seqrip" => "seq-rip",
            other => other,
        };
        ALL_KINDS
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or(EVarError::UnknownKind(s))
    }
}

/// A log e-value together with what produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEValue {
    pub value: f64,
    pub kind: EVarKind,
    pub n: usize,
}

impl LogEValue {
    pub fn new(kind: EVarKind, n: usize, value: f64) -> Self {
        Self { value, kind, n }
    }

    /// Pseudo-W1 values carry no validity guarantee.
    pub fn is_guaranteed(&self) -> bool {
        !self.kind.is_pseudo()
    }
}

/// Prequential plug-in: mu_i = (x0 n0 + x_1 + ... + x_i) / (i + n0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plugin {
    pub x0: Vec<f64>,
    pub n0: f64,
}

impl Plugin {
    pub fn new(x0: Vec<f64>, n0: f64) -> Self {
        Self { x0, n0 }
    }

    pub fn validate(&self) -> Result<(), EVarError> {
        if !(self.n0 > 0.0 && self.n0.is_finite())
            || self.x0.is_empty()
            || self.x0.iter().any(|v| !v.is_finite())
        {
            return Err(EVarError::InvalidParameter(format!(
                "plug-in needs finite x0 and n0 > 0, got {:?}, {}",
                self.x0, self.n0
            )));
        }
        Ok(())
    }

    /// Running predictor; `push` folds in one observation.
    pub fn state(&self) -> PluginState {
        PluginState {
            sum: self.x0.iter().map(|v| v * self.n0).collect(),
            weight: self.n0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginState {
    sum: Vec<f64>,
    weight: f64,
}

impl PluginState {
    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.weight).collect()
    }

    pub fn mean1(&self) -> f64 {
        self.sum[0] / self.weight
    }

    pub fn push(&mut self, x: &[f64]) {
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s += v;
        }
        self.weight += 1.0;
    }
}

/// An e-statistic with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EVarSpec {
    pub kind: EVarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin: Option<Plugin>,
    /// W1, with atoms in the alternative's own coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<DiscretePrior>,
}

impl EVarSpec {
    pub fn new(kind: EVarKind) -> Self {
        Self {
            kind,
            plugin: None,
            prior: None,
        }
    }

    pub fn with_plugin(mut self, plugin: Plugin) -> Self {
        self.plugin = Some(plugin);
        self
    }

    pub fn with_prior(mut self, prior: DiscretePrior) -> Self {
        self.prior = Some(prior);
        self
    }

    /// Every hyperparameter the kind needs is present.
    pub fn validate(&self) -> Result<(), EVarError> {
        if self.kind.needs_plugin() && self.plugin.is_none() {
            return Err(EVarError::MissingParameter {
                kind: self.kind,
                what: "plug-in (x0, n0)",
            });
        }
        if self.kind.needs_prior() && self.prior.is_none() {
            return Err(EVarError::MissingParameter {
                kind: self.kind,
                what: "a prior W1",
            });
        }
        if let Some(p) = &self.plugin {
            p.validate()?;
        }
        Ok(())
    }
}

/// log q(u^n) - log sup_mu p_mu(u^n) for an alternative member `q_mu` of
/// `q` sharing the observation space with `null`.
pub fn log_s_ui(
    q: &dyn Family,
    q_mu: &[f64],
    null: &dyn Family,
    us: &[f64],
) -> Result<LogEValue, EVarError> {
    if us.is_empty() {
        return Err(EVarError::EmptyData);
    }
    let n = us.len() / null.obs_dim();
    Ok(LogEValue::new(
        EVarKind::UiSimple,
        n,
        log_lik(q, q_mu, us)? - log_lik_max(null, us)?,
    ))
}
