//! Run configuration: a TOML file, overrides from the command line, and the
//! checks that decide whether a run can start.

use std::fmt;
use std::path::PathBuf;

use epower_lab::{PredictParams, MAX_BRUTE_N};
use evariables::twosample::{beta_prior, default_plugin};
use evariables::{EVarKind, EVarSpec, Plugin, RipNumericOptions};
use gauss_analytic::{CovMatrix, GaussianPrior, MeanVec};
use ripr_solver::SolverOptions;
use serde::{Deserialize, Serialize};
use two_sample::{Base, GeneratedAlternative};

use crate::CliError;

pub const MAX_REPLICATES: usize = 10_000_000;
pub const MAX_N: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Ripr,
    Classify,
    Validate,
    Predict,
    Eprocess,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Ripr => "ripr",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Validate => "validate",
            ExperimentKind::Predict => "predict",
            ExperimentKind::Eprocess => "eprocess",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    TwoSample,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    pub replicates: usize,
    /// Explicit sample sizes; when empty a grid up to `n_max` is used.
    pub n_grid: Vec<usize>,
    pub n_max: usize,
    /// Largest n reported for seq-rip; 0 removes the cap.
    pub seq_rip_cap: usize,
    pub family: FamilyConfig,
    pub evariables: EVarConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub predict: PredictConfig,
    pub eprocess: EProcessConfig,
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            replicates: epower_lab::DEFAULT_REPLICATES,
            n_grid: Vec::new(),
            n_max: 100,
            seq_rip_cap: epower_lab::DEFAULT_SEQ_RIP_CAP,
            family: FamilyConfig::default(),
            evariables: EVarConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            predict: PredictConfig::default(),
            eprocess: EProcessConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub model: ModelKind,
    /// bernoulli, exponential, poisson or gaussian.
    pub base: String,
    /// Variance of the gaussian base.
    pub base_var: f64,
    /// Effect size; ignored when `anchor` is set.
    pub delta: Option<f64>,
    pub anchor: Option<[f64; 2]>,
    /// Pair (a, b) the data are drawn from; defaults to the anchor.
    pub truth: Option<[f64; 2]>,
    /// Curve grid for classification: `curve_points` cell midpoints of
    /// [curve_lo, curve_hi].
    pub curve_lo: f64,
    pub curve_hi: f64,
    pub curve_points: usize,
    /// Gaussian model, row-major matrices.
    pub sigma_q: Vec<f64>,
    pub sigma_p: Vec<f64>,
    pub sigma_r: Option<Vec<f64>>,
    pub mu_star: Vec<f64>,
    /// W1 = N(mu1, pi1); a point mass at mu* when absent.
    pub mu1: Option<Vec<f64>>,
    pub pi1: Option<Vec<f64>>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::TwoSample,
            base: "bernoulli".into(),
            base_var: 1.0,
            delta: None,
            anchor: None,
            truth: None,
            curve_lo: -10.0,
            curve_hi: 10.0,
            curve_points: 201,
            sigma_q: vec![2.0],
            sigma_p: vec![1.0],
            sigma_r: None,
            mu_star: vec![0.0],
            mu1: None,
            pi1: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EVarConfig {
    pub kinds: Vec<String>,
    /// Plug-in start; per-family default when absent.
    pub x0: Option<Vec<f64>>,
    pub n0: f64,
    /// W1 over the curve: `prior_points` cell midpoints of [prior_lo, prior_hi]
    /// clipped to the admissible range, equal weights.
    pub prior_points: usize,
    pub prior_lo: f64,
    pub prior_hi: f64,
}

impl Default for EVarConfig {
    fn default() -> Self {
        Self {
            kinds: ["ui-simple", "ui-plugin", "ui-mixture", "cond", "pseudo-w1"]
                .map(String::from)
                .to_vec(),
            x0: None,
            n0: 1.0,
            prior_points: 201,
            prior_lo: -10.0,
            prior_hi: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub prune: f64,
    /// Null means in the projection grid.
    pub grid_size: usize,
    /// Cells used to discretize a continuous sufficient statistic.
    pub cells: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        let r = RipNumericOptions::default();
        Self {
            tol: s.tol,
            max_iter: s.max_iter,
            prune: s.prune,
            grid_size: r.grid_size,
            cells: r.cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for artifacts; simulate, ripr and validate fall back to
    /// "out", the other experiments only write files when it is set.
    pub dir: Option<PathBuf>,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            prefix: "run".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub case: Option<String>,
    pub n: Option<usize>,
    pub params: PredictParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EProcessConfig {
    pub n: usize,
    /// Gaussian model: variance of W1 (0 for a fixed alternative) and the
    /// number of cells of the sample-mean grid.
    pub prior_var: f64,
    pub cells: usize,
}

impl Default for EProcessConfig {
    fn default() -> Self {
        Self {
            n: 2,
            prior_var: 0.0,
            cells: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub n_values: Vec<usize>,
    /// E[Ya + Yb] of the null members checked.
    pub null_means: Vec<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            n_values: vec![1, 2, 3, 4],
            null_means: vec![0.2, 1.0, 1.8],
        }
    }
}

/// Command-line values that replace configuration entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub n_max: Option<usize>,
    pub base: Option<String>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        }
    }

    fn warning(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if self.field.is_empty() {
            write!(f, "{sev}: {}", self.message)
        } else {
            write!(f, "{sev}: {}: {}", self.field, self.message)
        }
    }
}

/// Parse a configuration; errors carry 1-based line and column.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => line_col(text, span.start),
            None => (1, 1),
        };
        CliError::Parse {
            path: None,
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let head = &text[..offset.min(text.len())];
    let line = head.matches('\n').count() + 1;
    let column = head.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        CliError::Parse {
            line,
            column,
            message,
            ..
        } => CliError::Parse {
            path: Some(path.to_path_buf()),
            line,
            column,
            message,
        },
        other => other,
    })
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.reps {
            self.replicates = r;
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = Some(d.clone());
        }
        if let Some(n) = o.n_max {
            self.n_max = n;
            self.n_grid.retain(|&k| k <= n);
        }
        if let Some(b) = &o.base {
            self.family.base = b.clone();
            // a new base invalidates a pair given for the old one
            self.family.anchor = None;
            self.family.truth = None;
        }
        if let Some(d) = o.delta {
            self.family.delta = Some(d);
            self.family.anchor = None;
        }
    }

    /// Sample sizes of the run.
    pub fn grid(&self) -> Vec<usize> {
        if self.n_grid.is_empty() {
            default_grid(self.n_max)
        } else {
            self.n_grid.clone()
        }
    }

    pub fn base(&self) -> Result<Base, CliError> {
        let base = Base::from_name(self.family.base.trim())?;
        Ok(match base {
            Base::Gaussian { .. } => Base::Gaussian {
                var: self.family.base_var,
            },
            b => b,
        })
    }

    pub fn alternative(&self) -> Result<GeneratedAlternative, CliError> {
        let base = self.base()?;
        Ok(match (self.family.anchor, self.family.delta) {
            (Some([a, b]), _) => GeneratedAlternative::from_anchor(base, a, b)?,
            (None, Some(d)) => GeneratedAlternative::from_effect(base, d)?,
            (None, None) => {
                let [a, b] = default_anchor(base);
                GeneratedAlternative::from_anchor(base, a, b)?
            }
        })
    }

    pub fn kinds(&self) -> Result<Vec<EVarKind>, CliError> {
        self.evariables
            .kinds
            .iter()
            .map(|k| k.parse::<EVarKind>().map_err(CliError::from))
            .collect()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            prune: self.solver.prune,
        }
    }

    pub fn rip_options(&self) -> RipNumericOptions {
        RipNumericOptions {
            grid_size: self.solver.grid_size,
            cells: self.solver.cells,
            solver: self.solver_options(),
            require_converged: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.family.mu_star.len()
    }

    fn matrix(&self, field: &str, v: &[f64]) -> Result<CovMatrix, CliError> {
        let d = self.dim();
        if v.len() != d * d {
            return Err(CliError::Config(format!(
                "family.{field} needs {} entries for dimension {d}, got {}",
                d * d,
                v.len()
            )));
        }
        Ok(CovMatrix::new(d, v)?)
    }

    /// (Sq, Sp, Sr) of the Gaussian model.
    pub fn covariances(&self) -> Result<(CovMatrix, CovMatrix, CovMatrix), CliError> {
        let sq = self.matrix("sigma_q", &self.family.sigma_q)?;
        let sp = self.matrix("sigma_p", &self.family.sigma_p)?;
        let sr = match &self.family.sigma_r {
            Some(v) => self.matrix("sigma_r", v)?,
            None => sq.clone(),
        };
        Ok((sq, sp, sr))
    }

    pub fn gauss_prior(&self) -> Result<GaussianPrior, CliError> {
        let mu1 = self
            .family
            .mu1
            .clone()
            .unwrap_or_else(|| self.family.mu_star.clone());
        if mu1.len() != self.dim() {
            return Err(CliError::Config(format!(
                "family.mu1 has length {}, expected {}",
                mu1.len(),
                self.dim()
            )));
        }
        Ok(match &self.family.pi1 {
            Some(v) => GaussianPrior::new(MeanVec::new(&mu1), self.matrix("pi1", v)?)?,
            None => GaussianPrior::point(MeanVec::new(&mu1)),
        })
    }

    /// E-variable specs with plug-in and prior attached where needed.
    pub fn specs(&self) -> Result<Vec<EVarSpec>, CliError> {
        let kinds = self.kinds()?;
        let mut specs = Vec::with_capacity(kinds.len());
        match self.family.model {
            ModelKind::TwoSample => {
                let alt = self.alternative()?;
                let plugin = match &self.evariables.x0 {
                    Some(x0) => Plugin::new(x0.clone(), self.evariables.n0),
                    None => Plugin {
                        n0: self.evariables.n0,
                        ..default_plugin(&alt)
                    },
                };
                let needs_prior = kinds.iter().any(|k| k.needs_prior());
                let prior = if needs_prior {
                    let e = &self.evariables;
                    Some(beta_prior(&alt, e.prior_points, e.prior_lo, e.prior_hi)?)
                } else {
                    None
                };
                for k in kinds {
                    let mut s = EVarSpec::new(k);
                    if k.needs_plugin() {
                        s = s.with_plugin(plugin.clone());
                    }
                    if k.needs_prior() {
                        s = s.with_prior(prior.clone().expect("built above"));
                    }
                    specs.push(s);
                }
            }
            ModelKind::Gaussian => {
                let x0 = self
                    .evariables
                    .x0
                    .clone()
                    .unwrap_or_else(|| vec![0.0; self.dim()]);
                for k in kinds {
                    let mut s = EVarSpec::new(k);
                    if k.needs_plugin() {
                        s = s.with_plugin(Plugin::new(x0.clone(), self.evariables.n0));
                    }
                    specs.push(s);
                }
            }
        }
        Ok(specs)
    }
}

/// Default anchors: the settings of the figure runs.
pub fn default_anchor(base: Base) -> [f64; 2] {
    match base {
        Base::Bernoulli => [0.95, 0.05],
        Base::Exponential => [2.0, 2.0 / 3.0],
        Base::Poisson => [3.0, 1.0],
        Base::Gaussian { .. } => [0.5, -0.5],
    }
}

/// 1..10, then steps of 10 to 100, then steps of 25; always ends at n_max.
pub fn default_grid(n_max: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (1..=n_max.min(10)).collect();
    g.extend((20..=n_max.min(100)).step_by(10));
    g.extend((125..=n_max).step_by(25));
    if n_max > 0 && g.last() != Some(&n_max) {
        g.push(n_max);
    }
    g
}

/// Every problem with the configuration. Errors block a run, warnings do not.
pub fn validate_config(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut err = |field: &str, msg: String| out.push(Diagnostic::error(field, msg));
    let Some(kind) = cfg.experiment else {
        return vec![Diagnostic::error("experiment", "experiment kind required")];
    };
    if !(1..=MAX_REPLICATES).contains(&cfg.replicates) {
        err(
            "replicates",
            format!("must be in [1, {MAX_REPLICATES}], got {}", cfg.replicates),
        );
    }
    if !(1..=MAX_N).contains(&cfg.n_max) {
        err(
            "n_max",
            format!("must be in [1, {MAX_N}], got {}", cfg.n_max),
        );
    }
    let grid = cfg.grid();
    if grid.is_empty() {
        err("n_grid", "no sample sizes left".into());
    } else if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        err(
            "n_grid",
            format!("must be positive and strictly increasing: {grid:?}"),
        );
    } else if grid[grid.len() - 1] > MAX_N {
        err("n_grid", format!("sample sizes must not exceed {MAX_N}"));
    }
    let s = &cfg.solver;
    if !(s.tol > 0.0 && s.tol < 1.0) {
        err("solver.tol", format!("must be in (0, 1), got {}", s.tol));
    }
    if s.max_iter == 0 {
        err("solver.max_iter", "must be at least 1".into());
    }
    if !(0.0..1e-3).contains(&s.prune) {
        err(
            "solver.prune",
            format!("must be in [0, 1e-3), got {}", s.prune),
        );
    }
    if s.grid_size < 2 {
        err(
            "solver.grid_size",
            format!("must be at least 2, got {}", s.grid_size),
        );
    }
    if s.cells < 16 {
        err(
            "solver.cells",
            format!("must be at least 16, got {}", s.cells),
        );
    }
    let e = &cfg.evariables;
    if !(e.n0 > 0.0 && e.n0.is_finite()) {
        err("evariables.n0", format!("must be positive, got {}", e.n0));
    }
    if e.prior_points == 0 || e.prior_points > 100_000 {
        err(
            "evariables.prior_points",
            format!("must be in [1, 100000], got {}", e.prior_points),
        );
    }
    if !(e.prior_lo < e.prior_hi) {
        err(
            "evariables.prior_lo",
            "prior_lo must be below prior_hi".into(),
        );
    }
    let kinds: Vec<EVarKind> = e
        .kinds
        .iter()
        .filter_map(|k| match k.parse::<EVarKind>() {
            Ok(k) => Some(k),
            Err(_) => {
                err("evariables.kinds", format!("unknown e-variable '{k}'"));
                None
            }
        })
        .collect();
    if kinds.is_empty() && matches!(kind, ExperimentKind::Simulate | ExperimentKind::Validate) {
        err(
            "evariables.kinds",
            "at least one e-variable required".into(),
        );
    }
    let f = &cfg.family;
    match f.model {
        ModelKind::TwoSample => match cfg.base() {
            Err(_) => err("family.base", format!("unknown family '{}'", f.base)),
            Ok(base) => {
                if let Err(e) = cfg.alternative() {
                    err("family", e.to_string());
                }
                if let Some([a, b]) = f.truth {
                    if !base.in_mean_space(a) || !base.in_mean_space(b) {
                        err(
                            "family.truth",
                            format!("({a}, {b}) is not interior for {}", base.name()),
                        );
                    }
                }
                if !(f.curve_lo < f.curve_hi) || f.curve_points == 0 {
                    err(
                        "family.curve_points",
                        "curve grid needs curve_lo < curve_hi and at least one point".into(),
                    );
                }
                for k in &kinds {
                    if matches!(k, EVarKind::Rip | EVarKind::Haar) {
                        err(
                            "evariables.kinds",
                            format!("{k} applies to the gaussian model only"),
                        );
                    }
                }
                if let Some(x0) = &e.x0 {
                    if x0.len() != 1 || !base.in_mean_space(0.5 * x0[0]) {
                        err(
                            "evariables.x0",
                            format!("{x0:?} is not a null mean of the pair sum"),
                        );
                    }
                }
                let degenerate = match (f.anchor, f.delta) {
                    (Some([a, b]), _) => cfg.alternative().is_ok_and(|_| a == b),
                    (None, Some(d)) => d == 0.0,
                    _ => false,
                };
                if degenerate && kinds.contains(&EVarKind::RipNumeric) {
                    warnings.push(Diagnostic::warning(
                        "family.delta",
                        "alternative coincides with null",
                    ));
                }
            }
        },
        ModelKind::Gaussian => {
            let d = f.mu_star.len();
            if d == 0 {
                err("family.mu_star", "must not be empty".into());
            } else {
                match cfg.covariances() {
                    Err(e) => err("family", e.to_string()),
                    Ok((sq, sp, sr)) => {
                        for (name, m) in [("sigma_q", &sq), ("sigma_p", &sp), ("sigma_r", &sr)] {
                            if !m.is_spd() {
                                err(
                                    &format!("family.{name}"),
                                    "must be positive definite".into(),
                                );
                            }
                        }
                    }
                }
                if let Err(e) = cfg.gauss_prior() {
                    err("family.pi1", e.to_string());
                }
                if let Some(x0) = &e.x0 {
                    if x0.len() != d {
                        err(
                            "evariables.x0",
                            format!("has length {}, expected {d}", x0.len()),
                        );
                    }
                }
            }
            if kinds.contains(&EVarKind::RipNumeric) {
                err(
                    "evariables.kinds",
                    "rip-numeric applies to two-sample settings only".into(),
                );
            }
        }
    }
    match kind {
        ExperimentKind::Validate => {
            let v = &cfg.validate;
            if f.model != ModelKind::TwoSample {
                err(
                    "family.model",
                    "validate enumerates two-sample outcomes".into(),
                );
            }
            if v.n_values.is_empty() || v.n_values.iter().any(|&n| n == 0 || n > MAX_BRUTE_N) {
                err(
                    "validate.n_values",
                    format!("values must be in [1, {MAX_BRUTE_N}]"),
                );
            }
            if v.null_means.is_empty() {
                err(
                    "validate.null_means",
                    "at least one null member required".into(),
                );
            }
        }
        ExperimentKind::Predict => {
            if let Some(c) = &cfg.predict.case {
                if c.parse::<epower_lab::Case>().is_err() {
                    err("predict.case", format!("unknown case '{c}'"));
                }
            }
            if cfg.predict.n == Some(0) {
                err("predict.n", "must be at least 1".into());
            }
        }
        ExperimentKind::Eprocess => {
            if f.model == ModelKind::Gaussian && f.mu_star.len() != 1 {
                err(
                    "family.mu_star",
                    "the gaussian e-process check is one-dimensional".into(),
                );
            }
            if cfg.eprocess.cells < 2 {
                err("eprocess.cells", "must be at least 2".into());
            }
            if cfg.eprocess.prior_var < 0.0 {
                err("eprocess.prior_var", "must be nonnegative".into());
            }
        }
        _ => {}
    }
    out.extend(warnings);
    out
}
