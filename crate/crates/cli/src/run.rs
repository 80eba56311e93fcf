//! Experiment dispatch.

use std::path::{Path, PathBuf};

use classify::{classify_two_sample, classify_with, Check, Classification};
use epower_lab::{
    brute_validity, eprocess_counterexample, monte_carlo, predicted_epower, Case, EProcessReport,
    EProcessSetting, GaussSetting, Model, PredictParams, SimPlan, TwoSampleSetting, ValidityReport,
};
use evariables::twosample::beta_prior;
use evariables::{EVarKind, EVarSpec, TwoSampleEvaluator};
use ripr_solver::{solve_ripr_z, uniform_grid, RiprCertificate, SolverOptions};
use serde::Serialize;

use crate::config::{validate_config, Diagnostic, ExperimentKind, ModelKind, RunConfig};
use crate::output::{
    artifact_paths, fmt_value, gnuplot_script, num, write_csv, write_json, write_text, Summary,
};
use crate::CliError;

/// Tolerance on E[S] - 1 for a statistic to count as valid.
pub const VALIDITY_SLACK: f64 = 1e-9;

#[derive(Debug, Default)]
pub struct RunOutput {
    /// Report for standard output.
    pub stdout: String,
    pub warnings: Vec<Diagnostic>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    fn line(&mut self, s: impl AsRef<str>) {
        self.stdout.push_str(s.as_ref());
        self.stdout.push('\n');
    }
}

/// Check the configuration and run its experiment.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let diags = validate_config(cfg);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(CliError::Invalid(diags));
    }
    let mut out = RunOutput {
        warnings: diags,
        ..Default::default()
    };
    match cfg.experiment.expect("validated") {
        ExperimentKind::Simulate => simulate(cfg, &mut out)?,
        ExperimentKind::Ripr => ripr(cfg, &mut out)?,
        ExperimentKind::Classify => classify(cfg, &mut out)?,
        ExperimentKind::Validate => validate(cfg, &mut out)?,
        ExperimentKind::Predict => predict(cfg, &mut out)?,
        ExperimentKind::Eprocess => eprocess(cfg, &mut out)?,
    }
    Ok(out)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn json_path(cfg: &RunConfig, suffix: &str) -> Option<PathBuf> {
    cfg.output
        .dir
        .as_ref()
        .map(|d| d.join(format!("{}-{suffix}.json", cfg.output.prefix)))
}

pub fn build_plan(cfg: &RunConfig) -> Result<SimPlan, CliError> {
    let model = match cfg.family.model {
        ModelKind::TwoSample => {
            let mut s = TwoSampleSetting::new(cfg.alternative()?);
            if let Some([a, b]) = cfg.family.truth {
                s.truth = (a, b);
            }
            s.rip = cfg.rip_options();
            Model::TwoSample(s)
        }
        ModelKind::Gaussian => {
            let (sq, sp, sr) = cfg.covariances()?;
            let g = GaussSetting::new(sq, sp, cfg.family.mu_star.clone())?
                .with_sampling(sr)
                .with_prior(cfg.gauss_prior()?);
            Model::Gaussian(g)
        }
    };
    let mut plan = SimPlan::new(model, cfg.specs()?, cfg.grid());
    plan.replicates = cfg.replicates;
    plan.seed = cfg.seed;
    plan.seq_rip_cap = (cfg.seq_rip_cap > 0).then_some(cfg.seq_rip_cap);
    Ok(plan)
}

fn simulate(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let curve = monte_carlo(&build_plan(cfg)?)?;
    let dir = out_dir(cfg);
    let (csv, json, gp) = artifact_paths(&dir, &cfg.output.prefix);
    write_csv(&csv, &curve)?;
    write_json(&json, &Summary::new("simulate", cfg, &curve))?;
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let png = format!("{}.png", cfg.output.prefix);
    write_text(&gp, &gnuplot_script(&curve, &name(&csv), &png))?;
    out.line(format!(
        "D = {}; {} replicates, seed {}",
        fmt_value(curve.kl),
        curve.replicates,
        curve.seed
    ));
    let last = cfg.grid().last().copied().unwrap_or(0);
    for p in curve.points.iter().filter(|p| p.n == last) {
        out.line(format!(
            "n = {:>5}  {:<12} regret {} (se {})",
            p.n,
            p.kind.name(),
            fmt_value(p.regret),
            fmt_value(p.regret_se)
        ));
    }
    out.files.extend([csv, json, gp]);
    Ok(())
}

/// Projection of N(0, var_q) onto location mixtures of N(mu, var_p), with
/// its closed-form optimum.
#[derive(Debug, Clone, Serialize)]
pub struct GaussProjection {
    pub var_q: f64,
    pub var_p: f64,
    /// 1/2 (lambda - 1 - log lambda) with lambda = var_q / var_p when
    /// var_q <= var_p, else 0.
    pub closed_form: f64,
    pub certificate: RiprCertificate,
    /// Objective trace is non-increasing.
    pub monotone: bool,
}

pub fn gauss_projection(
    var_q: f64,
    var_p: f64,
    grid_size: usize,
    cells: usize,
    opts: SolverOptions,
) -> Result<GaussProjection, CliError> {
    if !(var_q > 0.0 && var_p > 0.0) {
        return Err(CliError::Config(format!(
            "variances must be positive, got {var_q}, {var_p}"
        )));
    }
    let lambda = var_q / var_p;
    let closed_form = if lambda <= 1.0 {
        0.5 * (lambda - 1.0 - lambda.ln())
    } else {
        0.0
    };
    // odd grid so that the target mean is an atom
    let grid_size = grid_size | 1;
    // Atoms cover the optimal mixing law N(0, var_q - var_p). Reaching
    // further adds atoms with weights near e^-64, which only slows the
    // solver down.
    let reach = 6.0 * (var_q - var_p).max(0.0).sqrt().max(0.05 * var_p.sqrt());
    let grid = uniform_grid(-reach, reach, grid_size);
    let half = reach + 8.0 * var_p.sqrt();
    let width = 2.0 * half / cells as f64;
    let zs: Vec<f64> = (0..cells)
        .map(|i| -half + (i as f64 + 0.5) * width)
        .collect();
    let cell = |mean: f64, var: f64| -> Vec<f64> {
        zs.iter()
            .map(|z| {
                -0.5 * ((z - mean).powi(2) / var + (2.0 * std::f64::consts::PI * var).ln())
                    + width.ln()
            })
            .collect()
    };
    let target = cell(0.0, var_q);
    let (_, certificate) = solve_ripr_z(&target, |mu| cell(mu[0], var_p), &grid, opts)?;
    let monotone = certificate.trace.windows(2).all(|w| w[1] <= w[0]);
    Ok(GaussProjection {
        var_q,
        var_p,
        closed_form,
        certificate,
        monotone,
    })
}

#[derive(Serialize)]
struct RiprRow {
    n: usize,
    certificate: RiprCertificate,
}

fn ripr(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let dir = out_dir(cfg);
    match cfg.family.model {
        ModelKind::Gaussian => {
            if cfg.dim() != 1 {
                return Err(CliError::Config(
                    "the gaussian projection is one-dimensional".into(),
                ));
            }
            let p = gauss_projection(
                cfg.family.sigma_q[0],
                cfg.family.sigma_p[0],
                cfg.solver.grid_size,
                cfg.solver.cells,
                cfg.solver_options(),
            )?;
            let c = &p.certificate;
            out.line(format!(
                "kl {} (closed form {}), gap {:e}, {} iterations, {} atoms",
                fmt_value(c.kl),
                fmt_value(p.closed_form),
                c.gap,
                c.iters,
                c.atoms.len()
            ));
            let path = dir.join(format!("{}-ripr.json", cfg.output.prefix));
            write_json(&path, &Summary::new("ripr", cfg, &p))?;
            out.files.push(path);
        }
        ModelKind::TwoSample => {
            let alt = cfg.alternative()?;
            let e = &cfg.evariables;
            let prior = beta_prior(&alt, e.prior_points, e.prior_lo, e.prior_hi)?;
            let spec = EVarSpec::new(EVarKind::RipNumeric).with_prior(prior);
            let grid = cfg.grid();
            let eval = TwoSampleEvaluator::new(alt, vec![spec], grid.clone(), cfg.rip_options())?;
            let mut rows = Vec::new();
            let mut csv = String::from("n,kl,gap,iters,atoms\n");
            for (i, &n) in grid.iter().enumerate() {
                let c = eval.certificate(0, i).expect("rip-numeric slot").clone();
                out.line(format!(
                    "n = {n:>5}  kl {}  gap {:e}  atoms {}",
                    fmt_value(c.kl),
                    c.gap,
                    c.atoms.len()
                ));
                csv.push_str(&format!(
                    "{n},{},{},{},{}\n",
                    num(c.kl),
                    num(c.gap),
                    c.iters,
                    c.atoms.len()
                ));
                rows.push(RiprRow { n, certificate: c });
            }
            let csv_path = dir.join(format!("{}-ripr.csv", cfg.output.prefix));
            let json = dir.join(format!("{}-ripr.json", cfg.output.prefix));
            write_text(&csv_path, &csv)?;
            write_json(&json, &Summary::new("ripr", cfg, &rows))?;
            out.files.extend([csv_path, json]);
        }
    }
    Ok(())
}

fn classify(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let (label, c): (String, Classification) = match cfg.family.model {
        ModelKind::TwoSample => {
            let alt = cfg.alternative()?;
            let f = &cfg.family;
            let betas = alt.prior_grid(f.curve_points, f.curve_lo, f.curve_hi)?;
            let (a, b) = alt.anchor();
            (
                format!(
                    "{} two-sample, anchor ({}, {})",
                    alt.base().name(),
                    fmt_value(a),
                    fmt_value(b)
                ),
                classify_two_sample(&alt, &betas)?,
            )
        }
        ModelKind::Gaussian => {
            let (sq, sp, _) = cfg.covariances()?;
            let c = classify_with(
                std::slice::from_ref(&cfg.family.mu_star),
                |_| Ok((sq.clone(), sp.clone())),
                (Check::Verified, Check::Verified),
            )?;
            (format!("gaussian location, d = {}", cfg.dim()), c)
        }
    };
    out.line(format!("{label}: {}", c.verdict.label()));
    out.line(format!(
        "eigenvalues of Sq - Sp in [{}, {}]",
        fmt_value(c.min_eigenvalue),
        fmt_value(c.max_eigenvalue)
    ));
    if let Some(path) = json_path(cfg, "classify") {
        write_json(&path, &Summary::new("classify", cfg, &c))?;
        out.files.push(path);
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidityRow {
    kind: EVarKind,
    #[serde(flatten)]
    report: ValidityReport,
    /// None for statistics that are not e-variables.
    valid: Option<bool>,
}

/// Whether a brute-force expectation respects the bound for its kind.
pub fn validity_ok(kind: EVarKind, r: &ValidityReport) -> Option<bool> {
    match kind {
        EVarKind::PseudoW1 => None,
        EVarKind::Cond => Some((r.expectation - 1.0).abs() <= VALIDITY_SLACK),
        _ => Some(r.expectation <= 1.0 + r.gap.unwrap_or(0.0) + VALIDITY_SLACK),
    }
}

fn validate(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let alt = cfg.alternative()?;
    let specs = cfg.specs()?;
    let mut rows = Vec::new();
    let mut csv = String::from("n,kind,null_mean,expectation,gap\n");
    for &n in &cfg.validate.n_values {
        for spec in &specs {
            for &mu in &cfg.validate.null_means {
                let r = brute_validity(&alt, spec, mu, n, cfg.rip_options())?;
                let valid = validity_ok(spec.kind, &r);
                csv.push_str(&format!(
                    "{n},{},{},{},{}\n",
                    spec.kind.name(),
                    num(mu),
                    num(r.expectation),
                    r.gap.map(num).unwrap_or_default()
                ));
                rows.push(ValidityRow {
                    kind: spec.kind,
                    report: r,
                    valid,
                });
            }
        }
    }
    let bad = rows.iter().filter(|r| r.valid == Some(false)).count();
    for r in &rows {
        let tag = match r.valid {
            Some(true) => "ok",
            Some(false) => "VIOLATED",
            None => "n/a",
        };
        out.line(format!(
            "n = {}  {:<12} mu = {:<5} E[S] = {:.12}  {tag}",
            r.report.n,
            r.kind.name(),
            fmt_value(r.report.null_mean),
            r.report.expectation
        ));
    }
    out.line(format!("{} checks, {bad} violations", rows.len()));
    let dir = out_dir(cfg);
    let csv_path = dir.join(format!("{}-validity.csv", cfg.output.prefix));
    let json = dir.join(format!("{}-validity.json", cfg.output.prefix));
    write_text(&csv_path, &csv)?;
    write_json(&json, &Summary::new("validate", cfg, &rows))?;
    out.files.extend([csv_path, json]);
    Ok(())
}

fn predict_params(cfg: &RunConfig) -> Result<PredictParams, CliError> {
    let mut p = cfg.predict.params.clone();
    if cfg.family.model == ModelKind::Gaussian && p.sigma_q.is_none() && p.sigma_p.is_none() {
        let (sq, sp, sr) = cfg.covariances()?;
        let filled = PredictParams::from_covariances(&sq, &sp, &sr);
        p.sigma_q = filled.sigma_q;
        p.sigma_p = filled.sigma_p;
        p.sigma_r = filled.sigma_r;
        p.mu_star.get_or_insert_with(|| cfg.family.mu_star.clone());
    }
    Ok(p)
}

fn predict(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let case: Case = cfg
        .predict
        .case
        .as_deref()
        .ok_or_else(|| CliError::Usage("predict needs a case (--case)".into()))?
        .parse()?;
    let n = cfg
        .predict
        .n
        .ok_or_else(|| CliError::Usage("predict needs a sample size (--n)".into()))?;
    let p = predicted_epower(case, &predict_params(cfg)?, n)?;
    if p.is_asymptotic() {
        out.line(format!("{} + {}", fmt_value(p.value), p.remainder.label()));
    } else {
        out.line(fmt_value(p.value));
    }
    if let Some(path) = json_path(cfg, "predict") {
        #[derive(Serialize)]
        struct Row<'a> {
            case: &'a str,
            formula: &'a str,
            n: usize,
            prediction: epower_lab::Prediction,
        }
        write_json(
            &path,
            &Summary::new(
                "predict",
                cfg,
                Row {
                    case: case.tag(),
                    formula: case.formula(),
                    n,
                    prediction: p,
                },
            ),
        )?;
        out.files.push(path);
    }
    Ok(())
}

fn eprocess(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let e = &cfg.eprocess;
    let setting = match cfg.family.model {
        ModelKind::Gaussian => EProcessSetting::Gaussian {
            var_q: cfg.family.sigma_q[0],
            var_p: cfg.family.sigma_p[0],
            prior_var: e.prior_var,
            cells: e.cells,
        },
        ModelKind::TwoSample => {
            let alt = cfg.alternative()?;
            let v = &cfg.evariables;
            let prior = beta_prior(&alt, v.prior_points, v.prior_lo, v.prior_hi)?;
            EProcessSetting::TwoSample {
                alt,
                prior,
                rip: cfg.rip_options(),
            }
        }
    };
    let r: EProcessReport = eprocess_counterexample(&setting, e.n)?;
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.8}"));
    out.line(format!(
        "n = {}: forward {}  backward {}",
        r.n,
        show(r.forward),
        show(r.backward)
    ));
    let verdict = match r.verdict {
        epower_lab::EProcessVerdict::NotEProcess => "not an e-process",
        epower_lab::EProcessVerdict::Inconclusive => "inconclusive",
    };
    out.line(format!("{verdict}: {}", r.reason));
    if let Some(path) = json_path(cfg, "eprocess") {
        write_json(&path, &Summary::new("eprocess", cfg, &r))?;
        out.files.push(path);
    }
    Ok(())
}
