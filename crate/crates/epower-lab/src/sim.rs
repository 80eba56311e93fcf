//! Monte-Carlo e-power curves.
//!
//! Replicate k draws from its own ChaCha stream (master seed, stream k), so
//! results do not depend on how replicates are scheduled across threads.
//! Every statistic is evaluated on the prefixes of one long sample.

use evariables::{EVarKind, EVarSpec, GaussModel, Regime, RipNumericOptions, TwoSampleEvaluator};
use gauss_analytic::{d_triple, log_lik_iid, CovMatrix, GaussianPrior, MeanVec, SpdFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use two_sample::{alt_ll, alt_null_kl, null_ll, sample_alt, GeneratedAlternative, PairSums};

use crate::predict::{predicted_epower, Case, PredictParams, Prediction};
use crate::LabError;

/// Replicates for figure-style curves.
pub const DEFAULT_REPLICATES: usize = 2000;
/// Replicates for checks of exact identities.
pub const IDENTITY_REPLICATES: usize = 100_000;
/// Largest n at which the sequential RIPr statistic is reported by default.
pub const DEFAULT_SEQ_RIP_CAP: usize = 200;

/// Gaussian location null with covariance Sp against alternative covariance
/// Sq, data drawn from N(mu*, Sr).
#[derive(Debug, Clone)]
pub struct GaussSetting {
    pub model: GaussModel,
    pub mu_star: Vec<f64>,
    pub sigma_r: CovMatrix,
    /// W1 of the mixture, RIP and pseudo statistics. A point mass at mu*
    /// gives their fixed-alternative versions.
    pub w1: GaussianPrior,
}

impl GaussSetting {
    pub fn new(
        sigma_q: CovMatrix,
        sigma_p: CovMatrix,
        mu_star: Vec<f64>,
    ) -> Result<Self, LabError> {
        let model = GaussModel::new(sigma_q.clone(), sigma_p)?;
        if mu_star.len() != model.dim() {
            return Err(LabError::InvalidParameter(format!(
                "mu* has length {}, expected {}",
                mu_star.len(),
                model.dim()
            )));
        }
        let w1 = GaussianPrior::point(MeanVec::new(&mu_star));
        Ok(Self {
            model,
            mu_star,
            sigma_r: sigma_q,
            w1,
        })
    }

    /// Sample from N(mu*, Sr) instead of the alternative.
    pub fn with_sampling(mut self, sigma_r: CovMatrix) -> Self {
        self.sigma_r = sigma_r;
        self
    }

    pub fn with_prior(mut self, w1: GaussianPrior) -> Self {
        self.w1 = w1;
        self
    }

    /// D_R(Q || P_mu*).
    pub fn kl(&self) -> Result<f64, LabError> {
        Ok(d_triple(
            &self.sigma_r,
            self.model.sigma_q(),
            self.model.sigma_p(),
        )?)
    }
}

/// Two-sample test against a generated alternative, data drawn from the
/// pair of means `truth`.
#[derive(Debug, Clone)]
pub struct TwoSampleSetting {
    pub alt: GeneratedAlternative,
    pub truth: (f64, f64),
    pub rip: RipNumericOptions,
}

impl TwoSampleSetting {
    pub fn new(alt: GeneratedAlternative) -> Self {
        let truth = alt.anchor();
        Self {
            alt,
            truth,
            rip: RipNumericOptions::default(),
        }
    }

    pub fn kl(&self) -> f64 {
        alt_null_kl(self.alt.base(), self.truth.0, self.truth.1)
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Gaussian(GaussSetting),
    TwoSample(TwoSampleSetting),
}

impl Model {
    /// D of the regret: per-observation expected log likelihood ratio of
    /// the sampling alternative against the null member with its mean.
    pub fn kl(&self) -> Result<f64, LabError> {
        match self {
            Model::Gaussian(g) => g.kl(),
            Model::TwoSample(t) => Ok(t.kl()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimPlan {
    pub model: Model,
    pub specs: Vec<EVarSpec>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Sequential RIPr rows are dropped above this n; `None` keeps all.
    pub seq_rip_cap: Option<usize>,
}

impl SimPlan {
    pub fn new(model: Model, specs: Vec<EVarSpec>, n_grid: Vec<usize>) -> Self {
        Self {
            model,
            specs,
            n_grid,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            seq_rip_cap: Some(DEFAULT_SEQ_RIP_CAP),
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.replicates == 0 {
            return Err(LabError::InvalidPlan(
                "replicates must be at least 1".into(),
            ));
        }
        if self.n_grid.is_empty()
            || self.n_grid[0] == 0
            || self.n_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(LabError::InvalidPlan(format!(
                "n-grid must be positive and strictly increasing: {:?}",
                self.n_grid
            )));
        }
        if self.specs.is_empty() {
            return Err(LabError::InvalidPlan("no e-variables requested".into()));
        }
        if let Model::Gaussian(g) = &self.model {
            let d = g.model.dim();
            g.sigma_r.check_same_dim(g.model.sigma_q())?;
            if g.w1.mean.dim() != d {
                return Err(LabError::InvalidPlan(format!(
                    "W1 mean has dimension {}, expected {d}",
                    g.w1.mean.dim()
                )));
            }
            for s in &self.specs {
                match s.kind {
                    EVarKind::RipNumeric => {
                        return Err(LabError::InvalidPlan(
                            "rip-numeric applies to two-sample settings only".into(),
                        ))
                    }
                    EVarKind::UiPlugin | EVarKind::SeqRip => {
                        let p = s.plugin.as_ref().ok_or_else(|| {
                            LabError::InvalidPlan(format!("{} needs x0 and n0", s.kind))
                        })?;
                        p.validate()?;
                        if p.x0.len() != d {
                            return Err(LabError::InvalidPlan(format!(
                                "x0 has length {}, expected {d}",
                                p.x0.len()
                            )));
                        }
                    }
                    _ => {}
                }
                if s.kind == EVarKind::SeqRip && g.model.regime() == Regime::Mixed {
                    return Err(LabError::InvalidPlan(
                        "seq-rip needs a simple or anti-simple covariance pair".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn reported(&self, kind: EVarKind, n: usize) -> bool {
        kind != EVarKind::SeqRip || self.seq_rip_cap.is_none_or(|cap| n <= cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Index into the plan's specs.
    pub spec: usize,
    pub kind: EVarKind,
    pub n: usize,
    pub mean_log_s: f64,
    pub se: f64,
    /// n D - E[log S], estimated by the mean of the paired differences
    /// log(q/p_mu*) - log S, whose first term has expectation n D exactly.
    pub regret: f64,
    pub regret_se: f64,
    pub predicted: Option<Prediction>,
    /// Certified gap of the numerical projection, when there is one.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub spec: usize,
    pub n: usize,
    pub kl: f64,
    pub gap: f64,
    pub tol: f64,
    pub iters: usize,
    pub atoms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPowerCurve {
    /// D in the regret n D - E[log S].
    pub kl: f64,
    pub replicates: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    pub certificates: Vec<CertificateSummary>,
}

impl EPowerCurve {
    /// First point of the given kind at n.
    pub fn get(&self, kind: EVarKind, n: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.kind == kind && p.n == n)
    }

    /// All points of the given kind, by increasing n.
    pub fn series(&self, kind: EVarKind) -> Vec<&CurvePoint> {
        let first = self.points.iter().find(|p| p.kind == kind).map(|p| p.spec);
        self.points
            .iter()
            .filter(|p| Some(p.spec) == first)
            .collect()
    }
}

/// Per-replicate output: log S per spec and grid index, and the control.
struct Draw {
    values: Vec<Vec<f64>>,
    oracle: Vec<f64>,
}

fn replicate_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

struct GaussRunner<'a> {
    g: &'a GaussSetting,
    chol: Vec<Vec<f64>>,
    fq: SpdFactor,
    fp: SpdFactor,
}

impl<'a> GaussRunner<'a> {
    fn new(g: &'a GaussSetting) -> Result<Self, LabError> {
        let l = g.sigma_r.cholesky()?.l();
        let d = g.model.dim();
        let chol = (0..d)
            .map(|i| (0..d).map(|j| l[(i, j)]).collect())
            .collect();
        Ok(Self {
            g,
            chol,
            fq: SpdFactor::new(g.model.sigma_q())?,
            fp: SpdFactor::new(g.model.sigma_p())?,
        })
    }

    fn draw(&self, plan: &SimPlan, k: usize) -> Result<Draw, evariables::EVarError> {
        let d = self.g.model.dim();
        let n_max = *plan.n_grid.last().expect("validated");
        let mut rng = replicate_rng(plan.seed, k);
        let mut xs = Vec::with_capacity(n_max * d);
        let mut z = vec![0.0; d];
        for _ in 0..n_max {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            for i in 0..d {
                let s: f64 = (0..=i).map(|j| self.chol[i][j] * z[j]).sum();
                xs.push(self.g.mu_star[i] + s);
            }
        }
        let m = &self.g.model;
        let mut values = vec![Vec::with_capacity(plan.n_grid.len()); plan.specs.len()];
        let mut oracle = Vec::with_capacity(plan.n_grid.len());
        for &n in &plan.n_grid {
            let pre = &xs[..n * d];
            oracle.push(
                log_lik_iid(pre, d, &self.g.mu_star, &self.fq)
                    - log_lik_iid(pre, d, &self.g.mu_star, &self.fp),
            );
            for (k, s) in plan.specs.iter().enumerate() {
                if !plan.reported(s.kind, n) {
                    values[k].push(f64::NAN);
                    continue;
                }
                let plugin = || s.plugin.as_ref().expect("validated");
                let v = match s.kind {
                    EVarKind::UiSimple => m.ui_simple(&self.g.mu_star, pre)?,
                    EVarKind::UiPlugin => m.ui_plugin(plugin(), pre)?,
                    EVarKind::UiMixture => m.ui_mixture(&self.g.w1, pre)?,
                    EVarKind::Cond => m.cond(pre)?,
                    EVarKind::SeqRip => m.seq_rip(plugin(), pre)?,
                    EVarKind::Rip => m.rip(&self.g.w1, pre)?,
                    EVarKind::Haar => m.haar(pre)?,
                    EVarKind::PseudoW1 => m.pseudo(&self.g.w1, pre)?,
                    EVarKind::RipNumeric => unreachable!("rejected by validate"),
                };
                values[k].push(v.value);
            }
        }
        Ok(Draw { values, oracle })
    }

    fn prediction(&self, spec: &EVarSpec, n: usize) -> Option<Prediction> {
        let g = self.g;
        let m = &g.model;
        let mut p = PredictParams::from_covariances(m.sigma_q(), m.sigma_p(), &g.sigma_r);
        p.mu_star = Some(g.mu_star.clone());
        if let Some(pl) = &spec.plugin {
            p.x0 = Some(pl.x0.clone());
            p.n0 = Some(pl.n0);
        }
        p.mu1 = Some(g.w1.mean.as_slice().to_vec());
        p.pi1 = Some(g.w1.cov.to_row_major());
        let case = match spec.kind {
            EVarKind::UiSimple => Case::Thm1Ui,
            EVarKind::Cond => Case::Thm1Cond,
            EVarKind::Haar => Case::Haar,
            EVarKind::UiPlugin => Case::Thm2UiPlugin,
            EVarKind::UiMixture => Case::Thm2UiMixture,
            EVarKind::PseudoW1 => Case::GaussPseudo,
            EVarKind::SeqRip => match m.regime() {
                Regime::Equal | Regime::Simple { .. } => Case::Thm2SeqRipSimple,
                Regime::AntiSimple { .. } => Case::Thm1SeqRipAnti,
                Regime::Mixed => return None,
            },
            EVarKind::Rip if g.w1.is_point() && m.regime().is_simple() => Case::Thm1RipSimple,
            EVarKind::Rip => Case::Thm2Rip,
            EVarKind::RipNumeric => return None,
        };
        predicted_epower(case, &p, n).ok()
    }
}

struct TwoSampleRunner<'a> {
    t: &'a TwoSampleSetting,
    eval: TwoSampleEvaluator,
}

impl TwoSampleRunner<'_> {
    fn draw(&self, plan: &SimPlan, k: usize) -> Result<Draw, evariables::EVarError> {
        let base = self.t.alt.base();
        let (a, b) = self.t.truth;
        let n_max = *plan.n_grid.last().expect("validated");
        let mut rng = replicate_rng(plan.seed, k);
        let u = sample_alt(base, a, b, n_max, &mut rng);
        let values = self.eval.evaluate(&u)?;
        let mut oracle = Vec::with_capacity(plan.n_grid.len());
        let mut sums = PairSums::default();
        let mut next = 0;
        for (i, pair) in u.chunks_exact(2).enumerate() {
            sums.push(pair[0], pair[1]);
            if next < plan.n_grid.len() && i + 1 == plan.n_grid[next] {
                oracle.push(alt_ll(base, a, b, &sums) - null_ll(base, a + b, &sums));
                next += 1;
            }
        }
        Ok(Draw { values, oracle })
    }

    fn prediction(&self, spec: &EVarSpec, n: usize) -> Option<Prediction> {
        let t = self.t;
        let base = t.alt.base();
        let (a, b) = t.truth;
        let sq = base.var(a) + base.var(b);
        let sp = 2.0 * base.var(0.5 * (a + b));
        let p = PredictParams {
            kl: Some(t.kl()),
            sigma_q: Some(vec![sq]),
            sigma_p: Some(vec![sp]),
            sigma_r: Some(vec![sq]),
            ..PredictParams::default()
        };
        let case = match spec.kind {
            EVarKind::UiSimple if t.truth == t.alt.anchor() => Case::Thm3Ui,
            EVarKind::Cond => Case::Thm3Cond,
            EVarKind::PseudoW1 | EVarKind::RipNumeric => Case::Thm4Rip,
            EVarKind::UiPlugin => Case::Thm4UiPlugin,
            EVarKind::UiMixture => Case::Thm4UiMixture,
            EVarKind::SeqRip => Case::Thm4SeqRipSimple,
            _ => return None,
        };
        predicted_epower(case, &p, n).ok()
    }
}

enum Runner<'a> {
    Gauss(GaussRunner<'a>),
    TwoSample(TwoSampleRunner<'a>),
}

impl Runner<'_> {
    fn draw(&self, plan: &SimPlan, k: usize) -> Result<Draw, LabError> {
        match self {
            Runner::Gauss(r) => r.draw(plan, k),
            Runner::TwoSample(r) => r.draw(plan, k),
        }
        .map_err(|source| LabError::Replicate { index: k, source })
    }

    fn prediction(&self, spec: &EVarSpec, n: usize) -> Option<Prediction> {
        match self {
            Runner::Gauss(r) => r.prediction(spec, n),
            Runner::TwoSample(r) => r.prediction(spec, n),
        }
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (r - 1.0)).sqrt() / r.sqrt())
}

/// Estimate e-power and regret of every spec at every grid n.
///
/// Runs on the current rayon pool; results are identical for any pool size.
pub fn monte_carlo(plan: &SimPlan) -> Result<EPowerCurve, LabError> {
    plan.validate()?;
    let kl = plan.model.kl()?;
    let mut certificates = Vec::new();
    let runner = match &plan.model {
        Model::Gaussian(g) => Runner::Gauss(GaussRunner::new(g)?),
        Model::TwoSample(t) => {
            let eval =
                TwoSampleEvaluator::new(t.alt, plan.specs.clone(), plan.n_grid.clone(), t.rip)?;
            for k in 0..plan.specs.len() {
                for (i, &n) in plan.n_grid.iter().enumerate() {
                    if let Some(c) = eval.certificate(k, i) {
                        certificates.push(CertificateSummary {
                            spec: k,
                            n,
                            kl: c.kl,
                            gap: c.gap,
                            tol: c.tol,
                            iters: c.iters,
                            atoms: c.atoms.len(),
                        });
                    }
                }
            }
            Runner::TwoSample(TwoSampleRunner { t, eval })
        }
    };
    let draws: Vec<Result<Draw, LabError>> = (0..plan.replicates)
        .into_par_iter()
        .map(|k| runner.draw(plan, k))
        .collect();
    let draws: Vec<Draw> = draws.into_iter().collect::<Result<_, _>>()?;

    let mut points = Vec::new();
    let mut buf = Vec::with_capacity(plan.replicates);
    let mut diff = Vec::with_capacity(plan.replicates);
    for (k, spec) in plan.specs.iter().enumerate() {
        for (i, &n) in plan.n_grid.iter().enumerate() {
            if !plan.reported(spec.kind, n) {
                continue;
            }
            buf.clear();
            diff.clear();
            for d in &draws {
                buf.push(d.values[k][i]);
                diff.push(d.oracle[i] - d.values[k][i]);
            }
            let (mean_log_s, se) = mean_se(&buf);
            let (regret, regret_se) = mean_se(&diff);
            let gap = certificates
                .iter()
                .find(|c| c.spec == k && c.n == n)
                .map(|c| c.gap);
            points.push(CurvePoint {
                spec: k,
                kind: spec.kind,
                n,
                mean_log_s,
                se,
                regret,
                regret_se,
                predicted: runner.prediction(spec, n),
                gap,
            });
        }
    }
    Ok(EPowerCurve {
        kl,
        replicates: plan.replicates,
        seed: plan.seed,
        points,
        certificates,
    })
}
