//! Gaussian location models: null N(mu, Sp), alternative N(mu, Sq), with
//! every e-statistic in closed form.

use gauss_analytic::{
    check_psd, log_lik_iid, log_marginal_location, log_normal_pdf, sample_mean, CovMatrix,
    GaussianPrior, MeanVec, SpdFactor,
};

use crate::{EVarError, EVarKind, LogEValue, Plugin};

/// Sign pattern of Sq - Sp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Equal,
    /// Sq - Sp negative semidefinite (definite when strict).
    Simple {
        strict: bool,
    },
    /// Sq - Sp positive semidefinite (definite when strict).
    AntiSimple {
        strict: bool,
    },
    Mixed,
}

impl Regime {
    pub fn is_simple(self) -> bool {
        matches!(self, Regime::Equal | Regime::Simple { .. })
    }

    pub fn is_anti_simple(self) -> bool {
        matches!(self, Regime::Equal | Regime::AntiSimple { .. })
    }
}

/// Null covariance Sp and alternative covariance Sq, with their factors.
#[derive(Debug, Clone)]
pub struct GaussModel {
    sigma_q: CovMatrix,
    sigma_p: CovMatrix,
    fq: SpdFactor,
    fp: SpdFactor,
    diff_eigs: Vec<f64>,
    regime: Regime,
}

impl GaussModel {
    pub fn new(sigma_q: CovMatrix, sigma_p: CovMatrix) -> Result<Self, EVarError> {
        sigma_q.check_same_dim(&sigma_p)?;
        let fq = SpdFactor::new(&sigma_q)?;
        let fp = SpdFactor::new(&sigma_p)?;
        let diff_eigs = sigma_q.sub(&sigma_p)?.eigenvalues();
        let tol = 1e-10 * sigma_p.eigenvalues().last().copied().unwrap_or(1.0);
        let (lo, hi) = (diff_eigs[0], diff_eigs[diff_eigs.len() - 1]);
        let regime = if lo.abs() <= tol && hi.abs() <= tol {
            Regime::Equal
        } else if hi <= tol {
            Regime::Simple { strict: hi < -tol }
        } else if lo >= -tol {
            Regime::AntiSimple { strict: lo > tol }
        } else {
            Regime::Mixed
        };
        Ok(Self {
            sigma_q,
            sigma_p,
            fq,
            fp,
            diff_eigs,
            regime,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma_p.dim()
    }

    pub fn sigma_q(&self) -> &CovMatrix {
        &self.sigma_q
    }

    pub fn sigma_p(&self) -> &CovMatrix {
        &self.sigma_p
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Ascending eigenvalues of Sq - Sp.
    pub fn diff_eigenvalues(&self) -> &[f64] {
        &self.diff_eigs
    }

    fn rows(&self, xs: &[f64]) -> Result<usize, EVarError> {
        let d = self.dim();
        if xs.is_empty() {
            return Err(EVarError::EmptyData);
        }
        if !xs.len().is_multiple_of(d) {
            return Err(EVarError::Ragged {
                len: xs.len(),
                width: d,
            });
        }
        Ok(xs.len() / d)
    }

    fn check_mean(&self, m: &[f64]) -> Result<(), EVarError> {
        if m.len() != self.dim() {
            return Err(gauss_analytic::GaussError::DimensionMismatch {
                expected: self.dim(),
                found: m.len(),
            }
            .into());
        }
        Ok(())
    }

    /// log sup_mu p_mu(x^n): the null likelihood at the sample mean.
    pub fn log_null_sup(&self, xs: &[f64]) -> Result<f64, EVarError> {
        self.rows(xs)?;
        let xbar = sample_mean(xs, self.dim());
        Ok(log_lik_iid(xs, self.dim(), &xbar, &self.fp))
    }

    pub fn ui_simple(&self, mu_star: &[f64], xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        self.check_mean(mu_star)?;
        let v = log_lik_iid(xs, self.dim(), mu_star, &self.fq) - self.log_null_sup(xs)?;
        Ok(LogEValue::new(EVarKind::UiSimple, n, v))
    }

    /// Prequential numerator prod_i q_{mu_{i-1}}(x_i).
    fn log_plugin_q(&self, plugin: &Plugin, xs: &[f64], f: &SpdFactor) -> Result<f64, EVarError> {
        plugin.validate()?;
        self.check_mean(&plugin.x0)?;
        let mut st = plugin.state();
        let mut acc = 0.0;
        for x in xs.chunks_exact(self.dim()) {
            acc += log_normal_pdf(x, &st.mean(), f);
            st.push(x);
        }
        Ok(acc)
    }

    pub fn ui_plugin(&self, plugin: &Plugin, xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        let v = self.log_plugin_q(plugin, xs, &self.fq)? - self.log_null_sup(xs)?;
        Ok(LogEValue::new(EVarKind::UiPlugin, n, v))
    }

    pub fn ui_mixture(&self, w1: &GaussianPrior, xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        let v =
            log_marginal_location(xs, self.dim(), &self.sigma_q, w1)? - self.log_null_sup(xs)?;
        Ok(LogEValue::new(EVarKind::UiMixture, n, v))
    }

    /// Ratio of the conditional densities given the sample mean.
    pub fn cond(&self, xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        let d = self.dim();
        let xbar = sample_mean(xs, d);
        let v = log_lik_iid(xs, d, &xbar, &self.fq) - log_lik_iid(xs, d, &xbar, &self.fp)
            + 0.5 * (self.fq.log_det() - self.fp.log_det());
        Ok(LogEValue::new(
            EVarKind::Cond,
            n,
            if n == 1 { 0.0 } else { v },
        ))
    }

    /// Sequential RIPr statistic with plug-in alternatives. Identically zero
    /// when Sq - Sp is PSD; the plug-in likelihood ratio against the null
    /// member with the same mean when it is NSD.
    pub fn seq_rip(&self, plugin: &Plugin, xs: &[f64]) -> Result<LogEValue, EVarError> {
        if xs.is_empty() {
            return Ok(LogEValue::new(EVarKind::SeqRip, 0, 0.0));
        }
        let n = self.rows(xs)?;
        let v = match self.regime {
            Regime::Equal | Regime::AntiSimple { .. } => 0.0,
            Regime::Simple { .. } => {
                self.log_plugin_q(plugin, xs, &self.fq)?
                    - self.log_plugin_q(plugin, xs, &self.fp)?
            }
            Regime::Mixed => {
                return Err(EVarError::MixedRegime {
                    min: self.diff_eigs[0],
                    max: self.diff_eigs[self.diff_eigs.len() - 1],
                })
            }
        };
        Ok(LogEValue::new(EVarKind::SeqRip, n, v))
    }

    /// The RIPr prior W0 of the Bayes marginal under W1 = N(mu1, Pi1) at
    /// sample size n: N(mu1, Pi1 + (Sq - Sp)/n), or the point mass at mu1
    /// for a point W1 in the simple regime.
    pub fn ripr_prior(&self, w1: &GaussianPrior, n: usize) -> Result<GaussianPrior, EVarError> {
        if n == 0 {
            return Err(gauss_analytic::GaussError::ZeroSampleSize.into());
        }
        self.check_mean(w1.mean.as_slice())?;
        if w1.is_point() && self.regime.is_simple() {
            return Ok(GaussianPrior::point(w1.mean.clone()));
        }
        let cov = w1
            .cov
            .add(&self.sigma_q.sub(&self.sigma_p)?.scale(1.0 / n as f64))?;
        check_psd(&cov).map_err(|_| EVarError::NotPsd {
            min_eigenvalue: cov.min_eigenvalue(),
        })?;
        Ok(GaussianPrior {
            mean: w1.mean.clone(),
            cov,
        })
    }

    pub fn rip(&self, w1: &GaussianPrior, xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        let w0 = self.ripr_prior(w1, n)?;
        let d = self.dim();
        let v = log_marginal_location(xs, d, &self.sigma_q, w1)?
            - log_marginal_location(xs, d, &self.sigma_p, &w0)?;
        Ok(LogEValue::new(EVarKind::Rip, n, v))
    }

    /// Posterior-predictive ratio after the first observation, both sides
    /// started from flat priors.
    pub fn haar(&self, xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        if n == 1 {
            return Ok(LogEValue::new(EVarKind::Haar, 1, 0.0));
        }
        let d = self.dim();
        let (first, rest) = xs.split_at(d);
        let x1 = MeanVec::new(first);
        let wq = GaussianPrior {
            mean: x1.clone(),
            cov: self.sigma_q.clone(),
        };
        let wp = GaussianPrior {
            mean: x1,
            cov: self.sigma_p.clone(),
        };
        let v = log_marginal_location(rest, d, &self.sigma_q, &wq)?
            - log_marginal_location(rest, d, &self.sigma_p, &wp)?;
        Ok(LogEValue::new(EVarKind::Haar, n, v))
    }

    /// Bayes factor with the same prior on both sides.
    pub fn pseudo(&self, w1: &GaussianPrior, xs: &[f64]) -> Result<LogEValue, EVarError> {
        let n = self.rows(xs)?;
        let d = self.dim();
        let v = log_marginal_location(xs, d, &self.sigma_q, w1)?
            - log_marginal_location(xs, d, &self.sigma_p, w1)?;
        Ok(LogEValue::new(EVarKind::PseudoW1, n, v))
    }
}
