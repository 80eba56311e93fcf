use std::fmt::Debug;

use gauss_analytic::CovMatrix;
use rand::RngCore;

use crate::ExpFamError;

/// Whether observations live on a lattice (counting measure) or are
/// continuous (Lebesgue measure).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsKind {
    Lattice,
    Continuous,
}

/// A regular exponential family in mean-value parameterization.
///
/// Observations are flat `f64` slices of width `obs_dim()`; the sufficient
/// statistic has dimension `dim()`.
pub trait Family: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn kind(&self) -> ObsKind;

    fn suffstat(&self, u: &[f64], out: &mut [f64]);
    /// log of the carrier density h(u).
    fn log_base(&self, u: &[f64]) -> f64;
    /// Whether `u` is in the support of the family.
    fn in_support(&self, u: &[f64]) -> bool;

    fn in_mean_space(&self, mu: &[f64]) -> bool;
    /// Whether `mu` lies in the closed convex hull of the support of t(U).
    fn in_closed_hull(&self, mu: &[f64]) -> bool;

    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError>;
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError>;
    fn log_partition(&self, beta: &[f64]) -> f64;

    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError>;
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;

    /// An interior point used as default reference and plug-in anchor.
    fn interior_point(&self) -> Vec<f64>;

    /// Closed-form KL; families without one fall back to the canonical form.
    fn kl_closed(&self, mu1: &[f64], mu2: &[f64]) -> Option<f64> {
        let _ = (mu1, mu2);
        None
    }

    /// n^{-1} sup_mu log p_mu(u^n)/p_{mu*}(u^n) for a boundary sample mean.
    fn kl_boundary(&self, mu_hat: &[f64], mu_star: &[f64]) -> Result<f64, ExpFamError>;

    fn log_density(&self, mu: &[f64], u: &[f64]) -> Result<f64, ExpFamError> {
        self.check_interior(mu)?;
        let beta = self.mean_to_canonical(mu)?;
        Ok(self.log_density_canonical(&beta, u))
    }

    /// log density at canonical parameter `beta`; -inf off the support.
    fn log_density_canonical(&self, beta: &[f64], u: &[f64]) -> f64 {
        if !self.in_support(u) {
            return f64::NEG_INFINITY;
        }
        let mut t = vec![0.0; self.dim()];
        self.suffstat(u, &mut t);
        let dot: f64 = beta.iter().zip(&t).map(|(b, x)| b * x).sum();
        dot - self.log_partition(beta) + self.log_base(u)
    }

    fn check_interior(&self, mu: &[f64]) -> Result<(), ExpFamError> {
        if mu.len() != self.dim() {
            return Err(ExpFamError::Dimension {
                expected: self.dim(),
                found: mu.len(),
            });
        }
        if !self.in_mean_space(mu) {
            return Err(ExpFamError::NotInterior {
                family: self.name().to_string(),
                mu: mu.to_vec(),
            });
        }
        Ok(())
    }
}

/// (beta' - beta)^T mu' - log Z(beta') + log Z(beta).
pub fn kl_generic(f: &dyn Family, mu1: &[f64], mu2: &[f64]) -> Result<f64, ExpFamError> {
    f.check_interior(mu1)?;
    f.check_interior(mu2)?;
    let b1 = f.mean_to_canonical(mu1)?;
    let b2 = f.mean_to_canonical(mu2)?;
    let dot: f64 = b1
        .iter()
        .zip(&b2)
        .zip(mu1)
        .map(|((a, b), m)| (a - b) * m)
        .sum();
    Ok(dot - f.log_partition(&b1) + f.log_partition(&b2))
}

/// D(P_{mu1} || P_{mu2}) between members of one family.
pub fn kl(f: &dyn Family, mu1: &[f64], mu2: &[f64]) -> Result<f64, ExpFamError> {
    f.check_interior(mu1)?;
    f.check_interior(mu2)?;
    match f.kl_closed(mu1, mu2) {
        Some(v) => Ok(v),
        None => kl_generic(f, mu1, mu2),
    }
}

/// Sample mean together with an interior flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMean {
    pub value: Vec<f64>,
    pub interior: bool,
}

impl ExtendedMean {
    pub fn new(f: &dyn Family, value: Vec<f64>) -> Self {
        let interior = f.in_mean_space(&value);
        Self { value, interior }
    }
}

/// KL from a (possibly boundary) sample mean, extended by the likelihood
/// supremum so that n * kl_extended = log p_{mu_hat}(u^n) / p_{mu*}(u^n).
pub fn kl_extended(
    f: &dyn Family,
    mu_hat: &ExtendedMean,
    mu_star: &[f64],
) -> Result<f64, ExpFamError> {
    f.check_interior(mu_star)?;
    if mu_hat.value.len() != f.dim() {
        return Err(ExpFamError::Dimension {
            expected: f.dim(),
            found: mu_hat.value.len(),
        });
    }
    if mu_hat.interior && f.in_mean_space(&mu_hat.value) {
        return kl(f, &mu_hat.value, mu_star);
    }
    if !f.in_closed_hull(&mu_hat.value) {
        return Err(ExpFamError::OutsideHull {
            mu: mu_hat.value.clone(),
        });
    }
    f.kl_boundary(&mu_hat.value, mu_star)
}

/// Flattened sufficient statistics of a flat observation sequence.
pub fn suffstats(f: &dyn Family, us: &[f64]) -> Vec<f64> {
    let w = f.obs_dim();
    let d = f.dim();
    let mut out = vec![0.0; us.len() / w * d];
    for (u, x) in us.chunks_exact(w).zip(out.chunks_exact_mut(d)) {
        f.suffstat(u, x);
    }
    out
}

/// n^{-1} sum x_i from flattened sufficient statistics.
pub fn mle(f: &dyn Family, xs: &[f64]) -> Result<ExtendedMean, ExpFamError> {
    let d = f.dim();
    if xs.is_empty() {
        return Err(ExpFamError::EmptySample);
    }
    let n = xs.len() / d;
    let mut m = vec![0.0; d];
    for x in xs.chunks_exact(d) {
        for (a, b) in m.iter_mut().zip(x) {
            *a += b;
        }
    }
    for a in &mut m {
        *a /= n as f64;
    }
    Ok(ExtendedMean::new(f, m))
}

/// Prequential estimates (x0 n0 + sum_{j<=i} x_j)/(i + n0) for i = 0..=n.
pub fn prequential(
    f: &dyn Family,
    x0: &[f64],
    n0: f64,
    xs: &[f64],
) -> Result<Vec<Vec<f64>>, ExpFamError> {
    if n0 <= 0.0 || !n0.is_finite() {
        return Err(ExpFamError::InvalidParameter(format!(
            "n0 must be positive, got {n0}"
        )));
    }
    f.check_interior(x0)?;
    let d = f.dim();
    let mut sum: Vec<f64> = x0.iter().map(|v| v * n0).collect();
    let mut out = Vec::with_capacity(xs.len() / d + 1);
    out.push(x0.to_vec());
    for (i, x) in xs.chunks_exact(d).enumerate() {
        for (s, v) in sum.iter_mut().zip(x) {
            *s += v;
        }
        let denom = (i + 1) as f64 + n0;
        out.push(sum.iter().map(|s| s / denom).collect());
    }
    Ok(out)
}

/// log sup_mu p_mu(u^n), through the robustness identity at a reference point.
pub fn log_lik_max(f: &dyn Family, us: &[f64]) -> Result<f64, ExpFamError> {
    let xs = suffstats(f, us);
    let mh = mle(f, &xs)?;
    let reference = if mh.interior {
        mh.value.clone()
    } else {
        f.interior_point()
    };
    let n = us.len() / f.obs_dim();
    let base = log_lik(f, &reference, us)?;
    if mh.interior {
        return Ok(base);
    }
    Ok(base + n as f64 * kl_extended(f, &mh, &reference)?)
}

/// sum_i log p_mu(u_i).
pub fn log_lik(f: &dyn Family, mu: &[f64], us: &[f64]) -> Result<f64, ExpFamError> {
    f.check_interior(mu)?;
    let beta = f.mean_to_canonical(mu)?;
    Ok(us
        .chunks_exact(f.obs_dim())
        .map(|u| f.log_density_canonical(&beta, u))
        .sum())
}
