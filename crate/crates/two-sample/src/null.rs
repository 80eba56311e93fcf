use expfam_core::{ExpFamError, Family, ObsKind};
use gauss_analytic::CovMatrix;
use rand::RngCore;

use crate::Base;

/// The null over U = (Ya, Yb): Ya, Yb i.i.d. from the base family with
/// mean mu/2, indexed by mu = E[X], X = Ya + Yb.
#[derive(Debug)]
pub struct TwoSampleNull {
    base: Base,
    inner: Box<dyn Family>,
    name: String,
}

impl TwoSampleNull {
    pub fn new(base: Base) -> Self {
        Self {
            base,
            inner: base.family(),
            name: format!("two-sample-{}", base.name()),
        }
    }

    pub fn base(&self) -> Base {
        self.base
    }
}

impl Family for TwoSampleNull {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        2
    }
    fn kind(&self) -> ObsKind {
        self.base.kind()
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0] + u[1];
    }
    fn log_base(&self, u: &[f64]) -> f64 {
        self.inner.log_base(&u[..1]) + self.inner.log_base(&u[1..2])
    }
    fn in_support(&self, u: &[f64]) -> bool {
        self.inner.in_support(&u[..1]) && self.inner.in_support(&u[1..2])
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == 1 && self.base.in_mean_space(0.5 * mu[0])
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        self.inner.in_closed_hull(&[0.5 * mu[0]])
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        self.inner.mean_to_canonical(&[0.5 * mu[0]])
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        Ok(vec![2.0 * self.inner.canonical_to_mean(beta)?[0]])
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        2.0 * self.inner.log_partition(beta)
    }
    fn log_density(&self, mu: &[f64], u: &[f64]) -> Result<f64, ExpFamError> {
        self.check_interior(mu)?;
        if !self.in_support(u) {
            return Ok(f64::NEG_INFINITY);
        }
        let m = 0.5 * mu[0];
        Ok(self.base.log_density(m, u[0]) + self.base.log_density(m, u[1]))
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        Ok(CovMatrix::diag(&[2.0 * self.base.var(0.5 * mu[0])]))
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let m = 0.5 * mu[0];
        vec![self.base.sample(m, rng), self.base.sample(m, rng)]
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![2.0 * self.inner.interior_point()[0]]
    }
    fn kl_closed(&self, mu1: &[f64], mu2: &[f64]) -> Option<f64> {
        Some(2.0 * self.base.kl(0.5 * mu1[0], 0.5 * mu2[0]))
    }
    fn kl_boundary(&self, mu_hat: &[f64], mu_star: &[f64]) -> Result<f64, ExpFamError> {
        Ok(2.0
            * self
                .inner
                .kl_boundary(&[0.5 * mu_hat[0]], &[0.5 * mu_star[0]])?)
    }
}
