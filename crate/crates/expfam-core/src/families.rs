use gauss_analytic::{CovMatrix, SpdFactor};
use rand::RngCore;
use rand_distr::{
    Distribution, Exp, Gamma as GammaDist, Normal, Poisson as PoissonDist, StandardNormal,
};

use crate::family::{Family, ObsKind};
use crate::special::{digamma, ln_gamma, trigamma, xlogy_ratio};
use crate::ExpFamError;

fn unif(rng: &mut dyn RngCore) -> f64 {
    // 53 random bits in [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn not_interior(name: &str, mu: &[f64]) -> ExpFamError {
    ExpFamError::NotInterior {
        family: name.to_string(),
        mu: mu.to_vec(),
    }
}

// ---------------------------------------------------------------- Bernoulli

#[derive(Debug, Clone, Copy, Default)]
pub struct Bernoulli;

impl Family for Bernoulli {
    fn name(&self) -> &str {
        "bernoulli"
    }
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn kind(&self) -> ObsKind {
        ObsKind::Lattice
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn log_base(&self, _u: &[f64]) -> f64 {
        0.0
    }
    fn in_support(&self, u: &[f64]) -> bool {
        u[0] == 0.0 || u[0] == 1.0
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == 1 && mu[0] > 0.0 && mu[0] < 1.0
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        (0.0..=1.0).contains(&mu[0])
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        Ok(vec![(mu[0] / (1.0 - mu[0])).ln()])
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        Ok(vec![1.0 / (1.0 + (-beta[0]).exp())])
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        let b = beta[0];
        if b > 0.0 {
            b + (-b).exp().ln_1p()
        } else {
            b.exp().ln_1p()
        }
    }
    fn log_density(&self, mu: &[f64], u: &[f64]) -> Result<f64, ExpFamError> {
        self.check_interior(mu)?;
        Ok(if u[0] == 1.0 {
            mu[0].ln()
        } else if u[0] == 0.0 {
            (-mu[0]).ln_1p()
        } else {
            f64::NEG_INFINITY
        })
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        Ok(CovMatrix::diag(&[mu[0] * (1.0 - mu[0])]))
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        vec![if unif(rng) < mu[0] { 1.0 } else { 0.0 }]
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.5]
    }
    fn kl_closed(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        Some(bernoulli_kl(a[0], b[0]))
    }
    fn kl_boundary(&self, mu_hat: &[f64], mu_star: &[f64]) -> Result<f64, ExpFamError> {
        Ok(bernoulli_kl(mu_hat[0], mu_star[0]))
    }
}

/// Bernoulli KL with the 0 ln 0 = 0 convention in the first argument.
pub fn bernoulli_kl(a: f64, b: f64) -> f64 {
    xlogy_ratio(a, b) + xlogy_ratio(1.0 - a, 1.0 - b)
}

// ---------------------------------------------------------------- Poisson

#[derive(Debug, Clone, Copy, Default)]
pub struct Poisson;

impl Family for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn kind(&self) -> ObsKind {
        ObsKind::Lattice
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn log_base(&self, u: &[f64]) -> f64 {
        -ln_gamma(u[0] + 1.0)
    }
    fn in_support(&self, u: &[f64]) -> bool {
        u[0] >= 0.0 && u[0].fract() == 0.0
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == 1 && mu[0] > 0.0 && mu[0].is_finite()
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        mu[0] >= 0.0 && mu[0].is_finite()
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        Ok(vec![mu[0].ln()])
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        Ok(vec![beta[0].exp()])
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        beta[0].exp()
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        Ok(CovMatrix::diag(&[mu[0]]))
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let d = PoissonDist::new(mu[0]).expect("positive rate");
        vec![d.sample(rng)]
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn kl_closed(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        Some(poisson_kl(a[0], b[0]))
    }
    fn kl_boundary(&self, mu_hat: &[f64], mu_star: &[f64]) -> Result<f64, ExpFamError> {
        Ok(poisson_kl(mu_hat[0], mu_star[0]))
    }
}

pub fn poisson_kl(a: f64, b: f64) -> f64 {
    xlogy_ratio(a, b) - a + b
}

// ---------------------------------------------------------------- Exponential

/// Exponential distributions indexed by their mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl Family for Exponential {
    fn name(&self) -> &str {
        "exponential"
    }
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn kind(&self) -> ObsKind {
        ObsKind::Continuous
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn log_base(&self, _u: &[f64]) -> f64 {
        0.0
    }
    fn in_support(&self, u: &[f64]) -> bool {
        u[0] >= 0.0
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == 1 && mu[0] > 0.0 && mu[0].is_finite()
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        mu[0] >= 0.0 && mu[0].is_finite()
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        Ok(vec![-1.0 / mu[0]])
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        if beta[0] >= 0.0 {
            return Err(ExpFamError::InvalidParameter(format!(
                "canonical parameter {} not negative",
                beta[0]
            )));
        }
        Ok(vec![-1.0 / beta[0]])
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        -(-beta[0]).ln()
    }
    fn log_density(&self, mu: &[f64], u: &[f64]) -> Result<f64, ExpFamError> {
        self.check_interior(mu)?;
        Ok(if u[0] < 0.0 {
            f64::NEG_INFINITY
        } else {
            -mu[0].ln() - u[0] / mu[0]
        })
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        Ok(CovMatrix::diag(&[mu[0] * mu[0]]))
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let d = Exp::new(1.0 / mu[0]).expect("positive mean");
        vec![d.sample(rng)]
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn kl_closed(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        Some(exponential_kl(a[0], b[0]))
    }
    fn kl_boundary(&self, mu_hat: &[f64], _mu_star: &[f64]) -> Result<f64, ExpFamError> {
        // sample mean 0: the likelihood is unbounded as the mean shrinks
        debug_assert_eq!(mu_hat[0], 0.0);
        Ok(f64::INFINITY)
    }
}

pub fn exponential_kl(a: f64, b: f64) -> f64 {
    (b / a).ln() + a / b - 1.0
}

// ---------------------------------------------------------------- Gaussian location

/// d-dimensional Gaussian location family with fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussLocation {
    sigma: CovMatrix,
    factor: SpdFactor,
    inv: CovMatrix,
}

impl GaussLocation {
    pub fn new(sigma: CovMatrix) -> Result<Self, ExpFamError> {
        let factor = SpdFactor::new(&sigma)?;
        let inv = factor.inverse();
        Ok(Self { sigma, factor, inv })
    }

    pub fn sigma(&self) -> &CovMatrix {
        &self.sigma
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }
}

impl Family for GaussLocation {
    fn name(&self) -> &str {
        "gauss-loc"
    }
    fn dim(&self) -> usize {
        self.sigma.dim()
    }
    fn obs_dim(&self) -> usize {
        self.sigma.dim()
    }
    fn kind(&self) -> ObsKind {
        ObsKind::Continuous
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
    fn log_base(&self, u: &[f64]) -> f64 {
        gauss_analytic::log_normal_pdf(u, &vec![0.0; u.len()], &self.factor)
    }
    fn in_support(&self, _u: &[f64]) -> bool {
        true
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim() && mu.iter().all(|v| v.is_finite())
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        self.in_mean_space(mu)
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        Ok(mat_vec(&self.inv, mu))
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        Ok(mat_vec(&self.sigma, beta))
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        0.5 * mat_vec(&self.sigma, beta)
            .iter()
            .zip(beta)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }
    fn log_density(&self, mu: &[f64], u: &[f64]) -> Result<f64, ExpFamError> {
        self.check_interior(mu)?;
        Ok(gauss_analytic::log_normal_pdf(u, mu, &self.factor))
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        Ok(self.sigma.clone())
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let l = self.factor.lower();
        (0..d)
            .map(|i| mu[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
    fn kl_closed(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Some(0.5 * self.factor.quad_inv(&diff))
    }
    fn kl_boundary(&self, mu_hat: &[f64], _mu_star: &[f64]) -> Result<f64, ExpFamError> {
        Err(ExpFamError::OutsideHull {
            mu: mu_hat.to_vec(),
        })
    }
}

fn mat_vec(a: &CovMatrix, x: &[f64]) -> Vec<f64> {
    let d = a.dim();
    (0..d)
        .map(|i| (0..d).map(|j| a.get(i, j) * x[j]).sum())
        .collect()
}

// ---------------------------------------------------------------- Gaussian location-scale

/// Univariate Gaussian with mean coordinates (m, m^2 + s^2).
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussLocationScale;

impl GaussLocationScale {
    /// (m, s^2) from mean coordinates.
    pub fn moments(mu: &[f64]) -> (f64, f64) {
        (mu[0], mu[1] - mu[0] * mu[0])
    }
}

impl Family for GaussLocationScale {
    fn name(&self) -> &str {
        "gauss-loc-scale"
    }
    fn dim(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn kind(&self) -> ObsKind {
        ObsKind::Continuous
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
        out[1] = u[0] * u[0];
    }
    fn log_base(&self, _u: &[f64]) -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI).ln()
    }
    fn in_support(&self, _u: &[f64]) -> bool {
        true
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == 2 && mu[0].is_finite() && mu[1].is_finite() && mu[1] > mu[0] * mu[0]
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        mu[0].is_finite() && mu[1].is_finite() && mu[1] >= mu[0] * mu[0]
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        let (m, v) = Self::moments(mu);
        Ok(vec![m / v, -0.5 / v])
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        if beta[1] >= 0.0 {
            return Err(ExpFamError::InvalidParameter(
                "second canonical coordinate must be negative".into(),
            ));
        }
        let v = -0.5 / beta[1];
        let m = beta[0] * v;
        Ok(vec![m, m * m + v])
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        -beta[0] * beta[0] / (4.0 * beta[1]) - 0.5 * (-2.0 * beta[1]).ln()
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        let (m, v) = Self::moments(mu);
        // Cov(X, X^2) = 2 m v, Var(X^2) = 4 m^2 v + 2 v^2
        let c = 2.0 * m * v;
        Ok(CovMatrix::new(
            2,
            &[v, c, c, 4.0 * m * m * v + 2.0 * v * v],
        )?)
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let (m, v) = Self::moments(mu);
        vec![Normal::new(m, v.sqrt())
            .expect("positive variance")
            .sample(rng)]
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }
    fn kl_closed(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        let (m1, v1) = Self::moments(a);
        let (m2, v2) = Self::moments(b);
        Some(0.5 * (v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / (2.0 * v2) - 0.5)
    }
    fn kl_boundary(&self, _mu_hat: &[f64], _mu_star: &[f64]) -> Result<f64, ExpFamError> {
        // zero sample variance: the likelihood is unbounded
        Ok(f64::INFINITY)
    }
}

// ---------------------------------------------------------------- Gamma

/// Gamma(shape a, scale s) with mean coordinates (psi(a) + ln s, a s).
#[derive(Debug, Clone, Copy, Default)]
pub struct Gamma;

impl Gamma {
    /// (shape, scale) from mean coordinates.
    pub fn shape_scale(mu: &[f64]) -> Result<(f64, f64), ExpFamError> {
        let c = mu[0] - mu[1].ln();
        if !(c < 0.0) {
            return Err(not_interior("gamma", mu));
        }
        // solve psi(a) - ln a = c, monotone increasing in a; Newton in ln a
        let mut a = if c > -0.1 {
            0.5 / -c
        } else {
            (0.5 / -c).min(1.0)
        };
        for _ in 0..100 {
            let g = digamma(a) - a.ln() - c;
            let dg = trigamma(a) - 1.0 / a;
            let la = a.ln() - g / (dg * a);
            let next = la.exp();
            if (next - a).abs() <= 1e-15 * a {
                a = next;
                break;
            }
            a = next;
        }
        Ok((a, mu[1] / a))
    }

    pub fn mean_coords(shape: f64, scale: f64) -> Vec<f64> {
        vec![digamma(shape) + scale.ln(), shape * scale]
    }
}

impl Family for Gamma {
    fn name(&self) -> &str {
        "gamma"
    }
    fn dim(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn kind(&self) -> ObsKind {
        ObsKind::Continuous
    }
    fn suffstat(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0].ln();
        out[1] = u[0];
    }
    fn log_base(&self, u: &[f64]) -> f64 {
        -u[0].ln()
    }
    fn in_support(&self, u: &[f64]) -> bool {
        u[0] > 0.0
    }
    fn in_mean_space(&self, mu: &[f64]) -> bool {
        mu.len() == 2
            && mu[0].is_finite()
            && mu[1].is_finite()
            && mu[1] > 0.0
            && mu[1] > mu[0].exp()
    }
    fn in_closed_hull(&self, mu: &[f64]) -> bool {
        mu[0].is_finite() && mu[1] > 0.0 && mu[1] >= mu[0].exp()
    }
    fn mean_to_canonical(&self, mu: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        self.check_interior(mu)?;
        let (a, s) = Self::shape_scale(mu)?;
        Ok(vec![a, -1.0 / s])
    }
    fn canonical_to_mean(&self, beta: &[f64]) -> Result<Vec<f64>, ExpFamError> {
        if beta[0] <= 0.0 || beta[1] >= 0.0 {
            return Err(ExpFamError::InvalidParameter(
                "gamma canonical parameter out of range".into(),
            ));
        }
        Ok(Self::mean_coords(beta[0], -1.0 / beta[1]))
    }
    fn log_partition(&self, beta: &[f64]) -> f64 {
        ln_gamma(beta[0]) - beta[0] * (-beta[1]).ln()
    }
    fn cov(&self, mu: &[f64]) -> Result<CovMatrix, ExpFamError> {
        self.check_interior(mu)?;
        let (a, s) = Self::shape_scale(mu)?;
        // Var(ln X) = psi'(a), Cov(ln X, X) = s, Var(X) = a s^2
        Ok(CovMatrix::new(2, &[trigamma(a), s, s, a * s * s])?)
    }
    fn sample(&self, mu: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let (a, s) = Self::shape_scale(mu).expect("interior mean");
        vec![GammaDist::new(a, s).expect("valid gamma").sample(rng)]
    }
    fn interior_point(&self) -> Vec<f64> {
        Self::mean_coords(1.0, 1.0)
    }
    fn kl_closed(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        let (a1, s1) = Self::shape_scale(a).ok()?;
        let (a0, s0) = Self::shape_scale(b).ok()?;
        Some(
            a0 * (s0 / s1).ln() - (ln_gamma(a1) - ln_gamma(a0)) + (a1 - a0) * digamma(a1)
                - (1.0 / s1 - 1.0 / s0) * a1 * s1,
        )
    }
    fn kl_boundary(&self, _mu_hat: &[f64], _mu_star: &[f64]) -> Result<f64, ExpFamError> {
        // all observations equal: the likelihood is unbounded in the shape
        Ok(f64::INFINITY)
    }
}
