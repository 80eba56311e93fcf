use expfam_core::quad::{log_integrate_peaked, QuadOptions};
use expfam_core::special::{ln_choose, ln_gamma, log_sum_exp, xlogy_ratio};
use expfam_core::{Bernoulli, Exponential, Family, GaussLocation, ObsKind, Poisson};
use gauss_analytic::CovMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson as PoissonDist};

use crate::TwoSampleError;

/// One-dimensional base family for each of the two samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Base {
    Bernoulli,
    Exponential,
    Poisson,
    /// Normal with known variance.
    Gaussian {
        var: f64,
    },
}

impl Base {
    pub fn from_name(name: &str) -> Result<Self, TwoSampleError> {
        Ok(match name {
            "bernoulli" => Base::Bernoulli,
            "exponential" => Base::Exponential,
            "poisson" => Base::Poisson,
            "gaussian" | "gauss" | "gauss-loc" => Base::Gaussian { var: 1.0 },
            other => return Err(TwoSampleError::Unsupported(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Base::Bernoulli => "bernoulli",
            Base::Exponential => "exponential",
            Base::Poisson => "poisson",
            Base::Gaussian { .. } => "gaussian",
        }
    }

    pub fn kind(&self) -> ObsKind {
        match self {
            Base::Bernoulli | Base::Poisson => ObsKind::Lattice,
            Base::Exponential | Base::Gaussian { .. } => ObsKind::Continuous,
        }
    }

    /// The matching expfam-core family object.
    pub fn family(&self) -> Box<dyn Family> {
        match *self {
            Base::Bernoulli => Box::new(Bernoulli),
            Base::Exponential => Box::new(Exponential),
            Base::Poisson => Box::new(Poisson),
            Base::Gaussian { var } => Box::new(
                GaussLocation::new(CovMatrix::scaled_identity(1, var)).expect("positive variance"),
            ),
        }
    }

    pub fn in_mean_space(&self, m: f64) -> bool {
        match self {
            Base::Bernoulli => m > 0.0 && m < 1.0,
            Base::Exponential | Base::Poisson => m > 0.0 && m.is_finite(),
            Base::Gaussian { .. } => m.is_finite(),
        }
    }

    /// Mean-space interval (open).
    pub fn mean_range(&self) -> (f64, f64) {
        match self {
            Base::Bernoulli => (0.0, 1.0),
            Base::Exponential | Base::Poisson => (0.0, f64::INFINITY),
            Base::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn var(&self, m: f64) -> f64 {
        match *self {
            Base::Bernoulli => m * (1.0 - m),
            Base::Exponential => m * m,
            Base::Poisson => m,
            Base::Gaussian { var } => var,
        }
    }

    /// sum_i log p_m(y_i) without the carrier term, for `count` draws
    /// whose values sum to `sum`.
    pub fn ll(&self, m: f64, sum: f64, count: f64) -> f64 {
        match *self {
            Base::Bernoulli => {
                let hi = if sum == 0.0 { 0.0 } else { sum * m.ln() };
                let lo = if count == sum {
                    0.0
                } else {
                    (count - sum) * (-m).ln_1p()
                };
                hi + lo
            }
            Base::Exponential => -count * m.ln() - sum / m,
            Base::Poisson => (if sum == 0.0 { 0.0 } else { sum * m.ln() }) - count * m,
            Base::Gaussian { var } => (m * sum - 0.5 * count * m * m) / var,
        }
    }

    /// sup_m of [`Base::ll`], with the boundary supremum where the MLE is not interior.
    pub fn log_sup(&self, sum: f64, count: f64) -> f64 {
        match *self {
            Base::Bernoulli => xlogy_ratio(sum, count) + xlogy_ratio(count - sum, count),
            Base::Exponential => {
                if sum <= 0.0 {
                    f64::INFINITY
                } else {
                    -count * (sum / count).ln() - count
                }
            }
            Base::Poisson => xlogy_ratio(sum, count) - sum,
            Base::Gaussian { var } => sum * sum / (2.0 * count * var),
        }
    }

    /// log of the carrier density.
    pub fn log_h(&self, y: f64) -> f64 {
        match *self {
            Base::Bernoulli | Base::Exponential => 0.0,
            Base::Poisson => -ln_gamma(y + 1.0),
            Base::Gaussian { var } => {
                -0.5 * (y * y / var + (2.0 * std::f64::consts::PI * var).ln())
            }
        }
    }

    pub fn log_density(&self, m: f64, y: f64) -> f64 {
        self.ll(m, y, 1.0) + self.log_h(y)
    }

    pub fn kl(&self, m1: f64, m2: f64) -> f64 {
        match *self {
            Base::Bernoulli => expfam_core::bernoulli_kl(m1, m2),
            Base::Exponential => expfam_core::exponential_kl(m1, m2),
            Base::Poisson => expfam_core::poisson_kl(m1, m2),
            Base::Gaussian { var } => (m1 - m2).powi(2) / (2.0 * var),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: f64, rng: &mut R) -> f64 {
        match *self {
            Base::Bernoulli => {
                if rng.random::<f64>() < m {
                    1.0
                } else {
                    0.0
                }
            }
            Base::Exponential => Exp::new(1.0 / m).expect("positive mean").sample(rng),
            Base::Poisson => PoissonDist::new(m).expect("positive rate").sample(rng),
            Base::Gaussian { var } => Normal::new(m, var.sqrt())
                .expect("positive variance")
                .sample(rng),
        }
    }

    /// Canonical tilt of mean `m` by `beta`; `None` outside the admissible set.
    pub fn tilt(&self, m: f64, beta: f64) -> Option<f64> {
        let v = match self {
            Base::Bernoulli => {
                // m e^b / (1 - m + m e^b), evaluated through the logit
                let logit = m.ln() - (-m).ln_1p();
                1.0 / (1.0 + (-(logit + beta)).exp())
            }
            Base::Exponential => {
                let den = 1.0 - m * beta;
                if den <= 0.0 {
                    return None;
                }
                m / den
            }
            Base::Poisson => m * beta.exp(),
            Base::Gaussian { .. } => m + beta,
        };
        self.in_mean_space(v).then_some(v)
    }

    /// Effect size of the pair (a, b): log odds ratio, difference of
    /// rates, log rate ratio or mean difference.
    pub fn effect_size(&self, a: f64, b: f64) -> f64 {
        match self {
            Base::Bernoulli => (a.ln() - (-a).ln_1p()) - (b.ln() - (-b).ln_1p()),
            Base::Exponential => 1.0 / a - 1.0 / b,
            Base::Poisson => a.ln() - b.ln(),
            Base::Gaussian { .. } => a - b,
        }
    }

    /// log q(A | Z) / p(A | Z) for n pairs with A = sum of the first
    /// sample and Z = A + B: the conditional e-variable. It depends on
    /// (a, b) only through the effect size.
    pub fn log_cond(&self, a: f64, b: f64, sum_a: f64, sum_b: f64, n: usize) -> f64 {
        let z = sum_a + sum_b;
        let nf = n as f64;
        match *self {
            Base::Bernoulli => {
                let delta = self.effect_size(a, b);
                let (n, zi) = (n as u64, z.round() as u64);
                let lo = zi.saturating_sub(n);
                let hi = zi.min(n);
                let terms: Vec<f64> = (lo..=hi)
                    .map(|k| ln_choose(n, k) + ln_choose(n, zi - k) + delta * k as f64)
                    .collect();
                delta * sum_a - log_sum_exp(&terms) + ln_choose(2 * n, zi)
            }
            Base::Exponential => {
                let delta = self.effect_size(a, b);
                -sum_a * delta - log_beta_mgf(n, z * delta)
            }
            Base::Poisson => {
                let s = a + b;
                let ta = if sum_a == 0.0 {
                    0.0
                } else {
                    sum_a * (2.0 * a / s).ln()
                };
                let tb = if sum_b == 0.0 {
                    0.0
                } else {
                    sum_b * (2.0 * b / s).ln()
                };
                ta + tb
            }
            Base::Gaussian { var } => {
                let c = sum_a - 0.5 * z;
                let e = 0.5 * nf * (a - b);
                (2.0 * c * e - e * e) / (nf * var)
            }
        }
    }
}

/// log E[exp(-c T)] for T ~ Beta(n, n).
pub fn log_beta_mgf(n: usize, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    if n == 1 {
        // (1 - e^{-c}) / c
        return if c > 0.0 {
            (-(-c).exp_m1()).ln() - c.ln()
        } else {
            let cp = -c;
            cp + (-(-cp).exp_m1()).ln() - cp.ln()
        };
    }
    let k = (n - 1) as f64;
    let lbeta = 2.0 * ln_gamma(n as f64) - ln_gamma(2.0 * n as f64);
    let h = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return f64::NEG_INFINITY;
        }
        k * (t.ln() + (-t).ln_1p()) - c * t - lbeta
    };
    let mode = 2.0 * k / (2.0 * k + c + (4.0 * k * k + c * c).sqrt());
    log_integrate_peaked(h, 0.0, 1.0, mode, QuadOptions::default())
}

/// Density of A + B with A ~ Gamma(n, mean-per-draw a), B ~ Gamma(n, b), in logs.
pub fn log_gamma_sum_density(n: usize, a: f64, b: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let delta = 1.0 / a - 1.0 / b;
    (2.0 * nf - 1.0) * z.ln() - z / b + log_beta_mgf(n, z * delta)
        - nf * (a * b).ln()
        - ln_gamma(2.0 * nf)
}
