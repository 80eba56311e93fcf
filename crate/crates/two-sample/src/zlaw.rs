use expfam_core::special::{ln_choose, ln_gamma, log_sum_exp};

use crate::base::log_gamma_sum_density;
use crate::{Base, TwoSampleError};

/// Which member the law of Z is taken under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hypothesis {
    /// Null member with E[X] = mu.
    Null(f64),
    /// Alternative pair (mu_a, mu_b).
    Alt(f64, f64),
}

/// Law of Z = X_1 + ... + X_n.
#[derive(Debug, Clone, PartialEq)]
pub enum ZLaw {
    /// log pmf on 0, 1, ..., len - 1.
    Lattice(Vec<f64>),
    Poisson {
        mean: f64,
    },
    Normal {
        mean: f64,
        var: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    /// Gamma(n, a) + Gamma(n, b), scales given as per-draw means.
    GammaSum {
        n: usize,
        a: f64,
        b: f64,
    },
}

/// Finite support used to hand Z-laws to the projection solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZSupport {
    /// 0, 1, ..., len - 1.
    Lattice { len: usize },
    /// Midpoints lo + (i + 1/2) width of `len` cells.
    Cells { lo: f64, width: f64, len: usize },
}

impl ZSupport {
    pub fn len(&self) -> usize {
        match *self {
            ZSupport::Lattice { len } | ZSupport::Cells { len, .. } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<f64> {
        match *self {
            ZSupport::Lattice { len } => (0..len).map(|i| i as f64).collect(),
            ZSupport::Cells { lo, width, len } => {
                (0..len).map(|i| lo + (i as f64 + 0.5) * width).collect()
            }
        }
    }
}

impl ZLaw {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ZLaw::Lattice(_) | ZLaw::Poisson { .. })
    }

    /// log pmf (discrete laws) or log density (continuous laws).
    pub fn log_density(&self, z: f64) -> f64 {
        match self {
            ZLaw::Lattice(lp) => {
                if z < 0.0 || z.fract() != 0.0 || z as usize >= lp.len() {
                    f64::NEG_INFINITY
                } else {
                    lp[z as usize]
                }
            }
            ZLaw::Poisson { mean } => {
                if z < 0.0 || z.fract() != 0.0 {
                    f64::NEG_INFINITY
                } else if z == 0.0 {
                    -mean
                } else {
                    z * mean.ln() - mean - ln_gamma(z + 1.0)
                }
            }
            ZLaw::Normal { mean, var } => {
                -0.5 * ((z - mean).powi(2) / var + (2.0 * std::f64::consts::PI * var).ln())
            }
            ZLaw::Gamma { shape, scale } => {
                if z <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (shape - 1.0) * z.ln() - z / scale - shape * scale.ln() - ln_gamma(*shape)
                }
            }
            ZLaw::GammaSum { n, a, b } => log_gamma_sum_density(*n, *a, *b, z),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ZLaw::Lattice(lp) => lp.iter().enumerate().map(|(i, l)| i as f64 * l.exp()).sum(),
            ZLaw::Poisson { mean } | ZLaw::Normal { mean, .. } => *mean,
            ZLaw::Gamma { shape, scale } => shape * scale,
            ZLaw::GammaSum { n, a, b } => *n as f64 * (a + b),
        }
    }

    pub fn var(&self) -> f64 {
        match self {
            ZLaw::Lattice(lp) => {
                let m = self.mean();
                lp.iter()
                    .enumerate()
                    .map(|(i, l)| (i as f64 - m).powi(2) * l.exp())
                    .sum()
            }
            ZLaw::Poisson { mean } => *mean,
            ZLaw::Normal { var, .. } => *var,
            ZLaw::Gamma { shape, scale } => shape * scale * scale,
            ZLaw::GammaSum { n, a, b } => *n as f64 * (a * a + b * b),
        }
    }

    /// Log masses on `support`: point masses for lattices, density times
    /// cell width for cells.
    pub fn log_masses(&self, support: &ZSupport) -> Vec<f64> {
        let lw = match *support {
            ZSupport::Lattice { .. } => 0.0,
            ZSupport::Cells { width, .. } => width.ln(),
        };
        support
            .points()
            .into_iter()
            .map(|z| self.log_density(z) + lw)
            .collect()
    }
}

/// Log pmf of Binomial(n, p) on 0..=n.
fn binomial_log_pmf(n: usize, p: f64) -> Vec<f64> {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|k| {
            let a = if k == 0 { 0.0 } else { k as f64 * lp };
            let b = if k == n { 0.0 } else { (n - k) as f64 * lq };
            ln_choose(n as u64, k as u64) + a + b
        })
        .collect()
}

/// Convolution of two lattice laws in log space.
fn convolve_log(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + y.len() - 1);
    let mut terms = Vec::with_capacity(x.len());
    for z in 0..x.len() + y.len() - 1 {
        terms.clear();
        let lo = z.saturating_sub(y.len() - 1);
        let hi = z.min(x.len() - 1);
        for i in lo..=hi {
            terms.push(x[i] + y[z - i]);
        }
        out.push(log_sum_exp(&terms));
    }
    out
}

/// Law of Z = sum of n values of X under `hyp`.
pub fn suffstat_law(base: Base, hyp: Hypothesis, n: usize) -> Result<ZLaw, TwoSampleError> {
    if n == 0 {
        return Err(TwoSampleError::InvalidParameter(
            "n must be positive".into(),
        ));
    }
    let (a, b) = match hyp {
        Hypothesis::Null(mu) => (0.5 * mu, 0.5 * mu),
        Hypothesis::Alt(a, b) => (a, b),
    };
    if !base.in_mean_space(a) || !base.in_mean_space(b) {
        return Err(TwoSampleError::InvalidParameter(format!(
            "({a}, {b}) not interior for {}",
            base.name()
        )));
    }
    let nf = n as f64;
    Ok(match base {
        Base::Bernoulli => match hyp {
            Hypothesis::Null(_) => ZLaw::Lattice(binomial_log_pmf(2 * n, a)),
            Hypothesis::Alt(..) => ZLaw::Lattice(convolve_log(
                &binomial_log_pmf(n, a),
                &binomial_log_pmf(n, b),
            )),
        },
        Base::Poisson => ZLaw::Poisson { mean: nf * (a + b) },
        Base::Gaussian { var } => ZLaw::Normal {
            mean: nf * (a + b),
            var: 2.0 * nf * var,
        },
        Base::Exponential => match hyp {
            Hypothesis::Null(_) => ZLaw::Gamma {
                shape: 2.0 * nf,
                scale: a,
            },
            Hypothesis::Alt(..) if a == b => ZLaw::Gamma {
                shape: 2.0 * nf,
                scale: a,
            },
            Hypothesis::Alt(..) => ZLaw::GammaSum { n, a, b },
        },
    })
}
