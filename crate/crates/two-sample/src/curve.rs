use crate::{Base, TwoSampleError};

/// The alternative generated by tilting Q_{a,b} along X = Ya + Yb: all
/// pairs with the anchor's effect size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratedAlternative {
    base: Base,
    a: f64,
    b: f64,
    delta: f64,
}

impl GeneratedAlternative {
    pub fn from_anchor(base: Base, a: f64, b: f64) -> Result<Self, TwoSampleError> {
        if !base.in_mean_space(a) || !base.in_mean_space(b) {
            return Err(TwoSampleError::InvalidParameter(format!(
                "anchor ({a}, {b}) is not interior for {}",
                base.name()
            )));
        }
        Ok(Self {
            base,
            a,
            b,
            delta: base.effect_size(a, b),
        })
    }

    /// Canonical anchor for effect size `delta`: symmetric pairs
    /// (a = 1 - b, or a = 1/b, or a = -b) where the family allows it;
    /// for the exponential base a = 2 unless that forces b out of range.
    pub fn from_effect(base: Base, delta: f64) -> Result<Self, TwoSampleError> {
        if !delta.is_finite() {
            return Err(TwoSampleError::InvalidParameter(format!(
                "effect size {delta}"
            )));
        }
        let (a, b) = match base {
            Base::Bernoulli => {
                let a = 1.0 / (1.0 + (-0.5 * delta).exp());
                (a, 1.0 - a)
            }
            Base::Exponential => {
                if 0.5 - delta > 0.0 {
                    (2.0, 1.0 / (0.5 - delta))
                } else {
                    (1.0 / (delta + 0.5), 2.0)
                }
            }
            Base::Poisson => ((0.5 * delta).exp(), (-0.5 * delta).exp()),
            Base::Gaussian { .. } => (0.5 * delta, -0.5 * delta),
        };
        let mut g = Self::from_anchor(base, a, b)?;
        g.delta = delta;
        Ok(g)
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn anchor(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Admissible beta interval (open).
    pub fn beta_range(&self) -> (f64, f64) {
        match self.base {
            Base::Exponential => (f64::NEG_INFINITY, 1.0 / self.a.max(self.b)),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn point(&self, beta: f64) -> Result<(f64, f64), TwoSampleError> {
        let (lo, hi) = self.beta_range();
        let out = if beta.is_finite() && beta > lo && beta < hi {
            self.base
                .tilt(self.a, beta)
                .zip(self.base.tilt(self.b, beta))
        } else {
            None
        };
        out.ok_or(TwoSampleError::Domain { beta, lo, hi })
    }

    /// E[X] = a' + b' at beta.
    pub fn mean(&self, beta: f64) -> Result<f64, TwoSampleError> {
        self.point(beta).map(|(a, b)| a + b)
    }

    /// Range of E[X] along the curve (open).
    pub fn mean_range(&self) -> (f64, f64) {
        let (lo, hi) = self.base.mean_range();
        (2.0 * lo, 2.0 * hi)
    }

    /// The curve point whose X-mean is `m`.
    pub fn point_for_mean(&self, m: f64) -> Result<(f64, f64), TwoSampleError> {
        self.point(self.beta_for_mean(m)?)
    }

    /// Inverse of [`GeneratedAlternative::mean`].
    pub fn beta_for_mean(&self, m: f64) -> Result<f64, TwoSampleError> {
        let (mlo, mhi) = self.mean_range();
        if !(m > mlo && m < mhi) {
            return Err(TwoSampleError::InvalidParameter(format!(
                "mean {m} outside ({mlo}, {mhi})"
            )));
        }
        let (a, b) = (self.a, self.b);
        let closed = match self.base {
            Base::Gaussian { .. } => Some(0.5 * (m - a - b)),
            Base::Poisson => Some((m / (a + b)).ln()),
            Base::Bernoulli => {
                // quadratic in s = e^beta
                let (al, ga) = (1.0 - a, 1.0 - b);
                let q2 = a * b * (2.0 - m);
                let q1 = (a * ga + b * al) * (1.0 - m);
                let q0 = m * al * ga;
                let disc = (q1 * q1 + 4.0 * q2 * q0).sqrt();
                let s = if q1 >= 0.0 {
                    2.0 * q0 / (q1 + disc)
                } else {
                    (disc - q1) / (2.0 * q2)
                };
                (s > 0.0 && s.is_finite()).then(|| s.ln())
            }
            Base::Exponential => {
                let hi = self.beta_range().1;
                let q2 = m * a * b;
                let q1 = -(m * (a + b) - 2.0 * a * b);
                let q0 = m - (a + b);
                let disc = q1 * q1 - 4.0 * q2 * q0;
                if disc < 0.0 {
                    None
                } else {
                    let sq = disc.sqrt();
                    // stable pair of roots
                    let t = -0.5 * (q1 + q1.signum() * sq);
                    let r = [t / q2, if t != 0.0 { q0 / t } else { f64::NAN }];
                    r.into_iter().filter(|x| x.is_finite() && *x < hi).fold(
                        None,
                        |acc: Option<f64>, x| {
                            Some(match acc {
                                Some(y)
                                    if (self.mean(y).unwrap_or(f64::INFINITY) - m).abs()
                                        <= (self.mean(x).unwrap_or(f64::INFINITY) - m).abs() =>
                                {
                                    y
                                }
                                _ => x,
                            })
                        },
                    )
                }
            }
        };
        if let Some(beta) = closed {
            if let Ok(v) = self.mean(beta) {
                if (v - m).abs() <= 1e-10 * (1.0 + m.abs()) {
                    return Ok(beta);
                }
            }
        }
        self.bisect_mean(m)
    }

    fn bisect_mean(&self, m: f64) -> Result<f64, TwoSampleError> {
        let (_, bhi) = self.beta_range();
        let f = |beta: f64| self.mean(beta).map(|v| v - m);
        let mut hi = if bhi.is_finite() { bhi } else { 1.0 };
        if !bhi.is_finite() {
            while f(hi)? < 0.0 {
                hi *= 2.0;
            }
        }
        let mut lo = if bhi.is_finite() {
            bhi.min(0.0) - 1.0
        } else {
            -1.0
        };
        while f(lo)? > 0.0 {
            lo = 2.0 * lo - 1.0;
            if lo < -1e12 {
                return Err(TwoSampleError::InvalidParameter(format!(
                    "cannot bracket mean {m}"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            match f(mid) {
                Ok(v) if v < 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        Ok(lo)
    }

    /// Cell midpoints of `points` equal cells covering [lo, hi] intersected
    /// with the admissible beta set.
    pub fn prior_grid(&self, points: usize, lo: f64, hi: f64) -> Result<Vec<f64>, TwoSampleError> {
        let (slo, shi) = self.beta_range();
        let lo = lo.max(slo);
        let hi = hi.min(shi);
        if points == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(TwoSampleError::InvalidParameter(format!(
                "empty prior window [{lo}, {hi}] with {points} points"
            )));
        }
        let w = (hi - lo) / points as f64;
        Ok((0..points).map(|k| lo + (k as f64 + 0.5) * w).collect())
    }
}

/// Bernoulli curve through the symmetric anchor with log odds ratio `delta`.
pub fn bernoulli_curve(delta: f64, beta: f64) -> (f64, f64) {
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    // the anchor has logits +delta/2 and -delta/2
    (sigmoid(0.5 * delta + beta), sigmoid(-0.5 * delta + beta))
}

/// Exponential curve through the default anchor for `delta`.
pub fn exponential_curve(delta: f64, beta: f64) -> Result<(f64, f64), TwoSampleError> {
    GeneratedAlternative::from_effect(Base::Exponential, delta)?.point(beta)
}
