use std::f64::consts::PI;

use crate::kl::GaussianPrior;
use crate::matrix::{CovMatrix, SpdFactor};
use crate::GaussError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// log N(x; mean, A) with A given through its factor.
pub fn log_normal_pdf(x: &[f64], mean: &[f64], a: &SpdFactor) -> f64 {
    let d = a.dim();
    let mut diff = [0.0_f64; 8];
    let mut heap;
    let diff: &mut [f64] = if d <= 8 {
        &mut diff[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap[..]
    };
    for i in 0..d {
        diff[i] = x[i] - mean[i];
    }
    -0.5 * (d as f64 * LN_2PI + a.log_det() + a.quad_inv(diff))
}

/// Sample mean of `n` rows of width `d` stored row-major in `xs`.
pub fn sample_mean(xs: &[f64], d: usize) -> Vec<f64> {
    let n = xs.len() / d;
    let mut m = vec![0.0; d];
    for row in xs.chunks_exact(d) {
        for (mi, xi) in m.iter_mut().zip(row) {
            *mi += xi;
        }
    }
    for mi in &mut m {
        *mi /= n as f64;
    }
    m
}

/// Sum_i (x_i - c)^T A^{-1} (x_i - c).
pub fn scatter_quad(xs: &[f64], d: usize, center: &[f64], a: &SpdFactor) -> f64 {
    let mut buf = vec![0.0; d];
    let mut acc = 0.0;
    for row in xs.chunks_exact(d) {
        for i in 0..d {
            buf[i] = row[i] - center[i];
        }
        acc += a.quad_inv(&buf);
    }
    acc
}

/// Sum_i log N(x_i; mean, A).
pub fn log_lik_iid(xs: &[f64], d: usize, mean: &[f64], a: &SpdFactor) -> f64 {
    let n = (xs.len() / d) as f64;
    -0.5 * (n * (d as f64 * LN_2PI + a.log_det()) + scatter_quad(xs, d, mean, a))
}

/// log of the Bayes marginal of i.i.d. N(m, Sigma) data under m ~ N(m0, Pi).
///
/// Uses the split into the within-sample scatter and the law of the sample
/// mean, N(m0, Pi + Sigma/n); a zero `Pi` reduces to a point mass.
pub fn log_marginal_location(
    xs: &[f64],
    d: usize,
    sigma: &CovMatrix,
    prior: &GaussianPrior,
) -> Result<f64, GaussError> {
    if d != sigma.dim() || d != prior.mean.dim() {
        return Err(GaussError::DimensionMismatch {
            expected: sigma.dim(),
            found: d,
        });
    }
    if xs.is_empty() || !xs.len().is_multiple_of(d) {
        return Err(GaussError::ZeroSampleSize);
    }
    let n = xs.len() / d;
    let fs = SpdFactor::new(sigma)?;
    let xbar = sample_mean(xs, d);
    let within = log_lik_iid(xs, d, &xbar, &fs);
    let sn = sigma.scale(1.0 / n as f64);
    let ld_sn = fs.log_det() - d as f64 * (n as f64).ln();
    let marg_cov = prior.cov.add(&sn)?;
    let fm = SpdFactor::new(&marg_cov)?;
    let between = log_normal_pdf(&xbar, prior.mean.as_slice(), &fm);
    Ok(within + 0.5 * d as f64 * (2.0 * PI).ln() + 0.5 * ld_sn + between)
}
