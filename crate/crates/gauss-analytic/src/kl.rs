use nalgebra::DMatrix;

use crate::matrix::{CovMatrix, MeanVec, SpdFactor};
use crate::GaussError;

/// D_GAUSS(B) = 1/2 (-log det B - (d - tr B)).
pub fn d_gauss(b: &DMatrix<f64>) -> Result<f64, GaussError> {
    if b.nrows() != b.ncols() {
        return Err(GaussError::NotSquare {
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    let d = b.nrows();
    if d == 0 {
        return Err(GaussError::EmptyDimension);
    }
    let lu = b.clone().lu();
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut negative = lu.p().determinant::<f64>() < 0.0;
    for i in 0..d {
        let v = u[(i, i)];
        if v == 0.0 || !v.is_finite() {
            return Err(GaussError::Singular);
        }
        if v < 0.0 {
            negative = !negative;
        }
        log_abs += v.abs().ln();
    }
    if negative {
        return Err(GaussError::NonPositiveDeterminant);
    }
    Ok(0.5 * (-log_abs - (d as f64 - b.trace())))
}

/// Sum form 1/2 sum_j (-log l_j - (1 - l_j)) over relative eigenvalues.
pub fn d_gauss_eigen(lambdas: &[f64]) -> f64 {
    0.5 * lambdas.iter().map(|&l| -l.ln() - (1.0 - l)).sum::<f64>()
}

/// Eigenvalues of Sp^{-1/2} Sq Sp^{-1/2}, ascending.
pub fn relative_eigenvalues(
    sigma_q: &CovMatrix,
    sigma_p: &CovMatrix,
) -> Result<Vec<f64>, GaussError> {
    sigma_q.check_same_dim(sigma_p)?;
    let fp = SpdFactor::new(sigma_p)?;
    let l = fp.lower().clone();
    let x = l
        .clone()
        .solve_lower_triangular(sigma_q.matrix())
        .ok_or(GaussError::Singular)?;
    let m = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(GaussError::Singular)?;
    let sym = CovMatrix::from_matrix((&m + m.transpose()) * 0.5)?;
    Ok(sym.eigenvalues())
}

/// d_ab = tr(Sa Sb^{-1}).
pub fn trace_ratio(sigma_a: &CovMatrix, sigma_b: &CovMatrix) -> Result<f64, GaussError> {
    sigma_a.check_same_dim(sigma_b)?;
    let ch = sigma_b.cholesky()?;
    let x = ch.solve(sigma_a.matrix());
    Ok(x.trace())
}

/// D_{Sr}(Sq || Sp) = -1/2 log det(Sq Sp^{-1}) + (d_rp - d_rq)/2.
pub fn d_triple(
    sigma_r: &CovMatrix,
    sigma_q: &CovMatrix,
    sigma_p: &CovMatrix,
) -> Result<f64, GaussError> {
    sigma_r.check_same_dim(sigma_q)?;
    sigma_r.check_same_dim(sigma_p)?;
    sigma_r.cholesky()?;
    let ld_q = sigma_q.log_det()?;
    let ld_p = sigma_p.log_det()?;
    let d_rp = trace_ratio(sigma_r, sigma_p)?;
    let d_rq = trace_ratio(sigma_r, sigma_q)?;
    Ok(-0.5 * (ld_q - ld_p) + 0.5 * (d_rp - d_rq))
}

/// KL(N(mu_r, Sr) || N(mu_0, Sp)).
pub fn gaussian_kl(
    mu_r: &MeanVec,
    sigma_r: &CovMatrix,
    mu_0: &MeanVec,
    sigma_p: &CovMatrix,
) -> Result<f64, GaussError> {
    gaussian_cross_kl(mu_r, sigma_r, sigma_r, mu_0, sigma_p)
}

/// E_R[log q(X)/p_0(X)] for Gaussian q = N(mu*, Sq), p_0 = N(mu_0, Sp) and any
/// R with mean mu* and covariance Sr.
pub fn gaussian_cross_kl(
    mu_star: &MeanVec,
    sigma_r: &CovMatrix,
    sigma_q: &CovMatrix,
    mu_0: &MeanVec,
    sigma_p: &CovMatrix,
) -> Result<f64, GaussError> {
    if mu_star.dim() != sigma_r.dim() {
        return Err(GaussError::DimensionMismatch {
            expected: sigma_r.dim(),
            found: mu_star.dim(),
        });
    }
    let diff = mu_star.sub(mu_0)?;
    let base = d_triple(sigma_r, sigma_q, sigma_p)?;
    let fp = SpdFactor::new(sigma_p)?;
    Ok(base + 0.5 * fp.quad_inv(diff.as_slice()))
}

/// Gaussian prior N(mean, cov) on a location parameter; `cov` may be singular.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    pub mean: MeanVec,
    pub cov: CovMatrix,
}

impl GaussianPrior {
    pub fn point(mean: MeanVec) -> Self {
        let d = mean.dim();
        Self {
            mean,
            cov: CovMatrix::zeros(d),
        }
    }

    pub fn new(mean: MeanVec, cov: CovMatrix) -> Result<Self, GaussError> {
        if mean.dim() != cov.dim() {
            return Err(GaussError::DimensionMismatch {
                expected: cov.dim(),
                found: mean.dim(),
            });
        }
        check_psd(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn is_point(&self) -> bool {
        self.cov.matrix().iter().all(|v| *v == 0.0)
    }
}

/// PSD check with a round-off allowance relative to the largest entry.
pub fn check_psd(a: &CovMatrix) -> Result<(), GaussError> {
    let scale = a.matrix().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lmin = a.min_eigenvalue();
    if lmin < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(GaussError::NotPsd {
            min_eigenvalue: lmin,
        });
    }
    Ok(())
}

/// Law of the sample mean under the Bayes marginal P_W: N(mu, Pi + Sp/n).
pub fn mle_marginal(
    prior: &GaussianPrior,
    sigma_p: &CovMatrix,
    n: usize,
) -> Result<(MeanVec, CovMatrix), GaussError> {
    if n == 0 {
        return Err(GaussError::ZeroSampleSize);
    }
    prior.cov.check_same_dim(sigma_p)?;
    check_psd(&prior.cov)?;
    sigma_p.cholesky()?;
    let cov = prior.cov.add(&sigma_p.scale(1.0 / n as f64))?;
    Ok((prior.mean.clone(), cov))
}
