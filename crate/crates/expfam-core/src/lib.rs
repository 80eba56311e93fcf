//! Regular exponential families in mean-value parameterization.

mod families;
mod family;
pub mod quad;
pub mod special;

pub use families::{
    bernoulli_kl, exponential_kl, poisson_kl, Bernoulli, Exponential, Gamma, GaussLocation,
    GaussLocationScale, Poisson,
};
pub use family::{
    kl, kl_extended, kl_generic, log_lik, log_lik_max, mle, prequential, suffstats, ExtendedMean,
    Family, ObsKind,
};

use gauss_analytic::{CovMatrix, GaussError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpFamError {
    #[error("unknown family '{0}'")]
    UnknownFamily(String),
    #[error("mean parameter {mu:?} is not in the interior of the {family} mean space")]
    NotInterior { family: String, mu: Vec<f64> },
    #[error("sample mean {mu:?} lies outside the closed convex hull of the support")]
    OutsideHull { mu: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Gauss(#[from] GaussError),
}

/// Names accepted by [`family_by_name`].
pub const FAMILY_NAMES: [&str; 6] = [
    "bernoulli",
    "poisson",
    "exponential",
    "gauss-loc",
    "gauss-loc-scale",
    "gamma",
];

/// Registry lookup. `gauss-loc` takes its covariance from `sigma` (identity
/// of dimension 1 when absent); other families ignore it.
pub fn family_by_name(
    name: &str,
    sigma: Option<CovMatrix>,
) -> Result<Box<dyn Family>, ExpFamError> {
    Ok(match name {
        "bernoulli" => Box::new(Bernoulli),
        "poisson" => Box::new(Poisson),
        "exponential" => Box::new(Exponential),
        "gauss-loc" => Box::new(GaussLocation::new(
            sigma.unwrap_or_else(|| CovMatrix::identity(1)),
        )?),
        "gauss-loc-scale" => Box::new(GaussLocationScale),
        "gamma" => Box::new(Gamma),
        other => return Err(ExpFamError::UnknownFamily(other.to_string())),
    })
}

/// n i.i.d. draws from P_mu, flattened; deterministic in `seed`.
pub fn sample_iid(
    f: &dyn Family,
    mu: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, ExpFamError> {
    f.check_interior(mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * f.obs_dim());
    for _ in 0..n {
        out.extend(f.sample(mu, &mut rng));
    }
    Ok(out)
}
