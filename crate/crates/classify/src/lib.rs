//! Sign classification of Sq(mu) - Sp(mu) over a grid of mean parameters.

use std::fmt;

use expfam_core::{Family, FAMILY_NAMES};
use gauss_analytic::CovMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use two_sample::GeneratedAlternative;

/// Eigenvalues within this multiple of the spectral norm of Sp count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-10;

/// Grid size used when none is given.
pub const DEFAULT_GRID: usize = 101;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("empty grid")]
    EmptyGrid,
    #[error("grid point {mu:?} is outside a mean space")]
    OutsideMeanSpace { mu: Vec<f64> },
    #[error(transparent)]
    ExpFam(#[from] expfam_core::ExpFamError),
    #[error(transparent)]
    Gauss(#[from] gauss_analytic::GaussError),
    #[error(transparent)]
    TwoSample(#[from] two_sample::TwoSampleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Sq = Sp at every grid point: simple and anti-simple at once.
    Equal,
    StrictSimple,
    Simple,
    StrictAntiSimple,
    AntiSimple,
    Neither,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Equal => "equal (simple and anti-simple)",
            Verdict::StrictSimple => "strict simple",
            Verdict::Simple => "simple",
            Verdict::StrictAntiSimple => "strict anti-simple",
            Verdict::AntiSimple => "anti-simple",
            Verdict::Neither => "neither",
        }
    }

    pub fn is_simple(self) -> bool {
        matches!(
            self,
            Verdict::Equal | Verdict::Simple | Verdict::StrictSimple
        )
    }

    pub fn is_anti_simple(self) -> bool {
        matches!(
            self,
            Verdict::Equal | Verdict::AntiSimple | Verdict::StrictAntiSimple
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sign pattern at a single grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointSign {
    Zero,
    NegativeDefinite,
    NegativeSemidefinite,
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
}

impl PointSign {
    fn from_extremes(lo: f64, hi: f64, tol: f64) -> Self {
        if lo.abs() <= tol && hi.abs() <= tol {
            PointSign::Zero
        } else if hi < -tol {
            PointSign::NegativeDefinite
        } else if hi <= tol {
            PointSign::NegativeSemidefinite
        } else if lo > tol {
            PointSign::PositiveDefinite
        } else if lo >= -tol {
            PointSign::PositiveSemidefinite
        } else {
            PointSign::Indefinite
        }
    }

    pub fn is_nsd(self) -> bool {
        matches!(
            self,
            PointSign::Zero | PointSign::NegativeDefinite | PointSign::NegativeSemidefinite
        )
    }

    /// The point is anti-simple (PSD difference).
    pub fn is_psd(self) -> bool {
        matches!(
            self,
            PointSign::Zero | PointSign::PositiveDefinite | PointSign::PositiveSemidefinite
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub mu: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub sign: PointSign,
}

/// Whether a structural matching-pair condition was checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Verified,
    Failed,
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub points: Vec<PointReport>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Mean space of the alternative inside that of the null.
    pub mean_space_inclusion: Check,
    /// Canonical parameter inclusion.
    pub canonical_inclusion: Check,
}

impl Classification {
    /// Grid points where the difference is PSD.
    pub fn anti_simple_points(&self) -> Vec<&[f64]> {
        self.points
            .iter()
            .filter(|p| p.sign.is_psd())
            .map(|p| p.mu.as_slice())
            .collect()
    }

    /// Grid points where the difference is not NSD, i.e. witnesses against simplicity.
    pub fn non_simple_points(&self) -> Vec<&[f64]> {
        self.points
            .iter()
            .filter(|p| !p.sign.is_nsd())
            .map(|p| p.mu.as_slice())
            .collect()
    }
}

fn verdict_of(points: &[PointReport]) -> Verdict {
    let all = |f: fn(PointSign) -> bool| points.iter().all(|p| f(p.sign));
    if all(|s| s == PointSign::Zero) {
        Verdict::Equal
    } else if all(PointSign::is_nsd) {
        if all(|s| s == PointSign::NegativeDefinite) {
            Verdict::StrictSimple
        } else {
            Verdict::Simple
        }
    } else if all(PointSign::is_psd) {
        if all(|s| s == PointSign::PositiveDefinite) {
            Verdict::StrictAntiSimple
        } else {
            Verdict::AntiSimple
        }
    } else {
        Verdict::Neither
    }
}

/// Core classifier: `covs` returns (Sq(mu), Sp(mu)) at each grid point.
pub fn classify_with<F>(
    grid: &[Vec<f64>],
    covs: F,
    inclusion: (Check, Check),
) -> Result<Classification, ClassifyError>
where
    F: Fn(&[f64]) -> Result<(CovMatrix, CovMatrix), ClassifyError>,
{
    if grid.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    let mut points = Vec::with_capacity(grid.len());
    for mu in grid {
        let (sq, sp) = covs(mu)?;
        let eig = sq.sub(&sp)?.eigenvalues();
        let norm = sp.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = ZERO_THRESHOLD * norm;
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        points.push(PointReport {
            mu: mu.clone(),
            min_eigenvalue: lo,
            max_eigenvalue: hi,
            sign: PointSign::from_extremes(lo, hi, tol),
        });
    }
    let min_eigenvalue = points
        .iter()
        .map(|p| p.min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let max_eigenvalue = points
        .iter()
        .map(|p| p.max_eigenvalue)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Classification {
        verdict: verdict_of(&points),
        points,
        min_eigenvalue,
        max_eigenvalue,
        mean_space_inclusion: inclusion.0,
        canonical_inclusion: inclusion.1,
    })
}

/// Alternative family `q` against null family `p`, both in mean-value
/// coordinates of the shared sufficient statistic.
pub fn classify_families(
    p: &dyn Family,
    q: &dyn Family,
    grid: &[Vec<f64>],
) -> Result<Classification, ClassifyError> {
    let builtin = |f: &dyn Family| FAMILY_NAMES.contains(&f.name());
    // for built-in families of the same name both parameter spaces coincide
    let inclusion = if builtin(p) && builtin(q) && p.name() == q.name() && p.dim() == q.dim() {
        (Check::Verified, Check::Verified)
    } else if grid
        .iter()
        .any(|mu| q.in_mean_space(mu) && !p.in_mean_space(mu))
    {
        (Check::Failed, Check::Assumed)
    } else {
        (Check::Assumed, Check::Assumed)
    };
    classify_with(
        grid,
        |mu| {
            if !q.in_mean_space(mu) || !p.in_mean_space(mu) {
                return Err(ClassifyError::OutsideMeanSpace { mu: mu.to_vec() });
            }
            Ok((q.cov(mu)?, p.cov(mu)?))
        },
        inclusion,
    )
}

/// A generated two-sample alternative along its curve, against the
/// two-sample null. The grid holds curve coordinates beta; reports carry
/// the matching null mean E[X].
pub fn classify_two_sample(
    alt: &GeneratedAlternative,
    betas: &[f64],
) -> Result<Classification, ClassifyError> {
    let base = alt.base();
    let grid: Vec<Vec<f64>> = betas.iter().map(|b| vec![*b]).collect();
    let mut c = classify_with(
        &grid,
        |beta| {
            let (a, b) = alt.point(beta[0])?;
            let m = 0.5 * (a + b);
            let sq = CovMatrix::diag(&[base.var(a) + base.var(b)]);
            let sp = CovMatrix::diag(&[2.0 * base.var(m)]);
            Ok((sq, sp))
        },
        // the curve lies in the product of the base mean spaces, whose
        // E[X]-image is the null mean space; both canonical sets are full
        (Check::Verified, Check::Verified),
    )?;
    for p in &mut c.points {
        p.mu = vec![alt.mean(p.mu[0])?];
    }
    Ok(c)
}

/// Default beta grid along a curve: cell midpoints of [-10, 10] within the
/// admissible set.
pub fn default_curve_grid(alt: &GeneratedAlternative) -> Result<Vec<f64>, ClassifyError> {
    Ok(alt.prior_grid(DEFAULT_GRID, -10.0, 10.0)?)
}
