use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::GaussError;

/// Relative tolerance for the symmetry check on user-supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric d x d matrix.
///
/// Symmetry is enforced at construction; positive definiteness is only
/// checked by the operations that need it (`cholesky`, `log_det`, ...), so the
/// same type also holds PSD priors and covariance differences.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    /// Build from row-major entries.
    pub fn new(dim: usize, entries: &[f64]) -> Result<Self, GaussError> {
        if dim == 0 {
            return Err(GaussError::EmptyDimension);
        }
        if entries.len() != dim * dim {
            return Err(GaussError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, GaussError> {
        if m.nrows() != m.ncols() {
            return Err(GaussError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(GaussError::EmptyDimension);
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GaussError::NonFinite);
        }
        let scale = m
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose())
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        if asym > SYMMETRY_TOL * scale {
            return Err(GaussError::NotSymmetric {
                asymmetry: asym / scale,
            });
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { m: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self {
            m: DMatrix::identity(dim, dim) * s,
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(values)),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn check_same_dim(&self, other: &CovMatrix) -> Result<(), GaussError> {
        if self.dim() != other.dim() {
            return Err(GaussError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>, GaussError> {
        Cholesky::new(self.m.clone()).ok_or(GaussError::NotSpd)
    }

    pub fn is_spd(&self) -> bool {
        Cholesky::new(self.m.clone()).is_some()
    }

    /// log det from the Cholesky diagonal.
    pub fn log_det(&self) -> Result<f64, GaussError> {
        let ch = self.cholesky()?;
        Ok(chol_log_det(&ch))
    }

    pub fn inverse(&self) -> Result<CovMatrix, GaussError> {
        let ch = self.cholesky()?;
        let inv = ch.inverse();
        Ok(Self {
            m: (&inv + inv.transpose()) * 0.5,
        })
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.m.clone());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn add(&self, other: &CovMatrix) -> Result<CovMatrix, GaussError> {
        self.check_same_dim(other)?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &CovMatrix) -> Result<CovMatrix, GaussError> {
        self.check_same_dim(other)?;
        Ok(Self {
            m: &self.m - &other.m,
        })
    }

    pub fn scale(&self, s: f64) -> CovMatrix {
        Self { m: &self.m * s }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Symmetric square root via eigen-decomposition (PSD input).
    pub fn sqrt_psd(&self) -> Result<CovMatrix, GaussError> {
        let eig = SymmetricEigen::new(self.m.clone());
        let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        if lmin < -1e-12 * scale.max(1.0) {
            return Err(GaussError::NotPsd {
                min_eigenvalue: lmin,
            });
        }
        let s = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let m = &eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose();
        Ok(Self {
            m: (&m + m.transpose()) * 0.5,
        })
    }
}

pub(crate) fn chol_log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Real d-vector paired with a `CovMatrix` of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVec {
    v: DVector<f64>,
}

impl MeanVec {
    pub fn new(entries: &[f64]) -> Self {
        Self {
            v: DVector::from_column_slice(entries),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            v: DVector::zeros(dim),
        }
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        Self { v }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn as_slice(&self) -> &[f64] {
        self.v.as_slice()
    }

    pub fn sub(&self, other: &MeanVec) -> Result<MeanVec, GaussError> {
        if self.dim() != other.dim() {
            return Err(GaussError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            v: &self.v - &other.v,
        })
    }
}

/// Cholesky factor of an SPD matrix with cached log-determinant.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    log_det: f64,
}

impl SpdFactor {
    pub fn new(a: &CovMatrix) -> Result<Self, GaussError> {
        let ch = a.cholesky()?;
        let log_det = chol_log_det(&ch);
        Ok(Self { l: ch.l(), log_det })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// x^T A^{-1} x
    pub fn quad_inv(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        // forward substitution L y = x
        let mut y = [0.0_f64; 8];
        let mut heap;
        let y: &mut [f64] = if d <= 8 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap[..]
        };
        let mut acc = 0.0;
        for i in 0..d {
            let mut s = x[i];
            for j in 0..i {
                s -= self.l[(i, j)] * y[j];
            }
            y[i] = s / self.l[(i, i)];
            acc += y[i] * y[i];
        }
        acc
    }

    pub fn inverse(&self) -> CovMatrix {
        let d = self.dim();
        let linv = self
            .l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .expect("nonsingular triangular factor");
        let inv = linv.transpose() * linv;
        CovMatrix {
            m: (&inv + inv.transpose()) * 0.5,
        }
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }
}
