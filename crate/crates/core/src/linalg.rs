//! Moment estimation and eigen-based Gaussian sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative tolerance for asymmetry and negative eigenvalues.
const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceError {
    NotSquare,
    DimensionMismatch { expected: usize, found: usize },
    NotSymmetric { row: usize, col: usize },
    NotPositiveSemidefinite { eigenvalue: f64 },
    NonFinite,
}

impl std::fmt::Display for CovarianceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovarianceError::NotSquare => write!(f, "covariance matrix is not square"),
            CovarianceError::DimensionMismatch { expected, found } => {
                write!(f, "covariance is {found}x{found}, expected {expected}x{expected}")
            }
            CovarianceError::NotSymmetric { row, col } => {
                write!(f, "covariance is not symmetric at ({row}, {col})")
            }
            CovarianceError::NotPositiveSemidefinite { eigenvalue } => {
                write!(f, "covariance is not positive semidefinite (eigenvalue {eigenvalue:e})")
            }
            CovarianceError::NonFinite => write!(f, "covariance contains non-finite entries"),
        }
    }
}

/// Builds a square matrix from nested rows, checking shape.
pub fn matrix_from_rows(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>, CovarianceError> {
    if rows.len() != dim {
        return Err(CovarianceError::DimensionMismatch {
            expected: dim,
            found: rows.len(),
        });
    }
    if rows.iter().any(|r| r.len() != dim) {
        return Err(CovarianceError::NotSquare);
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Sample mean and unbiased sample covariance of the rows.
///
/// With fewer than two rows the covariance is zero.
pub fn mean_and_covariance<'a, I>(rows: I, dim: usize) -> (Vec<f64>, DMatrix<f64>)
where
    I: IntoIterator<Item = &'a [f64]>,
    I::IntoIter: Clone,
{
    let rows = rows.into_iter();
    let mut mean = vec![0.0; dim];
    let mut n = 0usize;
    for r in rows.clone() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
        n += 1;
    }
    if n == 0 {
        return (mean, DMatrix::zeros(dim, dim));
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    if n > 1 {
        for r in rows {
            for i in 0..dim {
                let di = r[i] - mean[i];
                for j in i..dim {
                    cov[(i, j)] += di * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[(i, j)] / (n - 1) as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
    }
    (mean, cov)
}

/// Multivariate normal sampler `mean + Σ_k z_k √λ_k v_k` over the principal
/// axes of the covariance, with every coordinate clipped to [0, 1].
#[derive(Debug, Clone)]
pub struct PrincipalSampler {
    mean: DVector<f64>,
    /// Columns are √λ_k v_k, ordered by decreasing eigenvalue.
    axes: DMatrix<f64>,
}

impl PrincipalSampler {
    pub fn new(mean: &[f64], cov: &DMatrix<f64>) -> Result<Self, CovarianceError> {
        let dim = mean.len();
        if cov.nrows() != cov.ncols() {
            return Err(CovarianceError::NotSquare);
        }
        if cov.nrows() != dim {
            return Err(CovarianceError::DimensionMismatch {
                expected: dim,
                found: cov.nrows(),
            });
        }
        if cov.iter().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
            return Err(CovarianceError::NonFinite);
        }
        let scale = cov.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (cov[(i, j)] - cov[(j, i)]).abs() > PSD_TOLERANCE * scale {
                    return Err(CovarianceError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let eig = SymmetricEigen::new(cov.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut axes = DMatrix::zeros(dim, dim);
        for (col, &k) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[k];
            if lambda < -PSD_TOLERANCE * scale {
                return Err(CovarianceError::NotPositiveSemidefinite { eigenvalue: lambda });
            }
            let root = lambda.max(0.0).sqrt();
            for row in 0..dim {
                axes[(row, col)] = root * eig.eigenvectors[(row, k)];
            }
        }
        Ok(PrincipalSampler {
            mean: DVector::from_column_slice(mean),
            axes,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Principal standard deviations √λ_k, largest first.
    pub fn principal_scales(&self) -> Vec<f64> {
        self.axes.column_iter().map(|c| c.norm()).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dim = self.dim();
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        (0..dim)
            .map(|i| {
                let mut x = self.mean[i];
                for (k, zk) in z.iter().enumerate() {
                    x += self.axes[(i, k)] * zk;
                }
                x.clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Frobenius norm of `a - b` relative to the norm of `b`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
