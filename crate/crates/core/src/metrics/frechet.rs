use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricError;
use crate::num::{from_usize, lit, Scalar};

/// Ridge added to a covariance whose smallest eigenvalue falls below it.
pub const COV_RIDGE: f64 = 1e-6;

/// Mean and covariance of a sample of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary<T: Scalar> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub count: usize,
}

impl<T: Scalar> GaussianSummary<T> {
    /// Validates and stores a summary. Slightly negative eigenvalues (down to
    /// the structural tolerance) are clipped to zero.
    pub fn new(mean: DVector<T>, cov: DMatrix<T>, count: usize) -> Result<Self, MetricError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(MetricError::DimensionMismatch(d, cov.nrows()));
        }
        let tol = T::structural_tol();
        let scale = cov.amax().max(T::one());
        if (&cov - cov.transpose()).amax() > tol * scale {
            return Err(MetricError::NotSymmetric);
        }
        let sym = symmetrize(&cov);
        let eig = SymmetricEigen::new(sym.clone());
        if eig.eigenvalues.iter().any(|&l| l < -tol * scale) {
            return Err(MetricError::NotPositiveSemidefinite);
        }
        let cov = if eig.eigenvalues.iter().any(|&l| l < T::zero()) {
            reconstruct(&eig, |l| l.max(T::zero()))
        } else {
            sym
        };
        Ok(GaussianSummary { mean, cov, count })
    }

    /// Fits mean and unbiased covariance (divided by `count - 1`).
    pub fn fit(samples: &[DVector<T>]) -> Result<Self, MetricError> {
        let count = samples.len();
        if count < 2 {
            return Err(MetricError::DegenerateCount(count));
        }
        let d = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != d) {
            return Err(MetricError::DimensionMismatch(d, bad.len()));
        }
        let mut mean = DVector::zeros(d);
        for s in samples {
            mean += s;
        }
        mean /= from_usize::<T>(count);
        let mut cov = DMatrix::zeros(d, d);
        for s in samples {
            let c = s - &mean;
            cov += &c * c.transpose();
        }
        cov /= from_usize::<T>(count - 1);
        Ok(GaussianSummary {
            mean,
            cov: symmetrize(&cov),
            count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}

fn reconstruct<T: Scalar>(eig: &SymmetricEigen<T, nalgebra::Dyn>, f: impl Fn(T) -> T) -> DMatrix<T> {
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    symmetrize(&(v * d * v.transpose()))
}

fn regularized<T: Scalar>(cov: &DMatrix<T>) -> DMatrix<T> {
    let ridge = lit::<T>(COV_RIDGE);
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| l < ridge) {
        cov + DMatrix::identity(cov.nrows(), cov.ncols()) * ridge
    } else {
        cov.clone()
    }
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues clip to 0.
pub fn sqrtm_psd<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = SymmetricEigen::new(symmetrize(m));
    reconstruct(&eig, |l| l.max(T::zero()).sqrt())
}

/// `Tr((A^1/2 B A^1/2)^1/2)`.
fn trace_sqrt_product<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let s = sqrtm_psd(a);
    let inner = symmetrize(&(&s * b * &s));
    SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &l| acc + l.max(T::zero()).sqrt())
}

/// Fréchet distance between two Gaussian summaries:
/// `d^2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)`.
///
/// Covariances whose smallest eigenvalue is below [`COV_RIDGE`] get that
/// ridge added to the diagonal. The cross term is evaluated in both orders
/// and averaged so the result is exactly symmetric.
pub fn frechet_distance<T: Scalar>(
    a: &GaussianSummary<T>,
    b: &GaussianSummary<T>,
) -> Result<T, MetricError> {
    if a.dim() != b.dim() || a.cov.nrows() != b.cov.nrows() {
        return Err(MetricError::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.count < 2 || b.count < 2 {
        return Err(MetricError::DegenerateCount(a.count.min(b.count)));
    }
    if a.mean == b.mean && a.cov == b.cov {
        return Ok(T::zero());
    }
    let ca = regularized(&a.cov);
    let cb = regularized(&b.cov);
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let cross = (trace_sqrt_product(&ca, &cb) + trace_sqrt_product(&cb, &ca)) * lit::<T>(0.5);
    let d2 = mean_term + ca.trace() + cb.trace() - cross * lit::<T>(2.0);
    Ok(d2.max(T::zero()).sqrt())
}
