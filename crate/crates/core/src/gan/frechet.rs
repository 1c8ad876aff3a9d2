//! Fréchet distance between Gaussian summaries of image features.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng;

/// Width of the random feature projection.
pub const FRECHET_FEATURES: usize = 16;

/// Eigenvalues down to this are treated as round-off and clamped to zero.
const PSD_TOLERANCE: f64 = -1e-8;

/// Mean vector and covariance matrix of a feature sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianSummary {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: covariance.nrows(),
            });
        }
        Ok(Self { mean, covariance })
    }

    /// Sample mean and unbiased covariance of equal-length feature rows.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 samples for a covariance, got {}",
                samples.len()
            )));
        }
        let d = samples[0].len();
        let n = samples.len() as f64;
        let mut mean = DVector::zeros(d);
        for s in samples {
            if s.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: s.len(),
                });
            }
            mean += DVector::from_column_slice(s);
        }
        mean /= n;
        let mut cov = DMatrix::zeros(d, d);
        for s in samples {
            let c = DVector::from_column_slice(s) - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= n - 1.0;
        Ok(Self { mean, covariance: cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Eigenvalues of a symmetric matrix, clamped at zero within tolerance.
fn psd_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        if *v < PSD_TOLERANCE || !v.is_finite() {
            return Err(Error::NonPsdCovariance(*v));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(m)?;
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * root * eig.eigenvectors.transpose())
}

/// `||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2})`, never negative.
///
/// The trace of the product root is computed as the trace of the root of the
/// symmetric matrix `S_a^{1/2} S_b S_a^{1/2}`, which has the same spectrum.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    psd_eigen(&b.covariance)?;
    let ra = sqrt_psd(&a.covariance)?;
    let inner = &ra * &b.covariance * &ra;
    let tr_root: f64 = psd_eigen(&inner)?.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let d = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_root;
    Ok(d.max(0.0))
}

/// Fixed seeded linear map from flattened images to a small feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureProjector {
    matrix: DMatrix<f64>,
}

impl FeatureProjector {
    /// Entries are N(0, 1/pixels) so features stay O(1) for unit-range images.
    pub fn new(pixels: usize, features: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let scale = 1.0 / (pixels as f64).sqrt();
        let data: Vec<f64> = (0..pixels * features).map(|_| scale * rng::normal(&mut r)).collect();
        Self {
            matrix: DMatrix::from_row_slice(features, pixels, &data),
        }
    }

    pub fn features(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn project(&self, img: &Image) -> Result<Vec<f64>> {
        if img.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.ncols(),
                actual: img.len(),
            });
        }
        let x = DVector::from_column_slice(img.pixels());
        Ok((&self.matrix * x).as_slice().to_vec())
    }

    pub fn summarize(&self, images: &[Image]) -> Result<GaussianSummary> {
        let rows = images.iter().map(|i| self.project(i)).collect::<Result<Vec<_>>>()?;
        GaussianSummary::from_samples(&rows)
    }
}
