//! Multivariate Gaussian densities, ML and MML estimation, and the
//! per-component message length.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::WeightedSample;
use crate::error::{Error, Result};
use crate::{lattice_nats, nats_to_bits};

/// Relative ridge added to the diagonal when a covariance fails to factorise.
pub const COVARIANCE_FLOOR: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

/// Mean and covariance with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl PartialEq for GaussianParams {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianParams {
    /// Validates symmetry and positive definiteness.
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Domain("dimension must be positive"));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: covariance.nrows() });
        }
        if covariance.iter().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian parameters"));
        }
        let scale = covariance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain("covariance is not symmetric"));
                }
            }
        }
        Self::factorise(DVector::from_vec(mean), covariance).ok_or(Error::Singular)
    }

    fn factorise(mean: DVector<f64>, covariance: DMatrix<f64>) -> Option<Self> {
        let chol = Cholesky::new(covariance.clone())?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return None;
        }
        Some(GaussianParams { mean, covariance, chol, log_det })
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `log |C|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower-triangular factor `L` with `C = L Lᵀ`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(x - μ)ᵀ C⁻¹ (x - μ)`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(self.d(), x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }
}

/// `log f(x; μ, C)` via a triangular solve.
pub fn gaussian_log_density(params: &GaussianParams, x: &[f64]) -> Result<f64> {
    let d = params.d();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    Ok(-0.5 * (d as f64 * (2.0 * PI).ln() + params.log_det + params.mahalanobis_sq(x)))
}

/// Weighted mean, weighted scatter `Σ wᵢ (xᵢ-μ)(xᵢ-μ)ᵀ` and `Σ wᵢ`.
pub fn weighted_moments(sample: &WeightedSample<'_>) -> Result<(Vec<f64>, DMatrix<f64>, f64)> {
    let d = sample.data.d();
    let mut n = 0.0;
    let mut mean = alloc::vec![0.0; d];
    for (w, row) in sample.iter() {
        n += w;
        for (m, x) in mean.iter_mut().zip(row) {
            *m += w * x;
        }
    }
    if !(n > 0.0) {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scatter = DMatrix::zeros(d, d);
    let mut diff = alloc::vec![0.0; d];
    for (w, row) in sample.iter() {
        if w == 0.0 {
            continue;
        }
        for ((t, x), m) in diff.iter_mut().zip(row).zip(&mean) {
            *t = x - m;
        }
        for i in 0..d {
            for j in 0..=i {
                scatter[(i, j)] += w * diff[i] * diff[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            scatter[(j, i)] = scatter[(i, j)];
        }
    }
    Ok((mean, scatter, n))
}

/// Parameters with covariance `scatter / divisor`.
///
/// If the covariance does not factorise, `COVARIANCE_FLOOR · tr(C)/d · I` is
/// added once; the returned flag reports whether that happened.
pub fn params_from_scatter(mean: Vec<f64>, scatter: &DMatrix<f64>, divisor: f64) -> Result<(GaussianParams, bool)> {
    if !(divisor > 0.0) {
        return Err(Error::Domain("covariance divisor must be positive"));
    }
    let d = mean.len();
    let cov = scatter / divisor;
    let mean = DVector::from_vec(mean);
    if let Some(p) = GaussianParams::factorise(mean.clone(), cov.clone()) {
        return Ok((p, false));
    }
    let trace = cov.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::Singular);
    }
    let floored = cov + DMatrix::identity(d, d) * (COVARIANCE_FLOOR * trace / d as f64);
    GaussianParams::factorise(mean, floored).map(|p| (p, true)).ok_or(Error::Singular)
}

fn check_weight(sample: &WeightedSample<'_>, needed: f64, inclusive: bool) -> Result<f64> {
    let n = sample.total_weight();
    let enough = if inclusive { n >= needed - 1e-12 } else { n > needed };
    if !enough || sample.data.n() < 2 {
        return Err(Error::InsufficientData { needed: needed as usize + 1, found: n as usize });
    }
    Ok(n)
}

/// Weighted mean and scatter divided by `Σ w`.
pub fn estimate_gaussian_ml(sample: &WeightedSample<'_>) -> Result<GaussianParams> {
    check_weight(sample, sample.data.d() as f64, false)?;
    let (mean, scatter, n) = weighted_moments(sample)?;
    params_from_scatter(mean, &scatter, n).map(|(p, _)| p)
}

/// Weighted mean and scatter divided by `Σ w - 1`; for unit weights this is
/// the unbiased sample covariance. Needs `Σ w ≥ d + 1`.
pub fn estimate_gaussian_mml(sample: &WeightedSample<'_>) -> Result<GaussianParams> {
    check_weight(sample, sample.data.d() as f64 + 1.0, true)?;
    let (mean, scatter, n) = weighted_moments(sample)?;
    params_from_scatter(mean, &scatter, n - 1.0).map(|(p, _)| p)
}

/// Number of free parameters of a `d`-variate Gaussian.
pub fn gaussian_free_params(d: usize) -> usize {
    d * (d + 3) / 2
}

/// `log |F(μ, C)| = (d(d+3)/2) log n - d log 2 - (d+2) log |C|`.
pub fn gaussian_log_fisher(params: &GaussianParams, n_effective: f64) -> Result<f64> {
    if !(n_effective > 0.0) {
        return Err(Error::Domain("effective sample size must be positive"));
    }
    let d = params.d() as f64;
    Ok(gaussian_free_params(params.d()) as f64 * n_effective.ln() - d * LN_2 - (d + 2.0) * params.log_det)
}

/// Constants of the prior `h(μ, C) = K_W |C|^{-(d+1)/2} / range^d`.
///
/// They shift every Gaussian mixture of the same dimension by the same amount
/// per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    /// Width of the flat prior on each mean coordinate.
    pub mean_range: f64,
    /// Width in log-variance of the range each covariance eigenvalue may take.
    pub log_variance_span: f64,
}

impl GaussianPrior {
    /// `log K_W` for dimension `d`: the covariance prior is normalised over
    /// eigenvalues spanning `log_variance_span` each.
    pub fn log_kw(&self, d: usize) -> f64 {
        -(d as f64) * self.log_variance_span.ln()
    }
}

impl Default for GaussianPrior {
    /// Means within a width of 100 and standard deviations between 10⁻³ and 10².
    fn default() -> Self {
        GaussianPrior { mean_range: 100.0, log_variance_span: 2.0 * 1e5f64.ln() }
    }
}

/// `-log h(μ, C)` in nats.
pub fn gaussian_neg_log_prior(params: &GaussianParams, prior: &GaussianPrior) -> f64 {
    let d = params.d() as f64;
    d * prior.mean_range.ln() - prior.log_kw(params.d()) + 0.5 * (d + 1.0) * params.log_det
}

/// `-log h + ½ log|F|` in nats.
pub(crate) fn gaussian_parameter_nats(params: &GaussianParams, n_effective: f64, prior: &GaussianPrior) -> Result<f64> {
    Ok(gaussian_neg_log_prior(params, prior) + 0.5 * gaussian_log_fisher(params, n_effective)?)
}

/// Cost of stating one Gaussian component in bits, with the default prior.
pub fn gaussian_component_msglen(params: &GaussianParams, n_effective: f64) -> Result<f64> {
    gaussian_component_msglen_with_prior(params, n_effective, &GaussianPrior::default())
}

pub fn gaussian_component_msglen_with_prior(
    params: &GaussianParams,
    n_effective: f64,
    prior: &GaussianPrior,
) -> Result<f64> {
    let p = gaussian_free_params(params.d());
    Ok(nats_to_bits(gaussian_parameter_nats(params, n_effective, prior)? + lattice_nats(p)))
}

/// `KL(f ‖ g)` in nats.
pub fn gaussian_kl(f: &GaussianParams, g: &GaussianParams) -> Result<f64> {
    let d = f.d();
    if g.d() != d {
        return Err(Error::DimensionMismatch { expected: d, found: g.d() });
    }
    let l = g.chol.l_dirty();
    let m = l.solve_lower_triangular(&f.chol.l()).expect("Cholesky factor has a positive diagonal");
    let trace = m.norm_squared();
    let maha = g.mahalanobis_sq(f.mean());
    let kl = 0.5 * (trace + maha - d as f64 + g.log_det - f.log_det);
    Ok(kl.max(0.0))
}

/// Draws `n` rows `μ + L z`, concatenated.
pub fn gaussian_sample<R: Rng + ?Sized>(params: &GaussianParams, n: usize, rng: &mut R) -> Vec<f64> {
    let d = params.d();
    let l = params.chol.l();
    let mut out = Vec::with_capacity(n * d);
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let x = &l * &z + &params.mean;
        out.extend(x.iter());
    }
    out
}

/// Largest eigenvalue of the covariance and its unit eigenvector.
pub fn principal_axis(params: &GaussianParams) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(params.covariance.clone());
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    (lambda.max(0.0), eig.eigenvectors.column(k).iter().copied().collect())
}
