//! Moments of a Gaussian component restricted to a box.

use nalgebra::{DMatrix, DVector};

use super::normal::{box_moments, interval_mass, std_normal_pdf};
use super::{GaussianComponent, MixtureError, TruncationBox};
use crate::seed::rng_from;

/// Accepted draws used by the Monte Carlo path unless overridden.
pub const DEFAULT_MC_DRAWS: usize = 20_000;
const DEFAULT_MC_SEED: u64 = 0x7472_756e_635f_6d63;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    /// Closed form for one dimension or diagonal covariance, Monte Carlo otherwise.
    Auto { draws: usize, seed: u64 },
    /// Rejection Monte Carlo regardless of dimension; mass is the acceptance ratio.
    MonteCarlo { draws: usize, seed: u64 },
    /// Closed form where available, otherwise weighted points of the
    /// deterministic lattice rule behind [`box_probability`](super::normal::box_probability).
    Lattice { points: usize },
}

impl Default for MomentMethod {
    fn default() -> Self {
        MomentMethod::Auto { draws: DEFAULT_MC_DRAWS, seed: DEFAULT_MC_SEED }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMoments {
    pub mass: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Mass, mean and covariance of `component` restricted to `bounds`.
pub fn truncated_moments(
    component: &GaussianComponent,
    bounds: &TruncationBox,
    method: MomentMethod,
) -> Result<TruncatedMoments, MixtureError> {
    let d = component.dim();
    if bounds.dim() != d {
        return Err(MixtureError::DimensionMismatch { expected: d, got: bounds.dim() });
    }
    if bounds.is_unbounded() {
        return Ok(TruncatedMoments {
            mass: 1.0,
            mean: component.mean().clone(),
            covariance: component.covariance().clone(),
        });
    }
    match method {
        MomentMethod::Auto { draws, seed } => {
            if d == 1 || component.is_diagonal() {
                exact_diagonal(component, bounds)
            } else {
                monte_carlo(component, bounds, draws, seed)
            }
        }
        MomentMethod::MonteCarlo { draws, seed } => monte_carlo(component, bounds, draws, seed),
        MomentMethod::Lattice { points } => {
            if d == 1 || component.is_diagonal() {
                return exact_diagonal(component, bounds);
            }
            let (mass, mean, covariance) =
                box_moments(component.mean().as_slice(), component.cholesky_l(), bounds.lower(), bounds.upper(), points)
                    .ok_or(MixtureError::DegenerateTruncation { mass: 0.0 })?;
            if !(mass > 0.0) {
                return Err(MixtureError::DegenerateTruncation { mass });
            }
            Ok(TruncatedMoments { mass, mean, covariance })
        }
    }
}

/// Closed-form one-dimensional truncated normal moments `(mass, mean, variance)`.
pub(crate) fn truncated_normal_1d(mu: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    let alpha = (lo - mu) / sigma;
    let beta = (hi - mu) / sigma;
    let z = interval_mass(alpha, beta);
    let (pa, pb) = (std_normal_pdf(alpha), std_normal_pdf(beta));
    let apa = if alpha.is_finite() { alpha * pa } else { 0.0 };
    let bpb = if beta.is_finite() { beta * pb } else { 0.0 };
    let shift = (pa - pb) / z;
    let mean = mu + sigma * shift;
    let var = sigma * sigma * (1.0 + (apa - bpb) / z - shift * shift);
    (z, mean, var)
}

fn exact_diagonal(c: &GaussianComponent, bounds: &TruncationBox) -> Result<TruncatedMoments, MixtureError> {
    let d = c.dim();
    let mut mass = 1.0;
    let mut mean = DVector::zeros(d);
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        let sigma = c.covariance()[(i, i)].sqrt();
        let (m, mu, var) = truncated_normal_1d(c.mean()[i], sigma, bounds.lower()[i], bounds.upper()[i]);
        mass *= m;
        mean[i] = mu;
        cov[(i, i)] = var;
    }
    if !(mass >= 1e-300) {
        return Err(MixtureError::DegenerateTruncation { mass });
    }
    Ok(TruncatedMoments { mass, mean, covariance: cov })
}

fn monte_carlo(
    c: &GaussianComponent,
    bounds: &TruncationBox,
    draws: usize,
    seed: u64,
) -> Result<TruncatedMoments, MixtureError> {
    let d = c.dim();
    let mut rng = rng_from(seed);
    let mut y = vec![0.0; d];
    // Welford accumulators, centred on the untruncated mean for stability
    let mut accepted = 0usize;
    let mut attempts = 0u64;
    let mut mean = DVector::<f64>::zeros(d);
    let mut m2 = DMatrix::<f64>::zeros(d, d);
    let mut delta = DVector::<f64>::zeros(d);
    while accepted < draws.max(2) {
        c.draw(&mut rng, &mut y);
        attempts += 1;
        if attempts % 1_000_000 == 0 && (accepted as f64) < 1e-6 * attempts as f64 {
            return Err(MixtureError::DegenerateTruncation { mass: accepted as f64 / attempts as f64 });
        }
        if !bounds.contains(&y) {
            continue;
        }
        accepted += 1;
        for i in 0..d {
            delta[i] = y[i] - mean[i];
            mean[i] += delta[i] / accepted as f64;
        }
        for i in 0..d {
            let after = y[i] - mean[i];
            for j in 0..d {
                m2[(i, j)] += delta[j] * after;
            }
        }
    }
    let mut cov = m2 / accepted as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(TruncatedMoments { mass: accepted as f64 / attempts as f64, mean, covariance: cov })
}
