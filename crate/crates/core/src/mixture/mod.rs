//! Multivariate Gaussian mixtures with optional rectangular truncation.
//!
//! A truncated mixture restricts each component to a shared box and
//! renormalizes it by its own box mass, `f(y) = Σ π_k φ_k(y) / m_k` on the box.
//! Untruncated mixtures are the special case `m_k = 1`.

mod em;
mod io;
pub mod normal;
mod select;
mod truncated;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::seed::rng_from;

pub use em::{em_fit, FitConfig, FitDiagnostics, MomentEstimator};
pub use io::{MixtureDocument, ParseError};
pub use select::{bic, parameter_count, select_components, BicPoint, Selection};
pub use truncated::{truncated_moments, MomentMethod, TruncatedMoments, DEFAULT_MC_DRAWS};

use normal::LN_2PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("invalid truncation box: {0}")]
    InvalidBox(String),
    #[error("value lies outside the truncation box")]
    OutsideBox,
    #[error("invalid dimension selection: {0}")]
    InvalidDims(String),
    #[error("truncation mass {mass:e} is degenerate")]
    DegenerateTruncation { mass: f64 },
    #[error("rejection sampling stalled: acceptance rate below 1e-6")]
    RejectionStall,
    #[error("search interval is empty")]
    EmptyInterval,
    #[error("no observations")]
    NoData,
    #[error("need at least {required} observations, got {n}")]
    NotEnoughData { n: usize, required: usize },
    #[error("every candidate fit failed")]
    AllFitsFailed,
}

/// Rectangular support `[lower, upper]`, bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TruncationBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MixtureError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(MixtureError::InvalidBox("bound lengths differ or are empty".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(MixtureError::InvalidBox(format!("dimension {i}: [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(d: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; d], upper: vec![f64::INFINITY; d] }
    }

    /// `[0, ∞)^d`, the default support of the interaction model.
    pub fn positive_orthant(d: usize) -> Self {
        Self { lower: vec![0.0; d], upper: vec![f64::INFINITY; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|x| *x == f64::NEG_INFINITY) && self.upper.iter().all(|x| *x == f64::INFINITY)
    }

    /// Closed box membership.
    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && y.iter().zip(&self.lower).zip(&self.upper).all(|((x, lo), hi)| *x >= *lo && *x <= *hi)
    }

    pub fn slice(&self, dims: &[usize]) -> Self {
        Self {
            lower: dims.iter().map(|&i| self.lower[i]).collect(),
            upper: dims.iter().map(|&i| self.upper[i]).collect(),
        }
    }
}

/// One Gaussian component with its Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: DMatrix<f64>,
    // row-major strict lower triangle and reciprocal diagonal of `chol`
    packed: Vec<f64>,
    inv_diag: Vec<f64>,
    log_det: f64,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianComponent {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, MixtureError> {
        let d = mean.len();
        if d == 0 {
            return Err(MixtureError::DimensionMismatch { expected: 1, got: 0 });
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(MixtureError::DimensionMismatch { expected: d, got: covariance.nrows() });
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(MixtureError::NotPositiveDefinite);
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(MixtureError::NotPositiveDefinite);
                }
            }
        }
        let chol = covariance.clone().cholesky().ok_or(MixtureError::NotPositiveDefinite)?.l();
        let log_det = 2.0 * chol.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(MixtureError::NotPositiveDefinite);
        }
        let packed = (0..d).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| chol[(i, j)]).collect();
        let inv_diag = (0..d).map(|i| 1.0 / chol[(i, i)]).collect();
        Ok(Self { mean, covariance, chol, packed, inv_diag, log_det })
    }

    pub fn from_slices(mean: &[f64], covariance_row_major: &[f64]) -> Result<Self, MixtureError> {
        let d = mean.len();
        if covariance_row_major.len() != d * d {
            return Err(MixtureError::DimensionMismatch { expected: d * d, got: covariance_row_major.len() });
        }
        Self::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, covariance_row_major))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Untruncated log density.
    pub fn log_pdf(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        let mut z = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= 16 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        // forward substitution L z = y − μ
        let (mean, packed) = (self.mean.as_slice(), self.packed.as_slice());
        let mut quad = 0.0;
        let mut row = 0;
        for i in 0..d {
            let mut s = y[i] - mean[i];
            for j in 0..i {
                s -= packed[row + j] * z[j];
            }
            row += i;
            z[i] = s * self.inv_diag[i];
            quad += z[i] * z[i];
        }
        -0.5 * (d as f64 * LN_2PI + self.log_det + quad)
    }

    pub fn pdf(&self, y: &[f64]) -> f64 {
        self.log_pdf(y).exp()
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            out[i] = self.mean[i] + (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum::<f64>();
        }
    }

    fn sub(&self, dims: &[usize]) -> Result<Self, MixtureError> {
        let mean = DVector::from_iterator(dims.len(), dims.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(dims.len(), dims.len(), |r, c| self.covariance[(dims[r], dims[c])]);
        Self::new(mean, cov)
    }

    fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.covariance[(i, j)] == 0.0))
    }
}

/// Weighted sum of Gaussian components, optionally truncated to a box.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
    truncation: Option<TruncationBox>,
    log_masses: Vec<f64>,
    // log π_k − log m_k
    log_offsets: Vec<f64>,
    fit_seed: Option<u64>,
}

impl PartialEq for GaussianMixture {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
            && self.components == other.components
            && self.truncation == other.truncation
            && self.fit_seed == other.fit_seed
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl GaussianMixture {
    /// Builds a mixture. Weights must be positive and sum to 1 within 1e-9;
    /// sums further than 1e-12 from 1 are renormalized.
    pub fn new(
        weights: Vec<f64>,
        components: Vec<GaussianComponent>,
        truncation: Option<TruncationBox>,
    ) -> Result<Self, MixtureError> {
        Self::with_masses(weights, components, truncation, None)
    }

    /// [`GaussianMixture::new`] with box masses already known, one per component.
    pub(crate) fn with_masses(
        weights: Vec<f64>,
        components: Vec<GaussianComponent>,
        truncation: Option<TruncationBox>,
        masses: Option<Vec<f64>>,
    ) -> Result<Self, MixtureError> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(MixtureError::InvalidWeights(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(MixtureError::InvalidWeights("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MixtureError::InvalidWeights(format!("weights sum to {total}")));
        }
        let weights = if (total - 1.0).abs() > 1e-12 { weights.iter().map(|w| w / total).collect() } else { weights };
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(MixtureError::DimensionMismatch { expected: d, got: c.dim() });
        }
        let truncation = truncation.filter(|b| !b.is_unbounded());
        if let Some(b) = &truncation {
            if b.dim() != d {
                return Err(MixtureError::DimensionMismatch { expected: d, got: b.dim() });
            }
        }
        let log_masses = match &truncation {
            None => vec![0.0; components.len()],
            Some(b) => components
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let mass = match &masses {
                        Some(m) => m[k],
                        None => normal::box_probability(c.mean.as_slice(), &c.chol, b.lower(), b.upper()),
                    };
                    if mass < 1e-300 {
                        Err(MixtureError::DegenerateTruncation { mass })
                    } else {
                        Ok(mass.ln())
                    }
                })
                .collect::<Result<_, _>>()?,
        };
        let log_offsets = weights.iter().zip(&log_masses).map(|(w, m)| w.ln() - m).collect();
        Ok(Self { weights, components, truncation, log_masses, log_offsets, fit_seed: None })
    }

    /// Single untruncated Gaussian.
    pub fn single(component: GaussianComponent) -> Self {
        Self::new(vec![1.0], vec![component], None).expect("one component with unit weight is valid")
    }

    pub fn with_fit_seed(mut self, seed: Option<u64>) -> Self {
        self.fit_seed = seed;
        self
    }

    pub fn fit_seed(&self) -> Option<u64> {
        self.fit_seed
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn truncation(&self) -> Option<&TruncationBox> {
        self.truncation.as_ref()
    }

    /// Box mass of each component (all 1 when untruncated).
    pub fn masses(&self) -> Vec<f64> {
        self.log_masses.iter().map(|m| m.exp()).collect()
    }

    /// Drops the truncation box.
    pub fn untruncated(&self) -> Self {
        Self {
            weights: self.weights.clone(),
            components: self.components.clone(),
            truncation: None,
            log_masses: vec![0.0; self.components.len()],
            log_offsets: self.weights.iter().map(|w| w.ln()).collect(),
            fit_seed: self.fit_seed,
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), MixtureError> {
        if got != self.dim() {
            Err(MixtureError::DimensionMismatch { expected: self.dim(), got })
        } else {
            Ok(())
        }
    }

    /// Per-component terms `log π_k + log φ_k(y) − log m_k`.
    pub(crate) fn component_log_terms(&self, y: &[f64], out: &mut [f64]) {
        for (k, c) in self.components.iter().enumerate() {
            out[k] = self.log_offsets[k] + c.log_pdf(y);
        }
    }

    /// Log density; `-inf` outside the truncation box.
    pub fn log_density(&self, y: &[f64]) -> Result<f64, MixtureError> {
        self.check_dim(y.len())?;
        if let Some(b) = &self.truncation {
            if !b.contains(y) {
                return Ok(f64::NEG_INFINITY);
            }
        }
        let mut terms = vec![0.0; self.n_components()];
        self.component_log_terms(y, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    pub fn density(&self, y: &[f64]) -> Result<f64, MixtureError> {
        Ok(self.log_density(y)?.exp())
    }

    /// Sum of log densities over the rows of `data` (n × d).
    pub fn log_likelihood(&self, data: &DMatrix<f64>) -> Result<f64, MixtureError> {
        if data.nrows() == 0 {
            return Ok(0.0);
        }
        self.check_dim(data.ncols())?;
        let mut row = vec![0.0; self.dim()];
        let mut total = 0.0;
        for i in 0..data.nrows() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = data[(i, j)];
            }
            let ld = self.log_density(&row)?;
            if ld == f64::NEG_INFINITY {
                return Err(MixtureError::OutsideBox);
            }
            total += ld;
        }
        Ok(total)
    }

    fn validate_dims(&self, dims: &[usize], what: &str) -> Result<(), MixtureError> {
        if dims.is_empty() {
            return Err(MixtureError::InvalidDims(format!("{what} is empty")));
        }
        let d = self.dim();
        for (i, &k) in dims.iter().enumerate() {
            if k >= d {
                return Err(MixtureError::InvalidDims(format!("dimension {k} out of range for d={d}")));
            }
            if dims[..i].contains(&k) {
                return Err(MixtureError::InvalidDims(format!("dimension {k} repeated")));
            }
        }
        Ok(())
    }

    /// Marginal over `keep_dims` (in the given order). Under truncation the box
    /// is sliced to the kept dimensions.
    pub fn marginalize(&self, keep_dims: &[usize]) -> Result<Self, MixtureError> {
        self.validate_dims(keep_dims, "keep_dims")?;
        let components = self.components.iter().map(|c| c.sub(keep_dims)).collect::<Result<Vec<_>, _>>()?;
        let truncation = self.truncation.as_ref().map(|b| b.slice(keep_dims));
        Ok(Self::new(self.weights.clone(), components, truncation)?.with_fit_seed(self.fit_seed))
    }

    /// Conditional distribution of the free dimensions (ascending order) given
    /// `observed_values` at `observed_dims`.
    ///
    /// Component weights become `π_k φ_k(y_o)` renormalized, using the
    /// untruncated marginal densities. A truncated model yields a mixture
    /// truncated to the free-dimension slice of the box.
    pub fn condition(&self, observed_dims: &[usize], observed_values: &[f64]) -> Result<Self, MixtureError> {
        self.validate_dims(observed_dims, "observed_dims")?;
        if observed_dims.len() >= self.dim() {
            return Err(MixtureError::InvalidDims("nothing left free".into()));
        }
        if observed_values.len() != observed_dims.len() {
            return Err(MixtureError::DimensionMismatch { expected: observed_dims.len(), got: observed_values.len() });
        }
        if let Some(b) = &self.truncation {
            if !b.slice(observed_dims).contains(observed_values) {
                return Err(MixtureError::OutsideBox);
            }
        }
        let free: Vec<usize> = (0..self.dim()).filter(|i| !observed_dims.contains(i)).collect();
        let (nm, no) = (free.len(), observed_dims.len());
        let mut log_w = Vec::with_capacity(self.n_components());
        let mut components = Vec::with_capacity(self.n_components());
        for (k, c) in self.components.iter().enumerate() {
            let s = &c.covariance;
            let s_oo = DMatrix::from_fn(no, no, |r, q| s[(observed_dims[r], observed_dims[q])]);
            let s_mo = DMatrix::from_fn(nm, no, |r, q| s[(free[r], observed_dims[q])]);
            let s_mm = DMatrix::from_fn(nm, nm, |r, q| s[(free[r], free[q])]);
            let chol = s_oo.clone().cholesky().ok_or(MixtureError::NotPositiveDefinite)?;
            let diff = DVector::from_iterator(no, (0..no).map(|r| observed_values[r] - c.mean[observed_dims[r]]));
            let gain = chol.solve(&s_mo.transpose()).transpose(); // Σ_mo Σ_oo⁻¹
            let mu_m = DVector::from_iterator(nm, free.iter().map(|&i| c.mean[i]));
            let mean = mu_m + &gain * &diff;
            let mut cov = s_mm - &gain * s_mo.transpose();
            cov = (&cov + cov.transpose()) * 0.5;
            components.push(GaussianComponent::new(mean, cov)?);
            let marginal = GaussianComponent::new(
                DVector::from_iterator(no, observed_dims.iter().map(|&i| c.mean[i])),
                s_oo,
            )?;
            log_w.push(self.weights[k].ln() + marginal.log_pdf(observed_values));
        }
        let norm = log_sum_exp(&log_w);
        if !norm.is_finite() {
            return Err(MixtureError::InvalidWeights("conditional weights underflow".into()));
        }
        // drop components whose weight underflows to zero
        let mut weights = Vec::new();
        let mut kept = Vec::new();
        for (lw, c) in log_w.iter().zip(components) {
            let w = (lw - norm).exp();
            if w > 0.0 {
                weights.push(w);
                kept.push(c);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let truncation = self.truncation.as_ref().map(|b| b.slice(&free));
        Ok(Self::new(weights, kept, truncation)?.with_fit_seed(self.fit_seed))
    }

    /// `count` seeded draws as a `count × d` matrix. Under truncation each draw
    /// is rejection-resampled from its component until it lands in the box.
    pub fn sample(&self, count: usize, seed: u64) -> Result<DMatrix<f64>, MixtureError> {
        let d = self.dim();
        let mut out = DMatrix::zeros(count, d);
        let mut rng = rng_from(seed);
        let mut cumulative = Vec::with_capacity(self.n_components());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        let mut y = vec![0.0; d];
        for i in 0..count {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cumulative.iter().position(|c| u < *c).unwrap_or(self.n_components() - 1);
            let c = &self.components[k];
            let mut attempts = 0u64;
            loop {
                c.draw(&mut rng, &mut y);
                match &self.truncation {
                    Some(b) if !b.contains(&y) => {
                        attempts += 1;
                        if attempts >= 1_000_000 {
                            return Err(MixtureError::RejectionStall);
                        }
                    }
                    _ => break,
                }
            }
            for j in 0..d {
                out[(i, j)] = y[j];
            }
        }
        Ok(out)
    }

    /// Mode of a one-dimensional mixture on `[lo, hi]`: 2048-point grid scan,
    /// then golden-section refinement around the best grid point. Ties go to
    /// the lower value.
    pub fn mode_in(&self, lo: f64, hi: f64) -> Result<f64, MixtureError> {
        self.mode_with_grid(lo, hi, MODE_GRID_POINTS)
    }

    pub fn mode_with_grid(&self, lo: f64, hi: f64, points: usize) -> Result<f64, MixtureError> {
        self.check_dim(1)?;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || points < 2 {
            return Err(MixtureError::EmptyInterval);
        }
        let f = |x: f64| self.log_density(&[x]).unwrap_or(f64::NEG_INFINITY);
        let step = (hi - lo) / (points - 1) as f64;
        let grid = |i: usize| if i == points - 1 { hi } else { lo + step * i as f64 };
        let (mut best_i, mut best) = (0, f(lo));
        for i in 1..points {
            let v = f(grid(i));
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let a = grid(best_i.saturating_sub(1));
        let b = grid((best_i + 1).min(points - 1));
        let x = golden_section_max(&f, a, b);
        Ok(if f(x) > best { x } else { grid(best_i) })
    }
}

pub const MODE_GRID_POINTS: usize = 2048;

fn golden_section_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

#[cfg(test)]
mod tests;
