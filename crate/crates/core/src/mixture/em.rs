//! Expectation–maximization for (optionally truncated) Gaussian mixtures.
//!
//! The truncated M-step follows the moment-matching update for box-truncated
//! components: with the current component's truncated mean shift
//! `δ = E[X] − μ` and truncated covariance `Γ`,
//!
//! ```text
//! μ' = ȳ − δ
//! Σ' = S(μ') + Σ − Γ − δδᵀ
//! ```
//!
//! where `ȳ` and `S(μ')` are the responsibility-weighted mean and scatter. The
//! update is a fixed-point iteration rather than a true EM step, so every
//! proposal is line-searched back towards the previous parameters until the
//! log-likelihood does not decrease.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use super::normal::GENZ_POINTS;
use super::truncated::{truncated_moments, MomentMethod, TruncatedMoments, DEFAULT_MC_DRAWS};
use super::{GaussianComponent, GaussianMixture, MixtureError, TruncationBox};
use crate::seed::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of components K.
    pub components: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the per-observation log-likelihood gain.
    pub loglik_tolerance: f64,
    /// Independent seeded initializations; the best final log-likelihood wins.
    pub restarts: usize,
    /// Smallest admissible covariance eigenvalue.
    pub covariance_floor: f64,
    pub seed: u64,
    /// `Some` fits a truncated mixture on this box; `None` fits a plain mixture.
    pub truncation: Option<TruncationBox>,
    /// Truncated-moment estimator for correlated components (d > 1).
    pub moments: MomentEstimator,
    /// Accepted draws per component for [`MomentEstimator::MonteCarlo`].
    pub moment_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentEstimator {
    /// Seeded rejection sampling; cost grows as the component's box mass shrinks.
    MonteCarlo,
    /// Deterministic lattice rule shared with the box-mass computation.
    #[default]
    Lattice,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            components: 1,
            max_iterations: 500,
            loglik_tolerance: 1e-8,
            restarts: 3,
            covariance_floor: 1e-6,
            seed: 0,
            truncation: None,
            moments: MomentEstimator::Lattice,
            moment_draws: DEFAULT_MC_DRAWS,
        }
    }
}

impl FitConfig {
    pub fn with_components(mut self, k: usize) -> Self {
        self.components = k;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    /// Index of the restart whose model was returned.
    pub restart_index: usize,
    /// Components re-seeded after collapsing.
    pub reinitializations: usize,
    /// Step-halvings applied to keep the log-likelihood non-decreasing.
    pub backtracks: usize,
    /// Log-likelihood after initialization and after every accepted iteration.
    pub log_likelihood_trace: Vec<f64>,
}

#[derive(Clone)]
struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

impl Params {
    /// Moves `alpha` of the way towards `target`; `alpha > 1` extrapolates.
    fn blend(&self, target: &Params, alpha: f64) -> Params {
        let lerp = |a: f64, b: f64| a + alpha * (b - a);
        let weights: Vec<f64> = self.weights.iter().zip(&target.weights).map(|(a, b)| lerp(*a, *b)).collect();
        let total: f64 = weights.iter().sum();
        Params {
            weights: weights.iter().map(|w| w / total).collect(),
            means: self.means.iter().zip(&target.means).map(|(a, b)| a + (b - a) * alpha).collect(),
            covs: self.covs.iter().zip(&target.covs).map(|(a, b)| a + (b - a) * alpha).collect(),
        }
    }

    fn build(&self, truncation: &Option<TruncationBox>) -> Result<GaussianMixture, MixtureError> {
        GaussianMixture::new(self.weights.clone(), self.components()?, truncation.clone())
    }

    fn components(&self) -> Result<Vec<GaussianComponent>, MixtureError> {
        self.means.iter().zip(&self.covs).map(|(m, c)| GaussianComponent::new(m.clone(), c.clone())).collect()
    }

    /// Builds the model and, with lattice moments, keeps the truncated
    /// moments whose masses the model reuses.
    fn build_for(&self, config: &FitConfig) -> Result<(GaussianMixture, Option<Vec<TruncatedMoments>>), MixtureError> {
        match (&config.truncation, config.moments) {
            (Some(b), MomentEstimator::Lattice) => {
                let components = self.components()?;
                let moments = components
                    .iter()
                    .map(|c| truncated_moments(c, b, MomentMethod::Lattice { points: GENZ_POINTS }))
                    .collect::<Result<Vec<_>, _>>()?;
                let masses = moments.iter().map(|m| m.mass).collect();
                let model = GaussianMixture::with_masses(self.weights.clone(), components, Some(b.clone()), Some(masses))?;
                Ok((model, Some(moments)))
            }
            _ => Ok((self.build(&config.truncation)?, None)),
        }
    }
}

const MAX_OVERRELAXATION: f64 = 8.0;
const MAX_HALVINGS: usize = 12;

fn floor_covariance(cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) && sym.clone().cholesky().is_some() {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (&r + r.transpose()) * 0.5
}

fn rows_of(data: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..data.nrows()).map(|i| data.row(i).iter().cloned().collect()).collect()
}

fn pooled_covariance(rows: &[Vec<f64>], floor: f64) -> DMatrix<f64> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean = DVector::from_fn(d, |j, _| rows.iter().map(|r| r[j]).sum::<f64>() / n);
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        let x = DVector::from_column_slice(r) - &mean;
        cov += &x * x.transpose();
    }
    floor_covariance(cov / n, floor)
}

/// k-means++ seeding of the means, pooled covariance, uniform weights.
fn initialize<R: Rng>(rows: &[Vec<f64>], k: usize, floor: f64, rng: &mut R) -> Params {
    let n = rows.len();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut centers: Vec<usize> = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = rows.iter().map(|r| dist2(r, &rows[centers[0]])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(r, &rows[next]));
        }
    }
    let cov = pooled_covariance(rows, floor);
    Params {
        weights: vec![1.0 / k as f64; k],
        means: centers.iter().map(|&c| DVector::from_column_slice(&rows[c])).collect(),
        covs: vec![cov; k],
    }
}

/// Log-likelihood and responsibilities (n × K) under `model`.
fn e_step(model: &GaussianMixture, rows: &[Vec<f64>], resp: &mut DMatrix<f64>) -> f64 {
    let k = model.n_components();
    let mut terms = vec![0.0; k];
    let mut ll = 0.0;
    for (i, r) in rows.iter().enumerate() {
        model.component_log_terms(r, &mut terms);
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for t in terms.iter_mut() {
            *t = (*t - m).exp();
            s += *t;
        }
        ll += m + s.ln();
        for j in 0..k {
            resp[(i, j)] = terms[j] / s;
        }
    }
    ll
}

struct RestartOutcome {
    model: GaussianMixture,
    diagnostics: FitDiagnostics,
}

fn m_step<R: Rng>(
    current: &Params,
    model: &GaussianMixture,
    cached: Option<&[TruncatedMoments]>,
    rows: &[Vec<f64>],
    resp: &DMatrix<f64>,
    config: &FitConfig,
    moment_seed: u64,
    rng: &mut R,
    reinitialized: &mut usize,
) -> Result<Params, MixtureError> {
    let n = rows.len();
    let d = rows[0].len();
    let k = current.weights.len();
    let mut next = current.clone();
    for j in 0..k {
        let nk: f64 = resp.column(j).sum();
        if !(nk > 1e-8 * n as f64) || nk < 1e-10 {
            // collapsed component: reseed from a random observation
            next.means[j] = DVector::from_column_slice(&rows[rng.random_range(0..n)]);
            next.covs[j] = pooled_covariance(rows, config.covariance_floor);
            next.weights[j] = 1.0 / k as f64;
            *reinitialized += 1;
            continue;
        }
        let col = &resp.as_slice()[j * n..(j + 1) * n];
        let mut ybar = vec![0.0; d];
        for (r, &w) in rows.iter().zip(col) {
            for (acc, x) in ybar.iter_mut().zip(r) {
                *acc += w * x;
            }
        }
        let ybar = DVector::from_vec(ybar) / nk;

        let (mean, correction) = match &config.truncation {
            None => (ybar, None),
            Some(b) => {
                let c = &model.components()[j];
                let tm = match cached {
                    Some(m) => m[j].clone(),
                    None => {
                        let seed = derive_seed(moment_seed, "moments", j as u64);
                        truncated_moments(c, b, MomentMethod::Auto { draws: config.moment_draws, seed })?
                    }
                };
                let shift = &tm.mean - c.mean();
                let h = c.covariance() - &tm.covariance - &shift * shift.transpose();
                (ybar - shift, Some(h))
            }
        };
        // packed lower triangle, row by row
        let mut tri = vec![0.0; d * (d + 1) / 2];
        let mut dev = vec![0.0; d];
        let centre = mean.as_slice();
        for (r, &w) in rows.iter().zip(col) {
            for ((e, x), m) in dev.iter_mut().zip(r).zip(centre) {
                *e = x - m;
            }
            let mut at = 0;
            for a in 0..d {
                let wa = w * dev[a];
                for (acc, db) in tri[at..at + a + 1].iter_mut().zip(&dev[..=a]) {
                    *acc += wa * db;
                }
                at += a + 1;
            }
        }
        let mut scatter = DMatrix::zeros(d, d);
        let mut at = 0;
        for a in 0..d {
            for b in 0..=a {
                scatter[(a, b)] = tri[at + b];
                scatter[(b, a)] = tri[at + b];
            }
            at += a + 1;
        }
        let mut cov = scatter / nk;
        if let Some(h) = correction {
            cov += h;
        }
        next.weights[j] = nk / n as f64;
        next.means[j] = mean;
        next.covs[j] = floor_covariance(cov, config.covariance_floor);
    }
    let total: f64 = next.weights.iter().sum();
    next.weights.iter_mut().for_each(|w| *w /= total);
    Ok(next)
}

fn fit_once(rows: &[Vec<f64>], config: &FitConfig, restart: usize) -> Result<RestartOutcome, MixtureError> {
    let restart_seed = derive_seed(config.seed, "restart", restart as u64);
    let mut rng = rng_from(restart_seed);
    let n = rows.len();
    let mut params = initialize(rows, config.components, config.covariance_floor, &mut rng);
    let (mut model, mut moments) = params.build_for(config)?;
    let mut resp = DMatrix::zeros(n, config.components);
    let mut ll = e_step(&model, rows, &mut resp);
    let mut scratch = resp.clone();
    let mut eta: f64 = 1.5;
    let mut diag = FitDiagnostics { restart_index: restart, log_likelihood_trace: vec![ll], ..Default::default() };

    for it in 1..=config.max_iterations {
        diag.iterations = it;
        let before = diag.reinitializations;
        let proposal =
            m_step(&params, &model, moments.as_deref(), rows, &resp, config, restart_seed, &mut rng, &mut diag.reinitializations)?;
        let reseeded = diag.reinitializations > before;

        let mut accepted = None;
        // over-relaxed step first; plain EM and halvings only when it fails to ascend
        if !reseeded && eta > 1.0 {
            let mut candidate = params.blend(&proposal, eta);
            for c in candidate.covs.iter_mut() {
                *c = floor_covariance(std::mem::replace(c, DMatrix::zeros(0, 0)), config.covariance_floor);
            }
            if let Ok((m, tm)) = candidate.build_for(config) {
                let cand_ll = e_step(&m, rows, &mut scratch);
                if cand_ll.is_finite() && cand_ll >= ll {
                    accepted = Some((candidate, m, tm, cand_ll));
                }
            }
        }
        eta = if accepted.is_some() { (eta * 1.5).min(MAX_OVERRELAXATION) } else { 1.0 };
        let mut alpha = 1.0;
        for _ in 0..MAX_HALVINGS {
            if accepted.is_some() {
                break;
            }
            let candidate = if alpha == 1.0 { proposal.clone() } else { params.blend(&proposal, alpha) };
            if let Ok((m, tm)) = candidate.build_for(config) {
                let cand_ll = e_step(&m, rows, &mut scratch);
                if cand_ll.is_finite() && (reseeded || cand_ll >= ll) {
                    accepted = Some((candidate, m, tm, cand_ll));
                    if alpha == 1.0 && !reseeded {
                        eta = 1.5;
                    }
                    break;
                }
            }
            alpha *= 0.5;
            diag.backtracks += 1;
        }
        let Some((p, m, tm, new_ll)) = accepted else {
            // no ascent direction left at working precision
            diag.converged = true;
            break;
        };
        let gain = new_ll - ll;
        params = p;
        model = m;
        moments = tm;
        ll = new_ll;
        std::mem::swap(&mut resp, &mut scratch);
        diag.log_likelihood_trace.push(ll);
        if !reseeded && gain / n as f64 <= config.loglik_tolerance {
            diag.converged = true;
            break;
        }
    }
    diag.final_log_likelihood = ll;
    Ok(RestartOutcome { model: model.with_fit_seed(Some(config.seed)), diagnostics: diag })
}

/// Fits a `config.components`-component mixture to the rows of `data`.
pub fn em_fit(data: &DMatrix<f64>, config: &FitConfig) -> Result<(GaussianMixture, FitDiagnostics), MixtureError> {
    let (n, d) = (data.nrows(), data.ncols());
    if config.components == 0 {
        return Err(MixtureError::InvalidWeights("K must be at least 1".into()));
    }
    if n == 0 {
        return Err(MixtureError::NoData);
    }
    let required = config.components * (d + 1);
    if n < required {
        return Err(MixtureError::NotEnoughData { n, required });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(MixtureError::InvalidDims("data contains non-finite values".into()));
    }
    let rows = rows_of(data);
    if let Some(b) = &config.truncation {
        if b.dim() != d {
            return Err(MixtureError::DimensionMismatch { expected: d, got: b.dim() });
        }
        if rows.iter().any(|r| !b.contains(r)) {
            return Err(MixtureError::OutsideBox);
        }
    }
    let outcomes: Vec<Result<RestartOutcome, MixtureError>> =
        (0..config.restarts.max(1)).into_par_iter().map(|r| fit_once(&rows, config, r)).collect();
    let mut best: Option<RestartOutcome> = None;
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(o) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| o.diagnostics.final_log_likelihood > b.diagnostics.final_log_likelihood);
                if better {
                    best = Some(o);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(b) => Ok((b.model, b.diagnostics)),
        None => Err(first_err.unwrap_or(MixtureError::AllFitsFailed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_rows(n: usize, seed: u64) -> DMatrix<f64> {
        let g = GaussianMixture::single(GaussianComponent::from_slices(&[1.0, -2.0], &[2.0, 0.6, 0.6, 1.0]).unwrap());
        g.sample(n, seed).unwrap()
    }

    #[test]
    fn single_component_is_closed_form_mle() {
        let data = gaussian_rows(400, 5);
        let (m, diag) = em_fit(&data, &FitConfig { components: 1, restarts: 1, ..Default::default() }).unwrap();
        let n = data.nrows() as f64;
        let mean = data.row_sum().transpose() / n;
        let mut cov = DMatrix::zeros(2, 2);
        for i in 0..data.nrows() {
            let x = data.row(i).transpose() - &mean;
            cov += &x * x.transpose();
        }
        cov /= n;
        let c = &m.components()[0];
        assert!((c.mean() - &mean).amax() < 1e-9);
        assert!((c.covariance() - &cov).amax() < 1e-9);
        assert!(diag.converged);
    }

    #[test]
    fn floor_leaves_well_conditioned_matrices_alone() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(floor_covariance(c.clone(), 1e-6), c);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let fixed = floor_covariance(singular, 1e-3);
        assert!(fixed.cholesky().is_some());
    }

    #[test]
    fn rejects_undersized_and_out_of_box_data() {
        let data = gaussian_rows(5, 1);
        assert!(matches!(
            em_fit(&data, &FitConfig { components: 3, ..Default::default() }),
            Err(MixtureError::NotEnoughData { n: 5, required: 9 })
        ));
        let data = gaussian_rows(50, 1);
        let cfg = FitConfig { truncation: Some(TruncationBox::positive_orthant(2)), ..Default::default() };
        assert_eq!(em_fit(&data, &cfg).unwrap_err(), MixtureError::OutsideBox);
    }

    #[test]
    fn log_likelihood_trace_is_monotone_in_both_modes() {
        let gen = GaussianMixture::new(
            vec![0.6, 0.4],
            vec![
                GaussianComponent::from_slices(&[1.0, 1.0], &[0.5, 0.1, 0.1, 0.4]).unwrap(),
                GaussianComponent::from_slices(&[3.0, 2.0], &[0.3, -0.1, -0.1, 0.6]).unwrap(),
            ],
            Some(TruncationBox::positive_orthant(2)),
        )
        .unwrap();
        let data = gen.sample(600, 11).unwrap();
        let orthant = Some(TruncationBox::positive_orthant(2));
        let modes = [(None, MomentEstimator::MonteCarlo), (orthant.clone(), MomentEstimator::MonteCarlo), (orthant, MomentEstimator::Lattice)];
        for (trunc, moments) in modes {
            let cfg = FitConfig { components: 2, restarts: 2, seed: 9, truncation: trunc, moments, moment_draws: 4000, ..Default::default() };
            let (_, diag) = em_fit(&data, &cfg).unwrap();
            assert_eq!(diag.reinitializations, 0);
            for w in diag.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn restarts_are_deterministic() {
        let data = gaussian_rows(300, 2);
        let cfg = FitConfig { components: 2, restarts: 4, seed: 77, ..Default::default() };
        let (a, da) = em_fit(&data, &cfg).unwrap();
        let (b, db) = em_fit(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
    }
}
