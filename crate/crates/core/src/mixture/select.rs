//! BIC and choice of the component count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{em_fit, FitConfig, FitDiagnostics, GaussianMixture, MixtureError};

/// Free parameters of a full-covariance mixture: `(K−1) + K·d + K·d(d+1)/2`.
pub fn parameter_count(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

/// `−2·log L + p·ln n`, natural log. Under truncation the likelihood is the
/// box-renormalized one.
pub fn bic(model: &GaussianMixture, data: &DMatrix<f64>) -> Result<f64, MixtureError> {
    let n = data.nrows();
    if n == 0 {
        return Err(MixtureError::NoData);
    }
    let ll = model.log_likelihood(data)?;
    Ok(-2.0 * ll + parameter_count(model.n_components(), model.dim()) as f64 * (n as f64).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicPoint {
    pub k: usize,
    /// `None` when the fit for this K failed.
    pub bic: Option<f64>,
    /// Relative improvement over the previous fitted K, `(BIC_prev − BIC) / |BIC_prev|`.
    pub change_rate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub selected_k: usize,
    pub curve: Vec<BicPoint>,
    pub model: GaussianMixture,
    pub diagnostics: FitDiagnostics,
}

/// Fits every K in `k_range` and picks the component count.
///
/// The selected K is the smallest one from which no larger candidate improves
/// the BIC by `rate_threshold` or more, relative to `|BIC_K|`. A threshold of 0
/// therefore selects the (smallest) BIC minimizer. When no K qualifies, which
/// only happens with non-finite values, the argmin is returned.
pub fn select_components(
    data: &DMatrix<f64>,
    k_range: &[usize],
    config: &FitConfig,
    rate_threshold: f64,
) -> Result<Selection, MixtureError> {
    if k_range.is_empty() || k_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MixtureError::InvalidDims("K range must be nonempty and ascending".into()));
    }
    let fits: Vec<(usize, Result<(GaussianMixture, FitDiagnostics, f64), MixtureError>)> = k_range
        .par_iter()
        .map(|&k| {
            let cfg = FitConfig { components: k, ..config.clone() };
            let r = em_fit(data, &cfg).and_then(|(m, d)| {
                let b = bic(&m, data)?;
                Ok((m, d, b))
            });
            (k, r)
        })
        .collect();

    let mut curve = Vec::with_capacity(fits.len());
    let mut prev: Option<f64> = None;
    for (k, r) in &fits {
        match r {
            Ok((_, _, b)) => {
                curve.push(BicPoint {
                    k: *k,
                    bic: Some(*b),
                    change_rate: prev.map(|p| (p - b) / p.abs()),
                    error: None,
                });
                prev = Some(*b);
            }
            Err(e) => curve.push(BicPoint { k: *k, bic: None, change_rate: None, error: Some(e.to_string()) }),
        }
    }

    let fitted: Vec<(usize, f64)> = curve.iter().filter_map(|p| p.bic.map(|b| (p.k, b))).collect();
    if fitted.is_empty() {
        return Err(MixtureError::AllFitsFailed);
    }
    let qualifies = |i: usize| {
        let (_, b) = fitted[i];
        b.is_finite() && fitted[i + 1..].iter().all(|&(_, later)| (b - later) / b.abs() < rate_threshold)
    };
    let argmin = fitted
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, b)| match best {
            Some((_, bb)) if bb <= b => best,
            _ => Some((k, b)),
        })
        .map(|(k, _)| k)
        .unwrap_or(fitted[0].0);
    let selected_k = if rate_threshold <= 0.0 {
        argmin
    } else {
        (0..fitted.len()).find(|&i| qualifies(i)).map(|i| fitted[i].0).unwrap_or(argmin)
    };

    let (model, diagnostics) = fits
        .into_iter()
        .find_map(|(k, r)| if k == selected_k { r.ok().map(|(m, d, _)| (m, d)) } else { None })
        .expect("selected K was fitted");
    Ok(Selection { selected_k, curve, model, diagnostics })
}
