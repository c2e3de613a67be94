//! Scalar normal helpers and rectangle probabilities of multivariate normals.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use libm::erfc;
use statrs::function::erf::erfc_inv;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ(x), accurate in both tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

/// 1 − Φ(x).
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// Φ⁻¹(p).
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -SQRT_2 * erfc_inv(2.0 * p)
    }
}

/// P(lo < Z < hi) for a standard normal Z, computed on the side of the
/// distribution that avoids cancellation.
pub fn interval_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        (std_normal_sf(lo) - std_normal_sf(hi)).max(0.0)
    } else if hi <= 0.0 {
        (std_normal_cdf(hi) - std_normal_cdf(lo)).max(0.0)
    } else {
        (1.0 - std_normal_cdf(lo) - std_normal_sf(hi)).max(0.0)
    }
}

/// Inverse CDF of the standard normal restricted to `(lo, hi)` at level `w ∈ [0, 1]`.
pub fn truncated_std_normal_quantile(lo: f64, hi: f64, w: f64) -> f64 {
    let y = if lo >= 0.0 {
        let q_lo = std_normal_sf(lo);
        let q_hi = std_normal_sf(hi);
        -std_normal_quantile(q_lo - w * (q_lo - q_hi))
    } else {
        let p_lo = std_normal_cdf(lo);
        let p_hi = std_normal_cdf(hi);
        std_normal_quantile(p_lo + w * (p_hi - p_lo))
    };
    y.clamp(lo, hi)
}

/// A standard-normal interval with its tail probabilities evaluated once,
/// shared by the mass and the inverse-CDF draw.
#[derive(Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
    /// Lower-tail probabilities when `upper_tails` is false, upper-tail otherwise.
    t_lo: f64,
    t_hi: f64,
    upper_tails: bool,
    mass: f64,
}

impl Interval {
    fn new(lo: f64, hi: f64) -> Self {
        if hi <= lo {
            return Self { lo, hi, t_lo: 0.0, t_hi: 0.0, upper_tails: false, mass: 0.0 };
        }
        if lo >= 0.0 {
            let (q_lo, q_hi) = (std_normal_sf(lo), std_normal_sf(hi));
            Self { lo, hi, t_lo: q_lo, t_hi: q_hi, upper_tails: true, mass: (q_lo - q_hi).max(0.0) }
        } else if hi <= 0.0 {
            let (p_lo, p_hi) = (std_normal_cdf(lo), std_normal_cdf(hi));
            Self { lo, hi, t_lo: p_lo, t_hi: p_hi, upper_tails: false, mass: (p_hi - p_lo).max(0.0) }
        } else {
            let (p_lo, q_hi) = (std_normal_cdf(lo), std_normal_sf(hi));
            let mass = (1.0 - p_lo - q_hi).max(0.0);
            Self { lo, hi, t_lo: p_lo, t_hi: 1.0 - q_hi, upper_tails: false, mass }
        }
    }

    /// Inverse CDF of the normal restricted to the interval at level `w`.
    fn quantile(&self, w: f64) -> f64 {
        let y = if self.upper_tails {
            -std_normal_quantile(self.t_lo - w * (self.t_lo - self.t_hi))
        } else {
            std_normal_quantile(self.t_lo + w * (self.t_hi - self.t_lo))
        };
        y.clamp(self.lo, self.hi)
    }
}

const LATTICE_PRIMES: [f64; 24] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
    59.0, 61.0, 67.0, 71.0, 73.0, 79.0, 83.0, 89.0,
];

/// Lattice size for [`box_probability`].
pub const GENZ_POINTS: usize = 2048;

/// Probability that `N(mean, L Lᵀ)` falls in `[lower, upper]`.
///
/// One dimension is closed form. Higher dimensions use Genz's sequential
/// conditioning transform integrated on a fixed Richtmyer lattice, so the
/// result is deterministic.
pub fn box_probability(mean: &[f64], chol_l: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    box_probability_with(mean, chol_l, lower, upper, GENZ_POINTS)
}

/// [`box_probability`] on a lattice of `points` nodes.
pub fn box_probability_with(mean: &[f64], chol_l: &DMatrix<f64>, lower: &[f64], upper: &[f64], points: usize) -> f64 {
    if mean.len() == 1 {
        let s = chol_l[(0, 0)];
        return interval_mass((lower[0] - mean[0]) / s, (upper[0] - mean[0]) / s);
    }
    lattice(mean, chol_l, lower, upper, points, false).mass
}

/// Mass, mean and covariance of `N(mean, L Lᵀ)` restricted to `[lower, upper]`,
/// from the same lattice rule as [`box_probability`] (importance-weighted
/// points of the sequential transform). `None` when the box has no mass.
pub fn box_moments(
    mean: &[f64],
    chol_l: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    points: usize,
) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
    let r = lattice(mean, chol_l, lower, upper, points, true);
    let (m1, m2) = r.moments?;
    let d = mean.len();
    let centre = DVector::from_fn(d, |i, _| mean[i] + m1[i]);
    let cov = m2 - &m1 * m1.transpose();
    Some((r.mass, centre, (&cov + cov.transpose()) * 0.5))
}

struct LatticeResult {
    mass: f64,
    /// First and second raw moments of the offset from the mean.
    moments: Option<(DVector<f64>, DMatrix<f64>)>,
}

fn lattice(mean: &[f64], chol_l: &DMatrix<f64>, lower: &[f64], upper: &[f64], points: usize, moments: bool) -> LatticeResult {
    let d = mean.len();
    assert!(d <= LATTICE_PRIMES.len(), "dimension {d} exceeds lattice support");

    // most constrained variable first: lowers the variance of the transformed integrand
    let sd: Vec<f64> = (0..d).map(|i| (0..=i).map(|j| chol_l[(i, j)].powi(2)).sum::<f64>().sqrt()).collect();
    let marginal: Vec<f64> =
        (0..d).map(|i| interval_mass((lower[i] - mean[i]) / sd[i], (upper[i] - mean[i]) / sd[i])).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| marginal[i].total_cmp(&marginal[j]));
    let permuted_l = if order.iter().enumerate().any(|(k, &i)| k != i) {
        let cov = chol_l * chol_l.transpose();
        DMatrix::from_fn(d, d, |r, c| cov[(order[r], order[c])]).cholesky().map(|ch| ch.l())
    } else {
        None
    };
    let order: Vec<usize> = if permuted_l.is_some() { order } else { (0..d).collect() };
    let l = permuted_l.as_ref().unwrap_or(chol_l);
    let a: Vec<f64> = order.iter().map(|&i| lower[i] - mean[i]).collect();
    let b: Vec<f64> = order.iter().map(|&i| upper[i] - mean[i]).collect();
    let alpha: Vec<f64> = LATTICE_PRIMES[..d].iter().map(|p| p.sqrt().fract()).collect();

    let diag: Vec<f64> = (0..d).map(|i| l[(i, i)]).collect();
    let packed: Vec<f64> = (0..d).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect();
    let first = Interval::new(a[0] / diag[0], b[0] / diag[0]);
    if first.mass == 0.0 {
        return LatticeResult { mass: 0.0, moments: None };
    }
    // fractional parts of n·alpha, advanced by one step per node
    let mut u = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d * (d + 1) / 2];
    for _ in 1..=points {
        for (ui, ai) in u.iter_mut().zip(&alpha) {
            *ui += ai;
            if *ui >= 1.0 {
                *ui -= 1.0;
            }
        }
        // tent (baker's) transform periodizes the integrand for the lattice rule
        let coordinate = |i: usize| 1.0 - (2.0 * u[i] - 1.0).abs();
        let mut current = first;
        let mut f = first.mass;
        let mut row = 0;
        for i in 1..d {
            z[i - 1] = current.quantile(coordinate(i - 1));
            let mut s = 0.0;
            for j in 0..i {
                s += packed[row + j] * z[j];
            }
            row += i;
            x[i] = s;
            current = Interval::new((a[i] - s) / diag[i], (b[i] - s) / diag[i]);
            f *= current.mass;
            if f == 0.0 {
                break;
            }
        }
        total += f;
        if moments && f > 0.0 {
            z[d - 1] = current.quantile(coordinate(d - 1));
            // x_i = Σ_{j<i} l_ij z_j was stored on the way down
            x[0] = 0.0;
            let mut at = 0;
            for i in 0..d {
                x[i] += diag[i] * z[i];
                let fx = f * x[i];
                s1[i] += fx;
                for j in 0..=i {
                    s2[at + j] += fx * x[j];
                }
                at += i + 1;
            }
        }
    }
    let mass = total / points as f64;
    let moments = (moments && total > 0.0).then(|| {
        // undo the variable ordering
        let mut m1 = DVector::zeros(d);
        let mut m2 = DMatrix::zeros(d, d);
        let mut at = 0;
        for i in 0..d {
            m1[order[i]] = s1[i] / total;
            for j in 0..=i {
                let v = s2[at + j] / total;
                m2[(order[i], order[j])] = v;
                m2[(order[j], order[i])] = v;
            }
            at += i + 1;
        }
        (m1, m2)
    });
    LatticeResult { mass, moments }
}
