//! Walking-speed decisions drawn from the interaction model.

use crate::mixture::{GaussianMixture, MixtureError};

use super::AgentError;

const INV_R: usize = 0;
const V: usize = 1;
const V_P: usize = 2;

/// Default plausible walking-speed range, m/s.
pub const DEFAULT_SPEED_BOUNDS: (f64, f64) = (0.3, 3.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkDecision {
    /// Decided walking speed, m/s.
    pub speed: f64,
    /// True when conditioning failed and the unconditional `v_p` marginal was used.
    pub fallback: bool,
}

/// The marginals walking-speed decisions condition on, prepared once per model.
#[derive(Debug, Clone)]
pub struct WalkSpeedModel {
    /// `(1/R, v, v_p)`
    moving: GaussianMixture,
    /// `(1/R, v_p)`
    stopped: GaussianMixture,
    /// `v_p`
    unconditional: GaussianMixture,
}

impl WalkSpeedModel {
    pub fn new(model: &GaussianMixture) -> Result<Self, AgentError> {
        if model.dim() != 4 {
            return Err(AgentError::ModelDimension(model.dim()));
        }
        Ok(Self {
            moving: model.marginalize(&[INV_R, V, V_P])?,
            stopped: model.marginalize(&[INV_R, V_P])?,
            unconditional: model.marginalize(&[V_P])?,
        })
    }

    /// The `v_p` distribution a pedestrian faces when the vehicle is at
    /// distance `vehicle_r` with speed `vehicle_v`. `T_adv` is marginalized
    /// out because it depends on the speed being decided; with the vehicle
    /// stopped only `1/R` is conditioned on. A vehicle already past the
    /// crossing line gives the unconditional marginal. The flag is set when
    /// conditioning failed and the unconditional marginal was used instead.
    pub fn distribution(&self, vehicle_r: f64, vehicle_v: f64) -> (GaussianMixture, bool) {
        if !(vehicle_r > 0.0) {
            return (self.unconditional.clone(), false);
        }
        let conditioned = if vehicle_v > 0.0 {
            self.moving.condition(&[0, 1], &[1.0 / vehicle_r, vehicle_v])
        } else {
            self.stopped.condition(&[0], &[1.0 / vehicle_r])
        };
        match conditioned {
            Ok(c) => (c, false),
            Err(_) => (self.unconditional.clone(), true),
        }
    }

    /// Draws one walking speed and clamps it to `bounds`. When the conditional
    /// has too little mass inside the box to sample, the unconditional
    /// marginal is used and the decision is flagged as a fallback.
    pub fn decide(&self, vehicle_r: f64, vehicle_v: f64, seed: u64, bounds: (f64, f64)) -> Result<WalkDecision, AgentError> {
        let (dist, fallback) = self.distribution(vehicle_r, vehicle_v);
        let (draw, fallback) = match dist.sample(1, seed) {
            Ok(d) => (d[(0, 0)], fallback),
            // conditioning far outside the data can leave almost no mass at v_p ≥ 0
            Err(MixtureError::RejectionStall) => (self.unconditional.sample(1, seed)?[(0, 0)], true),
            Err(e) => return Err(e.into()),
        };
        Ok(WalkDecision { speed: draw.clamp(bounds.0, bounds.1), fallback })
    }
}

/// One-shot form of [`WalkSpeedModel::distribution`].
pub fn walk_speed_distribution(
    model: &GaussianMixture,
    vehicle_r: f64,
    vehicle_v: f64,
) -> Result<(GaussianMixture, bool), AgentError> {
    Ok(WalkSpeedModel::new(model)?.distribution(vehicle_r, vehicle_v))
}

/// One-shot form of [`WalkSpeedModel::decide`].
pub fn decide_walk_speed(
    model: &GaussianMixture,
    vehicle_r: f64,
    vehicle_v: f64,
    seed: u64,
    bounds: (f64, f64),
) -> Result<WalkDecision, AgentError> {
    WalkSpeedModel::new(model)?.decide(vehicle_r, vehicle_v, seed, bounds)
}
