//! Human-driver baseline derived from the interaction model.
//!
//! Every `Δt` the driver picks the most likely speed given what it sees,
//! `v_d = argmax_v f(v | 1/R, v_p, 1/T_adv)`, and commands
//! `a_d = (v_d − v)/Δt` clamped to `±a_m`. The command holds between updates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{governing_pedestrian, recovery_command, AgentError, Perception, Strategy, StrategyDecision};
use crate::mixture::GaussianMixture;
use crate::scenario::TtcConvention;

const INV_R: usize = 0;
const V: usize = 1;
const V_P: usize = 2;
const INV_T_ADV: usize = 3;

/// Tunables of the human driver; the model itself is attached separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanDriverSettings {
    /// Δt, s.
    pub update_interval: f64,
    /// a_m, m/s².
    pub max_acceleration: f64,
    /// a0, m/s².
    pub recovery_acceleration: f64,
    /// Condition on `1/T_adv` as well as `1/R` and `v_p`; otherwise `T_adv` is marginalized out.
    pub condition_on_time_advantage: bool,
    /// Speed search interval for the conditional mode, m/s.
    pub speed_search_max: f64,
    /// Lower clamp on `T_adv` before taking its reciprocal, s.
    pub min_time_advantage: f64,
}

impl Default for HumanDriverSettings {
    fn default() -> Self {
        Self {
            update_interval: 1.0,
            max_acceleration: 4.0,
            recovery_acceleration: 1.0,
            condition_on_time_advantage: true,
            speed_search_max: 20.0,
            min_time_advantage: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HumanDriverParams {
    pub model: GaussianMixture,
    pub settings: HumanDriverSettings,
    /// `(1/R, v, v_p)` marginal, cached when `T_adv` is not conditioned on.
    reduced: Option<GaussianMixture>,
}

impl HumanDriverParams {
    pub fn new(model: GaussianMixture, settings: HumanDriverSettings) -> Result<Self, AgentError> {
        if model.dim() != 4 {
            return Err(AgentError::ModelDimension(model.dim()));
        }
        let s = &settings;
        if !(s.update_interval > 0.0 && s.max_acceleration > 0.0 && s.recovery_acceleration > 0.0) {
            return Err(AgentError::InvalidInput("update interval, a_m and a0 must be positive".into()));
        }
        let reduced = if s.condition_on_time_advantage { None } else { Some(model.marginalize(&[INV_R, V, V_P])?) };
        Ok(Self { model, settings, reduced })
    }

    /// Most likely vehicle speed for the given observation.
    pub fn desired_speed(&self, r: f64, v_p: f64, inv_t_adv: f64) -> Result<f64, AgentError> {
        let conditional = match &self.reduced {
            None => self.model.condition(&[INV_R, V_P, INV_T_ADV], &[1.0 / r, v_p, inv_t_adv])?,
            Some(m) => m.condition(&[0, 2], &[1.0 / r, v_p])?,
        };
        Ok(conditional.mode_in(0.0, self.settings.speed_search_max)?)
    }
}

/// `(v_d − v)/Δt` with its magnitude capped at `a_m`.
pub fn clamped_command(v_desired: f64, v: f64, dt_update: f64, a_max: f64) -> f64 {
    ((v_desired - v) / dt_update).clamp(-a_max, a_max)
}

#[derive(Debug, Clone)]
pub struct HumanDriver {
    params: Arc<HumanDriverParams>,
    last_update: Option<f64>,
    command: f64,
    fallbacks: usize,
}

impl HumanDriver {
    pub fn new(params: Arc<HumanDriverParams>) -> Self {
        Self { params, last_update: None, command: 0.0, fallbacks: 0 }
    }
}

impl Strategy for HumanDriver {
    fn decide(&mut self, p: &Perception<'_>) -> StrategyDecision {
        let s = &self.params.settings;
        let governing = if p.r > 0.0 { governing_pedestrian(p, TtcConvention::DistanceOverSpeed) } else { None };
        let Some(ped) = governing else {
            self.last_update = None;
            return recovery_command(p.v, p.v0, s.recovery_acceleration, p.dt);
        };
        let due = self.last_update.is_none_or(|t| p.t - t >= s.update_interval - 1e-9);
        if due {
            let t_adv = ped.time_advantage(p.r, p.v, TtcConvention::DistanceOverSpeed).max(s.min_time_advantage);
            self.command = match self.params.desired_speed(p.r, ped.walk_speed, 1.0 / t_adv) {
                Ok(v_d) => clamped_command(v_d, p.v, s.update_interval, s.max_acceleration),
                Err(_) => {
                    self.fallbacks += 1;
                    0.0
                }
            };
            self.last_update = Some(p.t);
        }
        StrategyDecision::new(self.command)
    }

    fn fallback_events(&self) -> usize {
        self.fallbacks
    }
}
