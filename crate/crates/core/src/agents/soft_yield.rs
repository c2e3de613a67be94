//! Soft-Yield automated-vehicle strategy.
//!
//! On detecting a pedestrian the vehicle commits to a regression-derived
//! deceleration `a = p1 + p2·v + p3·R`, brakes for `T1` seconds and then
//! coasts, timed so that it reaches the crossing line as the pedestrian
//! finishes crossing:
//!
//! ```text
//! t_L = L0 / v_p
//! T1  = t_L − sqrt(t_L² − 2 (R − v·t_L) / a)
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{governing_pedestrian, recovery_command, AgentError, Perception, Strategy, StrategyDecision};
use crate::scenario::TtcConvention;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftYieldParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Gap left in front of the crossing line by the full-stop fallback, m.
    pub stop_margin: f64,
    /// Clear-road acceleration back to the approach speed, m/s².
    pub recovery_acceleration: f64,
}

impl Default for SoftYieldParams {
    fn default() -> Self {
        Self { p1: 0.0169, p2: -0.13986, p3: 0.010115, stop_margin: 1.0, recovery_acceleration: 1.0 }
    }
}

impl SoftYieldParams {
    /// Committed deceleration for speed `v` (m/s) at distance `r` (m).
    pub fn acceleration(&self, v: f64, r: f64) -> f64 {
        self.p1 + self.p2 * v + self.p3 * r
    }
}

/// A committed brake-then-coast profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftYieldPlan {
    /// m/s²
    pub acceleration: f64,
    /// Braking duration, s.
    pub t1: f64,
}

impl SoftYieldPlan {
    /// Command `t_since_decision` seconds after committing: brake while
    /// `t < T1`, coast afterwards.
    pub fn command(&self, t_since_decision: f64) -> StrategyDecision {
        if t_since_decision < self.t1 {
            StrategyDecision::new(self.acceleration)
        } else {
            StrategyDecision::new(0.0)
        }
    }
}

/// Raw Soft-Yield decision. Returns the formula's `T1` even when negative;
/// a negative radicand (or zero deceleration) is reported as infeasible.
pub fn soft_yield_decide(params: &SoftYieldParams, v: f64, r: f64, v_p: f64, l0: f64) -> Result<SoftYieldPlan, AgentError> {
    if !(v > 0.0 && r > 0.0 && v_p > 0.0) {
        return Err(AgentError::InvalidInput(format!("soft-yield needs v, R, v_p > 0 (got {v}, {r}, {v_p})")));
    }
    let a = params.acceleration(v, r);
    let t_l = l0 / v_p;
    let radicand = t_l * t_l - 2.0 * (r - v * t_l) / a;
    if a == 0.0 || !(radicand >= 0.0) {
        return Err(AgentError::InfeasibleYield { radicand });
    }
    Ok(SoftYieldPlan { acceleration: a, t1: t_l - radicand.sqrt() })
}

/// Constant deceleration that stops the vehicle `margin` metres before the line.
pub fn full_stop_plan(v: f64, r: f64, margin: f64) -> SoftYieldPlan {
    if v <= 0.0 {
        return SoftYieldPlan { acceleration: 0.0, t1: 0.0 };
    }
    let room = (r - margin).max(0.1);
    let a = -v * v / (2.0 * room);
    SoftYieldPlan { acceleration: a, t1: v / -a }
}

/// Turns the raw decision into an executable plan.
///
/// With `R ≥ v·t_L` the vehicle reaches the line after the pedestrian has
/// crossed even without braking, so it just coasts. When the profile is
/// unusable (infeasible radicand, negative `T1`, or the vehicle would stop
/// before `T1`) it falls back to a full stop.
pub fn resolve_plan(params: &SoftYieldParams, v: f64, r: f64, v_p: f64, l0: f64) -> (SoftYieldPlan, bool) {
    if r >= v * l0 / v_p {
        return (SoftYieldPlan { acceleration: 0.0, t1: 0.0 }, false);
    }
    match soft_yield_decide(params, v, r, v_p, l0) {
        Ok(plan) if plan.t1 >= 0.0 && v + plan.acceleration * plan.t1 >= 0.0 => (plan, false),
        _ => (full_stop_plan(v, r, params.stop_margin), true),
    }
}

/// Soft-Yield as an episode strategy.
///
/// The plan is committed when a pedestrian arrives and re-committed whenever a
/// newly arrived pedestrian becomes the governing one. Once no visible
/// pedestrian remains (or the vehicle front is past the line) the vehicle
/// accelerates back to the approach speed.
#[derive(Debug, Clone)]
pub struct SoftYield {
    params: SoftYieldParams,
    plan: Option<(SoftYieldPlan, f64)>,
    seen: HashSet<usize>,
    fallbacks: usize,
}

impl SoftYield {
    pub fn new(params: SoftYieldParams) -> Self {
        Self { params, plan: None, seen: HashSet::new(), fallbacks: 0 }
    }

    pub fn plan(&self) -> Option<SoftYieldPlan> {
        self.plan.map(|(p, _)| p)
    }
}

impl Strategy for SoftYield {
    fn decide(&mut self, p: &Perception<'_>) -> StrategyDecision {
        let mut newcomers = Vec::new();
        for ped in p.pedestrians {
            if self.seen.insert(ped.id) {
                newcomers.push(ped.id);
            }
        }
        if p.pedestrians.is_empty() || p.r <= 0.0 {
            self.plan = None;
            return recovery_command(p.v, p.v0, self.params.recovery_acceleration, p.dt);
        }
        let governing = governing_pedestrian(p, TtcConvention::DistanceOverSpeed).expect("nonempty");
        if self.plan.is_none() || newcomers.contains(&governing.id) {
            let (plan, fallback) = if p.v > 0.0 {
                resolve_plan(&self.params, p.v, p.r, governing.walk_speed, p.l0)
            } else {
                (SoftYieldPlan { acceleration: 0.0, t1: 0.0 }, false)
            };
            self.fallbacks += usize::from(fallback);
            self.plan = Some((plan, p.t));
        }
        let (plan, at) = self.plan.expect("set above");
        plan.command(p.t - at)
    }

    fn fallback_events(&self) -> usize {
        self.fallbacks
    }
}
