//! Behavioural models: pedestrian arrivals and walking speeds, and the
//! vehicle strategies that react to them.

pub mod arrivals;
pub mod human;
pub mod soft_yield;
pub mod walk;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixture::MixtureError;
use crate::scenario::{time_advantage, Kinematics, TtcConvention};

pub use arrivals::{fixed_count_arrivals, sample_arrivals, ArrivalSchedule, Side};
pub use human::{HumanDriver, HumanDriverParams, HumanDriverSettings};
pub use soft_yield::{full_stop_plan, resolve_plan, soft_yield_decide, SoftYield, SoftYieldParams, SoftYieldPlan};
pub use walk::{decide_walk_speed, walk_speed_distribution, WalkDecision, WalkSpeedModel, DEFAULT_SPEED_BOUNDS};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("interaction model must be 4-dimensional, got {0}")]
    ModelDimension(usize),
    #[error("yield profile infeasible (radicand {radicand})")]
    InfeasibleYield { radicand: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Acceleration command for the next integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyDecision {
    /// m/s², signed.
    pub acceleration: f64,
}

impl StrategyDecision {
    pub fn new(acceleration: f64) -> Self {
        debug_assert!(acceleration.is_finite());
        Self { acceleration }
    }
}

/// A pedestrian as seen by the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianView {
    pub id: usize,
    /// s, on the episode clock.
    pub arrival_time: f64,
    /// Signed lateral position, m; the vehicle path is at 0.
    pub lateral: f64,
    pub walk_speed: f64,
    pub side: Side,
}

/// Everything a strategy may look at when choosing the next command.
#[derive(Debug, Clone, Copy)]
pub struct Perception<'a> {
    /// Episode clock, s (0 when the vehicle reaches the trigger distance).
    pub t: f64,
    /// Distance of the vehicle front to the crossing line, m.
    pub r: f64,
    pub v: f64,
    /// Active pedestrians within detection range.
    pub pedestrians: &'a [PedestrianView],
    pub l0: f64,
    pub v0: f64,
    pub dt: f64,
}

impl PedestrianView {
    /// Time advantage against a vehicle at `(r, v)`; infinite when the
    /// vehicle is stopped or past the line.
    pub fn time_advantage(&self, r: f64, v: f64, convention: TtcConvention) -> f64 {
        let k = Kinematics::new(r, self.lateral.abs(), v, self.walk_speed);
        time_advantage(&k, convention).unwrap_or(f64::INFINITY)
    }
}

/// The pedestrian with the smallest time advantage, ties going to the
/// earlier arrival.
pub fn governing_pedestrian<'a>(p: &Perception<'a>, convention: TtcConvention) -> Option<&'a PedestrianView> {
    p.pedestrians
        .iter()
        .map(|ped| (ped.time_advantage(p.r, p.v, convention), ped))
        .min_by(|(ta, a), (tb, b)| ta.total_cmp(tb).then(a.arrival_time.total_cmp(&b.arrival_time)).then(a.id.cmp(&b.id)))
        .map(|(_, ped)| ped)
}

/// Clear-road rule: accelerate at `a0` until `v0`, without overshooting
/// within one step, then hold.
pub fn recovery_command(v: f64, v0: f64, a0: f64, dt: f64) -> StrategyDecision {
    if v < v0 {
        StrategyDecision::new(a0.min((v0 - v) / dt))
    } else {
        StrategyDecision::new(0.0)
    }
}

/// A driving strategy. One instance drives one episode.
pub trait Strategy: Send {
    fn decide(&mut self, perception: &Perception<'_>) -> StrategyDecision;

    /// Number of decisions that had to use a fallback path.
    fn fallback_events(&self) -> usize {
        0
    }
}

/// Never brakes; recovers to `v0` if below it.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cruise;

impl Strategy for Cruise {
    fn decide(&mut self, p: &Perception<'_>) -> StrategyDecision {
        recovery_command(p.v, p.v0, 1.0, p.dt)
    }
}

/// Recipe for building fresh strategy instances.
#[derive(Debug, Clone)]
pub enum StrategySpec {
    Cruise,
    SoftYield(SoftYieldParams),
    Human(Arc<HumanDriverParams>),
}

impl StrategySpec {
    pub fn build(&self) -> Box<dyn Strategy> {
        match self {
            StrategySpec::Cruise => Box::new(Cruise),
            StrategySpec::SoftYield(p) => Box::new(SoftYield::new(*p)),
            StrategySpec::Human(p) => Box::new(HumanDriver::new(Arc::clone(p))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Cruise => "cruise",
            StrategySpec::SoftYield(_) => "soft_yield",
            StrategySpec::Human(_) => "human",
        }
    }
}
