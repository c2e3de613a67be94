//! Fixed-step episode engine.
//!
//! The vehicle drives along lateral 0 towards the crossing line; its state is
//! the signed distance `R` of its front to the line (positive while
//! approaching). Pedestrians walk along the crossing line between lateral
//! `−L0/2` and `+L0/2`. The episode clock starts when the front reaches `R0`.

mod paired;
mod trajectory;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    fixed_count_arrivals, sample_arrivals, AgentError, ArrivalSchedule, PedestrianView, Perception, Side, Strategy,
    WalkSpeedModel, DEFAULT_SPEED_BOUNDS,
};
use crate::seed::derive_seed;

pub use paired::{run_paired_experiments, PairedResult};
pub use trajectory::{write_trajectory_csv, TrajectoryRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("pedestrian {0} has no walking speed (no model and no replayed value)")]
    NoWalkSpeed(usize),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// How pedestrians are generated for an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalMode {
    /// Exactly `count` pedestrians, uniformly within `window` seconds
    /// (defaults to `R0/v0`, the free-flow time to the line).
    FixedCount { count: usize, window: Option<f64> },
    /// Poisson stream at `lambda` over the horizon.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Trigger distance that starts the arrival clock, m.
    pub r0: f64,
    /// Crossing length, m.
    pub l0: f64,
    /// Approach speed, m/s.
    pub v0: f64,
    /// Pedestrians per second.
    pub lambda: f64,
    pub dt: f64,
    /// Episode time limit measured from the trigger, s.
    pub horizon: f64,
    pub vehicle_half_length: f64,
    pub vehicle_half_width: f64,
    /// Pedestrians are visible to strategies only while `R` is within this range, m.
    pub detection_range: f64,
    pub arrivals: ArrivalMode,
    /// Clamp for decided walking speeds, m/s.
    pub speed_bounds: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            r0: 30.0,
            l0: 9.0,
            v0: 5.0,
            lambda: 250.0 / 3600.0,
            dt: 0.05,
            horizon: 120.0,
            vehicle_half_length: 2.5,
            vehicle_half_width: 1.0,
            detection_range: 50.0,
            arrivals: ArrivalMode::FixedCount { count: 1, window: None },
            speed_bounds: DEFAULT_SPEED_BOUNDS,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("r0", self.r0),
            ("l0", self.l0),
            ("v0", self.v0),
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("vehicle_half_length", self.vehicle_half_length),
            ("vehicle_half_width", self.vehicle_half_width),
            ("detection_range", self.detection_range),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SimError::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if let ArrivalMode::FixedCount { window: Some(w), .. } = self.arrivals {
            if !(w > 0.0) {
                return Err(SimError::Config(format!("arrival window must be positive, got {w}")));
            }
        }
        let (lo, hi) = self.speed_bounds;
        if !(lo > 0.0 && lo <= hi) {
            return Err(SimError::Config(format!("speed bounds must satisfy 0 < lo <= hi, got ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Checks `dt ≤ 0.1·Δt` against a strategy's update interval.
    pub fn check_update_interval(&self, update_interval: f64) -> Result<(), SimError> {
        if self.dt > 0.1 * update_interval + 1e-12 {
            return Err(SimError::Config(format!("dt {} exceeds a tenth of the update interval {update_interval}", self.dt)));
        }
        Ok(())
    }

    /// Draws this config's arrival schedule.
    pub fn schedule(&self, seed: u64) -> ArrivalSchedule {
        match self.arrivals {
            ArrivalMode::FixedCount { count, window } => fixed_count_arrivals(count, window.unwrap_or(self.r0 / self.v0), seed),
            ArrivalMode::Poisson => sample_arrivals(self.lambda, self.horizon, seed),
        }
    }
}

/// Where walking speeds come from. Pedestrian `j` uses `preset[j]` when
/// present; otherwise it decides against the vehicle state at its arrival
/// with seed `derive_seed(seed, "pedestrian", j)`.
#[derive(Debug, Clone)]
pub struct WalkSource {
    pub model: Option<Arc<WalkSpeedModel>>,
    pub seed: u64,
    pub preset: Vec<f64>,
}

impl WalkSource {
    pub fn decide(model: Arc<WalkSpeedModel>, seed: u64) -> Self {
        Self { model: Some(model), seed, preset: Vec::new() }
    }

    pub fn replay(speeds: Vec<f64>) -> Self {
        Self { model: None, seed: 0, preset: speeds }
    }

    fn speed_for(&self, j: usize, r: f64, v: f64, bounds: (f64, f64)) -> Result<(f64, bool), SimError> {
        if let Some(s) = self.preset.get(j) {
            return Ok((*s, false));
        }
        let model = self.model.as_ref().ok_or(SimError::NoWalkSpeed(j))?;
        let d = model.decide(r, v, derive_seed(self.seed, "pedestrian", j as u64), bounds)?;
        Ok((d.speed, d.fallback))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Cleared,
    Crashed,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    /// Episode-clock time at clearance (or at the end of the episode), s.
    pub passing_time: f64,
    pub crash_time: Option<f64>,
    /// Walking speed of every pedestrian that arrived, in arrival order.
    pub walk_speeds: Vec<f64>,
    /// Strategy fallbacks plus walking-speed conditioning fallbacks.
    pub fallback_events: usize,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

impl EpisodeResult {
    pub fn crashed(&self) -> bool {
        self.outcome == Outcome::Crashed
    }

    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Cleared
    }
}

/// A pedestrian in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pedestrian {
    pub id: usize,
    pub arrival_time: f64,
    pub side: Side,
    pub walk_speed: f64,
    /// Distance walked from the starting curb, m.
    pub progress: f64,
}

impl Pedestrian {
    pub fn lateral(&self, l0: f64) -> f64 {
        self.side.direction() * (self.progress - 0.5 * l0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Episode clock, s.
    pub t: f64,
    /// Signed distance of the vehicle front to the crossing line, m.
    pub vehicle_position: f64,
    pub vehicle_v: f64,
    /// Pedestrians still on the crossing.
    pub pedestrians: Vec<Pedestrian>,
}

/// True when a pedestrian is within the vehicle's half-width of the path while
/// the vehicle body spans the crossing line (front at or past it, rear not yet).
pub fn detect_crash(state: &WorldState, config: &SimConfig) -> bool {
    let x = state.vehicle_position;
    let spans = x <= 0.0 && x + 2.0 * config.vehicle_half_length >= 0.0;
    spans && state.pedestrians.iter().any(|p| p.lateral(config.l0).abs() <= config.vehicle_half_width)
}

/// Advances `(x, v)` by `dt` under constant acceleration `a`, stopping at
/// `v = 0` if the speed would go negative within the step.
fn integrate(x: f64, v: f64, a: f64, dt: f64) -> (f64, f64) {
    let v_next = v + a * dt;
    if v_next < 0.0 {
        (x - v * v / (2.0 * -a), 0.0)
    } else {
        (x - (v * dt + 0.5 * a * dt * dt), v_next)
    }
}

/// Runs one episode.
///
/// The vehicle starts at `max(detection_range, R0)` at `v0`. Pedestrian `j`
/// appears at `schedule.times[j]` on the episode clock with the progress it
/// would have made since then. The episode ends when the vehicle rear clears
/// the crossing line, on a crash, or when the clock exceeds the horizon.
pub fn run_episode(
    config: &SimConfig,
    strategy: &mut dyn Strategy,
    schedule: &ArrivalSchedule,
    walk: &WalkSource,
    record: bool,
) -> Result<EpisodeResult, SimError> {
    config.validate()?;
    let dt = config.dt;
    let clear_at = -2.0 * config.vehicle_half_length;
    let mut x = config.detection_range.max(config.r0);
    let mut v = config.v0;
    let mut sim_t = 0.0;
    let mut step: u64 = 0;
    // simulation time at which the front reached R0
    let mut t0 = if x <= config.r0 { Some(0.0) } else { None };
    let mut next_arrival = 0;
    let mut peds: Vec<Pedestrian> = Vec::new();
    let mut walk_speeds = Vec::new();
    let mut walk_fallbacks = 0;
    let mut trajectory = record.then(Vec::new);
    let mut views = Vec::new();

    let finish = |outcome, passing_time, crash_time, walk_speeds, fb, trajectory| EpisodeResult {
        outcome,
        passing_time,
        crash_time,
        walk_speeds,
        fallback_events: fb,
        trajectory,
    };

    loop {
        let t = t0.map(|t0| sim_t - t0);
        if let Some(t) = t {
            while next_arrival < schedule.len() && schedule.times[next_arrival] <= t + 1e-12 {
                let j = next_arrival;
                let (speed, fb) = walk.speed_for(j, x, v, config.speed_bounds)?;
                walk_fallbacks += usize::from(fb);
                walk_speeds.push(speed);
                let progress = speed * (t - schedule.times[j]).max(0.0);
                peds.push(Pedestrian { id: j, arrival_time: schedule.times[j], side: schedule.sides[j], walk_speed: speed, progress });
                next_arrival += 1;
            }
            peds.retain(|p| p.progress < config.l0);
        }
        let clock = t.unwrap_or(sim_t - (config.detection_range.max(config.r0) - config.r0) / config.v0);

        if let Some(rows) = trajectory.as_mut() {
            trajectory::push_rows(rows, clock, x, v, &peds, config.l0);
        }

        let state = WorldState { t: clock, vehicle_position: x, vehicle_v: v, pedestrians: peds.clone() };
        if detect_crash(&state, config) {
            let fb = strategy.fallback_events() + walk_fallbacks;
            return Ok(finish(Outcome::Crashed, clock, Some(clock), walk_speeds, fb, trajectory));
        }
        if t.is_some_and(|t| t > config.horizon) {
            let fb = strategy.fallback_events() + walk_fallbacks;
            return Ok(finish(Outcome::TimedOut, clock, None, walk_speeds, fb, trajectory));
        }

        views.clear();
        if x <= config.detection_range {
            views.extend(peds.iter().map(|p| PedestrianView {
                id: p.id,
                arrival_time: p.arrival_time,
                lateral: p.lateral(config.l0),
                walk_speed: p.walk_speed,
                side: p.side,
            }));
        }
        let perception = Perception { t: clock, r: x, v, pedestrians: &views, l0: config.l0, v0: config.v0, dt };
        let a = strategy.decide(&perception).acceleration;

        let (x_next, v_next) = integrate(x, v, a, dt);
        step += 1;
        let sim_next = step as f64 * dt;
        if t0.is_none() && x_next <= config.r0 {
            t0 = Some(interpolate_crossing(sim_t, x, sim_next, x_next, config.r0));
        }
        if x_next <= clear_at {
            let t_clear = interpolate_crossing(sim_t, x, sim_next, x_next, clear_at) - t0.expect("front passed R0");
            let fb = strategy.fallback_events() + walk_fallbacks;
            return Ok(finish(Outcome::Cleared, t_clear, None, walk_speeds, fb, trajectory));
        }
        for p in peds.iter_mut() {
            p.progress += p.walk_speed * dt;
        }
        x = x_next;
        v = v_next;
        sim_t = sim_next;
    }
}

/// Time at which a position moving from `x_a` (at `t_a`) to `x_b` (at `t_b`)
/// passes `level`, by linear interpolation.
fn interpolate_crossing(t_a: f64, x_a: f64, t_b: f64, x_b: f64, level: f64) -> f64 {
    if x_a <= level || x_a == x_b {
        return t_a;
    }
    t_a + (t_b - t_a) * (x_a - level) / (x_a - x_b)
}

#[cfg(test)]
mod tests;
