//! Crossing geometry and the four model variables.
//!
//! The vehicle travels along the line `lateral = 0` towards the crossing line at
//! longitudinal coordinate 0; pedestrians walk along the crossing line, i.e.
//! perpendicular to the vehicle path. `R` is the distance from the vehicle front
//! to the crossing line and `L` is the pedestrian's distance to the vehicle path.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Instantaneous state of one vehicle–pedestrian pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    /// Longitudinal distance, m. Negative once the vehicle front has passed the crossing line.
    pub r: f64,
    /// Lateral distance of the pedestrian to the vehicle path, m.
    pub l: f64,
    /// Vehicle speed, m/s.
    pub v: f64,
    /// Pedestrian walking speed, m/s.
    pub v_p: f64,
}

impl Kinematics {
    pub fn new(r: f64, l: f64, v: f64, v_p: f64) -> Self {
        Self { r, l, v, v_p }
    }
}

/// How time-to-collision is computed from a [`Kinematics`] sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtcConvention {
    /// `TTC = R / v`: constant-speed arrival at the crossing line.
    #[default]
    DistanceOverSpeed,
}

impl TtcConvention {
    pub fn ttc(self, k: &Kinematics) -> Result<f64, ScenarioError> {
        match self {
            TtcConvention::DistanceOverSpeed => {
                if k.v <= 0.0 {
                    return Err(ScenarioError::ZeroVehicleSpeed);
                }
                Ok(k.r / k.v)
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("vehicle speed is zero; time to collision is undefined")]
    ZeroVehicleSpeed,
    #[error("pedestrian speed is zero; arrival time is undefined")]
    ZeroPedestrianSpeed,
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("time advantage is zero; its reciprocal is undefined")]
    ZeroTimeAdvantage,
}

/// Time advantage `|TTC − L/v_p|`, seconds.
pub fn time_advantage(k: &Kinematics, convention: TtcConvention) -> Result<f64, ScenarioError> {
    let ttc = convention.ttc(k)?;
    if k.v_p <= 0.0 {
        return Err(ScenarioError::ZeroPedestrianSpeed);
    }
    Ok((ttc - k.l / k.v_p).abs())
}

/// One fitted data point `(1/R, v, v_p, 1/T_adv)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    /// 1/m
    pub inv_r: f64,
    /// m/s
    pub v: f64,
    /// m/s
    pub v_p: f64,
    /// 1/s
    pub inv_t_adv: f64,
}

impl ObservationVector {
    pub const DIM: usize = 4;
    pub const NAMES: [&'static str; 4] = ["inv_R", "v", "v_p", "inv_T_adv"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.inv_r, self.v, self.v_p, self.inv_t_adv]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { inv_r: a[0], v: a[1], v_p: a[2], inv_t_adv: a[3] }
    }

    /// True when every entry is strictly positive and finite.
    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite() && *x > 0.0)
    }

    /// Index of a variable by its column name.
    pub fn dim_of(name: &str) -> Option<usize> {
        Self::NAMES.iter().position(|n| *n == name)
    }

    /// Recovers `(R, v, v_p, T_adv)`.
    pub fn to_physical(&self) -> (f64, f64, f64, f64) {
        (1.0 / self.inv_r, self.v, self.v_p, 1.0 / self.inv_t_adv)
    }
}

impl fmt::Display for ObservationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.inv_r, self.v, self.v_p, self.inv_t_adv)
    }
}

fn require_positive(field: &'static str, value: f64) -> Result<(), ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::NonPositive { field, value })
    }
}

/// Maps kinematics into observation space. Samples that would produce an
/// infinite or nonpositive coordinate are rejected.
pub fn to_observation(
    k: &Kinematics,
    convention: TtcConvention,
) -> Result<ObservationVector, ScenarioError> {
    require_positive("R", k.r)?;
    require_positive("v", k.v)?;
    require_positive("v_p", k.v_p)?;
    let t_adv = time_advantage(k, convention)?;
    if t_adv == 0.0 {
        return Err(ScenarioError::ZeroTimeAdvantage);
    }
    let obs = ObservationVector { inv_r: 1.0 / k.r, v: k.v, v_p: k.v_p, inv_t_adv: 1.0 / t_adv };
    debug_assert!(obs.is_valid());
    Ok(obs)
}

/// Inverse of [`to_observation`] on `R` and `T_adv`: returns `(R, v, v_p, T_adv)`.
pub fn from_observation(obs: &ObservationVector) -> (f64, f64, f64, f64) {
    obs.to_physical()
}
