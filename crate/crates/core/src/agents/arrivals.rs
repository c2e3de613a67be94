//! Pedestrian arrival schedules.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::seed::rng_from;

/// Curb a pedestrian starts from. Near-side pedestrians start at lateral
/// `−L0/2` and walk towards `+L0/2`; far-side pedestrians mirror that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Near,
    Far,
}

impl Side {
    /// +1 for near-side walkers (increasing lateral coordinate), −1 otherwise.
    pub fn direction(self) -> f64 {
        match self {
            Side::Near => 1.0,
            Side::Far => -1.0,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Side::Near => Side::Far,
            Side::Far => Side::Near,
        }
    }
}

/// Arrival instants (seconds after the vehicle reaches the trigger distance)
/// and the side each pedestrian starts from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrivalSchedule {
    pub times: Vec<f64>,
    pub sides: Vec<Side>,
}

impl ArrivalSchedule {
    pub fn new(times: Vec<f64>, sides: Vec<Side>) -> Self {
        assert_eq!(times.len(), sides.len(), "one side per arrival");
        assert!(times.windows(2).all(|w| w[0] < w[1]), "arrival times must be strictly ascending");
        assert!(times.iter().all(|t| *t >= 0.0), "arrival times must be nonnegative");
        Self { times, sides }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mirrored(&self) -> Self {
        Self { times: self.times.clone(), sides: self.sides.iter().map(|s| s.mirrored()).collect() }
    }
}

fn coin<R: Rng>(rng: &mut R) -> Side {
    if rng.random::<bool>() {
        Side::Near
    } else {
        Side::Far
    }
}

/// Poisson process with rate `lambda` (pedestrians per second) on `(0, horizon]`.
pub fn sample_arrivals(lambda: f64, horizon: f64, seed: u64) -> ArrivalSchedule {
    assert!(lambda >= 0.0 && horizon > 0.0);
    let mut schedule = ArrivalSchedule::default();
    if lambda == 0.0 {
        return schedule;
    }
    let mut rng = rng_from(seed);
    let gap = Exp::new(lambda).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t > horizon {
            break;
        }
        schedule.times.push(t);
        schedule.sides.push(coin(&mut rng));
    }
    schedule
}

/// Exactly `count` arrivals: sorted uniform instants on `[0, window]`, which
/// is the law of a Poisson process conditioned on `count` events in the window.
pub fn fixed_count_arrivals(count: usize, window: f64, seed: u64) -> ArrivalSchedule {
    assert!(window > 0.0);
    let mut rng = rng_from(seed);
    let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * window).collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    times.dedup();
    let sides = times.iter().map(|_| coin(&mut rng)).collect();
    ArrivalSchedule { times, sides }
}
