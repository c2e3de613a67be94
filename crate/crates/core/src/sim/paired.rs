//! Two-pass experiment protocol: each pedestrian realization is driven
//! through once by the automated vehicle and once by the human baseline.

use std::sync::Arc;

use rayon::prelude::*;

use super::{run_episode, EpisodeResult, SimConfig, SimError, WalkSource};
use crate::agents::{ArrivalSchedule, StrategySpec, WalkSpeedModel};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedResult {
    pub index: usize,
    pub schedule: ArrivalSchedule,
    pub av: EpisodeResult,
    pub human: EpisodeResult,
}

/// Runs `n` paired experiments on the current rayon pool.
///
/// Experiment `i` draws its schedule from `derive_seed(master, "schedule", i)`
/// and its walking-speed seed from `derive_seed(master, "walk", i)`. Walking
/// speeds are decided during the automated-vehicle pass and replayed in the
/// human pass; a pedestrian the first pass never saw (because that episode
/// ended early) decides against the human vehicle with the same seed.
pub fn run_paired_experiments(
    config: &SimConfig,
    av: &StrategySpec,
    human: &StrategySpec,
    walk_model: Arc<WalkSpeedModel>,
    n: usize,
    master_seed: u64,
) -> Result<Vec<PairedResult>, SimError> {
    config.validate()?;
    if n == 0 {
        return Err(SimError::Config("at least one experiment is required".into()));
    }
    for spec in [av, human] {
        if let StrategySpec::Human(p) = spec {
            config.check_update_interval(p.settings.update_interval)?;
        }
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let schedule = config.schedule(derive_seed(master_seed, "schedule", i as u64));
            let walk_seed = derive_seed(master_seed, "walk", i as u64);
            let first = WalkSource::decide(Arc::clone(&walk_model), walk_seed);
            let av_result = run_episode(config, av.build().as_mut(), &schedule, &first, false)?;
            let second = WalkSource { preset: av_result.walk_speeds.clone(), ..first };
            let human_result = run_episode(config, human.build().as_mut(), &schedule, &second, false)?;
            Ok(PairedResult { index: i, schedule, av: av_result, human: human_result })
        })
        .collect()
}
