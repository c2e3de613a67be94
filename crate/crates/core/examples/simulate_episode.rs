//! One episode with Poisson arrivals, dumped as a trajectory table.
//!
//! ```text
//! cargo run --release --example simulate_episode [strategy] [seed]
//! ```
//! `strategy` is `soft_yield` (default), `human` or `cruise`.

use std::sync::Arc;

use crosswalk::agents::{HumanDriverParams, HumanDriverSettings, SoftYieldParams, StrategySpec, WalkSpeedModel};
use crosswalk::ingest::reference_generator;
use crosswalk::sim::{run_episode, write_trajectory_csv, ArrivalMode, SimConfig, WalkSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let strategy = args.next().unwrap_or_else(|| "soft_yield".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);

    let model = reference_generator();
    let walk = Arc::new(WalkSpeedModel::new(&model)?);
    let spec = match strategy.as_str() {
        "human" => StrategySpec::Human(Arc::new(HumanDriverParams::new(model, HumanDriverSettings::default())?)),
        "cruise" => StrategySpec::Cruise,
        _ => StrategySpec::SoftYield(SoftYieldParams::default()),
    };
    // a busy crossing: one pedestrian every 4 s on average
    let config = SimConfig { arrivals: ArrivalMode::Poisson, lambda: 0.25, ..SimConfig::default() };
    let schedule = config.schedule(seed);
    let result = run_episode(&config, spec.build().as_mut(), &schedule, &WalkSource::decide(walk, seed), true)?;

    println!("{} with {} scheduled arrivals", spec.name(), schedule.len());
    println!("outcome {:?}, passing time {:.2} s, walking speeds {:.2?}", result.outcome, result.passing_time, result.walk_speeds);
    let rows = result.trajectory.unwrap_or_default();
    let mut out = Vec::new();
    write_trajectory_csv(&rows, &mut out)?;
    let text = String::from_utf8(out)?;
    println!("\n{} trajectory rows; every 20th:", rows.len());
    for (i, line) in text.lines().enumerate() {
        if i == 0 || i % 20 == 0 {
            println!("{line}");
        }
    }
    Ok(())
}
