//! Paired experiments: Soft-Yield against the model-driven human baseline.
//!
//! ```text
//! cargo run --release --example paired_evaluation [experiments]
//! ```

use std::sync::Arc;

use crosswalk::agents::{HumanDriverParams, HumanDriverSettings, SoftYieldParams, StrategySpec, WalkSpeedModel};
use crosswalk::eval::{compute_report, Gates, PairOutcome};
use crosswalk::ingest::reference_generator;
use crosswalk::sim::{run_paired_experiments, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let model = reference_generator();
    let walk = Arc::new(WalkSpeedModel::new(&model)?);
    let human = StrategySpec::Human(Arc::new(HumanDriverParams::new(model, HumanDriverSettings::default())?));
    let config = SimConfig::default();
    let gates = Some(Gates { mu_0: 0.9, kappa_0: 0.05 });

    for av in [StrategySpec::SoftYield(SoftYieldParams::default()), StrategySpec::Cruise, human.clone()] {
        let pairs = run_paired_experiments(&config, &av, &human, Arc::clone(&walk), n, 42)?;
        let outcomes: Vec<PairOutcome> = pairs.iter().map(PairOutcome::from).collect();
        let r = compute_report(&outcomes, gates)?;
        let f = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<11} mu {}  cv {}  kappa {:.3}  excluded {:>3}  gates {}",
            av.name(),
            f(r.mu),
            f(r.cv),
            r.kappa,
            r.excluded,
            if r.passed() == Some(true) { "pass" } else { "fail" }
        );
        let checkpoints: Vec<String> =
            [9, 49, 99, 199].iter().filter_map(|&i| r.running_mean.get(i).map(|m| format!("{}:{m:.3}", i + 1))).collect();
        println!("            running mean {}", checkpoints.join("  "));
    }
    Ok(())
}
