//! Soft-Yield plans and their effect on a single crossing.
//!
//! ```text
//! cargo run --release --example soft_yield
//! ```

use crosswalk::agents::{resolve_plan, ArrivalSchedule, Cruise, Side, SoftYield, SoftYieldParams};
use crosswalk::sim::{run_episode, SimConfig, WalkSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SoftYieldParams::default();
    let config = SimConfig::default();

    println!("regression deceleration a(v, R)");
    for (v, r) in [(5.0, 30.0), (5.0, 15.0), (8.0, 40.0), (3.0, 10.0)] {
        println!("  v {v:>4}  R {r:>4}  a {:+.5}", params.acceleration(v, r));
    }

    println!("\nresolved plans at v = 5, R = 30");
    for v_p in [0.6, 1.0, 1.4, 1.5, 2.0] {
        let (plan, fallback) = resolve_plan(&params, 5.0, 30.0, v_p, config.l0);
        println!(
            "  v_p {v_p:.1}: a {:+.3} for {:.2} s{}",
            plan.acceleration,
            plan.t1,
            if fallback { "  (full stop)" } else { "" }
        );
    }

    println!("\none near-side pedestrian arriving at t = 0");
    println!("  v_p   cruise              soft-yield");
    for v_p in [0.6, 0.8, 1.0, 1.3, 1.6] {
        let schedule = ArrivalSchedule::new(vec![0.0], vec![Side::Near]);
        let walk = WalkSource::replay(vec![v_p]);
        let c = run_episode(&config, &mut Cruise, &schedule, &walk, false)?;
        let s = run_episode(&config, &mut SoftYield::new(params), &schedule, &walk, false)?;
        println!("  {v_p:.1}  {:<9?} {:>6.2} s   {:<9?} {:>6.2} s", c.outcome, c.passing_time, s.outcome, s.passing_time);
    }
    Ok(())
}
