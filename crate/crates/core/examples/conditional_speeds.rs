//! Conditional walking-speed and desired vehicle-speed distributions.
//!
//! ```text
//! cargo run --release --example conditional_speeds
//! ```

use crosswalk::agents::{HumanDriverParams, HumanDriverSettings, WalkSpeedModel};
use crosswalk::ingest::reference_generator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = reference_generator();
    let walk = WalkSpeedModel::new(&model)?;

    println!("walking speed given the approaching vehicle (mode and mean of v_p)");
    println!("    R     v   mode   mean");
    for (r, v) in [(60.0, 6.0), (30.0, 5.0), (15.0, 3.0), (8.0, 1.0), (8.0, 0.0)] {
        let (dist, fallback) = walk.distribution(r, v);
        let mode = dist.mode_in(0.0, 3.0)?;
        let mean: f64 = dist.weights().iter().zip(dist.components()).map(|(w, c)| w * c.mean()[0]).sum();
        println!("{r:>5} {v:>5} {mode:>6.3} {mean:>6.3}{}", if fallback { "  (unconditional)" } else { "" });
    }

    // the v_p density at one state, tabulated
    let dist = model.condition(&[0, 1], &[1.0 / 20.0, 4.0])?;
    let vp = dist.marginalize(&[0])?;
    println!("\np(v_p | R = 20, v = 4)");
    for i in 0..=12 {
        let x = 0.25 * i as f64;
        let p = vp.density(&[x])?;
        println!("{x:>5.2} {p:>7.4} {}", "#".repeat((p * 20.0).round() as usize));
    }

    let human = HumanDriverParams::new(model, HumanDriverSettings::default())?;
    println!("\ndesired vehicle speed (mode of v | R, v_p, 1/T_adv)");
    for (r, v_p, t_adv) in [(40.0, 1.4, 4.0), (25.0, 1.4, 1.5), (12.0, 1.0, 0.8), (12.0, 1.8, 5.0)] {
        println!("R {r:>4}  v_p {v_p:.1}  T_adv {t_adv:.1}  ->  {:.2} m/s", human.desired_speed(r, v_p, 1.0 / t_adv)?);
    }
    Ok(())
}
