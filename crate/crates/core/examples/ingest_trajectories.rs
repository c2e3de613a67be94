//! Turn recorded passing events into model observations.
//!
//! Builds a small trajectory log in memory (two events sampled at 10 Hz),
//! parses it, and resamples every 0.5 s into `(1/R, v, v_p, 1/T_adv)`.
//!
//! ```text
//! cargo run --release --example ingest_trajectories
//! ```

use std::fmt::Write;

use crosswalk::ingest::{extract_all, pedestrian_speeds, read_trajectory_csv};
use crosswalk::TtcConvention;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = String::from("event_id,t,R,L,v\n");
    // event a: vehicle at 6 m/s easing off, pedestrian walking 1.3 m/s across 9 m
    for i in 0..=40 {
        let t = i as f64 * 0.1;
        let v = 6.0 - 0.4 * t;
        let r = 35.0 - (6.0 * t - 0.2 * t * t);
        writeln!(log, "a,{t:.1},{r:.4},{:.4},{v:.4}", 9.0 - 1.3 * t)?;
    }
    // event b: slower vehicle, pedestrian already halfway, 1.1 m/s
    for i in 0..=30 {
        let t = i as f64 * 0.1;
        writeln!(log, "b,{t:.1},{:.4},{:.4},3.0", 20.0 - 3.0 * t, 4.5 - 1.1 * t)?;
    }

    let events = read_trajectory_csv(log.as_bytes())?;
    for e in &events {
        let vp = pedestrian_speeds(&e.rows);
        println!("event {}: {} rows, walking speed ≈ {:.2} m/s", e.event_id, e.rows.len(), vp[vp.len() / 2]);
    }

    let (obs, empty) = extract_all(&events, 0.5, TtcConvention::DistanceOverSpeed)?;
    println!("\n{} observations, {} empty events", obs.len(), empty.len());
    println!("   inv_R       v     v_p  inv_T_adv");
    for row in obs.data.row_iter() {
        println!("{:>8.4} {:>7.3} {:>7.3} {:>10.4}", row[0], row[1], row[2], row[3]);
    }
    let mut csv = Vec::new();
    obs.write_csv(&mut csv)?;
    println!("\nfirst CSV lines:\n{}", String::from_utf8(csv)?.lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
