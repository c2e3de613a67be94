//! Pedestrian arrival schedules from a Poisson process.
//!
//! ```text
//! cargo run --release --example poisson_arrivals
//! ```

use crosswalk::agents::{sample_arrivals, Side};

fn main() {
    let lambda = 250.0 / 3600.0;
    let horizon = 3600.0;
    let schedule = sample_arrivals(lambda, horizon, 2024);
    let gaps: Vec<f64> = schedule.times.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let near = schedule.sides.iter().filter(|s| **s == Side::Near).count();
    println!("{} arrivals in one hour (expected {:.0})", schedule.len(), lambda * horizon);
    println!("mean inter-arrival {mean_gap:.2} s (expected {:.2} s)", 1.0 / lambda);
    println!("near side {near}, far side {}", schedule.len() - near);
    println!("first arrivals:");
    for (t, s) in schedule.times.iter().zip(&schedule.sides).take(5) {
        println!("  {t:>8.2} s  {s:?}");
    }

    // counts per minute: mean and variance should both be close to 60·λ
    let mut counts = vec![0usize; 60];
    for t in &schedule.times {
        counts[((t / 60.0) as usize).min(59)] += 1;
    }
    let m = counts.iter().sum::<usize>() as f64 / 60.0;
    let var = counts.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / 59.0;
    println!("per-minute counts: mean {m:.2}, variance {var:.2} (Poisson: both {:.2})", 60.0 * lambda);
}
