//! Fit truncated mixtures to synthetic observations and pick K by BIC.
//!
//! ```text
//! cargo run --release --example fit_and_select
//! ```

use std::time::Instant;

use crosswalk::ingest::{generate_synthetic, reference_generator};
use crosswalk::mixture::{em_fit, select_components, FitConfig, TruncationBox};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generator = reference_generator();
    let data = generate_synthetic(&generator, 5000, 7)?.data;
    let config = FitConfig { truncation: Some(TruncationBox::positive_orthant(4)), seed: 1, ..FitConfig::default() };

    for k in 1..=4 {
        let start = Instant::now();
        let (model, diag) = em_fit(&data, &config.clone().with_components(k))?;
        println!(
            "K={k}: loglik {:.2} in {} iterations ({} backtracks), {:.2?}",
            diag.final_log_likelihood,
            diag.iterations,
            diag.backtracks,
            start.elapsed()
        );
        let _ = model;
    }

    let selection = select_components(&data, &[1, 2, 3, 4, 5], &config, 0.10)?;
    println!("\n K        BIC   change");
    for p in &selection.curve {
        println!("{:>2} {:>10.1}   {}", p.k, p.bic.unwrap_or(f64::NAN), p.change_rate.map(|c| format!("{:+.4}", c)).unwrap_or_default());
    }
    println!("selected K = {}", selection.selected_k);
    Ok(())
}
