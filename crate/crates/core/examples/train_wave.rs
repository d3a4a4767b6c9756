//! Trains the wave model on random 64x64 oscillator domains and prints one
//! metrics line per step.
//!
//! `cargo run --release --example train_wave -- [steps] [spatial_order] [checkpoint]`

use std::path::PathBuf;

use hermite_pde::field::PdeKind;
use hermite_pde::training::{median, train, TrainConfig};

fn main() -> hermite_pde::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = TrainConfig::default_for(PdeKind::Wave);
    config.steps = args.first().map_or(Ok(500), |s| s.parse()).expect("steps must be an integer");
    config.spatial_order = args.get(1).map_or(Ok(2), |s| s.parse()).expect("order must be an integer");
    let checkpoint = args.get(2).map(PathBuf::from);

    let mut out = std::io::stdout();
    let outcome = train(config, Some(&mut out), checkpoint.as_deref())?;
    let tot: Vec<f64> = outcome.metrics.iter().map(|m| m.l_tot).collect();
    let k = tot.len().min(50);
    println!(
        "median L_tot first {k}: {:.4e}, last {k}: {:.4e}",
        median(&tot[..k]),
        median(&tot[tot.len() - k..])
    );
    Ok(())
}
