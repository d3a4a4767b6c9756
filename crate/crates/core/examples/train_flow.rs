//! Trains the flow model on random 128x64 channel domains. Writes the
//! metrics log to stdout and the final checkpoint to the given path.
//!
//! `cargo run --release --example train_flow -- [steps] [checkpoint] [config.json]`

use std::path::{Path, PathBuf};

use hermite_pde::field::PdeKind;
use hermite_pde::training::{median, train, TrainConfig};

fn main() -> hermite_pde::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = match args.get(2) {
        Some(path) => TrainConfig::from_json_file(Path::new(path))?,
        None => TrainConfig::default_for(PdeKind::Flow),
    };
    if let Some(steps) = args.first() {
        config.steps = steps.parse().expect("steps must be an integer");
    }
    let checkpoint = PathBuf::from(args.get(1).map_or("flow.hpck", String::as_str));

    let mut out = std::io::stdout();
    let outcome = train(config, Some(&mut out), Some(&checkpoint))?;
    let tot: Vec<f64> = outcome.metrics.iter().map(|m| m.l_tot).collect();
    let k = tot.len().min(50);
    eprintln!(
        "median L_tot first {k}: {:.4e}, last {k}: {:.4e}; checkpoint at {}",
        median(&tot[..k]),
        median(&tot[tot.len() - k..]),
        checkpoint.display()
    );
    Ok(())
}
