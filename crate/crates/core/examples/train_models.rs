//! Retrains the bundled classifiers: `cargo run --release --example train_models > models/default.json`

use beaconplan::learn::{train_default_models, ModelSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let models = train_default_models(seed)?;
    println!("{}", ModelSet { models }.to_json()?);
    Ok(())
}
