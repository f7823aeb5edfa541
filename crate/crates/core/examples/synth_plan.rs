//! Writes a synthetic plan and its ground truth.
//!
//! `cargo run --example synth_plan -- out.png [doors] [seed]`

use beaconplan::synth::{generate_plan, PlanConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let out = args.get(1).map(String::as_str).unwrap_or("plan.png");
    let doors = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let plan = generate_plan(&PlanConfig { doors, seed, ..PlanConfig::default() })?;
    plan.image.save_png(out)?;
    println!("{}", serde_json::to_string_pretty(&plan.truth)?);
    Ok(())
}
