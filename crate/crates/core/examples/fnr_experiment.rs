//! Planted-failure detection: corrupt covariate groups and count how many
//! each searcher misses.
//!
//! cargo run --example fnr_experiment -- [runs]
use smart_audit::synth::{run_fnr_experiment, fnr_provider, ExperimentSettings, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let config = SynthConfig::default();
    let settings = ExperimentSettings::fnr();
    for n in 1..=3 {
        let s = run_fnr_experiment(n, runs, &config, &settings, &fnr_provider)?;
        println!(
            "n_corrupted={n}  smart FNR {:.2} ± {:.2}  baseline FNR {:.2} ± {:.2}",
            s.smart.mean, s.smart.sd, s.baseline.mean, s.baseline.sd
        );
    }
    Ok(())
}
