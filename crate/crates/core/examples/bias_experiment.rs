//! How often the top-ranked failure names a partially corrupted race group.
//!
//! cargo run --release --example bias_experiment -- [runs]
use smart_audit::synth::{run_bias_experiment, subgroup_provider, ExperimentSettings, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let rows = run_bias_experiment(
        &[0.0, 0.05, 0.2],
        runs,
        3,
        &SynthConfig::bias_experiment(),
        &ExperimentSettings::default(),
        &subgroup_provider,
    )?;
    println!("{:>5} {:>9} {:>12} {:>12}", "tau", "corrupted", "P(white)", "P(black)");
    for r in rows {
        println!(
            "{:>5} {:>9} {:>5.2}±{:<5.2} {:>5.2}±{:<5.2}",
            r.tau, r.corrupted, r.p_white.mean, r.p_white.sd, r.p_black.mean, r.p_black.sd
        );
    }
    Ok(())
}
