//! Data with no covariate-outcome relationship: the feasibility gate versus
//! the data-only search.
use smart_audit::synth::{infeasible_provider, run_scenario_experiment, ExperimentSettings, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kind in [ScenarioKind::Uniform, ScenarioKind::Skewed, ScenarioKind::Interactions] {
        let s = run_scenario_experiment(kind, 2000, 10, 0, &ExperimentSettings::default(), &infeasible_provider)?;
        println!(
            "{kind:?}: gated audit reported slices in {}/{} runs, baseline in {}/{} (mean {:.1} slices)",
            s.smart_runs_with_slices(),
            s.runs,
            s.baseline_runs_with_slices(),
            s.runs,
            s.baseline_slices.iter().sum::<usize>() as f64 / s.runs as f64
        );
    }
    Ok(())
}
