//! Data-only slice search, exhaustive and beam, on a planted failure.
use smart_audit::baseline::{beam_search, exhaustive_search, BaselineConfig};
use smart_audit::model::corrupt_on_slice;
use smart_audit::predicate::{eval_predicate, parse_predicate};
use smart_audit::synth::{add_irrelevant_features, fit_and_predict, gen_recidivism, ExperimentSettings, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 4000,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let ds = add_irrelevant_features(&ds, 4, 2)?;
    let mut fitted = fit_and_predict(&ds, &ExperimentSettings::default(), 2)?;
    let planted = parse_predicate("income == \"low\"", &fitted.test)?;
    let slice = eval_predicate(&planted, &fitted.test)?;
    fitted.predictions = corrupt_on_slice(&fitted.predictions, &slice, 0.7, 0.5, 2)?;

    let config = BaselineConfig::default();
    let all = exhaustive_search(&fitted.test, &fitted.labels, &fitted.predictions, &config)?;
    println!(
        "exhaustive: {} candidates, {} tested, {} flagged",
        all.candidates_enumerated,
        all.tests_performed,
        all.flagged().len()
    );
    for r in all.flagged_failures() {
        println!("  {:<55} |dAcc|={:.3} p={:.3}", r.predicate.render(), r.delta_acc, r.p_value);
    }
    let beam = beam_search(&fitted.test, &fitted.labels, &fitted.predictions, &config)?;
    println!("beam: {} tested, {} flagged", beam.tests_performed, beam.flagged().len());
    Ok(())
}
