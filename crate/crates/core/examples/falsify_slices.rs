//! Permutation tests over candidate slices with Bonferroni correction, and
//! what happens to family-wise error without it.
use smart_audit::falsify::{fwer_naive, run_falsification, Correction, SliceCandidate, TestConfig};
use smart_audit::model::corrupt_on_slice;
use smart_audit::predicate::{eval_predicate, parse_predicate};
use smart_audit::synth::{fit_and_predict, gen_recidivism, run_fwer_simulation, ExperimentSettings, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 4000,
        seed: 4,
        ..SynthConfig::default()
    })?;
    let mut fitted = fit_and_predict(&ds, &ExperimentSettings::default(), 4)?;
    let planted = parse_predicate("education == \"low\"", &fitted.test)?;
    let slice = eval_predicate(&planted, &fitted.test)?;
    fitted.predictions = corrupt_on_slice(&fitted.predictions, &slice, 0.6, 0.5, 4)?;

    let queries = [
        "education == \"low\"",
        "gender == \"female\"",
        "age >= 50",
        "race == \"other\" and income == \"high\"",
        "income == \"low\"",
    ];
    let candidates = queries
        .iter()
        .enumerate()
        .map(|(id, q)| Ok(SliceCandidate { id, predicate: parse_predicate(q, &fitted.test)? }))
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    let config = TestConfig::default();
    let outcome = run_falsification(&candidates, &fitted.test, &fitted.labels, &fitted.predictions, &config)?;
    println!("alpha {} over {} tests -> {:.4}", config.alpha, outcome.tests_performed(), config.adjusted_alpha(outcome.tests_performed()));
    for r in &outcome.results {
        println!(
            "H{} {:<45} p={:.3} |dAcc|={:.3} {:?}",
            r.hypothesis_id,
            r.predicate.render(),
            r.p_value,
            r.delta_acc,
            r.evidence
        );
    }

    println!("\nP(any false rejection) for m = 20 at alpha 0.05: {:.4}", fwer_naive(20, 0.05));
    let sim = run_fwer_simulation(200, 20, 500, 0.05, 500, 0)?;
    println!("simulated: uncorrected {:.3}, {:?} {:.3}", sim.uncorrected, Correction::Bonferroni, sim.bonferroni);
    Ok(())
}
