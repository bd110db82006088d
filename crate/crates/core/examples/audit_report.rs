//! Full audit with a scripted provider, printed as the markdown report.
//!
//! cargo run --example audit_report -- [machine]
use smart_audit::audit::run_audit;
use smart_audit::model::corrupt_on_slice;
use smart_audit::predicate::{eval_predicate, parse_predicate};
use smart_audit::report::{render_markdown, to_machine};
use smart_audit::synth::{fit_and_predict, gen_recidivism, subgroup_provider, ExperimentSettings, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 4000,
        seed: 8,
        ..SynthConfig::default()
    })?;
    let settings = ExperimentSettings::default();
    let mut fitted = fit_and_predict(&ds, &settings, 8)?;
    let planted = parse_predicate("age >= 60", &fitted.test)?;
    let slice = eval_predicate(&planted, &fitted.test)?;
    fitted.predictions = corrupt_on_slice(&fitted.predictions, &slice, 0.8, 0.5, 8)?;

    let mut provider = subgroup_provider(&fitted.test);
    let report = run_audit(&fitted.test, &fitted.predictions, &settings.audit, &mut provider)?;
    if std::env::args().nth(1).as_deref() == Some("machine") {
        print!("{}", to_machine(&report));
    } else {
        print!("{}", render_markdown(&report));
    }
    Ok(())
}
