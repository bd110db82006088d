//! Metric tables for a few slices of a fitted model.
use smart_audit::metrics::{consistency_check, slice_metrics};
use smart_audit::predicate::{eval_predicate, parse_predicate};
use smart_audit::synth::{fit_and_predict, gen_recidivism, ExperimentSettings, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 3000,
        seed: 6,
        ..SynthConfig::default()
    })?;
    let fitted = fit_and_predict(&ds, &ExperimentSettings::default(), 6)?;
    println!("{:<40} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7}", "slice", "n", "support", "dY", "dAcc", "OR_acc", "wr_y");
    for q in ["age >= 60", "income == \"low\"", "gender == \"female\" and race == \"black\""] {
        let slice = eval_predicate(&parse_predicate(q, &fitted.test)?, &fitted.test)?;
        let m = slice_metrics(&slice, &fitted.labels, &fitted.predictions, true)?;
        assert!(consistency_check(&m, fitted.labels.len()).is_empty());
        println!(
            "{:<40} {:>5} {:>7.2} {:>7.3} {:>7.3} {:>7.2} {:>7.3}",
            q,
            m.group_size,
            m.support,
            m.outcome_diff,
            m.accuracy_diff,
            m.odds_ratio_acc.unwrap_or(f64::NAN),
            m.weighted_relative_y
        );
        if let Some(c) = &m.conventional {
            println!("{:<40} conventional odds ratio (acc) {:.2}", "", c.odds_ratio_acc.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
