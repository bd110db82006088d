//! Parse, render and evaluate slice predicates.
use smart_audit::predicate::{eval_predicate, normalize_operators, parse_predicate, parse_unchecked};
use smart_audit::synth::{gen_recidivism, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 1000,
        ..SynthConfig::default()
    })?;
    for text in [
        "age >= 60",
        "income in [\"low\", \"medium\"] && gender == \"male\"",
        "(race == \"black\") or (education == \"low\" and age < 30)",
        "recidivism == \"yes\"",
    ] {
        // provider replies may use && and ||
        let p = parse_predicate(&normalize_operators(text), &ds)?;
        let slice = eval_predicate(&p, &ds)?;
        println!("{:<60} {:>4} rows  {} criteria", p.render(), slice.len(), p.count_criteria());
    }

    // schema checks catch unknown columns and bad operands
    for bad in ["height > 2", "gender > \"male\"", "age == \"old\""] {
        match parse_predicate(bad, &ds) {
            Ok(_) => println!("{bad}: accepted"),
            Err(e) => println!("{bad}: {e}"),
        }
    }
    println!("{:?}", parse_unchecked("x > -1.5 and y in [1, 2]")?);
    Ok(())
}
