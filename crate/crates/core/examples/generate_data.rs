//! Writes a synthetic recidivism dataset and a scripted-provider fixture
//! for trying the `smart` binary.
//!
//! cargo run --example generate_data -- out_dir
use std::fs;
use std::path::PathBuf;

use smart_audit::synth::{gen_recidivism, subgroup_script, covariate_subgroups, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "smart-data".into()));
    fs::create_dir_all(&dir)?;
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 4000,
        seed: 7,
        ..SynthConfig::default()
    })?;
    ds.write_csv(fs::File::create(dir.join("recidivism.csv"))?)?;
    // one refinement round, as the CLI does by default
    let mut script = subgroup_script(&covariate_subgroups(&ds));
    script.insert(1, "Refined: age, income and education drive risk; gender and race may matter through them.".into());
    fs::write(dir.join("fixtures.json"), serde_json::to_string_pretty(&script)?)?;
    fs::write(
        dir.join("hypotheses.jsonl"),
        concat!(
            r#"{"text": "f underperforms on people in their forties", "justification": "Risk is least predictable where age effects cancel.", "operationalization": "age >= 40 and age < 50"}"#,
            "\n",
            r#"{"text": "f underperforms on people with low income", "justification": "Income shifts risk.", "operationalization": "income == \"low\""}"#,
            "\n",
            r#"{"text": "f underperforms for older people", "justification": "Fewer reoffenders among them."}"#,
            "\n"
        ),
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}
