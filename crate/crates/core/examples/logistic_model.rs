//! Fit the built-in logistic model and check held-out accuracy.
use smart_audit::dataset::split;
use smart_audit::model::{fit_logistic, LogisticConfig};
use smart_audit::synth::{gen_recidivism, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 5000,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let (train, test) = split(&ds, 0.3, 1)?;
    let model = fit_logistic(&train, &LogisticConfig::default())?;
    let preds = model.predict(&test)?;
    let labels = test.labels()?;
    let acc = preds.correctness(&labels).iter().map(|&c| c as f64).sum::<f64>() / labels.len() as f64;
    println!("train {} rows, test {} rows, held-out accuracy {acc:.3}", train.n_rows(), test.n_rows());
    Ok(())
}
