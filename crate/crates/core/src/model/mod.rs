//! The model under test: externally supplied predictions, a built-in
//! logistic regression for hermetic runs, and synthetic corruption of
//! predictions on a slice.

mod logistic;

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::predicate::Slice;

pub use logistic::{fit_logistic, FeatureEncoding, LogisticConfig, LogisticModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training target has a single class")]
    SingleClass,
    #[error("each class needs at least 2 rows, got {zeros} negatives and {ones} positives")]
    TooFewRows { zeros: usize, ones: usize },
    #[error("dataset has no target column")]
    NoTarget,
    #[error("no usable features after dropping constant columns")]
    NoFeatures,
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("predictions have {found} rows, dataset has {expected}")]
    Length { expected: usize, found: usize },
    #[error("prediction file: {0}")]
    File(String),
    #[error(transparent)]
    Data(#[from] crate::dataset::DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    ExternalColumn,
    BuiltinLogistic,
    Corrupted,
}

/// Binary predictions aligned with a dataset's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub values: Vec<u8>,
    pub source: PredictionSource,
}

impl Predictions {
    pub fn new(values: Vec<u8>, source: PredictionSource) -> Result<Self, ModelError> {
        if let Some(&bad) = values.iter().find(|&&v| v > 1) {
            return Err(ModelError::File(format!("prediction value {bad} is not 0/1")));
        }
        Ok(Predictions { values, source })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads predictions from a binary column of `dataset`.
    pub fn from_column(dataset: &Dataset, column: &str) -> Result<Self, ModelError> {
        Ok(Predictions {
            values: dataset.binary_column(column)?,
            source: PredictionSource::ExternalColumn,
        })
    }

    /// Per-row correctness (1 when the prediction equals the label).
    pub fn correctness(&self, labels: &[u8]) -> Vec<u8> {
        self.values
            .iter()
            .zip(labels)
            .map(|(p, y)| (p == y) as u8)
            .collect()
    }

    pub fn check_len(&self, n_rows: usize) -> Result<(), ModelError> {
        if self.len() != n_rows {
            return Err(ModelError::Length {
                expected: n_rows,
                found: self.len(),
            });
        }
        Ok(())
    }

    /// Reads a single-column CSV with header `prediction`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| ModelError::File(e.to_string()))?;
        if headers.len() != 1 || &headers[0] != "prediction" {
            return Err(ModelError::File(
                "expected a single column with header `prediction`".into(),
            ));
        }
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| ModelError::File(e.to_string()))?;
            values.push(match &rec[0] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(ModelError::File(format!(
                        "line {}: `{other}` is not 0/1",
                        i + 2
                    )))
                }
            });
        }
        Ok(Predictions {
            values,
            source: PredictionSource::ExternalColumn,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)
            .map_err(|e| ModelError::File(format!("{}: {e}", path.display())))?;
        Self::read_csv(f)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "prediction")?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

fn check_probability(p: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ModelError::Probability(p))
    }
}

/// For each slice row, with probability `p` replaces the prediction by an
/// independent Bernoulli(`bernoulli_q`) draw. Rows outside the slice are untouched.
pub fn corrupt_on_slice(
    base: &Predictions,
    slice: &Slice,
    p: f64,
    bernoulli_q: f64,
    seed: u64,
) -> Result<Predictions, ModelError> {
    check_probability(p)?;
    check_probability(bernoulli_q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = base.values.clone();
    for &r in &slice.rows {
        if rng.random_bool(p) {
            values[r] = rng.random_bool(bernoulli_q) as u8;
        }
    }
    Ok(Predictions {
        values,
        source: PredictionSource::Corrupted,
    })
}

/// Replaces the predictions of a uniformly chosen `floor(tau * |slice|)`
/// subset of slice rows with independent fair coin flips.
pub fn corrupt_proportion(
    base: &Predictions,
    slice: &Slice,
    tau: f64,
    seed: u64,
) -> Result<Predictions, ModelError> {
    check_probability(tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (tau * slice.len() as f64).floor() as usize;
    let mut chosen = rand::seq::index::sample(&mut rng, slice.len(), k).into_vec();
    chosen.sort_unstable();
    let mut values = base.values.clone();
    for i in chosen {
        values[slice.rows[i]] = rng.random_bool(0.5) as u8;
    }
    Ok(Predictions {
        values,
        source: PredictionSource::Corrupted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::{CompareOp, Predicate};

    fn slice(rows: Vec<usize>) -> Slice {
        Slice {
            predicate: Predicate::num("x", CompareOp::Ge, 0.0),
            rows,
        }
    }

    fn ones(n: usize) -> Predictions {
        Predictions::new(vec![1; n], PredictionSource::ExternalColumn).unwrap()
    }

    #[test]
    fn zero_corruption_is_identity() {
        let base = ones(100);
        let s = slice((0..50).collect());
        assert_eq!(corrupt_on_slice(&base, &s, 0.0, 0.5, 1).unwrap().values, base.values);
        assert_eq!(corrupt_proportion(&base, &s, 0.0, 1).unwrap().values, base.values);
    }

    #[test]
    fn full_corruption_is_a_fair_coin() {
        let n = 10_000;
        let base = Predictions::new(vec![0; n], PredictionSource::ExternalColumn).unwrap();
        let s = slice((0..n).collect());
        let out = corrupt_on_slice(&base, &s, 1.0, 0.5, 3).unwrap();
        let rate = out.values.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!((rate - 0.5).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn off_slice_rows_are_untouched() {
        let base = Predictions::new(
            (0..200).map(|i| (i % 3 == 0) as u8).collect(),
            PredictionSource::ExternalColumn,
        )
        .unwrap();
        let s = slice((50..120).collect());
        for seed in 0..5 {
            let a = corrupt_on_slice(&base, &s, 0.7, 0.5, seed).unwrap();
            let b = corrupt_proportion(&base, &s, 0.7, seed).unwrap();
            for i in (0..50).chain(120..200) {
                assert_eq!(a.values[i], base.values[i]);
                assert_eq!(b.values[i], base.values[i]);
            }
        }
    }

    #[test]
    fn proportion_resamples_at_most_floor_tau_rows() {
        let n = 1000;
        let base = Predictions::new(vec![0; n], PredictionSource::ExternalColumn).unwrap();
        let s = slice((0..n).collect());
        let out = corrupt_proportion(&base, &s, 0.3, 9).unwrap();
        let flipped = out.values.iter().filter(|&&v| v == 1).count();
        // Only the 300 resampled rows can flip; about half of them do.
        assert!(flipped <= 300);
        assert!(flipped > 100);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let base = ones(3);
        let s = slice(vec![0]);
        assert!(matches!(
            corrupt_on_slice(&base, &s, 1.5, 0.5, 0),
            Err(ModelError::Probability(_))
        ));
        assert!(corrupt_proportion(&base, &s, -0.1, 0).is_err());
    }

    #[test]
    fn prediction_file_round_trips() {
        let p = Predictions::new(vec![0, 1, 1], PredictionSource::ExternalColumn).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(Predictions::read_csv(&buf[..]).unwrap(), p);
        assert!(Predictions::read_csv("pred\n1\n".as_bytes()).is_err());
        assert!(Predictions::read_csv("prediction\n2\n".as_bytes()).is_err());
    }
}
