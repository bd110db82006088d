use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelError, PredictionSource, Predictions};
use crate::dataset::{ColumnData, Dataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            seed: 0,
            epochs: 300,
            learning_rate: 0.5,
        }
    }
}

/// How one encoded feature is derived from a dataset column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureEncoding {
    /// Numeric or boolean column used as-is (booleans as 0/1).
    Raw { column: String },
    /// Indicator for a categorical level.
    OneHot { column: String, level: String },
}

impl FeatureEncoding {
    fn column(&self) -> &str {
        match self {
            FeatureEncoding::Raw { column } | FeatureEncoding::OneHot { column, .. } => column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub features: Vec<FeatureEncoding>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// Encoded features dropped at fit time for having zero variance.
    pub dropped: Vec<String>,
    /// Mean training log-loss after each epoch.
    pub loss_history: Vec<f64>,
}

fn candidate_features(ds: &Dataset) -> Vec<FeatureEncoding> {
    let target = ds.target();
    let mut out = Vec::new();
    for col in ds.columns() {
        if Some(col.name()) == target {
            continue;
        }
        match col.data() {
            ColumnData::Numeric(_) | ColumnData::Boolean { .. } => out.push(FeatureEncoding::Raw {
                column: col.name().to_string(),
            }),
            ColumnData::Categorical { levels, .. } => {
                out.extend(levels.iter().map(|l| FeatureEncoding::OneHot {
                    column: col.name().to_string(),
                    level: l.clone(),
                }))
            }
        }
    }
    out
}

/// Raw (unstandardized) values of one encoded feature.
fn raw_feature(ds: &Dataset, f: &FeatureEncoding) -> Result<Vec<f64>, ModelError> {
    let col = ds
        .column(f.column())
        .ok_or_else(|| ModelError::Schema(format!("missing column `{}`", f.column())))?;
    match (f, col.data()) {
        (FeatureEncoding::Raw { .. }, ColumnData::Numeric(v)) => Ok(v.clone()),
        (FeatureEncoding::Raw { .. }, ColumnData::Boolean { values, .. }) => {
            Ok(values.iter().map(|&b| b as u8 as f64).collect())
        }
        (FeatureEncoding::OneHot { level, .. }, ColumnData::Categorical { levels, codes }) => {
            match levels.iter().position(|l| l == level) {
                Some(k) => Ok(codes.iter().map(|&c| (c as usize == k) as u8 as f64).collect()),
                None => Ok(vec![0.0; codes.len()]),
            }
        }
        _ => Err(ModelError::Schema(format!(
            "column `{}` changed type since training",
            f.column()
        ))),
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean log-loss, computed stably from the linear scores.
fn log_loss(scores: &[f64], y: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            // -log sigmoid(s) with s = z for positives and -z for negatives
            let s = if t == 1 { z } else { -z };
            if s > 0.0 {
                (-s).exp().ln_1p()
            } else {
                -s + s.exp().ln_1p()
            }
        })
        .sum();
    total / scores.len() as f64
}

fn scores(x: &[Vec<f64>], w: &[f64], b: f64, n: usize) -> Vec<f64> {
    let mut s = vec![b; n];
    for (col, &wj) in x.iter().zip(w) {
        for (si, &xi) in s.iter_mut().zip(col) {
            *si += wj * xi;
        }
    }
    s
}

/// Full-batch gradient descent on standardized features. A step that would
/// raise the training loss is retried with half the step size, so the loss
/// history never increases.
pub fn fit_logistic(train: &Dataset, config: &LogisticConfig) -> Result<LogisticModel, ModelError> {
    if train.target().is_none() {
        return Err(ModelError::NoTarget);
    }
    let y = train.labels()?;
    let ones = y.iter().filter(|&&v| v == 1).count();
    let zeros = y.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(ModelError::SingleClass);
    }
    if ones < 2 || zeros < 2 {
        return Err(ModelError::TooFewRows { zeros, ones });
    }
    let n = y.len();

    let mut features = Vec::new();
    let mut columns = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut dropped = Vec::new();
    for f in candidate_features(train) {
        let raw = raw_feature(train, &f)?;
        let mean = raw.iter().sum::<f64>() / n as f64;
        let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std <= 1e-12 {
            let label = match &f {
                FeatureEncoding::Raw { column } => column.clone(),
                FeatureEncoding::OneHot { column, level } => format!("{column}={level}"),
            };
            warn!("dropping zero-variance feature `{label}`");
            dropped.push(label);
            continue;
        }
        columns.push(raw.iter().map(|v| (v - mean) / std).collect::<Vec<_>>());
        features.push(f);
        means.push(mean);
        stds.push(std);
    }
    if features.is_empty() {
        return Err(ModelError::NoFeatures);
    }

    let d = features.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w: Vec<f64> = (0..d).map(|_| init.sample(&mut rng)).collect();
    let mut b = 0.0;
    let mut lr = config.learning_rate;
    let mut s = scores(&columns, &w, b, n);
    let mut loss = log_loss(&s, &y);
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let resid: Vec<f64> = s.iter().zip(&y).map(|(&z, &t)| sigmoid(z) - t as f64).collect();
        let gb = resid.iter().sum::<f64>() / n as f64;
        let gw: Vec<f64> = columns
            .iter()
            .map(|col| col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n as f64)
            .collect();
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wj, g)| wj - lr * g).collect();
            let b_new = b - lr * gb;
            let s_new = scores(&columns, &w_new, b_new, n);
            let loss_new = log_loss(&s_new, &y);
            if loss_new <= loss || lr < 1e-12 {
                if loss_new <= loss {
                    w = w_new;
                    b = b_new;
                    s = s_new;
                    loss = loss_new;
                }
                break;
            }
            lr *= 0.5;
        }
        history.push(loss);
    }

    Ok(LogisticModel {
        features,
        weights: w,
        bias: b,
        feature_means: means,
        feature_stds: stds,
        dropped,
        loss_history: history,
    })
}

impl LogisticModel {
    /// Linear scores on the standardized encoding of `data`.
    pub fn decision_function(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        let n = data.n_rows();
        let mut s = vec![self.bias; n];
        let mut warned = Vec::<&str>::new();
        for (j, f) in self.features.iter().enumerate() {
            if let FeatureEncoding::OneHot { column, .. } = f {
                if !warned.contains(&column.as_str()) && has_unseen_level(self, data, column) {
                    warn!("column `{column}` has levels unseen in training; encoded as all zeros");
                    warned.push(column);
                }
            }
            let raw = raw_feature(data, f)?;
            let (m, sd, wj) = (self.feature_means[j], self.feature_stds[j], self.weights[j]);
            for (si, x) in s.iter_mut().zip(raw) {
                *si += wj * (x - m) / sd;
            }
        }
        Ok(s)
    }

    pub fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        Ok(self.decision_function(data)?.into_iter().map(sigmoid).collect())
    }

    /// Class 1 when the sigmoid score is at least 0.5.
    pub fn predict(&self, data: &Dataset) -> Result<Predictions, ModelError> {
        let values = self
            .predict_proba(data)?
            .into_iter()
            .map(|p| (p >= 0.5) as u8)
            .collect();
        Ok(Predictions {
            values,
            source: PredictionSource::BuiltinLogistic,
        })
    }
}

fn has_unseen_level(model: &LogisticModel, data: &Dataset, column: &str) -> bool {
    let Some(ColumnData::Categorical { levels, .. }) = data.column(column).map(|c| c.data()) else {
        return false;
    };
    levels.iter().any(|l| {
        !model.features.iter().any(|f| {
            matches!(f, FeatureEncoding::OneHot { column: c, level } if c == column && level == l)
        })
    })
}
