//! Descriptive metrics for a slice relative to its dataset.

use serde::{Deserialize, Serialize};

use crate::model::Predictions;
use crate::predicate::Slice;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("slice is empty")]
    EmptySlice,
    #[error("slice covers the whole dataset")]
    EmptyComplement,
    #[error("labels and predictions differ in length")]
    Length,
}

/// Undefined cells (e.g. odds ratios with a zero denominator) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub group_size: usize,
    pub support: f64,
    pub num_criteria: usize,
    pub outcome_diff: f64,
    pub accuracy_diff: f64,
    pub odds_ratio_outcome: Option<f64>,
    pub odds_ratio_acc: Option<f64>,
    pub lift_outcome: Option<f64>,
    pub lift_acc: Option<f64>,
    pub weighted_relative_y: f64,
    pub weighted_relative_acc: f64,
    /// Conventional odds ratios, filled only when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conventional: Option<ConventionalOdds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalOdds {
    pub odds_ratio_outcome: Option<f64>,
    pub odds_ratio_acc: Option<f64>,
}

/// `p1(1-p1) / (p0(1-p0))`, as the report defines it.
pub fn report_odds_ratio(p1: f64, p0: f64) -> Option<f64> {
    let den = p0 * (1.0 - p0);
    (den != 0.0).then(|| p1 * (1.0 - p1) / den)
}

/// `[p1/(1-p1)] / [p0/(1-p0)]`.
pub fn conventional_odds_ratio(p1: f64, p0: f64) -> Option<f64> {
    let den = p0 * (1.0 - p1);
    (den != 0.0).then(|| p1 * (1.0 - p0) / den)
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

pub fn slice_metrics(
    slice: &Slice,
    labels: &[u8],
    predictions: &Predictions,
    conventional: bool,
) -> Result<SliceMetrics, MetricsError> {
    let n = labels.len();
    if predictions.len() != n {
        return Err(MetricsError::Length);
    }
    let n_s = slice.len();
    if n_s == 0 {
        return Err(MetricsError::EmptySlice);
    }
    if n_s >= n {
        return Err(MetricsError::EmptyComplement);
    }
    let correct = predictions.correctness(labels);
    let sum = |v: &[u8]| v.iter().map(|&x| x as u64).sum::<u64>();
    let sum_in = |v: &[u8]| slice.rows.iter().map(|&r| v[r] as u64).sum::<u64>();
    let (n_f, s_f, r_f) = (n as f64, n_s as f64, (n - n_s) as f64);

    let (y_tot, y_in) = (sum(labels), sum_in(labels));
    let (a_tot, a_in) = (sum(&correct), sum_in(&correct));
    let y_all = y_tot as f64 / n_f;
    let y_s = y_in as f64 / s_f;
    let y_r = (y_tot - y_in) as f64 / r_f;
    let a_all = a_tot as f64 / n_f;
    let a_s = a_in as f64 / s_f;
    let a_r = (a_tot - a_in) as f64 / r_f;

    let support = n_s as f64 / n as f64;
    let outcome_diff = (y_all - y_s).abs();
    let accuracy_diff = (a_all - a_s).abs();
    Ok(SliceMetrics {
        group_size: n_s,
        support,
        num_criteria: slice.predicate.count_criteria(),
        outcome_diff,
        accuracy_diff,
        odds_ratio_outcome: report_odds_ratio(y_s, y_r),
        odds_ratio_acc: report_odds_ratio(a_s, a_r),
        lift_outcome: ratio(y_s, y_all),
        lift_acc: ratio(a_s, a_all),
        weighted_relative_y: support * outcome_diff,
        weighted_relative_acc: support * accuracy_diff,
        conventional: conventional.then(|| ConventionalOdds {
            odds_ratio_outcome: conventional_odds_ratio(y_s, y_r),
            odds_ratio_acc: conventional_odds_ratio(a_s, a_r),
        }),
    })
}

/// Internal-consistency violations, each naming the offending field.
pub fn consistency_check(m: &SliceMetrics, dataset_size: usize) -> Vec<String> {
    let mut out = Vec::new();
    if !(0.0..=1.0).contains(&m.support) {
        out.push(format!("support: {} outside [0, 1]", m.support));
    }
    if (m.support * dataset_size as f64 - m.group_size as f64).abs() > 1.0 {
        out.push(format!(
            "support: {} x {dataset_size} does not match group_size {}",
            m.support, m.group_size
        ));
    }
    if m.num_criteria < 1 {
        out.push("num_criteria: must be at least 1".into());
    }
    if m.weighted_relative_y != m.support * m.outcome_diff {
        out.push("weighted_relative_y: not support x outcome_diff".into());
    }
    if m.weighted_relative_acc != m.support * m.accuracy_diff {
        out.push("weighted_relative_acc: not support x accuracy_diff".into());
    }
    if m.accuracy_diff == 0.0 {
        if let Some(l) = m.lift_acc {
            if l != 1.0 {
                out.push(format!("lift_acc: {l} with zero accuracy_diff"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PredictionSource;
    use crate::predicate::{CompareOp, Predicate};

    #[test]
    fn odds_ratio_formula() {
        assert_eq!(report_odds_ratio(0.5, 0.5), Some(1.0));
        assert!((report_odds_ratio(0.9, 0.5).unwrap() - 0.36).abs() < 1e-12);
        assert_eq!(report_odds_ratio(0.3, 0.0), None);
        assert_eq!(report_odds_ratio(0.3, 1.0), None);
        assert!((conventional_odds_ratio(0.9, 0.5).unwrap() - 9.0).abs() < 1e-12);
    }

    fn fixture() -> (Slice, Vec<u8>, Predictions) {
        let labels = vec![1, 1, 0, 0, 1, 0, 1, 0];
        let preds = Predictions::new(vec![1, 0, 0, 1, 1, 0, 1, 1], PredictionSource::ExternalColumn)
            .unwrap();
        let slice = Slice {
            predicate: Predicate::num("a", CompareOp::Lt, 1.0).and(Predicate::num("b", CompareOp::Lt, 1.0)),
            rows: vec![0, 1, 2],
        };
        (slice, labels, preds)
    }

    #[test]
    fn computes_fields() {
        let (s, y, p) = fixture();
        let m = slice_metrics(&s, &y, &p, true).unwrap();
        assert_eq!(m.group_size, 3);
        assert_eq!(m.num_criteria, 2);
        assert_eq!(m.support, 3.0 / 8.0);
        // outcome: slice 2/3, all 4/8; accuracy: slice 2/3, all 5/8, rest 3/5
        assert!((m.outcome_diff - (0.5f64 - 2.0 / 3.0).abs()).abs() < 1e-12);
        assert!((m.accuracy_diff - (0.625f64 - 2.0 / 3.0).abs()).abs() < 1e-12);
        let or_acc = (2.0 / 3.0) * (1.0 / 3.0) / (0.6 * 0.4);
        assert!((m.odds_ratio_acc.unwrap() - or_acc).abs() < 1e-12);
        assert!((m.lift_acc.unwrap() - (2.0 / 3.0) / 0.625).abs() < 1e-12);
        assert!(m.conventional.is_some());
        assert!(consistency_check(&m, 8).is_empty());
    }

    #[test]
    fn tampered_support_is_reported() {
        let (s, y, p) = fixture();
        let mut m = slice_metrics(&s, &y, &p, false).unwrap();
        m.support = 0.9;
        let v = consistency_check(&m, 8);
        assert!(v.iter().any(|x| x.starts_with("support")));
    }

    #[test]
    fn weighted_relative_reference_row() {
        // group of 4915 at support 0.31 with outcome gap 0.23
        let w: f64 = 0.31 * 0.23;
        assert!((w - 0.071).abs() < 5e-4);
        assert_eq!(format!("{w:.2}"), "0.07");
    }
}
