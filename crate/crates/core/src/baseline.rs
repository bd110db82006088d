//! Data-only slice search: enumerate conditions over every column and test
//! each slice with the same machinery SMART uses.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnData, Dataset};
use crate::falsify::{
    correctness, stream_for, test_slice_correctness, Correction, FalsifyError, SliceTestResult,
    TestConfig,
};
use crate::model::Predictions;
use crate::predicate::{CompareOp, Predicate, Slice};

/// Hard limit on enumerated candidates.
pub const CANDIDATE_CAP: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("search would enumerate {0} candidates, above the limit of {CANDIDATE_CAP}")]
    CandidateExplosion(u128),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("invalid baseline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Test(#[from] FalsifyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub max_order: usize,
    pub numeric_bins: usize,
    pub beam_width: usize,
    pub top_k: usize,
    /// Significance settings shared with the SMART tests.
    pub test: TestConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            max_order: 2,
            numeric_bins: 10,
            beam_width: 20,
            top_k: 10,
            test: TestConfig {
                correction: Correction::None,
                ..TestConfig::default()
            },
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.max_order == 0 {
            return Err(BaselineError::Config("max_order must be at least 1".into()));
        }
        if self.numeric_bins < 2 {
            return Err(BaselineError::Config("numeric_bins must be at least 2".into()));
        }
        if self.beam_width == 0 || self.top_k == 0 {
            return Err(BaselineError::Config("beam_width and top_k must be positive".into()));
        }
        self.test.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    /// Tested slices ranked by |delta_acc| descending, then predicate text.
    pub results: Vec<SliceTestResult>,
    pub candidates_enumerated: usize,
    pub tests_performed: usize,
    pub top_k: usize,
}

impl BaselineOutcome {
    /// The reported slices: the first `top_k` significant results.
    pub fn flagged(&self) -> Vec<&SliceTestResult> {
        self.results
            .iter()
            .filter(|r| r.significant)
            .take(self.top_k)
            .collect()
    }

    /// Top `top_k` significant slices where the model does worse than on
    /// the rest.
    pub fn flagged_failures(&self) -> Vec<&SliceTestResult> {
        self.results
            .iter()
            .filter(|r| r.significant && r.acc_slice < r.acc_rest)
            .take(self.top_k)
            .collect()
    }
}

/// One atomic condition with its row mask.
struct Condition {
    column: usize,
    predicate: Predicate,
    mask: Vec<bool>,
}

/// Equal-frequency bin edges strictly above the minimum, deduplicated.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return Vec::new();
    }
    let min = sorted[0];
    let mut edges: Vec<f64> = (1..bins)
        .map(|q| sorted[(q * n / bins).min(n - 1)])
        .filter(|&e| e > min)
        .collect();
    edges.dedup();
    edges
}

fn conditions(ds: &Dataset, bins: usize) -> Vec<Condition> {
    let mut out = Vec::new();
    for (ci, col) in ds.columns().iter().enumerate() {
        if Some(col.name()) == ds.target() {
            continue;
        }
        let name = col.name();
        match col.data() {
            ColumnData::Categorical { levels, codes } => {
                for (k, level) in levels.iter().enumerate() {
                    out.push(Condition {
                        column: ci,
                        predicate: Predicate::text(name, CompareOp::Eq, level.clone()),
                        mask: codes.iter().map(|&c| c as usize == k).collect(),
                    });
                }
            }
            ColumnData::Boolean { values, .. } => {
                for (flag, lit) in [(true, 1.0), (false, 0.0)] {
                    out.push(Condition {
                        column: ci,
                        predicate: Predicate::num(name, CompareOp::Eq, lit),
                        mask: values.iter().map(|&v| v == flag).collect(),
                    });
                }
            }
            ColumnData::Numeric(v) => {
                for e in quantile_edges(v, bins) {
                    out.push(Condition {
                        column: ci,
                        predicate: Predicate::num(name, CompareOp::Lt, e),
                        mask: v.iter().map(|&x| x < e).collect(),
                    });
                    out.push(Condition {
                        column: ci,
                        predicate: Predicate::num(name, CompareOp::Ge, e),
                        mask: v.iter().map(|&x| x >= e).collect(),
                    });
                }
            }
        }
    }
    out
}

/// Number of conjunctions of up to `max_order` conditions on distinct columns,
/// given the condition count of each column.
pub fn analytic_candidate_count(per_column: &[usize], max_order: usize) -> u128 {
    // e[k] = elementary symmetric sum of order k
    let mut e = vec![0u128; max_order + 1];
    e[0] = 1;
    for &c in per_column {
        for k in (1..=max_order).rev() {
            e[k] = e[k].saturating_add(e[k - 1].saturating_mul(c as u128));
        }
    }
    e[1..].iter().fold(0u128, |a, &b| a.saturating_add(b))
}

fn per_column_counts(conds: &[Condition]) -> Vec<usize> {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for c in conds {
        match counts.last_mut() {
            Some((col, n)) if *col == c.column => *n += 1,
            _ => counts.push((c.column, 1)),
        }
    }
    counts.into_iter().map(|(_, n)| n).collect()
}

/// Conjunction of the conditions at `idx` (sorted indices, distinct columns).
fn combine(conds: &[Condition], idx: &[usize]) -> (Predicate, Vec<bool>) {
    let mut mask = conds[idx[0]].mask.clone();
    for &i in &idx[1..] {
        for (m, &b) in mask.iter_mut().zip(&conds[i].mask) {
            *m &= b;
        }
    }
    let predicate = Predicate::all(idx.iter().map(|&i| conds[i].predicate.clone())).expect("non-empty");
    (predicate, mask)
}

fn test_many(
    conds: &[Condition],
    sets: &[Vec<usize>],
    correct: &[u8],
    cfg: &TestConfig,
) -> Vec<SliceTestResult> {
    sets.par_iter()
        .filter_map(|idx| {
            let (predicate, mask) = combine(conds, idx);
            let stream = stream_for(&predicate);
            let slice = Slice::from_mask(predicate, &mask);
            test_slice_correctness(&slice, correct, cfg, 0, stream).ok()
        })
        .collect()
}

fn by_effect(a: &SliceTestResult, b: &SliceTestResult) -> Ordering {
    b.delta_acc
        .total_cmp(&a.delta_acc)
        .then_with(|| a.predicate.render().cmp(&b.predicate.render()))
}

fn finish(mut results: Vec<SliceTestResult>, cfg: &BaselineConfig, enumerated: usize) -> BaselineOutcome {
    let m = results.len();
    let adj = cfg.test.adjusted_alpha(m);
    for r in &mut results {
        r.adjusted_alpha = adj;
        r.significant = r.p_value < adj;
        r.evidence = if r.significant {
            crate::falsify::Evidence::Supported
        } else {
            crate::falsify::Evidence::NotSupported
        };
    }
    results.sort_by(by_effect);
    for (i, r) in results.iter_mut().enumerate() {
        r.hypothesis_id = i;
    }
    BaselineOutcome {
        results,
        candidates_enumerated: enumerated,
        tests_performed: m,
        top_k: cfg.top_k,
    }
}

fn prepare(
    dataset: &Dataset,
    labels: &[u8],
    predictions: &Predictions,
    config: &BaselineConfig,
) -> Result<(Vec<Condition>, Vec<u8>), BaselineError> {
    config.validate()?;
    let correct = correctness(labels, predictions)?;
    let conds = conditions(dataset, config.numeric_bins);
    if conds.is_empty() {
        return Err(BaselineError::NoFeatures);
    }
    let total = analytic_candidate_count(&per_column_counts(&conds), config.max_order);
    if total > CANDIDATE_CAP {
        return Err(BaselineError::CandidateExplosion(total));
    }
    Ok((conds, correct))
}

/// Tests every conjunction of up to `max_order` conditions on distinct columns.
pub fn exhaustive_search(
    dataset: &Dataset,
    labels: &[u8],
    predictions: &Predictions,
    config: &BaselineConfig,
) -> Result<BaselineOutcome, BaselineError> {
    let (conds, correct) = prepare(dataset, labels, predictions, config)?;
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    fn rec(conds: &[Condition], start: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..conds.len() {
            if cur.iter().any(|&j: &usize| conds[j].column == conds[i].column) {
                continue;
            }
            cur.push(i);
            out.push(cur.clone());
            if cur.len() < max {
                rec(conds, i + 1, max, cur, out);
            }
            cur.pop();
        }
    }
    rec(&conds, 0, config.max_order, &mut cur, &mut sets);
    let results = test_many(&conds, &sets, &correct, &config.test);
    Ok(finish(results, config, sets.len()))
}

/// Beam search: order-1 conditions seed the beam; each round extends the
/// `beam_width` best slices by one condition on a new column.
pub fn beam_search(
    dataset: &Dataset,
    labels: &[u8],
    predictions: &Predictions,
    config: &BaselineConfig,
) -> Result<BaselineOutcome, BaselineError> {
    let (conds, correct) = prepare(dataset, labels, predictions, config)?;
    let mut enumerated = 0;
    let mut all = Vec::new();
    let mut frontier: Vec<Vec<usize>> = (0..conds.len()).map(|i| vec![i]).collect();
    for order in 1..=config.max_order {
        if frontier.is_empty() {
            break;
        }
        enumerated += frontier.len();
        let mut tested: Vec<(Vec<usize>, SliceTestResult)> = frontier
            .par_iter()
            .filter_map(|idx| {
                let (predicate, mask) = combine(&conds, idx);
                let stream = stream_for(&predicate);
                let slice = Slice::from_mask(predicate, &mask);
                test_slice_correctness(&slice, &correct, &config.test, 0, stream)
                    .ok()
                    .map(|r| (idx.clone(), r))
            })
            .collect();
        tested.sort_by(|a, b| by_effect(&a.1, &b.1));
        let beam: Vec<Vec<usize>> = tested
            .iter()
            .take(config.beam_width)
            .map(|(idx, _)| idx.clone())
            .collect();
        all.extend(tested.into_iter().map(|(_, r)| r));
        if order == config.max_order {
            break;
        }
        let mut next = BTreeSet::new();
        for idx in &beam {
            for j in 0..conds.len() {
                if idx.iter().any(|&i| conds[i].column == conds[j].column) {
                    continue;
                }
                let mut ext = idx.clone();
                ext.push(j);
                ext.sort_unstable();
                next.insert(ext);
            }
        }
        frontier = next.into_iter().collect();
    }
    Ok(finish(all, config, enumerated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;
    use crate::model::PredictionSource;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_features(n: usize, k: usize, seed: u64) -> (Dataset, Vec<u8>, Predictions) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Column> = (0..k)
            .map(|j| Column::boolean(format!("f{j}"), (0..n).map(|_| rng.random_bool(0.5)).collect()))
            .collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let p: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
        cols.push(Column::boolean("y", y));
        let ds = Dataset::new("b", cols, Some("y")).unwrap();
        let labels = ds.labels().unwrap();
        (ds, labels, Predictions::new(p, PredictionSource::ExternalColumn).unwrap())
    }

    #[test]
    fn counts_binary_candidates() {
        let (ds, y, p) = binary_features(400, 5, 1);
        let cfg = BaselineConfig { max_order: 1, ..Default::default() };
        let out = exhaustive_search(&ds, &y, &p, &cfg).unwrap();
        assert_eq!(out.candidates_enumerated, 10);
        assert_eq!(out.tests_performed, 10);
        let cfg2 = BaselineConfig { max_order: 2, ..Default::default() };
        let out2 = exhaustive_search(&ds, &y, &p, &cfg2).unwrap();
        assert_eq!(out2.candidates_enumerated as u128, analytic_candidate_count(&[2; 5], 2));
        assert_eq!(out2.candidates_enumerated, 10 + 10 * 4);
    }

    #[test]
    fn analytic_count() {
        assert_eq!(analytic_candidate_count(&[2, 3, 4], 1), 9);
        assert_eq!(analytic_candidate_count(&[2, 3, 4], 2), 9 + 6 + 8 + 12);
        assert_eq!(analytic_candidate_count(&[2, 3, 4], 3), 9 + 26 + 24);
    }

    #[test]
    fn explosion_is_refused() {
        let (ds, y, p) = binary_features(50, 30, 2);
        let cfg = BaselineConfig { max_order: 6, ..Default::default() };
        assert!(matches!(
            exhaustive_search(&ds, &y, &p, &cfg),
            Err(BaselineError::CandidateExplosion(_))
        ));
    }

    #[test]
    fn wide_beam_matches_exhaustive() {
        let (ds, y, p) = binary_features(300, 4, 3);
        let cfg = BaselineConfig { max_order: 2, beam_width: 1000, ..Default::default() };
        let a = exhaustive_search(&ds, &y, &p, &cfg).unwrap();
        let b = beam_search(&ds, &y, &p, &cfg).unwrap();
        assert_eq!(a.results, b.results);
    }

    #[test]
    fn narrow_beam_never_beats_exhaustive() {
        let (ds, y, p) = binary_features(300, 6, 4);
        let cfg = BaselineConfig { max_order: 3, beam_width: 2, ..Default::default() };
        let a = exhaustive_search(&ds, &y, &p, &cfg).unwrap();
        let b = beam_search(&ds, &y, &p, &cfg).unwrap();
        assert!(b.results[0].delta_acc <= a.results[0].delta_acc);
        assert!(b.tests_performed < a.tests_performed);
    }

    #[test]
    fn quantile_edges_skip_minimum() {
        let v: Vec<f64> = (0..100).map(|i| (i / 50) as f64).collect();
        assert_eq!(quantile_edges(&v, 10), vec![1.0]);
        let w: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(quantile_edges(&w, 4), vec![25.0, 50.0, 75.0]);
    }
}
