//! Per-slice significance tests, multiple-testing correction and ranking.

use std::cmp::Ordering;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::model::Predictions;
use crate::predicate::{eval_predicate, Predicate, PredicateError, Slice};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FalsifyError {
    #[error("invalid test configuration: {0}")]
    Config(String),
    #[error("slice has {size} rows, fewer than the minimum {min}")]
    UndersizedSlice { size: usize, min: usize },
    #[error("slice covers every row; the complement is empty")]
    EmptyComplement,
    #[error("labels ({labels}) and predictions ({predictions}) differ in length")]
    Length { labels: usize, predictions: usize },
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    Bonferroni,
}

impl std::str::FromStr for Correction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            other => Err(format!("unknown correction `{other}`")),
        }
    }
}

/// Which accuracy the slice is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// Slice vs. its complement (disjoint samples).
    Complement,
    /// Slice vs. the whole dataset, slice included.
    VsOverall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub correction: Correction,
    pub bootstrap_b: usize,
    pub top_n: usize,
    pub min_slice_size: usize,
    pub seed: u64,
    pub mode: TestMode,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            correction: Correction::Bonferroni,
            bootstrap_b: 1000,
            top_n: 5,
            min_slice_size: 10,
            seed: 0,
            mode: TestMode::Complement,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<(), FalsifyError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(FalsifyError::Config(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if self.bootstrap_b < 100 {
            return Err(FalsifyError::Config(format!(
                "bootstrap_b {} below 100",
                self.bootstrap_b
            )));
        }
        if self.top_n == 0 {
            return Err(FalsifyError::Config("top_n must be at least 1".into()));
        }
        Ok(())
    }

    /// Per-test threshold for `m` simultaneous tests.
    pub fn adjusted_alpha(&self, m: usize) -> f64 {
        match self.correction {
            Correction::None => self.alpha,
            Correction::Bonferroni => self.alpha / m.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    Supported,
    #[serde(rename = "Not supported")]
    NotSupported,
    Untested,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Evidence::Supported => "Supported",
            Evidence::NotSupported => "Not supported",
            Evidence::Untested => "Untested",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTestResult {
    pub hypothesis_id: usize,
    pub predicate: Predicate,
    pub group_size: usize,
    pub acc_slice: f64,
    pub acc_rest: f64,
    pub delta_acc: f64,
    pub p_value: f64,
    pub adjusted_alpha: f64,
    pub significant: bool,
    pub evidence: Evidence,
}

impl SliceTestResult {
    fn set_threshold(&mut self, adjusted_alpha: f64) {
        self.adjusted_alpha = adjusted_alpha;
        self.significant = self.p_value < adjusted_alpha;
        self.evidence = if self.significant {
            Evidence::Supported
        } else {
            Evidence::NotSupported
        };
    }
}

/// A slice to be tested, tagged with the id of the hypothesis it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCandidate {
    pub id: usize,
    pub predicate: Predicate,
}

/// RNG stream id derived from a predicate's canonical text, for callers
/// without stable hypothesis ids.
pub fn stream_for(predicate: &Predicate) -> u64 {
    let digest = Sha256::digest(predicate.render().as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-row correctness: 1 where prediction equals label.
pub fn correctness(labels: &[u8], predictions: &Predictions) -> Result<Vec<u8>, FalsifyError> {
    if labels.len() != predictions.len() {
        return Err(FalsifyError::Length {
            labels: labels.len(),
            predictions: predictions.len(),
        });
    }
    Ok(predictions.correctness(labels))
}

/// Tests one slice given per-row correctness. `stream` selects the RNG
/// stream so results do not depend on evaluation order.
pub fn test_slice_correctness(
    slice: &Slice,
    correct: &[u8],
    config: &TestConfig,
    hypothesis_id: usize,
    stream: u64,
) -> Result<SliceTestResult, FalsifyError> {
    let n = correct.len();
    let n_s = slice.len();
    if n_s < config.min_slice_size || n_s == 0 {
        return Err(FalsifyError::UndersizedSlice {
            size: n_s,
            min: config.min_slice_size,
        });
    }
    if n_s >= n {
        return Err(FalsifyError::EmptyComplement);
    }
    let n_c = n - n_s;
    let total: u64 = correct.iter().map(|&c| c as u64).sum();
    let k: u64 = slice.rows.iter().map(|&r| correct[r] as u64).sum();

    let acc_slice = k as f64 / n_s as f64;
    let acc_rest = (total - k) as f64 / n_c as f64;
    let acc_all = total as f64 / n as f64;
    let mut rng = rng_for(config.seed, stream);
    let b = config.bootstrap_b;

    let extreme = match config.mode {
        TestMode::Complement => {
            // Under exchangeability the slice's correct count is hypergeometric.
            // |k/n_s - (K-k)/n_c| is proportional to |k*n - K*n_s|, compared exactly.
            let stat = |kk: u64| (kk as i128 * n as i128 - total as i128 * n_s as i128).abs();
            let observed = stat(k);
            let null = Hypergeometric::new(n as u64, total, n_s as u64)
                .expect("valid hypergeometric parameters");
            (0..b).filter(|_| stat(null.sample(&mut rng)) >= observed).count()
        }
        TestMode::VsOverall => {
            let observed = acc_slice - acc_all;
            let cells = [
                k as f64 / n as f64,
                (n_s as u64 - k) as f64 / n as f64,
                (total - k) as f64 / n as f64,
            ];
            (0..b)
                .filter(|_| {
                    let [a, bb, c] = multinomial3(&mut rng, n as u64, cells);
                    if a + bb == 0 {
                        return false;
                    }
                    let boot = a as f64 / (a + bb) as f64 - (a + c) as f64 / n as f64;
                    (boot - observed).abs() >= observed.abs()
                })
                .count()
        }
    };
    let p_value = (1 + extreme) as f64 / (b + 1) as f64;

    let mut result = SliceTestResult {
        hypothesis_id,
        predicate: slice.predicate.clone(),
        group_size: n_s,
        acc_slice,
        acc_rest,
        delta_acc: (acc_slice - acc_all).abs(),
        p_value,
        adjusted_alpha: config.alpha,
        significant: false,
        evidence: Evidence::NotSupported,
    };
    result.set_threshold(config.adjusted_alpha(1));
    Ok(result)
}

/// Counts for the first three of four multinomial cells (the fourth is implied).
fn multinomial3(rng: &mut ChaCha8Rng, n: u64, p: [f64; 3]) -> [u64; 3] {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = [0u64; 3];
    for (i, &pi) in p.iter().enumerate() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let q = (pi / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[i] = draw;
        left -= draw;
        mass -= pi;
    }
    out
}

pub fn test_slice(
    slice: &Slice,
    labels: &[u8],
    predictions: &Predictions,
    config: &TestConfig,
) -> Result<SliceTestResult, FalsifyError> {
    config.validate()?;
    let correct = correctness(labels, predictions)?;
    test_slice_correctness(slice, &correct, config, 0, 0)
}

/// A hypothesis that could not be tested, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Untestable {
    pub hypothesis_id: usize,
    pub predicate: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsificationOutcome {
    /// Every tested slice, ranked.
    pub results: Vec<SliceTestResult>,
    pub untestable: Vec<Untestable>,
    pub top_n: usize,
}

impl FalsificationOutcome {
    /// Number of tests the correction accounted for.
    pub fn tests_performed(&self) -> usize {
        self.results.len()
    }

    /// The retained hypotheses: the first `top_n` significant results.
    pub fn selected(&self) -> Vec<&SliceTestResult> {
        self.results
            .iter()
            .filter(|r| r.significant)
            .take(self.top_n)
            .collect()
    }
}

/// p-value ascending, then |delta| descending, then id.
pub fn rank_order(a: &SliceTestResult, b: &SliceTestResult) -> Ordering {
    a.p_value
        .total_cmp(&b.p_value)
        .then(b.delta_acc.total_cmp(&a.delta_acc))
        .then(a.hypothesis_id.cmp(&b.hypothesis_id))
}

/// Tests every candidate (in parallel), applies the correction over the
/// tests actually performed, and ranks the results.
pub fn run_falsification(
    candidates: &[SliceCandidate],
    dataset: &Dataset,
    labels: &[u8],
    predictions: &Predictions,
    config: &TestConfig,
) -> Result<FalsificationOutcome, FalsifyError> {
    config.validate()?;
    let correct = correctness(labels, predictions)?;
    let outcomes: Vec<Result<SliceTestResult, Untestable>> = candidates
        .par_iter()
        .map(|c| {
            let untestable = |reason: String| Untestable {
                hypothesis_id: c.id,
                predicate: c.predicate.render(),
                reason,
            };
            let slice = eval_predicate(&c.predicate, dataset).map_err(|e| untestable(e.to_string()))?;
            test_slice_correctness(&slice, &correct, config, c.id, c.id as u64)
                .map_err(|e| untestable(e.to_string()))
        })
        .collect();

    let mut results = Vec::new();
    let mut untestable = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(u) => {
                log::warn!("hypothesis {} untestable: {}", u.hypothesis_id, u.reason);
                untestable.push(u)
            }
        }
    }
    let adj = config.adjusted_alpha(results.len());
    for r in &mut results {
        r.set_threshold(adj);
    }
    results.sort_by(rank_order);
    Ok(FalsificationOutcome {
        results,
        untestable,
        top_n: config.top_n,
    })
}

/// Family-wise error rate of `m` independent uncorrected tests.
pub fn fwer_naive(m: usize, alpha: f64) -> f64 {
    1.0 - (1.0 - alpha).powi(m as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UntestedEntry {
    pub hypothesis_id: usize,
    pub predicate: Predicate,
    pub evidence: Evidence,
}

/// Ablation without self-falsification: provider order, nothing tested.
pub fn smart_nsf_rank(candidates: &[SliceCandidate]) -> Vec<UntestedEntry> {
    candidates
        .iter()
        .map(|c| UntestedEntry {
            hypothesis_id: c.id,
            predicate: c.predicate.clone(),
            evidence: Evidence::Untested,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::CompareOp;
    use rand::Rng;

    fn slice(rows: Vec<usize>) -> Slice {
        Slice {
            predicate: Predicate::num("x", CompareOp::Lt, 1.0),
            rows,
        }
    }

    fn cfg() -> TestConfig {
        TestConfig {
            correction: Correction::None,
            ..Default::default()
        }
    }

    #[test]
    fn fwer_values() {
        assert!((fwer_naive(1, 0.05) - 0.05).abs() < 1e-12);
        assert!((fwer_naive(2, 0.05) - 0.0975).abs() < 1e-12);
        assert!((fwer_naive(20, 0.05) - 0.641514).abs() < 1e-5);
    }

    #[test]
    fn bonferroni_threshold() {
        let c = TestConfig::default();
        assert_eq!(c.adjusted_alpha(10), 0.005);
        assert_eq!(cfg().adjusted_alpha(10), 0.05);
    }

    #[test]
    fn planted_corruption_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 5000;
        let correct: Vec<u8> = (0..n)
            .map(|i| {
                let p = if i < 500 { 0.5 } else { 0.85 };
                rng.random_bool(p) as u8
            })
            .collect();
        let r = test_slice_correctness(&slice((0..500).collect()), &correct, &cfg(), 0, 0).unwrap();
        assert!(r.p_value < 0.001);
        assert!(r.significant);
        assert_eq!(r.evidence, Evidence::Supported);
        assert!(r.acc_slice < r.acc_rest);
    }

    #[test]
    fn p_value_symmetric_under_side_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 300;
        let correct: Vec<u8> = (0..n).map(|_| rng.random_bool(0.7) as u8).collect();
        let a = test_slice_correctness(&slice((0..120).collect()), &correct, &cfg(), 0, 3).unwrap();
        let b = test_slice_correctness(&slice((120..n).collect()), &correct, &cfg(), 0, 3).unwrap();
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn undersized_and_full_slices_are_errors() {
        let correct = vec![1u8; 50];
        assert!(matches!(
            test_slice_correctness(&slice(vec![0, 1]), &correct, &cfg(), 0, 0),
            Err(FalsifyError::UndersizedSlice { size: 2, min: 10 })
        ));
        assert_eq!(
            test_slice_correctness(&slice((0..50).collect()), &correct, &cfg(), 0, 0),
            Err(FalsifyError::EmptyComplement)
        );
    }

    #[test]
    fn constant_correctness_gives_p_one() {
        let correct = vec![1u8; 100];
        let r = test_slice_correctness(&slice((0..30).collect()), &correct, &cfg(), 0, 0).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.delta_acc, 0.0);
    }

    #[test]
    fn vs_overall_mode_detects_gap() {
        let correct: Vec<u8> = (0..2000).map(|i| if i < 300 { (i % 2) as u8 } else { 1 }).collect();
        let c = TestConfig { mode: TestMode::VsOverall, ..cfg() };
        let r = test_slice_correctness(&slice((0..300).collect()), &correct, &c, 0, 0).unwrap();
        assert!(r.p_value < 0.01, "{}", r.p_value);
        let flat: Vec<u8> = (0..2000).map(|i| (i % 2) as u8).collect();
        let r = test_slice_correctness(&slice((0..300).collect()), &flat, &c, 0, 0).unwrap();
        assert!(r.p_value > 0.2, "{}", r.p_value);
    }

    #[test]
    fn config_validation() {
        assert!(TestConfig { alpha: 0.0, ..cfg() }.validate().is_err());
        assert!(TestConfig { bootstrap_b: 99, ..cfg() }.validate().is_err());
        assert!(TestConfig { top_n: 0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn nsf_keeps_provider_order() {
        let cands: Vec<SliceCandidate> = (0..5)
            .map(|i| SliceCandidate {
                id: 4 - i,
                predicate: Predicate::num("x", CompareOp::Gt, i as f64),
            })
            .collect();
        let out = smart_nsf_rank(&cands);
        assert_eq!(out.iter().map(|e| e.hypothesis_id).collect::<Vec<_>>(), vec![4, 3, 2, 1, 0]);
        assert!(out.iter().all(|e| e.evidence == Evidence::Untested));
    }

    #[test]
    fn stream_ids_are_stable() {
        let p = Predicate::num("age", CompareOp::Ge, 72.0);
        assert_eq!(stream_for(&p), stream_for(&p.clone()));
        assert_ne!(stream_for(&p), stream_for(&Predicate::num("age", CompareOp::Ge, 71.0)));
    }
}
