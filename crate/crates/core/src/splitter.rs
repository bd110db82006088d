//! Data-driven operationalization: search for the predicate over chosen
//! features whose slice has the largest accuracy gap to its complement.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnData, Dataset};
use crate::predicate::{CompareOp, Literal, Predicate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("no split satisfies the group-size constraints with a non-zero gap")]
    NoValidSplit,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not categorical")]
    NotCategorical(String),
    #[error("column `{0}` needs at least 2 distinct values")]
    TooFewValues(String),
    #[error("correctness has {found} rows, dataset has {expected}")]
    Length { expected: usize, found: usize },
    #[error("invalid constraints: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConstraints {
    pub min_group_size: usize,
    /// `None` means unlimited.
    pub max_group_size: Option<usize>,
    pub max_depth: usize,
}

impl Default for SplitConstraints {
    fn default() -> Self {
        SplitConstraints {
            min_group_size: 10,
            max_group_size: None,
            max_depth: 3,
        }
    }
}

impl SplitConstraints {
    pub fn validate(&self) -> Result<(), SplitError> {
        if self.min_group_size == 0 {
            return Err(SplitError::Config("min_group_size must be positive".into()));
        }
        if let Some(max) = self.max_group_size {
            if max < self.min_group_size {
                return Err(SplitError::Config(format!(
                    "max_group_size {max} below min_group_size {}",
                    self.min_group_size
                )));
            }
        }
        if self.max_depth == 0 {
            return Err(SplitError::Config("max_depth must be at least 1".into()));
        }
        Ok(())
    }

    fn admits(&self, size: usize) -> bool {
        size >= self.min_group_size && self.max_group_size.is_none_or(|m| size <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub predicate: Predicate,
    /// |slice accuracy - complement accuracy|.
    pub gap: f64,
    pub group_size: usize,
    pub candidates_considered: usize,
}

/// Exact accuracy gap `|cs/ns - cr/nr|` as a fraction, so ties compare exactly.
#[derive(Debug, Clone, Copy)]
struct Gap {
    num: u128,
    den: u128,
}

impl Gap {
    fn new(cs: u64, ns: u64, total_c: u64, total_n: u64) -> Gap {
        let (cr, nr) = (total_c - cs, total_n - ns);
        let a = cs as i128 * nr as i128;
        let b = cr as i128 * ns as i128;
        Gap {
            num: (a - b).unsigned_abs(),
            den: ns as u128 * nr as u128,
        }
    }

    fn zero() -> Gap {
        Gap { num: 0, den: 1 }
    }

    fn is_zero(&self) -> bool {
        self.num == 0
    }
}

impl PartialEq for Gap {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Gap {}
impl PartialOrd for Gap {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Gap {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

/// Non-negative fraction compared exactly, falling back to floats on overflow.
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn beats(&self, o: &Score) -> bool {
        match (self.num.checked_mul(o.den), o.num.checked_mul(self.den)) {
            (Some(a), Some(b)) => a > b,
            _ => self.num as f64 / self.den as f64 > o.num as f64 / o.den as f64,
        }
    }
}

/// Gap as reported: the same float expression callers would compute by hand.
fn gap_f64(cs: u64, ns: u64, total_c: u64, total_n: u64) -> f64 {
    let (cr, nr) = (total_c - cs, total_n - ns);
    (cs as f64 / ns as f64 - cr as f64 / nr as f64).abs()
}

struct Best {
    gap: Gap,
    depth: usize,
    render: String,
    predicate: Predicate,
    size: usize,
    correct: u64,
}

impl Best {
    /// Larger gap wins, then shallower, then lexicographically smaller text.
    fn beats(&self, other: &Best) -> bool {
        self.gap
            .cmp(&other.gap)
            .then(other.depth.cmp(&self.depth))
            .then(other.render.cmp(&self.render))
            == Ordering::Greater
    }
}

struct Ctx<'a> {
    ds: &'a Dataset,
    correct: &'a [u8],
    total_c: u64,
    total_n: u64,
    cons: SplitConstraints,
}

/// A candidate split of a node, summarized by its children's (size, correct).
struct Split<'f> {
    feature: &'f str,
    cut: Cut,
    children: [(u64, u64); 2],
}

#[derive(Clone, Copy)]
enum Cut {
    /// `x < t` / `x >= t`
    Below(f64),
    /// `c == level` / `c != level`
    Level(usize),
    /// `b == 1` / `b == 0`
    Flag,
}

impl Ctx<'_> {
    fn count(&self, rows: &[usize]) -> u64 {
        rows.iter().map(|&r| self.correct[r] as u64).sum()
    }

    fn gap_of(&self, size: u64, correct: u64) -> Gap {
        if size == 0 || size == self.total_n {
            return Gap::zero();
        }
        Gap::new(correct, size, self.total_c, self.total_n)
    }

    /// Gini decrease of `s` up to a per-node constant: `(c0 n1 - c1 n0)^2 / (n0 n1)`.
    fn impurity_decrease(s: &Split<'_>) -> Score {
        let [(n0, c0), (n1, c1)] = s.children;
        let d = (c0 as i128 * n1 as i128 - c1 as i128 * n0 as i128).unsigned_abs();
        Score {
            num: d * d,
            den: n0 as u128 * n1 as u128,
        }
    }

    fn conditions(&self, s: &Split<'_>) -> [Predicate; 2] {
        let f = s.feature;
        match s.cut {
            Cut::Below(t) => [
                Predicate::num(f, CompareOp::Lt, t),
                Predicate::num(f, CompareOp::Ge, t),
            ],
            Cut::Level(k) => {
                let level = self.ds.column(f).and_then(|c| c.levels()).expect("categorical")[k].clone();
                [
                    Predicate::text(f, CompareOp::Eq, level.clone()),
                    Predicate::text(f, CompareOp::Ne, level),
                ]
            }
            Cut::Flag => [
                Predicate::num(f, CompareOp::Eq, 1.0),
                Predicate::num(f, CompareOp::Eq, 0.0),
            ],
        }
    }

    /// Whether row `r` falls in the first child of `s`.
    fn in_first(&self, s: &Split<'_>, r: usize) -> bool {
        match (s.cut, self.ds.column(s.feature).expect("checked").data()) {
            (Cut::Below(t), ColumnData::Numeric(v)) => v[r] < t,
            (Cut::Level(k), ColumnData::Categorical { codes, .. }) => codes[r] as usize == k,
            (Cut::Flag, ColumnData::Boolean { values, .. }) => values[r],
            _ => unreachable!("cut matches column type"),
        }
    }

    fn node_splits<'f>(&self, rows: &[usize], features: &[&'f str]) -> Vec<Split<'f>> {
        let mut out = Vec::new();
        let node_n = rows.len() as u64;
        let node_c = self.count(rows);
        let rest = |n: u64, c: u64| [(n, c), (node_n - n, node_c - c)];
        for &f in features {
            let col = self.ds.column(f).expect("checked feature");
            match col.data() {
                ColumnData::Numeric(v) => {
                    let mut sorted: Vec<usize> = rows.to_vec();
                    sorted.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
                    let mut below_c = 0u64;
                    for i in 1..sorted.len() {
                        below_c += self.correct[sorted[i - 1]] as u64;
                        let (lo, hi) = (v[sorted[i - 1]], v[sorted[i]]);
                        if lo == hi {
                            continue;
                        }
                        out.push(Split {
                            feature: f,
                            cut: Cut::Below(lo + (hi - lo) / 2.0),
                            children: rest(i as u64, below_c),
                        });
                    }
                }
                ColumnData::Categorical { levels, codes } => {
                    let mut n = vec![0u64; levels.len()];
                    let mut c = vec![0u64; levels.len()];
                    for &r in rows {
                        n[codes[r] as usize] += 1;
                        c[codes[r] as usize] += self.correct[r] as u64;
                    }
                    for k in 0..levels.len() {
                        if n[k] > 0 && n[k] < node_n {
                            out.push(Split {
                                feature: f,
                                cut: Cut::Level(k),
                                children: rest(n[k], c[k]),
                            });
                        }
                    }
                }
                ColumnData::Boolean { values, .. } => {
                    let (mut n, mut c) = (0u64, 0u64);
                    for &r in rows {
                        if values[r] {
                            n += 1;
                            c += self.correct[r] as u64;
                        }
                    }
                    if n > 0 && n < node_n {
                        out.push(Split {
                            feature: f,
                            cut: Cut::Flag,
                            children: rest(n, c),
                        });
                    }
                }
            }
        }
        out
    }

    fn grow(
        &self,
        path: &[Predicate],
        rows: &[usize],
        features: &[&str],
        depth: usize,
        best: &mut Option<Best>,
        considered: &mut usize,
    ) {
        if depth >= self.cons.max_depth || rows.len() < 2 * self.cons.min_group_size.max(1) {
            return;
        }
        let splits = self.node_splits(rows, features);
        let min = self.cons.min_group_size as u64;
        let mut chosen: Option<(usize, Score)> = None;
        for (i, s) in splits.iter().enumerate() {
            if s.children.iter().any(|&(n, _)| n < min) {
                continue;
            }
            let score = Self::impurity_decrease(s);
            if score.num > 0 && chosen.as_ref().is_none_or(|(_, best)| score.beats(best)) {
                chosen = Some((i, score));
            }
        }
        let Some((i, _)) = chosen else { return };
        let split = &splits[i];
        let (first, second): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.in_first(split, r));
        let [c0, c1] = self.conditions(split);
        for (cond, child_rows) in [(c0, first), (c1, second)] {
            let mut child_path = path.to_vec();
            child_path.push(cond);
            *considered += 1;
            if self.cons.admits(child_rows.len()) {
                let predicate = Predicate::all(child_path.iter().cloned()).expect("non-empty path");
                let cand = Best {
                    gap: self.gap_of(child_rows.len() as u64, self.count(&child_rows)),
                    depth: child_path.len(),
                    render: predicate.render(),
                    predicate,
                    size: child_rows.len(),
                    correct: self.count(&child_rows),
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    *best = Some(cand);
                }
            }
            if child_rows.len() >= self.cons.min_group_size {
                self.grow(&child_path, &child_rows, features, depth + 1, best, considered);
            }
        }
    }
}

fn check_inputs(ds: &Dataset, correct: &[u8], features: &[&str]) -> Result<(), SplitError> {
    if correct.len() != ds.n_rows() {
        return Err(SplitError::Length {
            expected: ds.n_rows(),
            found: correct.len(),
        });
    }
    for f in features {
        if ds.column(f).is_none() {
            return Err(SplitError::UnknownColumn(f.to_string()));
        }
    }
    Ok(())
}

fn finish(best: Option<Best>, total_c: u64, total_n: u64, considered: usize) -> Result<SplitResult, SplitError> {
    match best {
        Some(b) if !b.gap.is_zero() => Ok(SplitResult {
            gap: gap_f64(b.correct, b.size as u64, total_c, total_n),
            predicate: b.predicate,
            group_size: b.size,
            candidates_considered: considered,
        }),
        _ => Err(SplitError::NoValidSplit),
    }
}

/// Grows a depth-limited classification tree on `features` (Gini splits,
/// every leaf at least `min_group_size` rows, earliest feature and lowest
/// cut on ties) and returns the root-to-node condition path with the largest
/// slice-vs-complement gap among nodes meeting both size bounds.
pub fn optimal_split_query(
    dataset: &Dataset,
    correctness: &[u8],
    features: &[&str],
    constraints: &SplitConstraints,
) -> Result<SplitResult, SplitError> {
    constraints.validate()?;
    check_inputs(dataset, correctness, features)?;
    let ctx = Ctx {
        ds: dataset,
        correct: correctness,
        total_c: correctness.iter().map(|&c| c as u64).sum(),
        total_n: correctness.len() as u64,
        cons: *constraints,
    };
    let rows: Vec<usize> = (0..dataset.n_rows()).collect();
    let mut best = None;
    let mut considered = 0;
    ctx.grow(&[], &rows, features, 0, &mut best, &mut considered);
    finish(best, ctx.total_c, ctx.total_n, considered)
}

/// Enumerates level subsets of size `1..=max_subset_size` (proper subsets
/// only) and returns the membership predicate with the largest gap.
pub fn optimal_categorical_split(
    dataset: &Dataset,
    correctness: &[u8],
    feature: &str,
    constraints: &SplitConstraints,
    max_subset_size: usize,
) -> Result<SplitResult, SplitError> {
    constraints.validate()?;
    check_inputs(dataset, correctness, &[feature])?;
    let col = dataset.column(feature).expect("checked");
    let ColumnData::Categorical { levels, codes } = col.data() else {
        return Err(SplitError::NotCategorical(feature.to_string()));
    };
    if levels.len() < 2 {
        return Err(SplitError::TooFewValues(feature.to_string()));
    }
    let n = correctness.len();
    let total_c: u64 = correctness.iter().map(|&c| c as u64).sum();
    let mut sizes = vec![0usize; levels.len()];
    let mut hits = vec![0u64; levels.len()];
    for (&c, &k) in correctness.iter().zip(codes) {
        sizes[k as usize] += 1;
        hits[k as usize] += c as u64;
    }
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].cmp(&levels[b]));

    let max_k = max_subset_size.min(levels.len() - 1);
    let mut best: Option<Best> = None;
    let mut considered = 0;
    for k in 1..=max_k {
        for subset in combinations(&order, k) {
            considered += 1;
            let size: usize = subset.iter().map(|&i| sizes[i]).sum();
            if size == 0 || size == n || !constraints.admits(size) {
                continue;
            }
            let correct: u64 = subset.iter().map(|&i| hits[i]).sum();
            let predicate = Predicate::InSet {
                column: feature.to_string(),
                values: subset.iter().map(|&i| Literal::Text(levels[i].clone())).collect(),
            };
            let cand = Best {
                gap: Gap::new(correct, size as u64, total_c, n as u64),
                // complements tie on gap; fewer levels wins
                depth: k,
                render: predicate.render(),
                predicate,
                size,
                correct,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    finish(best, total_c, n as u64, considered)
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, seed: u64) -> (Dataset, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ages: Vec<f64> = (0..n).map(|_| rng.random_range(18..=90) as f64).collect();
        let correct = ages
            .iter()
            .map(|&a| rng.random_bool(if a >= 72.0 { 0.5 } else { 0.95 }) as u8)
            .collect();
        let ds = Dataset::new("p", vec![Column::numeric("age", ages)], None).unwrap();
        (ds, correct)
    }

    #[test]
    fn finds_planted_threshold() {
        let (ds, correct) = planted(2000, 7);
        let cons = SplitConstraints { max_depth: 1, ..Default::default() };
        let r = optimal_split_query(&ds, &correct, &["age"], &cons).unwrap();
        match &r.predicate {
            Predicate::Compare { column, value: Literal::Number(t), .. } => {
                assert_eq!(column, "age");
                assert!((t - 72.0).abs() <= 1.0, "threshold {t}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn constant_correctness_has_no_split() {
        let (ds, _) = planted(200, 1);
        let correct = vec![1u8; 200];
        assert_eq!(
            optimal_split_query(&ds, &correct, &["age"], &SplitConstraints::default()),
            Err(SplitError::NoValidSplit)
        );
    }

    #[test]
    fn oversized_min_group_has_no_split() {
        let (ds, correct) = planted(200, 1);
        let cons = SplitConstraints { min_group_size: 101, ..Default::default() };
        assert_eq!(
            optimal_split_query(&ds, &correct, &["age"], &cons),
            Err(SplitError::NoValidSplit)
        );
    }

    #[test]
    fn respects_size_bounds() {
        let (ds, correct) = planted(500, 3);
        let cons = SplitConstraints {
            min_group_size: 40,
            max_group_size: Some(120),
            max_depth: 3,
        };
        let r = optimal_split_query(&ds, &correct, &["age"], &cons).unwrap();
        assert!((40..=120).contains(&r.group_size));
    }

    fn ethnic() -> (Dataset, Vec<u8>) {
        let vals = ["A", "B", "C"];
        let n = 600;
        let eth: Vec<&str> = (0..n).map(|i| vals[i % 3]).collect();
        let correct = (0..n)
            .map(|i| if i % 3 == 1 { (i % 2) as u8 } else { 1 })
            .collect();
        (Dataset::new("e", vec![Column::categorical("ethnicity", &eth)], None).unwrap(), correct)
    }

    #[test]
    fn categorical_subset_search() {
        let (ds, correct) = ethnic();
        let r = optimal_categorical_split(&ds, &correct, "ethnicity", &SplitConstraints::default(), 3)
            .unwrap();
        assert_eq!(r.predicate.render(), r#"ethnicity in ["B"]"#);
        let r1 = optimal_categorical_split(&ds, &correct, "ethnicity", &SplitConstraints::default(), 1)
            .unwrap();
        assert_eq!(r1.candidates_considered, 3);
    }

    #[test]
    fn symmetric_tie_picks_smaller_render() {
        let v: Vec<&str> = (0..100).map(|i| if i % 2 == 0 { "x" } else { "y" }).collect();
        let ds = Dataset::new("t", vec![Column::categorical("g", &v)], None).unwrap();
        let flat: Vec<u8> = (0..100).map(|i| (i % 4 < 2) as u8).collect();
        assert!(optimal_categorical_split(&ds, &flat, "g", &SplitConstraints::default(), 1).is_err());
        // {x} and {y} are complements, so their gaps are equal
        let skewed: Vec<u8> = (0..100).map(|i| if i % 2 == 0 { 1 } else { (i % 4 == 1) as u8 }).collect();
        let r = optimal_categorical_split(&ds, &skewed, "g", &SplitConstraints::default(), 1).unwrap();
        assert_eq!(r.predicate.render(), r#"g in ["x"]"#);
    }

    #[test]
    fn deterministic() {
        let (ds, correct) = planted(300, 9);
        let a = optimal_split_query(&ds, &correct, &["age"], &SplitConstraints::default()).unwrap();
        let b = optimal_split_query(&ds, &correct, &["age"], &SplitConstraints::default()).unwrap();
        assert_eq!(a, b);
    }
}
