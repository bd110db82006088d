use proptest::prelude::*;

use smart_audit::baseline::{analytic_candidate_count, quantile_edges};
use smart_audit::dataset::{Column, Dataset};
use smart_audit::falsify::{test_slice_correctness, Correction, TestConfig};
use smart_audit::metrics::{consistency_check, slice_metrics};
use smart_audit::model::{corrupt_on_slice, PredictionSource, Predictions};
use smart_audit::predicate::{eval_mask, CompareOp, Predicate, Slice};
use smart_audit::splitter::{optimal_split_query, SplitConstraints};

fn bits(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, n)
}

fn slice_of(mask: &[bool]) -> Slice {
    Slice::from_mask(Predicate::num("x", CompareOp::Ge, 0.0), mask)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn p_values_are_bounded_and_reproducible(
        correct in bits(20..120),
        cut in 0.1f64..0.9,
        b in 50usize..300,
        seed in any::<u64>(),
    ) {
        let n = correct.len();
        let mask: Vec<bool> = (0..n).map(|i| (i as f64) < cut * n as f64).collect();
        let slice = slice_of(&mask);
        prop_assume!(!slice.is_empty() && slice.len() < n);
        let cfg = TestConfig { bootstrap_b: b, seed, min_slice_size: 1, ..TestConfig::default() };
        let a = test_slice_correctness(&slice, &correct, &cfg, 0, 7).unwrap();
        let again = test_slice_correctness(&slice, &correct, &cfg, 0, 7).unwrap();
        prop_assert_eq!(&a, &again);
        prop_assert!(a.p_value >= 1.0 / (b as f64 + 1.0) && a.p_value <= 1.0);
        let overall = correct.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
        prop_assert!((a.delta_acc - (a.acc_slice - overall).abs()).abs() < 1e-12);
    }

    #[test]
    fn corrected_significance_implies_uncorrected(
        correct in bits(40..150),
        cut in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let n = correct.len();
        let mask: Vec<bool> = (0..n).map(|i| (i as f64) < cut * n as f64).collect();
        let slice = slice_of(&mask);
        prop_assume!(!slice.is_empty() && slice.len() < n);
        let base = TestConfig { seed, min_slice_size: 1, bootstrap_b: 200, ..TestConfig::default() };
        let none = TestConfig { correction: Correction::None, ..base.clone() };
        let r_none = test_slice_correctness(&slice, &correct, &none, 0, 1).unwrap();
        let r_bonf = test_slice_correctness(&slice, &correct, &base, 0, 1).unwrap();
        prop_assert_eq!(r_none.p_value, r_bonf.p_value);
        prop_assert!(!r_bonf.significant || r_none.significant);
    }

    #[test]
    fn metrics_are_internally_consistent(
        labels in bits(10..200),
        flips in bits(10..200),
        cut in 0.05f64..0.95,
    ) {
        let n = labels.len().min(flips.len());
        let labels = &labels[..n];
        let preds = Predictions::new((0..n).map(|i| labels[i] ^ flips[i]).collect(), PredictionSource::ExternalColumn).unwrap();
        let mask: Vec<bool> = (0..n).map(|i| (i as f64) < cut * n as f64).collect();
        let slice = slice_of(&mask);
        prop_assume!(!slice.is_empty() && slice.len() < n);
        let m = slice_metrics(&slice, labels, &preds, true).unwrap();
        prop_assert!(consistency_check(&m, n).is_empty(), "{:?}", consistency_check(&m, n));
        prop_assert!((m.weighted_relative_acc - m.support * m.accuracy_diff).abs() < 1e-12);
    }

    #[test]
    fn corruption_stays_inside_the_slice(
        values in bits(5..100),
        cut in 0.0f64..1.0,
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let n = values.len();
        let base = Predictions::new(values, PredictionSource::ExternalColumn).unwrap();
        let mask: Vec<bool> = (0..n).map(|i| (i as f64) < cut * n as f64).collect();
        let out = corrupt_on_slice(&base, &slice_of(&mask), p, 0.5, seed).unwrap();
        for i in 0..n {
            if !mask[i] {
                prop_assert_eq!(out.values[i], base.values[i]);
            }
        }
        let unchanged = corrupt_on_slice(&base, &slice_of(&mask), 0.0, 0.5, seed).unwrap();
        prop_assert_eq!(unchanged.values, base.values);
    }

    #[test]
    fn split_respects_constraints(
        xs in prop::collection::vec(0u8..25, 20..150),
        correct_seed in prop::collection::vec(0u8..2, 150),
        min in 1usize..15,
        slack in prop::option::of(0usize..60),
        depth in 1usize..4,
    ) {
        let n = xs.len();
        let correct = &correct_seed[..n];
        let ds = Dataset::new("d", vec![Column::numeric("x", xs.iter().map(|&v| v as f64).collect())], None).unwrap();
        let cons = SplitConstraints {
            min_group_size: min,
            max_group_size: slack.map(|s| min + s),
            max_depth: depth,
        };
        if let Ok(found) = optimal_split_query(&ds, correct, &["x"], &cons) {
            let mask = eval_mask(&found.predicate, &ds).unwrap();
            let size = mask.iter().filter(|&&m| m).count();
            prop_assert_eq!(size, found.group_size);
            prop_assert!(size >= min && cons.max_group_size.is_none_or(|m| size <= m));
            prop_assert!(found.predicate.count_criteria() <= depth);
            let (mut cs, mut cr) = (0.0, 0.0);
            for i in 0..n {
                if mask[i] { cs += correct[i] as f64 } else { cr += correct[i] as f64 }
            }
            let gap = (cs / size as f64 - cr / (n - size) as f64).abs();
            prop_assert!((gap - found.gap).abs() < 1e-12);
            prop_assert!(found.gap > 0.0);
        }
    }

    #[test]
    fn conjunction_masks_combine(
        xs in prop::collection::vec(-10i32..10, 1..60),
        a in -10i32..10,
        b in -10i32..10,
    ) {
        let ds = Dataset::new("d", vec![Column::numeric("x", xs.iter().map(|&v| v as f64).collect())], None).unwrap();
        let p = Predicate::num("x", CompareOp::Ge, a as f64);
        let q = Predicate::num("x", CompareOp::Lt, b as f64);
        let mp = eval_mask(&p, &ds).unwrap();
        let mq = eval_mask(&q, &ds).unwrap();
        let and = eval_mask(&p.clone().and(q.clone()), &ds).unwrap();
        let or = eval_mask(&p.or(q), &ds).unwrap();
        for i in 0..xs.len() {
            prop_assert_eq!(and[i], mp[i] && mq[i]);
            prop_assert_eq!(or[i], mp[i] || mq[i]);
        }
    }

    #[test]
    fn quantile_edges_are_increasing_cuts(
        values in prop::collection::vec(-1e3f64..1e3, 1..200),
        bins in 2usize..20,
    ) {
        let edges = quantile_edges(&values, bins);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(edges.len() < bins);
        prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(edges.iter().all(|&e| e > min));
    }

    #[test]
    fn candidate_count_matches_enumeration(
        per_column in prop::collection::vec(0usize..6, 0..6),
        order in 1usize..4,
    ) {
        // brute force over column subsets
        let k = per_column.len();
        let mut total = 0u128;
        for subset in 1u32..(1 << k) {
            if subset.count_ones() as usize > order {
                continue;
            }
            total += (0..k).filter(|j| subset & (1 << j) != 0).map(|j| per_column[j] as u128).product::<u128>();
        }
        prop_assert_eq!(analytic_candidate_count(&per_column, order), total);
    }
}
