//! Acceptance checks. Prints one line per criterion and exits non-zero if
//! any fails.
//!
//! cargo test --release --test acceptance
use std::cmp::Ordering;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smart_audit::audit::{run_audit, AuditOptions};
use smart_audit::cli;
use smart_audit::dataset::{Column, Dataset};
use smart_audit::falsify::fwer_naive;
use smart_audit::hypothesis::HypothesisProvider;
use smart_audit::metrics::{report_odds_ratio, slice_metrics};
use smart_audit::model::{PredictionSource, Predictions};
use smart_audit::predicate::{eval_mask, parse_unchecked, CompareOp, Literal, Predicate, Slice};
use smart_audit::remote::{HttpRequest, HttpResponse, Transport};
use smart_audit::report::render_metric_tables;
use smart_audit::splitter::{optimal_split_query, SplitConstraints, SplitError};
use smart_audit::synth::{
    fnr_provider, gen_recidivism, infeasible_provider, run_bias_experiment, run_fnr_experiment,
    run_fp_experiment, run_fwer_simulation, run_scenario_experiment, subgroup_provider, subgroup_script,
    covariate_subgroups, ExperimentSettings, ScenarioKind, SynthConfig,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= budget, format!("took {:.1}s, budget {}s", t.as_secs_f64(), budget.as_secs()))
}

fn fwer() -> Check {
    let start = Instant::now();
    let naive = fwer_naive(20, 0.05);
    let oracle = 1.0 - 0.95f64.powi(20);
    ensure((naive - 0.6415).abs() <= 5e-4, format!("fwer_naive(20, 0.05) = {naive}"))?;
    ensure((naive - oracle).abs() < 1e-12, "fwer_naive disagrees with closed form")?;
    let sim = run_fwer_simulation(500, 20, 500, 0.05, 1000, 11).map_err(|e| e.to_string())?;
    ensure(
        (sim.uncorrected - oracle).abs() <= 0.06,
        format!("simulated uncorrected FWER {:.3}", sim.uncorrected),
    )?;
    ensure(sim.bonferroni <= 0.07, format!("simulated Bonferroni FWER {:.3}", sim.bonferroni))?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "naive {naive:.4}, simulated {:.3} uncorrected, {:.3} bonferroni",
        sim.uncorrected, sim.bonferroni
    ))
}

fn fnr() -> Check {
    let start = Instant::now();
    let settings = ExperimentSettings::fnr();
    let config = SynthConfig::default();
    let mut detail = Vec::new();
    for n in 1..=3 {
        let s = run_fnr_experiment(n, 20, &config, &settings, &fnr_provider).map_err(|e| e.to_string())?;
        detail.push(format!("n={n} smart {:.2} baseline {:.2}", s.smart.mean, s.baseline.mean));
        if n == 1 {
            ensure(s.smart.mean <= 0.05, format!("n=1 smart FNR {:.3}", s.smart.mean))?;
        } else {
            ensure(
                s.smart.mean < s.baseline.mean,
                format!("n={n} smart {:.3} not below baseline {:.3}", s.smart.mean, s.baseline.mean),
            )?;
        }
    }
    within_budget(start, Duration::from_secs(300))?;
    Ok(detail.join(", "))
}

fn bias() -> Check {
    let start = Instant::now();
    let rows = run_bias_experiment(
        &[0.0, 0.05, 0.2],
        20,
        5,
        &SynthConfig::bias_experiment(),
        &ExperimentSettings::default(),
        &subgroup_provider,
    )
    .map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for r in &rows {
        let (own, other) = match r.corrupted.as_str() {
            "white" => (&r.p_white, &r.p_black),
            _ => (&r.p_black, &r.p_white),
        };
        detail.push(format!(
            "tau {} {}: {:.2}/{:.2}",
            r.tau, r.corrupted, own.mean, other.mean
        ));
        if r.tau == 0.0 {
            ensure(
                r.p_white.mean <= 0.5 && r.p_black.mean <= 0.5,
                format!("tau 0 rates {:.2}/{:.2}", r.p_white.mean, r.p_black.mean),
            )?;
        } else {
            ensure(
                own.mean >= 0.9,
                format!("tau {} group {} found at rate {:.2}", r.tau, r.corrupted, own.mean),
            )?;
        }
    }
    within_budget(start, Duration::from_secs(600))?;
    Ok(detail.join(", "))
}

fn false_positives() -> Check {
    let start = Instant::now();
    let mut detail = Vec::new();
    for k in [4, 8] {
        let s = run_fp_experiment(k, 20, &SynthConfig::default(), &ExperimentSettings::default(), &subgroup_provider)
            .map_err(|e| e.to_string())?;
        detail.push(format!("k={k} smart {:.2} baseline {:.2}", s.smart.mean, s.baseline.mean));
        ensure(s.smart.mean == 0.0, format!("k={k} smart share {:.3}", s.smart.mean))?;
        ensure(s.baseline.mean > 0.10, format!("k={k} baseline share {:.3}", s.baseline.mean))?;
    }
    within_budget(start, Duration::from_secs(600))?;
    Ok(detail.join(", "))
}

fn scenarios() -> Check {
    let start = Instant::now();
    let mut detail = Vec::new();
    for kind in [ScenarioKind::Uniform, ScenarioKind::Skewed, ScenarioKind::Interactions] {
        let s = run_scenario_experiment(kind, 2000, 50, 3, &ExperimentSettings::default(), &infeasible_provider)
            .map_err(|e| e.to_string())?;
        let (a, b) = (s.smart_runs_with_slices(), s.baseline_runs_with_slices());
        detail.push(format!("{kind:?} {a}/{b}"));
        ensure(a == 0, format!("{kind:?}: smart reported slices in {a} runs"))?;
        ensure(b >= 40, format!("{kind:?}: baseline flagged slices in only {b} runs"))?;
    }
    within_budget(start, Duration::from_secs(600))?;
    Ok(detail.join(", "))
}

/// |cs/ns - cr/nr| as an exact fraction.
#[derive(Debug, Clone, Copy)]
struct Gap {
    num: u128,
    den: u128,
}

impl Gap {
    fn new(cs: u64, ns: u64, cr: u64, nr: u64) -> Gap {
        let (a, b) = ((cs * nr) as i128, (cr * ns) as i128);
        Gap {
            num: (a - b).unsigned_abs(),
            den: (ns * nr) as u128,
        }
    }

    fn cmp(&self, other: &Gap) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Depth-1 tree by exhaustive threshold scan: the admissible-leaf split with
/// the largest Gini decrease (first feature, lowest threshold on ties), then
/// the gap of its children if either meets the size bounds.
fn brute_force_gap(features: &[Vec<f64>], correct: &[u8], cons: &SplitConstraints) -> Option<Gap> {
    let n = correct.len() as u64;
    let total: u64 = correct.iter().map(|&c| c as u64).sum();
    let min = cons.min_group_size as u64;
    let mut best: Option<(f64, u128, u128, Gap, u64)> = None;
    for col in features {
        let mut values = col.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let below: Vec<usize> = (0..col.len()).filter(|&i| col[i] < t).collect();
            let ns = below.len() as u64;
            if ns < min || n - ns < min {
                continue;
            }
            let cs: u64 = below.iter().map(|&i| correct[i] as u64).sum();
            let d = (cs as i128 * (n - ns) as i128 - (total - cs) as i128 * ns as i128).unsigned_abs();
            let (num, den) = (d * d, ns as u128 * (n - ns) as u128);
            if num == 0 {
                continue;
            }
            let better = best.as_ref().is_none_or(|&(_, bn, bd, _, _)| num * bd > bn * den);
            if better {
                best = Some((t, num, den, Gap::new(cs, ns, total - cs, n - ns), ns));
            }
        }
    }
    let (_, _, _, gap, ns) = best?;
    let fits = |size: u64| cons.max_group_size.is_none_or(|m| size as usize <= m);
    (fits(ns) || fits(n - ns)).then_some(gap)
}

fn splitter_check() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let names = ["f0", "f1", "f2"];
    let mut no_split = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=200);
        let k = rng.random_range(1..=3);
        let spread = rng.random_range(2..=30);
        let features: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(0..spread) as f64).collect())
            .collect();
        let acc = rng.random_range(0.1..0.95);
        let correct: Vec<u8> = (0..n).map(|_| rng.random_bool(acc) as u8).collect();
        let min = rng.random_range(1..=(n / 2).max(1));
        let max = rng.random_bool(0.5).then(|| rng.random_range(min..=n));
        let cons = SplitConstraints {
            min_group_size: min,
            max_group_size: max,
            max_depth: 1,
        };
        let cols = (0..k).map(|j| Column::numeric(names[j], features[j].clone())).collect();
        let ds = Dataset::new("random", cols, None).map_err(|e| e.to_string())?;
        let oracle = brute_force_gap(&features, &correct, &cons);
        match (optimal_split_query(&ds, &correct, &names[..k], &cons), oracle) {
            (Err(SplitError::NoValidSplit), None) => no_split += 1,
            (Ok(found), Some(expected)) => {
                let mask = eval_mask(&found.predicate, &ds).map_err(|e| e.to_string())?;
                let ns = mask.iter().filter(|&&m| m).count() as u64;
                let cs: u64 = (0..n).filter(|&i| mask[i]).map(|i| correct[i] as u64).sum();
                let total: u64 = correct.iter().map(|&c| c as u64).sum();
                let got = Gap::new(cs, ns, total - cs, n as u64 - ns);
                ensure(
                    got.cmp(&expected) == Ordering::Equal,
                    format!("case {case}: gap {}/{} vs oracle {}/{}", got.num, got.den, expected.num, expected.den),
                )?;
                ensure(
                    (found.gap - expected.num as f64 / expected.den as f64).abs() < 1e-12,
                    format!("case {case}: reported gap {} disagrees", found.gap),
                )?;
            }
            (got, expected) => {
                return Err(format!("case {case}: splitter {got:?}, oracle {expected:?}"));
            }
        }
    }

    // planted boundary: accuracy drops for age >= 72
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2000;
        let age: Vec<f64> = (0..n).map(|_| rng.random_range(18..=90) as f64).collect();
        let correct: Vec<u8> = age
            .iter()
            .map(|&a| rng.random_bool(if a >= 72.0 { 0.5 } else { 0.95 }) as u8)
            .collect();
        let ds = Dataset::new("planted", vec![Column::numeric("age", age.clone())], None).map_err(|e| e.to_string())?;
        let cons = SplitConstraints {
            max_depth: 1,
            ..SplitConstraints::default()
        };
        let found = optimal_split_query(&ds, &correct, &["age"], &cons).map_err(|e| e.to_string())?;
        let Predicate::Compare {
            value: Literal::Number(t),
            ..
        } = found.predicate
        else {
            return Err(format!("seed {seed}: unexpected predicate {}", found.predicate));
        };
        let mut values = age.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mids: Vec<f64> = values.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        let at = |x: f64| mids.iter().position(|&m| (m - x).abs() < 1e-9);
        let truth = values.windows(2).position(|w| w[0] < 72.0 && w[1] >= 72.0);
        let (Some(i), Some(j)) = (at(t), truth) else {
            return Err(format!("seed {seed}: threshold {t} is not a candidate midpoint"));
        };
        ensure(
            i.abs_diff(j) <= 1,
            format!("seed {seed}: threshold {t}, expected near {}", mids[j]),
        )?;
    }
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("100 random datasets match the brute-force oracle ({no_split} without a split), 20 planted boundaries recovered"))
}

fn metrics_check() -> Check {
    let or = report_odds_ratio(0.9, 0.5).ok_or("odds ratio undefined")?;
    ensure((or - 0.36).abs() < 1e-12, format!("odds ratio(0.9, 0.5) = {or}"))?;
    ensure(report_odds_ratio(0.3, 0.3) == Some(1.0), "odds ratio at equal rates is not 1")?;

    // 10000 rows, slice of 3100 with outcome rate 0.27 against 0.5 overall
    let n = 10_000;
    let slice_rows = 3100;
    let slice_pos = 837;
    let total_pos = 5000;
    let labels: Vec<u8> = (0..n)
        .map(|i| if i < slice_rows { (i < slice_pos) as u8 } else { (i - slice_rows < total_pos - slice_pos) as u8 })
        .collect();
    let group: Vec<&str> = (0..n).map(|i| if i < slice_rows { "s" } else { "r" }).collect();
    let x: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
    // every fifth prediction is wrong, so accuracy is 0.8 inside and outside
    let preds = Predictions::new((0..n).map(|i| labels[i] ^ (i % 5 == 0) as u8).collect(), PredictionSource::ExternalColumn)
        .map_err(|e| e.to_string())?;
    let ds = Dataset::new(
        "constructed",
        vec![
            Column::categorical("grp", &group),
            Column::numeric("x", x),
            Column::boolean("y", labels.iter().map(|&v| v == 1).collect()),
        ],
        Some("y"),
    )
    .map_err(|e| e.to_string())?;

    let slice = Slice {
        predicate: Predicate::text("grp", CompareOp::Eq, "s"),
        rows: (0..slice_rows).collect(),
    };
    let m = slice_metrics(&slice, &labels, &preds, false).map_err(|e| e.to_string())?;
    let expected = 0.31 * (0.5 - 0.27);
    ensure(
        (m.weighted_relative_y - expected).abs() < 1e-12,
        format!("weighted_relative_y {}", m.weighted_relative_y),
    )?;
    ensure(m.lift_acc == Some(1.0), format!("lift_acc {:?} with equal accuracy", m.lift_acc))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let hyp = dir.path().join("h.jsonl");
    fs::write(
        &hyp,
        r#"{"text": "f underperforms on group s", "justification": "constructed", "operationalization": "grp == \"s\""}"#,
    )
    .map_err(|e| e.to_string())?;
    let opts = AuditOptions {
        context: "constructed".into(),
        n_hypotheses: 1,
        feasibility: false,
        n_refine: 0,
        ..AuditOptions::default()
    };
    let report = run_audit(&ds, &preds, &opts, &mut HypothesisProvider::file(&hyp)).map_err(|e| e.to_string())?;
    let tables = render_metric_tables(&report);
    let header = tables
        .lines()
        .find(|l| l.contains("weighted_relative_y"))
        .ok_or("no weighted_relative_y column")?;
    let col = header.split('|').position(|c| c.trim() == "weighted_relative_y").ok_or("column missing")?;
    let row = tables
        .lines()
        .skip_while(|l| *l != header)
        .nth(2)
        .ok_or("no metrics row")?;
    let cell = row.split('|').nth(col).map(str::trim).unwrap_or_default();
    ensure(cell == "0.07", format!("rendered weighted_relative_y {cell:?}"))?;
    Ok(format!("odds ratio {or:.2}, weighted_relative_y {:.4} rendered {cell}", m.weighted_relative_y))
}

fn op_strategy() -> impl Strategy<Value = CompareOp> {
    prop_oneof![
        Just(CompareOp::Eq),
        Just(CompareOp::Ne),
        Just(CompareOp::Lt),
        Just(CompareOp::Le),
        Just(CompareOp::Gt),
        Just(CompareOp::Ge),
    ]
}

fn any_predicate() -> impl Strategy<Value = Predicate> {
    let ident = "c_[a-z0-9_]{0,6}";
    let literal = prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Literal::Number),
        (-1000i32..1000).prop_map(|x| Literal::Number(x as f64 / 4.0)),
        "[A-Za-z0-9 _.%\"\\\\-]{0,10}".prop_map(Literal::Text),
    ];
    let leaf = prop_oneof![
        (ident, op_strategy(), literal.clone()).prop_map(|(column, op, value)| Predicate::Compare { column, op, value }),
        (ident, prop::collection::vec(literal, 1..4)).prop_map(|(column, values)| Predicate::InSet { column, values }),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
        ]
    })
}

#[derive(Debug, Clone)]
struct Row {
    x: f64,
    y: f64,
    c: &'static str,
    flag: bool,
}

const LEVELS: [&str; 3] = ["a", "b", "c"];

fn typed_predicate() -> impl Strategy<Value = Predicate> {
    let numeric = (prop_oneof![Just("x"), Just("y")], op_strategy(), -4i32..24)
        .prop_map(|(c, op, v)| Predicate::num(c, op, v as f64 / 2.0));
    let categorical = (prop_oneof![Just(CompareOp::Eq), Just(CompareOp::Ne)], prop::sample::select(&["a", "b", "c", "z"][..]))
        .prop_map(|(op, v)| Predicate::text("c", op, v));
    let members = prop::sample::subsequence(&["a", "b", "c", "z"][..], 1..4).prop_map(|vs| Predicate::InSet {
        column: "c".into(),
        values: vs.into_iter().map(|v| Literal::Text(v.into())).collect(),
    });
    let flag = (prop_oneof![Just(CompareOp::Eq), Just(CompareOp::Ne)], 0..2u8, 0..3u8).prop_map(|(op, v, form)| {
        let value = match form {
            0 => Literal::Number(v as f64),
            1 => Literal::Text(if v == 1 { "yes" } else { "no" }.into()),
            _ => Literal::Text(if v == 1 { "true" } else { "false" }.into()),
        };
        Predicate::compare("flag", op, value)
    });
    let leaf = prop_oneof![numeric, categorical, members, flag];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
        ]
    })
}

fn rows_strategy() -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec(
        (-2i32..22, -2i32..22, prop::sample::select(&LEVELS[..]), any::<bool>())
            .prop_map(|(x, y, c, flag)| Row { x: x as f64 / 2.0, y: y as f64, c, flag }),
        1..40,
    )
}

fn cmp_f64(op: CompareOp, a: f64, b: f64) -> bool {
    match op {
        CompareOp::Eq => a == b,
        CompareOp::Ne => a != b,
        CompareOp::Lt => a < b,
        CompareOp::Le => a <= b,
        CompareOp::Gt => a > b,
        CompareOp::Ge => a >= b,
    }
}

fn naive_eval(p: &Predicate, r: &Row) -> bool {
    match p {
        Predicate::And(a, b) => naive_eval(a, r) && naive_eval(b, r),
        Predicate::Or(a, b) => naive_eval(a, r) || naive_eval(b, r),
        Predicate::InSet { values, .. } => values.iter().any(|v| matches!(v, Literal::Text(s) if s == r.c)),
        Predicate::Compare { column, op, value } => match (column.as_str(), value) {
            ("x", Literal::Number(v)) => cmp_f64(*op, r.x, *v),
            ("y", Literal::Number(v)) => cmp_f64(*op, r.y, *v),
            ("c", Literal::Text(s)) => (r.c == s) == (*op == CompareOp::Eq),
            ("flag", lit) => {
                let want = match lit {
                    Literal::Number(v) => *v == 1.0,
                    Literal::Text(s) => s == "yes" || s == "true",
                };
                (r.flag == want) == (*op == CompareOp::Eq)
            }
            _ => unreachable!("generator only builds typed leaves"),
        },
    }
}

const REFERENCE_QUERIES: [&str; 14] = [
    "age >= 72",
    "comorbidities >= 2",
    "treatment_conservative_management == 1",
    "disability == \"Y\"",
    "imd_band in [\"0-30%\"]",
    "highest_education in [\"Lower Than A Level\", \"No Formal quals\"]",
    "num_of_prev_attempts > 1",
    "region in [\"North Region\", \"Wales\"]",
    "(X > 45) and (Y < 20)",
    "age > 75",
    "prostate_specific_antigen < 10",
    "comorbidities > 2",
    "gleason_score == 4",
    "age >= 82.32",
];

fn runner() -> TestRunner {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn predicates_check() -> Check {
    let start = Instant::now();
    runner()
        .run(&any_predicate(), |p| {
            let text = p.render();
            let back = parse_unchecked(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(back, p, "render was {}", text);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    runner()
        .run(&(typed_predicate(), rows_strategy()), |(p, rows)| {
            let ds = Dataset::new(
                "mixed",
                vec![
                    Column::numeric("x", rows.iter().map(|r| r.x).collect()),
                    Column::numeric("y", rows.iter().map(|r| r.y).collect()),
                    Column::categorical("c", &rows.iter().map(|r| r.c).collect::<Vec<_>>()),
                    Column::boolean("flag", rows.iter().map(|r| r.flag).collect()),
                ],
                None,
            )
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mask = eval_mask(&p, &ds).map_err(|e| TestCaseError::fail(format!("{p}: {e}")))?;
            let expected: Vec<bool> = rows.iter().map(|r| naive_eval(&p, r)).collect();
            prop_assert_eq!(mask, expected, "predicate {}", p);
            Ok(())
        })
        .map_err(|e| format!("evaluation: {e}"))?;

    for q in REFERENCE_QUERIES {
        let p = parse_unchecked(q).map_err(|e| format!("{q}: {e}"))?;
        ensure(parse_unchecked(&p.render()).as_ref() == Ok(&p), format!("{q} does not round-trip"))?;
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("1000 round trips, 1000 evaluations, {} reference queries", REFERENCE_QUERIES.len()))
}

static TRANSPORT_CALLS: AtomicUsize = AtomicUsize::new(0);

struct CountingTransport;

impl Transport for CountingTransport {
    fn post(&self, _request: &HttpRequest) -> Result<HttpResponse, String> {
        TRANSPORT_CALLS.fetch_add(1, AtomicOrdering::SeqCst);
        Err("offline".into())
    }
}

fn audit_once(data: &Path, fixtures: &Path, out: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let args = [
        "smart",
        "audit",
        "--data",
        data.to_str().unwrap(),
        "--target",
        "recidivism",
        "--fit-logistic",
        "--provider",
        "scripted",
        "--fixtures",
        fixtures.to_str().unwrap(),
        "--context",
        "Predict whether a person reoffends within two years.",
        "--out-dir",
        out.to_str().unwrap(),
    ];
    let code = cli::run_with_transport(args, &|| Box::new(CountingTransport));
    ensure(code == 0, format!("audit exited with {code}"))?;
    let read = |f: &str| fs::read(out.join(f)).map_err(|e| format!("{f}: {e}"));
    Ok((read("report.md")?, read("report.jsonl")?))
}

fn golden_check() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = gen_recidivism(&SynthConfig {
        n_rows: 2000,
        seed: 7,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let data = dir.path().join("recidivism.csv");
    ds.write_csv(fs::File::create(&data).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut script = subgroup_script(&covariate_subgroups(&ds));
    script.insert(1, "Refined: the same analysis holds.".into());
    let fixtures = dir.path().join("fixtures.json");
    fs::write(&fixtures, serde_json::to_string(&script).unwrap()).map_err(|e| e.to_string())?;

    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(|e| e.to_string())?;
    let first = serial.install(|| audit_once(&data, &fixtures, &dir.path().join("a")))?;
    let second = serial.install(|| audit_once(&data, &fixtures, &dir.path().join("b")))?;
    let third = parallel.install(|| audit_once(&data, &fixtures, &dir.path().join("c")))?;
    ensure(first == second, "repeated runs differ")?;
    ensure(first == third, "serial and parallel runs differ")?;

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&golden).map_err(|e| e.to_string())?;
        fs::write(golden.join("report.md"), &first.0).map_err(|e| e.to_string())?;
        fs::write(golden.join("report.jsonl"), &first.1).map_err(|e| e.to_string())?;
    }
    let expected_md = fs::read(golden.join("report.md")).map_err(|e| format!("golden report.md: {e}"))?;
    let expected_jsonl = fs::read(golden.join("report.jsonl")).map_err(|e| format!("golden report.jsonl: {e}"))?;
    ensure(first.0 == expected_md, "report.md differs from the golden copy")?;
    ensure(first.1 == expected_jsonl, "report.jsonl differs from the golden copy")?;
    let calls = TRANSPORT_CALLS.load(AtomicOrdering::SeqCst);
    ensure(calls == 0, format!("{calls} network calls"))?;
    Ok(format!("3 runs byte-identical to golden ({} + {} bytes), 0 network calls", first.0.len(), first.1.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("family-wise error", fwer),
        ("false-negative rate", fnr),
        ("bias detection", bias),
        ("irrelevant-feature false positives", false_positives),
        ("no-relationship scenarios", scenarios),
        ("optimal split", splitter_check),
        ("metric values", metrics_check),
        ("predicate language", predicates_check),
        ("offline golden run", golden_check),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} {name}: PASS ({detail}; {secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} {name}: FAIL ({detail}; {secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
