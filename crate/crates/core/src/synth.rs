//! Synthetic data-generating processes, corruption protocols and the
//! controlled experiments built on them.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{run_audit, AuditError, AuditOptions};
use crate::baseline::{exhaustive_search, BaselineConfig, BaselineError};
use crate::dataset::{split_indices, Column, Dataset, DatasetError};
use crate::falsify::{test_slice_correctness, Correction, TestConfig};
use crate::hypothesis::HypothesisProvider;
use crate::model::{corrupt_on_slice, corrupt_proportion, fit_logistic, LogisticConfig, ModelError, Predictions};
use crate::predicate::{eval_predicate, CompareOp, Literal, Predicate, Slice};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

pub const RECIDIVISM_TARGET: &str = "recidivism";
pub const IRRELEVANT_PREFIX: &str = "synth_irrelevant_";
pub const RACE_LEVELS: [&str; 3] = ["white", "black", "other"];
const ORDINAL_LEVELS: [&str; 3] = ["low", "medium", "high"];

/// Recidivism DGP: `logit P(Y=1) = intercept - (d1*age_std + d2*income + d3*education) + eps`,
/// with `age_std = (age - age_center) / age_scale`, ordinal codes -1/0/1 and
/// `eps ~ N(noise_mu, noise_sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub seed: u64,
    pub delta: [f64; 3],
    pub intercept: f64,
    pub noise_mu: f64,
    pub noise_sigma: f64,
    pub corruption_p: f64,
    pub tau: f64,
    pub bernoulli_q: f64,
    pub age_min: u32,
    pub age_max: u32,
    pub age_center: f64,
    pub age_scale: f64,
    /// Probabilities of `white`, `black`, `other`.
    pub race_probs: [f64; 3],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 5000,
            seed: 0,
            delta: [0.5, 0.5, 0.5],
            intercept: 0.0,
            noise_mu: 0.0,
            noise_sigma: 1.0,
            corruption_p: 0.5,
            tau: 0.05,
            bernoulli_q: 0.5,
            age_min: 18,
            age_max: 70,
            age_center: 44.0,
            age_scale: 3.0,
            race_probs: [1.0 / 3.0; 3],
        }
    }
}

impl SynthConfig {
    /// Settings for the ethnicity-bias experiment: a sharper signal so the
    /// base model is accurate, and two minority groups.
    pub fn bias_experiment() -> Self {
        SynthConfig {
            n_rows: 40_000,
            delta: [4.0, 4.0, 4.0],
            noise_sigma: 0.5,
            age_scale: 5.0,
            race_probs: [0.2, 0.2, 0.6],
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.n_rows == 0 {
            return bad("n_rows must be at least 1");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        for (name, p) in [
            ("corruption_p", self.corruption_p),
            ("tau", self.tau),
            ("bernoulli_q", self.bernoulli_q),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.age_min > self.age_max {
            return bad("age_min exceeds age_max");
        }
        if !(self.age_scale > 0.0) {
            return bad("age_scale must be positive");
        }
        if self.race_probs.iter().any(|p| !(*p >= 0.0)) || self.race_probs.iter().sum::<f64>() <= 0.0 {
            return bad("race_probs must be non-negative with positive sum");
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Five covariates (gender, race, age, income, education) and a binary
/// `recidivism` target.
pub fn gen_recidivism(config: &SynthConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let n = config.n_rows;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let race_dist = WeightedIndex::new(config.race_probs).map_err(|e| SynthError::Config(e.to_string()))?;
    let noise = Normal::new(config.noise_mu, config.noise_sigma).map_err(|e| SynthError::Config(e.to_string()))?;
    let [d1, d2, d3] = config.delta;

    let mut gender = Vec::with_capacity(n);
    let mut race = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut income = Vec::with_capacity(n);
    let mut education = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        gender.push(if rng.random_bool(0.5) { "female" } else { "male" });
        race.push(RACE_LEVELS[race_dist.sample(&mut rng)]);
        let a = rng.random_range(config.age_min..=config.age_max);
        let inc = rng.random_range(0..3usize);
        let edu = rng.random_range(0..3usize);
        let eps = noise.sample(&mut rng);
        let x_age = (a as f64 - config.age_center) / config.age_scale;
        let logit = config.intercept - (d1 * x_age + d2 * (inc as f64 - 1.0) + d3 * (edu as f64 - 1.0)) + eps;
        y.push(rng.random_bool(sigmoid(logit)));
        age.push(a as f64);
        income.push(ORDINAL_LEVELS[inc]);
        education.push(ORDINAL_LEVELS[edu]);
    }
    Ok(Dataset::new(
        "recidivism",
        vec![
            Column::categorical("gender", &gender),
            Column::categorical("race", &race),
            Column::numeric("age", age),
            Column::categorical("income", &income),
            Column::categorical("education", &education),
            Column::boolean(RECIDIVISM_TARGET, y),
        ],
        Some(RECIDIVISM_TARGET),
    )?)
}

pub const IRRELEVANT_CATEGORIES: [&str; 4] = ["a", "b", "c", "d"];
pub const IRRELEVANT_PROBS: [f64; 4] = [0.1, 0.3, 0.4, 0.2];

/// Appends `k` columns independent of everything else. Each is, by a fair
/// coin, Bernoulli(0.1) or categorical over four levels with
/// probabilities 0.1, 0.3, 0.4, 0.2.
pub fn add_irrelevant_features(dataset: &Dataset, k: usize, seed: u64) -> Result<Dataset, SynthError> {
    if k == 0 {
        return Err(SynthError::Config("k must be at least 1".into()));
    }
    let n = dataset.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cat = WeightedIndex::new(IRRELEVANT_PROBS).expect("valid weights");
    let mut out = dataset.clone();
    for i in 0..k {
        let mut name = format!("{IRRELEVANT_PREFIX}{i}");
        let mut suffix = 1;
        while out.column(&name).is_some() {
            name = format!("{IRRELEVANT_PREFIX}{i}_{suffix}");
            suffix += 1;
        }
        let column = if rng.random_bool(0.5) {
            let values: Vec<&str> = (0..n).map(|_| IRRELEVANT_CATEGORIES[cat.sample(&mut rng)]).collect();
            Column::categorical(name, &values)
        } else {
            Column::boolean(name, (0..n).map(|_| rng.random_bool(0.1)).collect())
        };
        out = out.with_column(column)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Uniform,
    Skewed,
    Interactions,
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(ScenarioKind::Uniform),
            "skewed" => Ok(ScenarioKind::Skewed),
            "interactions" => Ok(ScenarioKind::Interactions),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

pub const SCENARIO_TARGET: &str = "loan_default";

/// Covariates with no relationship to the binary target.
pub fn gen_scenario(kind: ScenarioKind, n_rows: usize, seed: u64) -> Result<Dataset, SynthError> {
    if n_rows == 0 {
        return Err(SynthError::Config("n_rows must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cat = WeightedIndex::new(IRRELEVANT_PROBS).expect("valid weights");
    let names: &[&str] = match kind {
        ScenarioKind::Uniform | ScenarioKind::Skewed => &["N_runs", "M_pref", "A_rainfall", "F_color", "P_season"],
        ScenarioKind::Interactions => &["N_runs", "M_pref", "A_rainfall", "A_music_hap", "A_run_hap"],
    };
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n_rows); names.len()];
    let mut y = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row: [f64; 5] = match kind {
            ScenarioKind::Uniform => [
                rng.random_range(1..=499) as f64,
                rng.random_range(1..=5) as f64,
                rng.random_range(20000..=99999) as f64,
                rng.random_range(1..=6) as f64,
                rng.random_range(0..=3) as f64,
            ],
            ScenarioKind::Skewed => [
                rng.random_range(1..=499) as f64,
                rng.random_bool(0.5) as u8 as f64,
                cat.sample(&mut rng) as f64,
                rng.random_bool(0.1) as u8 as f64,
                rng.random_bool(0.05) as u8 as f64,
            ],
            ScenarioKind::Interactions => {
                let runs = rng.random_range(1..=499) as f64;
                let pref = rng.random_bool(0.5) as u8 as f64;
                let rain = cat.sample(&mut rng) as f64;
                [runs, pref, rain, pref * rain, runs * pref]
            }
        };
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        y.push(rng.random_bool(0.5));
    }
    let mut columns: Vec<Column> = names.iter().zip(cols).map(|(n, v)| Column::numeric(*n, v)).collect();
    columns.push(Column::boolean(SCENARIO_TARGET, y));
    Ok(Dataset::new(
        format!("scenario_{}", serde_plain(&kind)),
        columns,
        Some(SCENARIO_TARGET),
    )?)
}

fn serde_plain(kind: &ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Uniform => "uniform",
        ScenarioKind::Skewed => "skewed",
        ScenarioKind::Interactions => "interactions",
    }
}

/// A covariate-defined group: one level of a categorical column, or the
/// rows above a numeric column's median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Subgroup {
    Level { column: String, level: String },
    AboveMedian { column: String, median: f64 },
}

impl Subgroup {
    pub fn column(&self) -> &str {
        match self {
            Subgroup::Level { column, .. } | Subgroup::AboveMedian { column, .. } => column,
        }
    }

    pub fn predicate(&self) -> Predicate {
        match self {
            Subgroup::Level { column, level } => Predicate::text(column, CompareOp::Eq, level),
            Subgroup::AboveMedian { column, median } => Predicate::num(column, CompareOp::Gt, *median),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Subgroup::Level { column, level } => format!("rows whose {column} is {level}"),
            Subgroup::AboveMedian { column, .. } => format!("rows with above-median {column}"),
        }
    }

    /// Whether some condition of `predicate` selects this group: the same
    /// level by equality or membership, or for numeric groups a `>`/`>=`
    /// bound on the same column.
    pub fn matches(&self, predicate: &Predicate) -> bool {
        predicate.conditions().into_iter().any(|leaf| self.matches_condition(leaf))
    }

    pub fn matches_condition(&self, leaf: &Predicate) -> bool {
        match (self, leaf) {
            (
                Subgroup::Level { column, level },
                Predicate::Compare {
                    column: c,
                    op: CompareOp::Eq,
                    value: Literal::Text(v),
                },
            ) => c == column && v == level,
            (Subgroup::Level { column, level }, Predicate::InSet { column: c, values }) => {
                c == column && values.iter().any(|v| matches!(v, Literal::Text(t) if t == level))
            }
            (Subgroup::AboveMedian { column, .. }, Predicate::Compare { column: c, op, .. }) => {
                c == column && matches!(op, CompareOp::Gt | CompareOp::Ge)
            }
            _ => false,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Every single-covariate group of the recidivism covariates: each level of
/// the categorical columns and above-median age.
pub fn covariate_subgroups(dataset: &Dataset) -> Vec<Subgroup> {
    let mut out = Vec::new();
    for name in ["gender", "race", "age", "income", "education"] {
        let Some(col) = dataset.column(name) else { continue };
        if let Some(levels) = col.levels() {
            for l in levels {
                out.push(Subgroup::Level {
                    column: name.to_string(),
                    level: l.clone(),
                });
            }
        } else if let Some(v) = col.as_numeric() {
            out.push(Subgroup::AboveMedian {
                column: name.to_string(),
                median: median(v),
            });
        }
    }
    out
}

/// One group per covariate: male, black, above-median age, low income, low
/// education.
pub fn fnr_subgroups(dataset: &Dataset) -> Vec<Subgroup> {
    let level = |column: &str, level: &str| Subgroup::Level {
        column: column.into(),
        level: level.into(),
    };
    let age = dataset.column("age").and_then(Column::as_numeric).map(median).unwrap_or(44.0);
    vec![
        level("gender", "male"),
        level("race", "black"),
        Subgroup::AboveMedian {
            column: "age".into(),
            median: age,
        },
        level("income", "low"),
        level("education", "low"),
    ]
}

/// Scripted replies that stand in for a provider with the task context:
/// a feasibility analysis and "Yes", then one hypothesis per group, then
/// the groups' predicates in map form.
pub fn subgroup_script(groups: &[Subgroup]) -> Vec<String> {
    let generation: String = groups
        .iter()
        .map(|g| {
            format!(
                "Hypothesis: the model underperforms for {}; Justification: {} is a plausible driver of reoffending risk that the model may capture unevenly.\n",
                g.describe(),
                g.column()
            )
        })
        .collect();
    let ops: Vec<String> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| format!("{i}: '{}'", g.predicate().render()))
        .collect();
    vec![
        "Demographic and socioeconomic covariates are plausibly related to how well the model predicts.".into(),
        "Yes".into(),
        generation,
        format!("{{{}}}", ops.join(", ")),
    ]
}

/// Scripted provider enumerating [`covariate_subgroups`] of `dataset`.
pub fn subgroup_provider(dataset: &Dataset) -> HypothesisProvider {
    HypothesisProvider::scripted(subgroup_script(&covariate_subgroups(dataset)))
}

/// Scripted provider enumerating [`fnr_subgroups`] of `dataset`.
pub fn fnr_provider(dataset: &Dataset) -> HypothesisProvider {
    HypothesisProvider::scripted(subgroup_script(&fnr_subgroups(dataset)))
}

/// Scripted provider whose feasibility verdict is negative.
pub fn infeasible_provider(_dataset: &Dataset) -> HypothesisProvider {
    HypothesisProvider::scripted([
        "The covariates have no plausible relationship to the outcome or to model errors.",
        "No",
    ])
}

/// Builds a fresh provider for the audit dataset of one run.
pub type ProviderFactory<'a> = &'a (dyn Fn(&Dataset) -> HypothesisProvider + Sync);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub test_fraction: f64,
    pub logistic: LogisticConfig,
    pub audit: AuditOptions,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            test_fraction: 0.5,
            logistic: LogisticConfig::default(),
            audit: AuditOptions {
                context: "Predict whether a person reoffends (recidivism) from demographic and socioeconomic covariates."
                    .into(),
                n_hypotheses: 64,
                n_refine: 0,
                ..AuditOptions::default()
            },
            baseline: BaselineConfig::default(),
        }
    }
}

impl ExperimentSettings {
    /// Both searchers Bonferroni-corrected. The baseline's resample count is
    /// raised so p-values can fall below `alpha / m` for its few hundred tests.
    pub fn fnr() -> Self {
        let base = ExperimentSettings::default();
        ExperimentSettings {
            baseline: BaselineConfig {
                test: TestConfig {
                    correction: Correction::Bonferroni,
                    bootstrap_b: 20_000,
                    ..base.baseline.test.clone()
                },
                ..base.baseline.clone()
            },
            ..base
        }
    }
}

/// Seed for run `run` of a study with master seed `seed`.
pub fn run_seed(seed: u64, run: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng.next_u64()
}

/// The model under test for one dataset: logistic regression fit on a
/// training split, predicting the held-out rows.
pub struct Fitted {
    pub test: Dataset,
    pub labels: Vec<u8>,
    pub predictions: Predictions,
}

pub fn fit_and_predict(dataset: &Dataset, settings: &ExperimentSettings, seed: u64) -> Result<Fitted, SynthError> {
    let (train_rows, test_rows) = split_indices(dataset.n_rows(), settings.test_fraction, seed)?;
    let train = dataset.select_rows(&train_rows);
    let test = dataset.select_rows(&test_rows);
    let model = fit_logistic(
        &train,
        &LogisticConfig {
            seed,
            ..settings.logistic
        },
    )?;
    let predictions = model.predict(&test)?;
    let labels = test.labels()?;
    Ok(Fitted {
        test,
        labels,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

impl RateSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / n };
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        RateSummary { mean, sd, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnrSummary {
    pub n_corrupted: usize,
    pub runs: usize,
    pub smart: RateSummary,
    pub baseline: RateSummary,
    /// How a found slice is matched to a corrupted group.
    pub matching_rule: String,
}

pub const MATCHING_RULE: &str = "a flagged slice identifies a corrupted group when one of its conditions selects the group \
     (its level, or a lower bound on its numeric column) and every other condition selects some corrupted group";

/// Corrupts every row that belongs to at least one of `groups`.
fn corrupt_groups(
    predictions: &Predictions,
    groups: &[Subgroup],
    dataset: &Dataset,
    p: f64,
    q: f64,
    seed: u64,
) -> Result<Predictions, SynthError> {
    let predicate = groups
        .iter()
        .map(Subgroup::predicate)
        .reduce(Predicate::or)
        .ok_or_else(|| SynthError::Config("no groups to corrupt".into()))?;
    let slice = eval_predicate(&predicate, dataset).map_err(|e| SynthError::Config(e.to_string()))?;
    Ok(corrupt_on_slice(predictions, &slice, p, q, seed)?)
}

/// Share of `groups` not identified by any `found` slice, per [`MATCHING_RULE`].
pub fn miss_rate<'a>(groups: &[Subgroup], found: impl Iterator<Item = &'a Predicate> + Clone) -> f64 {
    let planted = |p: &Predicate| {
        p.conditions()
            .into_iter()
            .all(|leaf| groups.iter().any(|g| g.matches_condition(leaf)))
    };
    let missed = groups
        .iter()
        .filter(|g| !found.clone().any(|p| planted(p) && g.matches(p)))
        .count();
    missed as f64 / groups.len() as f64
}

/// False-negative rate of SMART and the exhaustive baseline: per run,
/// corrupts `n_corrupted` randomly chosen covariate groups (one per chosen
/// covariate) and records the share of them not flagged.
pub fn run_fnr_experiment(
    n_corrupted: usize,
    runs: usize,
    config: &SynthConfig,
    settings: &ExperimentSettings,
    make_provider: ProviderFactory<'_>,
) -> Result<FnrSummary, SynthError> {
    if !(1..=5).contains(&n_corrupted) {
        return Err(SynthError::Config("n_corrupted must be between 1 and 5".into()));
    }
    let per_run: Vec<Result<(f64, f64), SynthError>> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(config.seed, run);
            let ds = gen_recidivism(&SynthConfig { seed, ..config.clone() })?;
            let fitted = fit_and_predict(&ds, settings, seed)?;
            let groups = pick_groups(&fitted.test, n_corrupted, seed);
            let preds = corrupt_groups(
                &fitted.predictions,
                &groups,
                &fitted.test,
                config.corruption_p,
                config.bernoulli_q,
                seed,
            )?;

            let mut provider = make_provider(&fitted.test);
            let report = run_audit(&fitted.test, &preds, &settings.audit, &mut provider)?;
            let smart = miss_rate(&groups, report.failures().into_iter().map(|r| &r.predicate));

            let base = exhaustive_search(&fitted.test, &fitted.labels, &preds, &settings.baseline)?;
            let baseline = miss_rate(&groups, base.flagged_failures().into_iter().map(|r| &r.predicate));
            Ok((smart, baseline))
        })
        .collect();
    let mut smart = Vec::new();
    let mut baseline = Vec::new();
    for r in per_run {
        let (s, b) = r?;
        smart.push(s);
        baseline.push(b);
    }
    Ok(FnrSummary {
        n_corrupted,
        runs,
        smart: RateSummary::from_values(smart),
        baseline: RateSummary::from_values(baseline),
        matching_rule: MATCHING_RULE.into(),
    })
}

/// `n` of the [`fnr_subgroups`], chosen at random.
fn pick_groups(dataset: &Dataset, n: usize, seed: u64) -> Vec<Subgroup> {
    let all = fnr_subgroups(dataset);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut chosen = rand::seq::index::sample(&mut rng, all.len(), n).into_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| all[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub tau: f64,
    /// The race level whose predictions were corrupted.
    pub corrupted: String,
    pub p_white: RateSummary,
    pub p_black: RateSummary,
}

/// For each `tau` and each of `white`/`black`: over `seeds` datasets and
/// `runs` corruptions per dataset, how often SMART's top-ranked slice
/// references each group. Spreads are across seeds.
pub fn run_bias_experiment(
    tau_grid: &[f64],
    runs: usize,
    seeds: usize,
    config: &SynthConfig,
    settings: &ExperimentSettings,
    make_provider: ProviderFactory<'_>,
) -> Result<Vec<BiasRow>, SynthError> {
    let fitted: Vec<Fitted> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = run_seed(config.seed, s);
            let ds = gen_recidivism(&SynthConfig { seed, ..config.clone() })?;
            fit_and_predict(&ds, settings, seed)
        })
        .collect::<Result<_, _>>()?;
    let white = Subgroup::Level {
        column: "race".into(),
        level: "white".into(),
    };
    let black = Subgroup::Level {
        column: "race".into(),
        level: "black".into(),
    };
    let mut rows = Vec::new();
    for (ti, &tau) in tau_grid.iter().enumerate() {
        for target in [&white, &black] {
            let per_seed: Vec<Result<(f64, f64), SynthError>> = fitted
                .par_iter()
                .enumerate()
                .map(|(si, f)| {
                    let slice = eval_predicate(&target.predicate(), &f.test).expect("race column");
                    let (mut w, mut b) = (0usize, 0usize);
                    for run in 0..runs as u64 {
                        let seed = run_seed(config.seed ^ ((ti as u64) << 32 | si as u64), run);
                        let preds = corrupt_proportion(&f.predictions, &slice, tau, seed)?;
                        let mut provider = make_provider(&f.test);
                        let report = run_audit(&f.test, &preds, &settings.audit, &mut provider)?;
                        if let Some(top) = report.top_failure() {
                            w += white.matches(&top.predicate) as usize;
                            b += black.matches(&top.predicate) as usize;
                        }
                    }
                    Ok((w as f64 / runs as f64, b as f64 / runs as f64))
                })
                .collect();
            let mut pw = Vec::new();
            let mut pb = Vec::new();
            for r in per_seed {
                let (w, b) = r?;
                pw.push(w);
                pb.push(b);
            }
            rows.push(BiasRow {
                tau,
                corrupted: match target {
                    Subgroup::Level { level, .. } => level.clone(),
                    _ => unreachable!(),
                },
                p_white: RateSummary::from_values(pw),
                p_black: RateSummary::from_values(pb),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpSummary {
    pub k: usize,
    pub runs: usize,
    /// Per-run share of slice conditions that use an irrelevant column.
    pub smart: RateSummary,
    pub baseline: RateSummary,
}

fn irrelevant_share<'a>(found: impl Iterator<Item = &'a Predicate>) -> f64 {
    let (mut total, mut bad) = (0usize, 0usize);
    for p in found {
        for leaf in p.conditions() {
            total += 1;
            bad += leaf.leaf_column().is_some_and(|c| c.starts_with(IRRELEVANT_PREFIX)) as usize;
        }
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Irrelevant-feature false positives: the recidivism data with `k`
/// irrelevant columns and one corrupted covariate group; compares the share
/// of reported conditions that use irrelevant columns.
pub fn run_fp_experiment(
    k: usize,
    runs: usize,
    config: &SynthConfig,
    settings: &ExperimentSettings,
    make_provider: ProviderFactory<'_>,
) -> Result<FpSummary, SynthError> {
    let per_run: Vec<Result<(f64, f64), SynthError>> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(config.seed, run);
            let ds = gen_recidivism(&SynthConfig { seed, ..config.clone() })?;
            let ds = add_irrelevant_features(&ds, k, seed)?;
            let fitted = fit_and_predict(&ds, settings, seed)?;
            let groups = pick_groups(&fitted.test, 1, seed);
            let preds = corrupt_groups(
                &fitted.predictions,
                &groups,
                &fitted.test,
                config.corruption_p,
                config.bernoulli_q,
                seed,
            )?;
            let mut provider = make_provider(&fitted.test);
            let report = run_audit(&fitted.test, &preds, &settings.audit, &mut provider)?;
            let smart = irrelevant_share(report.failures().into_iter().map(|r| &r.predicate));
            let base = exhaustive_search(&fitted.test, &fitted.labels, &preds, &settings.baseline)?;
            let baseline = irrelevant_share(base.flagged_failures().into_iter().map(|r| &r.predicate));
            Ok((smart, baseline))
        })
        .collect();
    let (mut smart, mut baseline) = (Vec::new(), Vec::new());
    for r in per_run {
        let (s, b) = r?;
        smart.push(s);
        baseline.push(b);
    }
    Ok(FpSummary {
        k,
        runs,
        smart: RateSummary::from_values(smart),
        baseline: RateSummary::from_values(baseline),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub kind: ScenarioKind,
    pub runs: usize,
    /// Slices SMART reported significant, per run.
    pub smart_slices: Vec<usize>,
    /// Slices the baseline flagged, per run.
    pub baseline_slices: Vec<usize>,
}

impl ScenarioSummary {
    pub fn smart_runs_with_slices(&self) -> usize {
        self.smart_slices.iter().filter(|&&s| s > 0).count()
    }

    pub fn baseline_runs_with_slices(&self) -> usize {
        self.baseline_slices.iter().filter(|&&s| s > 0).count()
    }
}

/// No-relationship scenarios: the feasibility-gated pipeline against the
/// baseline on data where no covariate relates to the outcome.
pub fn run_scenario_experiment(
    kind: ScenarioKind,
    n_rows: usize,
    runs: usize,
    seed: u64,
    settings: &ExperimentSettings,
    make_provider: ProviderFactory<'_>,
) -> Result<ScenarioSummary, SynthError> {
    let per_run: Vec<Result<(usize, usize), SynthError>> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let s = run_seed(seed, run);
            let ds = gen_scenario(kind, n_rows, s)?;
            let fitted = fit_and_predict(&ds, settings, s)?;
            let mut provider = make_provider(&fitted.test);
            let opts = AuditOptions {
                context: "Predict loan default from the listed attributes.".into(),
                ..settings.audit.clone()
            };
            let report = run_audit(&fitted.test, &fitted.predictions, &opts, &mut provider)?;
            let base = exhaustive_search(&fitted.test, &fitted.labels, &fitted.predictions, &settings.baseline)?;
            Ok((report.selected().len(), base.flagged().len()))
        })
        .collect();
    let (mut smart_slices, mut baseline_slices) = (Vec::new(), Vec::new());
    for r in per_run {
        let (s, b) = r?;
        smart_slices.push(s);
        baseline_slices.push(b);
    }
    Ok(ScenarioSummary {
        kind,
        runs,
        smart_slices,
        baseline_slices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwerSimulation {
    pub trials: usize,
    pub m: usize,
    pub alpha: f64,
    pub uncorrected: f64,
    pub bonferroni: f64,
}

/// Null simulation of family-wise error: each trial draws correctness that
/// is independent of `m` random binary features and tests the slice where
/// each feature is set. Reports the share of trials with any rejection.
pub fn run_fwer_simulation(
    trials: usize,
    m: usize,
    n_rows: usize,
    alpha: f64,
    bootstrap_b: usize,
    seed: u64,
) -> Result<FwerSimulation, SynthError> {
    let base = TestConfig {
        alpha,
        correction: Correction::None,
        bootstrap_b,
        min_slice_size: 1,
        ..TestConfig::default()
    };
    base.validate().map_err(|e| SynthError::Config(e.to_string()))?;
    let hits: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = run_seed(seed, t);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let correct: Vec<u8> = (0..n_rows).map(|_| rng.random_bool(0.8) as u8).collect();
            let cfg = TestConfig { seed: s, ..base.clone() };
            let mut min_p = f64::INFINITY;
            for j in 0..m {
                let rows: Vec<usize> = (0..n_rows).filter(|_| rng.random_bool(0.5)).collect();
                let slice = Slice {
                    predicate: Predicate::num(format!("f{j}"), CompareOp::Eq, 1.0),
                    rows,
                };
                if let Ok(r) = test_slice_correctness(&slice, &correct, &cfg, j, j as u64) {
                    min_p = min_p.min(r.p_value);
                }
            }
            (min_p < alpha, min_p < alpha / m as f64)
        })
        .collect();
    let share = |f: fn(&(bool, bool)) -> bool| hits.iter().filter(|h| f(h)).count() as f64 / trials.max(1) as f64;
    Ok(FwerSimulation {
        trials,
        m,
        alpha,
        uncorrected: share(|h| h.0),
        bonferroni: share(|h| h.1),
    })
}
