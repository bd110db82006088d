//! The end-to-end audit: feasibility, hypothesis generation,
//! operationalization, falsification and report assembly.

use log::{info, warn};
use regex::Regex;
use thiserror::Error;

use crate::dataset::{describe, split_indices, ColumnData, Dataset};
use crate::falsify::{run_falsification, smart_nsf_rank, Evidence, FalsifyError, SliceCandidate, TestConfig};
use crate::hypothesis::{
    feasibility_check, generate_hypotheses, operationalize, Hypothesis, HypothesisError, HypothesisProvider,
    ProviderKind, PromptBundle, Unoperationalized,
};
use crate::metrics::slice_metrics;
use crate::model::Predictions;
use crate::predicate::{eval_predicate, Predicate};
use crate::report::{AuditReport, HypothesisRow, MetricsRow, OperationalizedBy, ReportHeader, RunSnapshot};
use crate::splitter::{optimal_categorical_split, optimal_split_query, SplitConstraints};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("provider: {0}")]
    Provider(String),
}

impl From<HypothesisError> for AuditError {
    fn from(e: HypothesisError) -> Self {
        match e {
            HypothesisError::File(m) => AuditError::Config(format!("hypothesis: {m}")),
            other => AuditError::Provider(format!("hypothesis: {other}")),
        }
    }
}

impl From<FalsifyError> for AuditError {
    fn from(e: FalsifyError) -> Self {
        match e {
            FalsifyError::Config(m) => AuditError::Config(format!("falsify: {m}")),
            other => AuditError::Data(format!("falsify: {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    /// Free-text task context handed to the provider.
    pub context: String,
    pub n_hypotheses: usize,
    pub requirements: Option<String>,
    /// Ask the provider whether any subgroup differences are plausible first.
    pub feasibility: bool,
    pub n_refine: usize,
    /// Skip testing and rank hypotheses in provider order.
    pub nsf: bool,
    /// Operationalize every hypothesis with the optimal splitter.
    pub data_driven_ops: bool,
    /// Share of rows held back for finding data-driven splits.
    pub exploration_fraction: f64,
    pub max_categorical_subset: usize,
    pub max_adjust: usize,
    pub test: TestConfig,
    pub split: SplitConstraints,
    pub conventional_odds: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            context: String::new(),
            n_hypotheses: 5,
            requirements: None,
            feasibility: true,
            n_refine: 1,
            nsf: false,
            data_driven_ops: false,
            exploration_fraction: 0.5,
            max_categorical_subset: 2,
            max_adjust: 2,
            test: TestConfig::default(),
            split: SplitConstraints::default(),
            conventional_odds: false,
        }
    }
}

impl AuditOptions {
    pub fn validate(&self) -> Result<(), AuditError> {
        self.test.validate()?;
        self.split.validate().map_err(|e| AuditError::Config(format!("splitter: {e}")))?;
        if self.n_hypotheses == 0 {
            return Err(AuditError::Config("n_hypotheses must be at least 1".into()));
        }
        if !(self.exploration_fraction > 0.0 && self.exploration_fraction < 1.0) {
            return Err(AuditError::Config("exploration_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Columns whose names (or names with `_` read as spaces) appear in `text`.
pub fn mentioned_columns<'a>(text: &str, dataset: &'a Dataset) -> Vec<&'a str> {
    let lower = text.to_lowercase();
    let found = |needle: &str| {
        Regex::new(&format!(r"(^|[^a-z0-9_]){}($|[^a-z0-9_])", regex::escape(needle)))
            .is_ok_and(|re| re.is_match(&lower))
    };
    dataset
        .column_names()
        .filter(|c| Some(*c) != dataset.target())
        .filter(|c| {
            let c = c.to_lowercase();
            found(&c) || found(&c.replace('_', " "))
        })
        .collect()
}

fn data_driven_predicate(
    text: &str,
    explore: &Dataset,
    correct: &[u8],
    opts: &AuditOptions,
) -> Result<Predicate, String> {
    let features = mentioned_columns(text, explore);
    if features.is_empty() {
        return Err("no dataset column named in the hypothesis".into());
    }
    let single_categorical = features.len() == 1
        && matches!(explore.column(features[0]).map(|c| c.data()), Some(ColumnData::Categorical { .. }));
    let found = if single_categorical {
        optimal_categorical_split(explore, correct, features[0], &opts.split, opts.max_categorical_subset)
    } else {
        optimal_split_query(explore, correct, &features, &opts.split)
    };
    found.map(|r| r.predicate).map_err(|e| format!("data-driven split failed: {e}"))
}

struct Planned {
    hypothesis: Hypothesis,
    predicate: Option<Predicate>,
    by: Option<OperationalizedBy>,
    note: Option<String>,
}

/// Runs the full audit of `predictions` against `dataset` (which must have a
/// target). The provider is only contacted for the steps that need it.
pub fn run_audit(
    dataset: &Dataset,
    predictions: &Predictions,
    opts: &AuditOptions,
    provider: &mut HypothesisProvider,
) -> Result<AuditReport, AuditError> {
    opts.validate()?;
    let target = dataset
        .target()
        .ok_or_else(|| AuditError::Config("dataset has no target column".into()))?
        .to_string();
    let labels = dataset.labels().map_err(|e| AuditError::Data(format!("dataset: {e}")))?;
    predictions
        .check_len(dataset.n_rows())
        .map_err(|e| AuditError::Data(format!("model: {e}")))?;
    let context = describe(dataset, &opts.context);
    let conversational = !matches!(provider.kind, ProviderKind::File(_));

    let mut snapshot = RunSnapshot {
        dataset: dataset.name().to_string(),
        target: target.clone(),
        n_rows: dataset.n_rows(),
        test_rows: dataset.n_rows(),
        prediction_source: predictions.source,
        provider: provider.source(),
        context: opts.context.clone(),
        n_hypotheses: opts.n_hypotheses,
        test: opts.test.clone(),
        split: opts.split,
        nsf: opts.nsf,
        data_driven_ops: opts.data_driven_ops,
        tests_performed: 0,
        adjusted_alpha: None,
    };

    let feasibility = if opts.feasibility && conversational {
        let f = feasibility_check(&context, &opts.context, &target, provider, opts.n_refine)?;
        info!("feasibility: {}", if f.feasible { "yes" } else { "no" });
        Some(f)
    } else {
        None
    };
    if feasibility.as_ref().is_some_and(|f| !f.feasible) {
        return Ok(AuditReport {
            header: ReportHeader::default(),
            run: snapshot,
            feasibility,
            hypotheses: Vec::new(),
            metrics: Vec::new(),
            transcript_digest: provider.transcript_digest(),
            summary: None,
            warnings: Vec::new(),
        });
    }

    let bundle = PromptBundle {
        external_context: String::new(),
        data_context: context.clone(),
        n_hypotheses: opts.n_hypotheses,
        requirements: opts.requirements.clone(),
    };
    let hypotheses = generate_hypotheses(&bundle, provider)?;
    info!("{} hypotheses", hypotheses.len());

    let mut plan: Vec<Planned> = Vec::new();
    let mut fallback: Vec<(Hypothesis, String)> = Vec::new();
    if opts.data_driven_ops {
        fallback.extend(hypotheses.iter().map(|h| (h.clone(), String::new())));
    } else {
        // The file provider cannot answer prompts, so its hypotheses without
        // an operationalization go straight to the splitter.
        let (ask, direct): (Vec<Hypothesis>, Vec<Hypothesis>) = hypotheses
            .iter()
            .cloned()
            .partition(|h| conversational || h.operationalization.is_some());
        fallback.extend(direct.into_iter().map(|h| (h, String::new())));
        if !ask.is_empty() {
            let (ok, failed) = operationalize(&ask, dataset, &context, provider, opts.max_adjust)?;
            for o in ok {
                plan.push(Planned {
                    hypothesis: o.hypothesis,
                    predicate: Some(o.predicate),
                    by: Some(OperationalizedBy::Provider),
                    note: None,
                });
            }
            for Unoperationalized {
                hypothesis_id,
                candidate,
                reason,
            } in failed
            {
                warn!("hypothesis {hypothesis_id}: {reason}; trying a data-driven split");
                let h = ask.iter().find(|h| h.id == hypothesis_id).expect("failed id").clone();
                fallback.push((h, candidate.unwrap_or_default()));
            }
        }
    }

    // Data-driven splits are found on held-back rows and tested on the rest.
    let mut test_ds = dataset.clone();
    let mut test_labels = labels.clone();
    let mut test_preds = predictions.clone();
    if !fallback.is_empty() {
        let (explore_rows, test_rows) = split_indices(dataset.n_rows(), 1.0 - opts.exploration_fraction, opts.test.seed)
            .map_err(|e| AuditError::Data(format!("dataset: {e}")))?;
        let explore = dataset.select_rows(&explore_rows);
        let explore_correct: Vec<u8> = explore_rows
            .iter()
            .map(|&r| (predictions.values[r] == labels[r]) as u8)
            .collect();
        for (h, candidate) in fallback {
            let text = format!("{} {}", h.text, candidate);
            let planned = match data_driven_predicate(&text, &explore, &explore_correct, opts) {
                Ok(p) => Planned {
                    hypothesis: Hypothesis {
                        operationalization: Some(p.render()),
                        ..h
                    },
                    predicate: Some(p),
                    by: Some(OperationalizedBy::DataDriven),
                    note: None,
                },
                Err(reason) => Planned {
                    hypothesis: h,
                    predicate: None,
                    by: None,
                    note: Some(reason),
                },
            };
            plan.push(planned);
        }
        test_ds = dataset.select_rows(&test_rows);
        test_labels = test_rows.iter().map(|&r| labels[r]).collect();
        test_preds = Predictions {
            values: test_rows.iter().map(|&r| predictions.values[r]).collect(),
            source: predictions.source,
        };
        snapshot.test_rows = test_rows.len();
    }
    plan.sort_by_key(|p| p.hypothesis.id);

    let candidates: Vec<SliceCandidate> = plan
        .iter()
        .filter_map(|p| {
            p.predicate.as_ref().map(|pred| SliceCandidate {
                id: p.hypothesis.id,
                predicate: pred.clone(),
            })
        })
        .collect();

    let mut rows: Vec<HypothesisRow> = Vec::new();
    let row_for = |p: &Planned| HypothesisRow {
        hypothesis_id: p.hypothesis.id,
        hypothesis: p.hypothesis.text.clone(),
        justification: p.hypothesis.justification.clone(),
        operationalization: p.predicate.as_ref().map(Predicate::render),
        operationalized_by: p.by,
        result: None,
        evidence: Evidence::Untested,
        note: p.note.clone(),
    };
    if opts.nsf {
        for entry in smart_nsf_rank(&candidates) {
            let p = plan.iter().find(|p| p.hypothesis.id == entry.hypothesis_id).expect("planned");
            rows.push(row_for(p));
        }
    } else {
        let outcome = run_falsification(&candidates, &test_ds, &test_labels, &test_preds, &opts.test)?;
        snapshot.tests_performed = outcome.tests_performed();
        snapshot.adjusted_alpha = Some(opts.test.adjusted_alpha(outcome.tests_performed()));
        for r in &outcome.results {
            let p = plan.iter().find(|p| p.hypothesis.id == r.hypothesis_id).expect("planned");
            let mut row = row_for(p);
            row.evidence = r.evidence;
            row.result = Some(r.clone());
            rows.push(row);
        }
        for u in &outcome.untestable {
            let p = plan.iter().find(|p| p.hypothesis.id == u.hypothesis_id).expect("planned");
            let mut row = row_for(p);
            row.note = Some(u.reason.clone());
            rows.push(row);
        }
    }
    for p in plan.iter().filter(|p| p.predicate.is_none()) {
        rows.push(row_for(p));
    }

    let mut metrics = Vec::new();
    let mut warnings = Vec::new();
    for row in rows.iter().filter(|r| r.note.is_none()) {
        let p = plan.iter().find(|p| p.hypothesis.id == row.hypothesis_id).expect("planned");
        let Some(pred) = &p.predicate else { continue };
        let slice = eval_predicate(pred, &test_ds).map_err(|e| AuditError::Data(format!("predicate: {e}")))?;
        match slice_metrics(&slice, &test_labels, &test_preds, opts.conventional_odds) {
            Ok(m) => metrics.push(MetricsRow {
                hypothesis_id: row.hypothesis_id,
                p_value_bootstrap: row.p_value(),
                metrics: m,
            }),
            Err(e) => warnings.push(format!("metrics for H{}: {e}", row.hypothesis_id)),
        }
    }

    Ok(AuditReport {
        header: ReportHeader::default(),
        run: snapshot,
        feasibility,
        hypotheses: rows,
        metrics,
        transcript_digest: provider.transcript_digest(),
        summary: None,
        warnings,
    })
}
