//! Audit reports: a Markdown document for people and a JSON-lines file that
//! round-trips every field.

use std::fmt::Write as _;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::falsify::{Evidence, SliceTestResult, TestConfig};
use crate::hypothesis::{FeasibilityOutcome, HypothesisProvider, HypothesisSource, SYSTEM_MESSAGE};
use crate::metrics::SliceMetrics;
use crate::model::PredictionSource;
use crate::splitter::SplitConstraints;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("machine report has no run record")]
    MissingRun,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Machine,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "machine" | "jsonl" => Ok(ReportFormat::Machine),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Fields that may differ between otherwise identical runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub generated_at_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub dataset: String,
    pub target: String,
    pub n_rows: usize,
    /// Rows used for hypothesis testing; fewer than `n_rows` when part of
    /// the data was held back for data-driven operationalization.
    pub test_rows: usize,
    pub prediction_source: PredictionSource,
    pub provider: HypothesisSource,
    pub context: String,
    pub n_hypotheses: usize,
    pub test: TestConfig,
    pub split: SplitConstraints,
    pub nsf: bool,
    pub data_driven_ops: bool,
    pub tests_performed: usize,
    pub adjusted_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationalizedBy {
    Provider,
    DataDriven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub hypothesis_id: usize,
    pub hypothesis: String,
    pub justification: String,
    pub operationalization: Option<String>,
    pub operationalized_by: Option<OperationalizedBy>,
    pub result: Option<SliceTestResult>,
    pub evidence: Evidence,
    /// Why the hypothesis was not tested, if it was not.
    pub note: Option<String>,
}

impl HypothesisRow {
    pub fn p_value(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.p_value)
    }

    pub fn delta_acc(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.delta_acc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub hypothesis_id: usize,
    pub p_value_bootstrap: Option<f64>,
    pub metrics: SliceMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub header: ReportHeader,
    pub run: RunSnapshot,
    pub feasibility: Option<FeasibilityOutcome>,
    /// Tested hypotheses in rank order, then untested ones.
    pub hypotheses: Vec<HypothesisRow>,
    pub metrics: Vec<MetricsRow>,
    pub transcript_digest: String,
    pub summary: Option<String>,
    pub warnings: Vec<String>,
}

impl AuditReport {
    /// Significant results in rank order, at most `top_n`.
    pub fn selected(&self) -> Vec<&SliceTestResult> {
        self.hypotheses
            .iter()
            .filter_map(|h| h.result.as_ref())
            .filter(|r| r.significant)
            .take(self.run.test.top_n)
            .collect()
    }

    /// The first-ranked result, when it is significant.
    pub fn top_slice(&self) -> Option<&SliceTestResult> {
        self.selected().into_iter().next()
    }

    /// Like [`selected`](Self::selected), keeping only slices where the
    /// model does worse than on the rest.
    pub fn failures(&self) -> Vec<&SliceTestResult> {
        self.hypotheses
            .iter()
            .filter_map(|h| h.result.as_ref())
            .filter(|r| r.significant && r.acc_slice < r.acc_rest)
            .take(self.run.test.top_n)
            .collect()
    }

    pub fn top_failure(&self) -> Option<&SliceTestResult> {
        self.failures().into_iter().next()
    }

    pub fn tested(&self) -> usize {
        self.hypotheses.iter().filter(|h| h.result.is_some()).count()
    }
}

fn fixed(x: Option<f64>, digits: usize) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.digits$}"),
        Some(v) => format!("{v}"),
        None => "NA".into(),
    }
}

fn cell(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace('|', "\\|")
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
}

/// The hypothesis table.
pub fn render_hypothesis_table(report: &AuditReport) -> String {
    let rows: Vec<Vec<String>> = report
        .hypotheses
        .iter()
        .map(|h| {
            vec![
                cell(&h.hypothesis),
                cell(&h.justification),
                h.operationalization
                    .as_deref()
                    .map(|o| format!("`{}`", o.replace('`', "'")))
                    .unwrap_or_else(|| "NA".into()),
                fixed(h.p_value(), 3),
                fixed(h.delta_acc(), 3),
                h.evidence.to_string(),
            ]
        })
        .collect();
    let mut out = String::new();
    table(
        &mut out,
        &["Hypothesis", "Justification", "Operationalization", "p-value", "\\|ΔAcc\\|", "Evidence"],
        &rows,
    );
    out
}

/// Both metric tables, rows labelled `H<id>`.
pub fn render_metric_tables(report: &AuditReport) -> String {
    let label = |r: &MetricsRow| format!("H{}", r.hypothesis_id);
    let first: Vec<Vec<String>> = report
        .metrics
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                label(r),
                m.group_size.to_string(),
                fixed(Some(m.support), 2),
                fixed(r.p_value_bootstrap, 2),
                m.num_criteria.to_string(),
                fixed(Some(m.outcome_diff), 2),
                fixed(Some(m.accuracy_diff), 2),
            ]
        })
        .collect();
    let second: Vec<Vec<String>> = report
        .metrics
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                label(r),
                fixed(m.odds_ratio_outcome, 2),
                fixed(m.odds_ratio_acc, 2),
                fixed(m.lift_outcome, 2),
                fixed(m.lift_acc, 2),
                fixed(Some(m.weighted_relative_y), 2),
                fixed(Some(m.weighted_relative_acc), 2),
            ]
        })
        .collect();
    let mut out = String::new();
    table(
        &mut out,
        &["", "group_size", "support", "p_value_bootstrap", "num_criteria", "outcome_diff", "accuracy_diff"],
        &first,
    );
    out.push('\n');
    table(
        &mut out,
        &[
            "",
            "odds_ratio_outcome",
            "odds_ratio_acc",
            "lift_outcome",
            "lift_acc",
            "weighted_relative_y",
            "weighted_relative_acc",
        ],
        &second,
    );
    let conventional: Vec<Vec<String>> = report
        .metrics
        .iter()
        .filter_map(|r| {
            let c = r.metrics.conventional.as_ref()?;
            Some(vec![label(r), fixed(c.odds_ratio_outcome, 2), fixed(c.odds_ratio_acc, 2)])
        })
        .collect();
    if !conventional.is_empty() {
        out.push('\n');
        table(
            &mut out,
            &["", "conventional odds_ratio_outcome", "conventional odds_ratio_acc"],
            &conventional,
        );
    }
    out
}

pub fn render_markdown(report: &AuditReport) -> String {
    let run = &report.run;
    let mut out = String::from("# Model audit report\n\n");
    if let Some(t) = report.header.generated_at_unix {
        let _ = writeln!(out, "Generated at unix time {t}.\n");
    }
    let _ = writeln!(
        out,
        "- Dataset: `{}`, {} rows ({} used for testing), target `{}`",
        run.dataset, run.n_rows, run.test_rows, run.target
    );
    let _ = writeln!(out, "- Predictions: {}", serde_plain(&run.prediction_source));
    let _ = writeln!(out, "- Hypothesis provider: {}", serde_plain(&run.provider));
    if run.nsf {
        out.push_str("- Mode: ablation without self-falsification; hypotheses are ranked in provider order and not tested\n");
    } else {
        let _ = writeln!(
            out,
            "- Tests: {} permutations, alpha {}, correction {}, adjusted alpha {}, {} tests performed, seed {}",
            run.test.bootstrap_b,
            run.test.alpha,
            serde_plain(&run.test.correction),
            fixed(run.adjusted_alpha, 4),
            run.tests_performed,
            run.test.seed
        );
    }
    if run.data_driven_ops {
        out.push_str("- Operationalization: data-driven splits\n");
    }
    let _ = writeln!(out, "- Transcript digest: `{}`", report.transcript_digest);
    out.push('\n');

    if let Some(f) = report.feasibility.as_ref().filter(|f| !f.feasible) {
        let _ = writeln!(
            out,
            "No slices were tested: the feasibility check found no plausible subgroup performance differences.\n\nAnalysis: {}\n",
            cell(&f.analysis)
        );
    } else if report.hypotheses.is_empty() {
        out.push_str("No slices were tested: no hypotheses were produced.\n\n");
    }

    if !report.hypotheses.is_empty() {
        out.push_str("## Hypotheses\n\n");
        out.push_str(&render_hypothesis_table(report));
        out.push('\n');
        let untested: Vec<&HypothesisRow> = report.hypotheses.iter().filter(|h| h.note.is_some()).collect();
        if !untested.is_empty() {
            out.push_str("Not tested:\n\n");
            for h in untested {
                let _ = writeln!(out, "- H{}: {}", h.hypothesis_id, cell(h.note.as_deref().unwrap_or("")));
            }
            out.push('\n');
        }
    }
    if !report.metrics.is_empty() {
        out.push_str("## Slice metrics\n\n");
        out.push_str(&render_metric_tables(report));
        out.push('\n');
    }
    if let Some(s) = &report.summary {
        out.push_str("## Recommendations\n\n");
        out.push_str(s.trim_end());
        out.push_str("\n\n");
    }
    if !report.warnings.is_empty() {
        out.push_str("## Warnings\n\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {}", cell(w));
        }
        out.push('\n');
    }
    out
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(ReportHeader),
    Run(RunSnapshot),
    Feasibility(FeasibilityOutcome),
    Hypothesis(HypothesisRow),
    Metrics(MetricsRow),
    Transcript { digest: String },
    Summary { text: String },
    Warning { message: String },
}

pub fn to_machine(report: &AuditReport) -> String {
    let mut records = vec![Record::Header(report.header.clone()), Record::Run(report.run.clone())];
    if let Some(f) = &report.feasibility {
        records.push(Record::Feasibility(f.clone()));
    }
    records.extend(report.hypotheses.iter().cloned().map(Record::Hypothesis));
    records.extend(report.metrics.iter().cloned().map(Record::Metrics));
    records.push(Record::Transcript {
        digest: report.transcript_digest.clone(),
    });
    if let Some(s) = &report.summary {
        records.push(Record::Summary { text: s.clone() });
    }
    records.extend(report.warnings.iter().map(|w| Record::Warning { message: w.clone() }));
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).expect("report records serialize"));
        out.push('\n');
    }
    out
}

pub fn from_machine(text: &str) -> Result<AuditReport, ReportError> {
    let mut header = ReportHeader::default();
    let mut run = None;
    let mut feasibility = None;
    let mut hypotheses = Vec::new();
    let mut metrics = Vec::new();
    let mut transcript_digest = String::new();
    let mut summary = None;
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| ReportError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        match rec {
            Record::Header(h) => header = h,
            Record::Run(r) => run = Some(r),
            Record::Feasibility(f) => feasibility = Some(f),
            Record::Hypothesis(h) => hypotheses.push(h),
            Record::Metrics(m) => metrics.push(m),
            Record::Transcript { digest } => transcript_digest = digest,
            Record::Summary { text } => summary = Some(text),
            Record::Warning { message } => warnings.push(message),
        }
    }
    Ok(AuditReport {
        header,
        run: run.ok_or(ReportError::MissingRun)?,
        feasibility,
        hypotheses,
        metrics,
        transcript_digest,
        summary,
        warnings,
    })
}

pub fn write_report<W: Write>(report: &AuditReport, format: ReportFormat, mut w: W) -> Result<(), ReportError> {
    let text = match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Machine => to_machine(report),
    };
    w.write_all(text.as_bytes())?;
    Ok(())
}

const SUMMARY_PROMPT: &str = "Below are the results of testing where a model underperforms. Write short \
recommendations for someone about to deploy the model: which groups the model is less reliable for, how \
large the differences are, and what to check before deployment. Start with \"Recommendations:\".";

/// Asks the provider for recommendations and stores the reply as the
/// report's summary. On failure the report is left intact apart from a
/// warning. Returns whether a summary was added.
pub fn summarize_with_provider(report: &mut AuditReport, provider: &mut HypothesisProvider) -> bool {
    let prompt = format!(
        "{SUMMARY_PROMPT}\n\n{}\n{}",
        render_hypothesis_table(report),
        render_metric_tables(report)
    );
    match provider.complete(SYSTEM_MESSAGE, &prompt) {
        Ok(reply) => {
            report.summary = Some(reply);
            report.transcript_digest = provider.transcript_digest();
            true
        }
        Err(e) => {
            warn!("summary request failed: {e}");
            report.warnings.push(format!("summary not generated: {e}"));
            false
        }
    }
}
