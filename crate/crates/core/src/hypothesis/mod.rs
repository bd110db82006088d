//! Hypothesis generation, operationalization and repair.

mod parse;
mod prompts;

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{DataContext, Dataset};
use crate::predicate::{eval_predicate, normalize_operators, parse_predicate, Predicate};
use crate::remote::{RemoteClient, RemoteError};

pub use parse::{
    parse_bool_reply, parse_hypothesis_response, parse_operationalization_response, OperationalizationParse,
};
pub use prompts::{
    build_adjustment_prompt, build_boolean_prompt, build_feasibility_prompt, build_generation_prompt,
    build_operationalization_prompt, build_refine_prompt, PromptBundle, SYSTEM_MESSAGE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("scripted provider exhausted after {served} responses")]
    ScriptExhausted { served: usize },
    #[error("file provider cannot answer prompts")]
    NotConversational,
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no parsable entries in response: {raw:?}")]
    ParseFailure { raw: String },
    #[error("could not repair `{last}`: {reason}")]
    AdjustmentFailure { last: String, reason: String },
    #[error("hypothesis file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisSource {
    File,
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: usize,
    pub text: String,
    pub justification: String,
    pub operationalization: Option<String>,
    pub source: HypothesisSource,
}

/// A hypothesis with a predicate that parses and selects at least one row.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationalizedHypothesis {
    pub hypothesis: Hypothesis,
    pub predicate: Predicate,
}

/// Record shape of the hypothesis file (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub text: String,
    #[serde(default)]
    pub justification: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operationalization: Option<String>,
}

pub fn read_hypothesis_file(path: impl AsRef<Path>) -> Result<Vec<Hypothesis>, HypothesisError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| HypothesisError::File(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| HypothesisError::File(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: HypothesisRecord = serde_json::from_str(&line)
            .map_err(|e| HypothesisError::File(format!("line {}: {e}", i + 1)))?;
        if rec.text.trim().is_empty() {
            return Err(HypothesisError::File(format!("line {}: empty `text`", i + 1)));
        }
        out.push(Hypothesis {
            id: out.len(),
            text: rec.text,
            justification: rec.justification,
            operationalization: rec.operationalization,
            source: HypothesisSource::File,
        });
    }
    Ok(out)
}

pub fn write_hypothesis_file<W: Write>(hyps: &[Hypothesis], mut w: W) -> std::io::Result<()> {
    for h in hyps {
        let rec = HypothesisRecord {
            text: h.text.clone(),
            justification: h.justification.clone(),
            operationalization: h.operationalization.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).expect("serializable record"))?;
    }
    Ok(())
}

/// Reads a scripted-provider fixture: a JSON array of response strings.
pub fn read_fixture_file(path: impl AsRef<Path>) -> Result<Vec<String>, HypothesisError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HypothesisError::File(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HypothesisError::File(format!("{}: {e}", path.display())))
}

#[derive(Debug)]
pub enum ProviderKind {
    File(PathBuf),
    Scripted { responses: VecDeque<String>, served: usize },
    Remote(RemoteClient),
}

/// One prompt/response pair sent through a provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub system: String,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug)]
pub struct HypothesisProvider {
    pub kind: ProviderKind,
    pub transcript: Vec<Exchange>,
}

impl HypothesisProvider {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self::from_kind(ProviderKind::File(path.into()))
    }

    pub fn scripted<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::from_kind(ProviderKind::Scripted {
            responses: responses.into_iter().map(Into::into).collect(),
            served: 0,
        })
    }

    pub fn remote(client: RemoteClient) -> Self {
        Self::from_kind(ProviderKind::Remote(client))
    }

    fn from_kind(kind: ProviderKind) -> Self {
        HypothesisProvider {
            kind,
            transcript: Vec::new(),
        }
    }

    pub fn source(&self) -> HypothesisSource {
        match self.kind {
            ProviderKind::File(_) => HypothesisSource::File,
            ProviderKind::Scripted { .. } => HypothesisSource::Scripted,
            ProviderKind::Remote(_) => HypothesisSource::Remote,
        }
    }

    /// Sends one prompt and records the exchange.
    pub fn complete(&mut self, system: &str, prompt: &str) -> Result<String, ProviderError> {
        let response = match &mut self.kind {
            ProviderKind::File(_) => return Err(ProviderError::NotConversational),
            ProviderKind::Scripted { responses, served } => {
                let r = responses
                    .pop_front()
                    .ok_or(ProviderError::ScriptExhausted { served: *served })?;
                *served += 1;
                r
            }
            ProviderKind::Remote(client) => client.chat_complete(system, prompt)?,
        };
        self.transcript.push(Exchange {
            system: system.to_string(),
            prompt: prompt.to_string(),
            response: response.clone(),
        });
        Ok(response)
    }

    /// SHA-256 over every recorded exchange, hex encoded.
    pub fn transcript_digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.transcript {
            for part in [&e.system, &e.prompt, &e.response] {
                h.update((part.len() as u64).to_le_bytes());
                h.update(part.as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn transcript_log(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.transcript.iter().enumerate() {
            out.push_str(&format!(
                "=== exchange {i} ===\n--- system ---\n{}\n--- prompt ---\n{}\n--- response ---\n{}\n",
                e.system, e.prompt, e.response
            ));
        }
        out
    }
}

/// Obtains hypotheses: read from the file for the file kind, otherwise
/// generated from the prompt bundle.
pub fn generate_hypotheses(
    bundle: &PromptBundle,
    provider: &mut HypothesisProvider,
) -> Result<Vec<Hypothesis>, HypothesisError> {
    if let ProviderKind::File(path) = &provider.kind {
        let mut hyps = read_hypothesis_file(path)?;
        hyps.truncate(bundle.n_hypotheses);
        return Ok(hyps);
    }
    let prompt = build_generation_prompt(bundle);
    let reply = provider.complete(SYSTEM_MESSAGE, &prompt)?;
    let source = provider.source();
    let mut hyps = parse_hypothesis_response(&reply, bundle.n_hypotheses)?;
    for h in &mut hyps {
        h.source = source;
    }
    Ok(hyps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    pub feasible: bool,
    pub analysis: String,
    pub answer: String,
}

/// Asks whether performance could plausibly differ across subgroups:
/// one analysis prompt, `n_refine` critique rounds, then a yes/no prompt.
/// An answer that is neither yes nor no counts as feasible.
pub fn feasibility_check(
    context: &DataContext,
    task_prose: &str,
    target: &str,
    provider: &mut HypothesisProvider,
    n_refine: usize,
) -> Result<FeasibilityOutcome, HypothesisError> {
    let mut analysis = provider.complete(SYSTEM_MESSAGE, &build_feasibility_prompt(context, task_prose, target))?;
    for _ in 0..n_refine {
        analysis = provider.complete(SYSTEM_MESSAGE, &build_refine_prompt(context, task_prose, target, &analysis))?;
    }
    let answer = provider.complete(SYSTEM_MESSAGE, &build_boolean_prompt(&analysis))?;
    let feasible = match parse_bool_reply(&answer) {
        Some(b) => b,
        None => {
            warn!("feasibility answer {answer:?} is neither yes nor no; treating as feasible");
            true
        }
    };
    Ok(FeasibilityOutcome {
        feasible,
        analysis,
        answer,
    })
}

/// Why a predicate text is not usable on `dataset`, or `None` if it is.
pub fn query_problem(text: &str, dataset: &Dataset) -> Option<String> {
    match parse_predicate(&normalize_operators(text), dataset) {
        Err(e) => Some(e.to_string()),
        Ok(p) => match eval_predicate(&p, dataset) {
            Err(e) => Some(e.to_string()),
            Ok(s) if s.is_empty() => Some("condition selects no rows".into()),
            Ok(_) => None,
        },
    }
}

/// Returns `text` (normalized) if it selects rows of `dataset`; otherwise asks
/// the provider for a repaired condition, up to `max_iters` times.
pub fn adjust_query(
    text: &str,
    dataset: &Dataset,
    context: &DataContext,
    provider: &mut HypothesisProvider,
    max_iters: usize,
) -> Result<String, HypothesisError> {
    let mut candidate = normalize_operators(text.trim());
    let Some(mut reason) = query_problem(&candidate, dataset) else {
        return Ok(candidate);
    };
    for _ in 0..max_iters.max(1) {
        let reply = match provider.complete(SYSTEM_MESSAGE, &build_adjustment_prompt(&candidate, &reason, context)) {
            Ok(r) => r,
            Err(e) => {
                return Err(HypothesisError::AdjustmentFailure {
                    last: candidate,
                    reason: e.to_string(),
                })
            }
        };
        candidate = normalize_operators(&parse::extract_condition(&reply));
        match query_problem(&candidate, dataset) {
            None => return Ok(candidate),
            Some(r) => reason = r,
        }
    }
    Err(HypothesisError::AdjustmentFailure { last: candidate, reason })
}

/// A hypothesis that could not be turned into a usable predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unoperationalized {
    pub hypothesis_id: usize,
    pub candidate: Option<String>,
    pub reason: String,
}

/// Attaches a validated predicate to each hypothesis. Hypotheses without an
/// operationalization are sent to the provider in one prompt; invalid or
/// empty conditions go through [`adjust_query`].
pub fn operationalize(
    hypotheses: &[Hypothesis],
    dataset: &Dataset,
    context: &DataContext,
    provider: &mut HypothesisProvider,
    max_adjust: usize,
) -> Result<(Vec<OperationalizedHypothesis>, Vec<Unoperationalized>), HypothesisError> {
    let mut texts: Vec<Option<String>> = hypotheses.iter().map(|h| h.operationalization.clone()).collect();
    let pending: Vec<&Hypothesis> = hypotheses.iter().filter(|h| h.operationalization.is_none()).collect();
    if !pending.is_empty() {
        let prompt = build_operationalization_prompt(&pending, context);
        let reply = provider.complete(SYSTEM_MESSAGE, &prompt)?;
        let parsed = parse_operationalization_response(&reply, dataset)?;
        for (slot, h) in pending.iter().enumerate() {
            let pos = hypotheses.iter().position(|x| x.id == h.id).expect("pending hypothesis");
            texts[pos] = parsed.entries.get(&slot).cloned();
        }
    }

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (h, text) in hypotheses.iter().zip(texts) {
        let Some(text) = text else {
            failed.push(Unoperationalized {
                hypothesis_id: h.id,
                candidate: None,
                reason: "no operationalization returned".into(),
            });
            continue;
        };
        match adjust_query(&text, dataset, context, provider, max_adjust) {
            Ok(fixed) => {
                let predicate = parse_predicate(&fixed, dataset).expect("adjusted query parses");
                let mut hypothesis = h.clone();
                hypothesis.operationalization = Some(predicate.render());
                ok.push(OperationalizedHypothesis { hypothesis, predicate });
            }
            Err(HypothesisError::AdjustmentFailure { last, reason }) => {
                warn!("hypothesis {} untestable: {reason}", h.id);
                failed.push(Unoperationalized {
                    hypothesis_id: h.id,
                    candidate: Some(last),
                    reason,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((ok, failed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{describe, Column};

    fn ds() -> Dataset {
        Dataset::new(
            "t",
            vec![
                Column::numeric("age", (0..10).map(|i| 40.0 + 5.0 * i as f64).collect()),
                Column::boolean_labeled("disability", (0..10).map(|i| i % 3 == 0).collect(), "Y", "N"),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn scripted_replays_in_order_then_exhausts() {
        let mut p = HypothesisProvider::scripted(["a", "b"]);
        assert_eq!(p.complete("s", "1").unwrap(), "a");
        assert_eq!(p.complete("s", "2").unwrap(), "b");
        assert_eq!(p.complete("s", "3"), Err(ProviderError::ScriptExhausted { served: 2 }));
        assert_eq!(p.transcript.len(), 2);
        assert_eq!(p.transcript_digest().len(), 64);
    }

    #[test]
    fn feasibility_calls_and_answers() {
        let d = ds();
        let ctx = describe(&d, "");
        let mut p = HypothesisProvider::scripted(["no relationships could plausibly exist", "no"]);
        let out = feasibility_check(&ctx, "", "y", &mut p, 0).unwrap();
        assert!(!out.feasible);
        assert_eq!(p.transcript.len(), 2);

        let mut p = HypothesisProvider::scripted(["maybe", "better", "Yes."]);
        assert!(feasibility_check(&ctx, "", "y", &mut p, 1).unwrap().feasible);
        assert_eq!(p.transcript.len(), 3);

        let mut p = HypothesisProvider::scripted(["x", "unclear"]);
        assert!(feasibility_check(&ctx, "", "y", &mut p, 0).unwrap().feasible);
    }

    #[test]
    fn adjust_keeps_valid_and_repairs_empty() {
        let d = ds();
        let ctx = describe(&d, "");
        let mut p = HypothesisProvider::scripted(Vec::<String>::new());
        assert_eq!(adjust_query("age > 72", &d, &ctx, &mut p, 3).unwrap(), "age > 72");
        assert!(p.transcript.is_empty());

        let mut p = HypothesisProvider::scripted(["age > 72"]);
        assert_eq!(adjust_query("age > 200", &d, &ctx, &mut p, 3).unwrap(), "age > 72");

        let mut p = HypothesisProvider::scripted(["height > 1", "height > 2", "height > 3"]);
        match adjust_query("height > 0", &d, &ctx, &mut p, 3) {
            Err(HypothesisError::AdjustmentFailure { last, .. }) => assert_eq!(last, "height > 3"),
            other => panic!("{other:?}"),
        }
        assert_eq!(p.transcript.len(), 3);
    }

    #[test]
    fn hypothesis_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        let hyps = vec![Hypothesis {
            id: 0,
            text: "Older people".into(),
            justification: "fewer samples".into(),
            operationalization: Some("age >= 72".into()),
            source: HypothesisSource::File,
        }];
        write_hypothesis_file(&hyps, std::fs::File::create(&path).unwrap()).unwrap();
        assert_eq!(read_hypothesis_file(&path).unwrap(), hyps);
        std::fs::write(&path, "{\"text\": \"\"}\n").unwrap();
        assert!(read_hypothesis_file(&path).is_err());
    }

    #[test]
    fn operationalize_routes_failures() {
        let d = ds();
        let ctx = describe(&d, "");
        let hyps: Vec<Hypothesis> = ["old", "disabled", "tall"]
            .iter()
            .enumerate()
            .map(|(i, t)| Hypothesis {
                id: i,
                text: t.to_string(),
                justification: String::new(),
                operationalization: None,
                source: HypothesisSource::Scripted,
            })
            .collect();
        let mut p = HypothesisProvider::scripted([
            r#"{0: 'age >= 72', 1: 'disability == "Y"', 2: 'height > 2'}"#,
            "height > 3",
        ]);
        let (ok, failed) = operationalize(&hyps, &d, &ctx, &mut p, 1).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[1].hypothesis.operationalization.as_deref(), Some(r#"disability == "Y""#));
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].hypothesis_id, 2);
    }
}
