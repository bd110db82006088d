use std::collections::BTreeMap;
use std::sync::LazyLock;

use log::warn;
use regex::Regex;

use super::{query_problem, Hypothesis, HypothesisError, HypothesisSource};
use crate::dataset::Dataset;
use crate::predicate::normalize_operators;

static LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?im)(?:^|;)[ \t>*#-]*\**[ \t]*(hypothesis|justification|operationalization)(?:[ \t]*#?\d+)?[ \t]*\**[ \t]*:\**",
    )
    .expect("valid label regex")
});

static MAP_ENTRY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(\d+)\s*:\s*('(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")"#).expect("valid map regex")
});

static YES_NO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").expect("valid regex"));

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Hypothesis,
    Justification,
    Operationalization,
}

/// Labeled fields in document order.
fn fields(text: &str) -> Vec<(Field, String)> {
    let marks: Vec<(Field, usize, usize)> = LABEL
        .captures_iter(text)
        .map(|c| {
            let whole = c.get(0).expect("match");
            let kind = match c[1].to_ascii_lowercase().as_str() {
                "hypothesis" => Field::Hypothesis,
                "justification" => Field::Justification,
                _ => Field::Operationalization,
            };
            (kind, whole.start(), whole.end())
        })
        .collect();
    marks
        .iter()
        .enumerate()
        .map(|(i, &(kind, _, end))| {
            let stop = marks.get(i + 1).map_or(text.len(), |m| m.1);
            (kind, clean(&text[end..stop]))
        })
        .collect()
}

fn clean(s: &str) -> String {
    let joined = s.split_whitespace().collect::<Vec<_>>().join(" ");
    joined
        .trim_matches(|c: char| c == ';' || c == '*' || c.is_whitespace())
        .to_string()
}

/// Extracts `(Hypothesis, Justification)` pairs in order, at most `expected_n`.
pub fn parse_hypothesis_response(response: &str, expected_n: usize) -> Result<Vec<Hypothesis>, HypothesisError> {
    let fs = fields(response);
    let mut out = Vec::new();
    let mut i = 0;
    while i < fs.len() && out.len() < expected_n {
        match (&fs[i], fs.get(i + 1)) {
            ((Field::Hypothesis, h), Some((Field::Justification, j))) if !h.is_empty() => {
                out.push(Hypothesis {
                    id: out.len(),
                    text: h.clone(),
                    justification: j.clone(),
                    operationalization: None,
                    source: HypothesisSource::Scripted,
                });
                i += 2;
            }
            ((Field::Hypothesis, h), _) => {
                warn!("skipping malformed hypothesis entry {h:?}");
                i += 1;
            }
            _ => i += 1,
        }
    }
    if out.is_empty() {
        return Err(HypothesisError::ParseFailure {
            raw: response.to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperationalizationParse {
    /// Normalized condition text by zero-based hypothesis index.
    pub entries: BTreeMap<usize, String>,
    /// Entries that do not yet select rows of the dataset, with the reason.
    pub needs_adjustment: BTreeMap<usize, String>,
}

fn unquote(lit: &str) -> String {
    let quote = lit.chars().next().expect("quoted literal");
    let inner = &lit[1..lit.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(n) if n == quote || n == '\\' => out.push(n),
                Some(n) => {
                    out.push('\\');
                    out.push(n);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Pulls a bare condition out of a reply: a backtick span if there is one,
/// otherwise the text after any `Operationalization:` label, first line only.
pub(crate) fn extract_condition(reply: &str) -> String {
    let body = reply.trim().trim_start_matches("```").trim_end_matches("```");
    if let Some(start) = body.find('`') {
        if let Some(len) = body[start + 1..].find('`') {
            let span = &body[start + 1..start + 1 + len];
            if !span.trim().is_empty() {
                return span.trim().to_string();
            }
        }
    }
    let fs = fields(body);
    let text = match fs.iter().find(|(k, _)| *k == Field::Operationalization) {
        Some((_, t)) => t.clone(),
        None => body
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .unwrap_or("")
            .to_string(),
    };
    text.trim_end_matches('.').trim().to_string()
}

/// Parses either the `{index: 'query'}` map form or the prose
/// `Hypothesis: ...; Operationalization: ...` form.
pub fn parse_operationalization_response(
    response: &str,
    dataset: &Dataset,
) -> Result<OperationalizationParse, HypothesisError> {
    let mut raw: BTreeMap<usize, String> = BTreeMap::new();
    if response.contains('{') {
        for c in MAP_ENTRY.captures_iter(response) {
            if let Ok(k) = c[1].parse::<usize>() {
                raw.entry(k).or_insert_with(|| unquote(&c[2]));
            }
        }
    }
    if raw.is_empty() {
        let ops = fields(response)
            .into_iter()
            .filter(|(kind, _)| *kind == Field::Operationalization);
        for (idx, (_, text)) in ops.enumerate() {
            let cond = extract_condition(&text);
            if !cond.is_empty() {
                raw.insert(idx, cond);
            }
        }
    }
    if raw.is_empty() {
        return Err(HypothesisError::ParseFailure {
            raw: response.to_string(),
        });
    }
    let mut out = OperationalizationParse::default();
    for (k, text) in raw {
        let text = normalize_operators(text.trim());
        if let Some(problem) = query_problem(&text, dataset) {
            out.needs_adjustment.insert(k, problem);
        }
        out.entries.insert(k, text);
    }
    Ok(out)
}

/// Maps a yes/no reply to a boolean by its first `yes` or `no` word.
pub fn parse_bool_reply(reply: &str) -> Option<bool> {
    YES_NO
        .captures(reply)
        .map(|c| c[1].eq_ignore_ascii_case("yes"))
}
