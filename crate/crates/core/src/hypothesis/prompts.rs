use crate::dataset::DataContext;

use super::Hypothesis;

pub const SYSTEM_MESSAGE: &str =
    "You are an expert auditor of machine learning models. You reason carefully about where a model is likely to fail.";

/// Inputs to the generation prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    /// External context about the task (may be empty).
    pub external_context: String,
    pub data_context: DataContext,
    pub n_hypotheses: usize,
    pub requirements: Option<String>,
}

pub fn build_generation_prompt(b: &PromptBundle) -> String {
    let n = b.n_hypotheses.max(1);
    let mut p = String::from(
        "Your task is to suggest subgroups of the dataset below on which a trained model is likely to \
         predict worse than it does on average. Reasons can include bias in how the data was collected, \
         small or under-represented groups, or relationships the model is unlikely to capture. A subgroup \
         can be defined by any of the listed columns or by a combination of them.\n\n",
    );
    if !b.external_context.trim().is_empty() {
        p.push_str("Dataset information: ");
        p.push_str(b.external_context.trim());
        p.push_str("\n\n");
    }
    p.push_str(&b.data_context.render());
    p.push_str("\n\n");
    if let Some(req) = b.requirements.as_deref().filter(|r| !r.trim().is_empty()) {
        p.push_str("Requirements: ");
        p.push_str(req);
        p.push_str("\n\n");
    }
    p.push_str(&format!(
        "Task: Create {n} hypotheses as to which subgroups within the dataset the model will perform worse \
         on than on average. Each hypothesis should use one or two variables in its condition. Focus on \
         differences in the model's performance, not differences in the outcome itself. Give a justification \
         for each of the {n} hypotheses. Format of the output: Hypothesis: <>; Justification: <>.\n"
    ));
    p
}

fn listing(hyps: &[&Hypothesis]) -> String {
    hyps.iter()
        .enumerate()
        .map(|(i, h)| {
            if h.justification.is_empty() {
                format!("Hypothesis {}: {}", i + 1, h.text)
            } else {
                format!("Hypothesis {}: {}\nJustification: {}", i + 1, h.text, h.justification)
            }
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn build_operationalization_prompt(hyps: &[&Hypothesis], context: &DataContext) -> String {
    format!(
        "Below are hypotheses about groups in a dataset on which a model may underperform. \
         Propose specific ranges for each hypothesis.\n\nHypotheses:\n{}\n\nDataset information: {}\n\n\
         TASK: Propose specific variable ranges for each hypothesis so that each group is precisely defined. \
         Write every range as a condition over the columns above, such as age >= 72, \
         region in [\"North\", \"Wales\"] or (x > 45) and (y < 20). Strings go in double quotes. \
         Use this format: Hypothesis: <>; Operationalization: <>.\n",
        listing(hyps),
        context.render()
    )
}

fn columns_line(context: &DataContext) -> String {
    context
        .column_summaries
        .iter()
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn build_feasibility_prompt(context: &DataContext, task_prose: &str, target: &str) -> String {
    format!(
        "Evaluate subgroups for model performance.\nContext: {}\nTarget: {target}\nColumns: {}\n\n\
         Could a model trained on this data plausibly perform differently across subgroups defined by \
         these columns? Explain your reasoning.\n",
        task_prose.trim(),
        columns_line(context)
    )
}

pub fn build_refine_prompt(context: &DataContext, task_prose: &str, target: &str, analysis: &str) -> String {
    format!(
        "Review the analysis below for mistakes or missing considerations, then give an improved analysis.\n\
         Context: {}\nTarget: {target}\nColumns: {}\n\nAnalysis: {analysis}\n",
        task_prose.trim(),
        columns_line(context)
    )
}

pub fn build_boolean_prompt(analysis: &str) -> String {
    format!("Based on the analysis, provide a yes/no answer.\nAnalysis: {analysis}\n")
}

pub fn build_adjustment_prompt(condition: &str, problem: &str, context: &DataContext) -> String {
    format!(
        "The condition `{condition}` cannot be used on the dataset: {problem}.\n\
         Propose a corrected condition for the same group that selects at least one row. \
         {} {}\nReply with the condition only.\n",
        context.column_inventory(),
        context.value_listing()
    )
}
