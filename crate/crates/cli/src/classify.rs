use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use rcs_core::graph::{classify, AnswerValue, DecisionGraph, RiskOutcomeSet, Step};

/// One line of an answers file: `{"id"?, "answers": {"Q1a": "yes", ...}}`.
#[derive(Debug, Deserialize)]
struct AnswerRow {
    id: Option<String>,
    answers: BTreeMap<String, AnswerValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowError {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowResult {
    /// 1-based line number in the answers file.
    pub row: usize,
    pub id: Option<String>,
    #[serde(flatten)]
    pub result: RowOutcome,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOutcome {
    Outcome(RiskOutcomeSet),
    Error(RowError),
}

impl RowResult {
    pub fn is_ok(&self) -> bool {
        matches!(self.result, RowOutcome::Outcome(_))
    }
}

fn row_error(code: &'static str, message: impl Into<String>) -> RowError {
    RowError {
        code,
        message: message.into(),
    }
}

/// Follows the graph from its start, taking each visited question's answer
/// from the row. Answers to questions off the path are ignored.
fn classify_row(graph: &DecisionGraph, row: &AnswerRow) -> Result<RiskOutcomeSet, RowError> {
    if let Some(unknown) = row.answers.keys().find(|id| graph.node(id).is_none()) {
        return Err(row_error(
            "UNKNOWN_NODE",
            format!("unknown question `{unknown}`"),
        ));
    }
    let mut history: Vec<(&str, &AnswerValue)> = Vec::new();
    let mut step = Step::Question(graph.start().to_string());
    while let Step::Question(node_id) = &step {
        let Some((id, answer)) = row.answers.get_key_value(node_id.as_str()) else {
            return Err(row_error(
                "INCOMPLETE_PATH",
                format!("no answer for `{node_id}`"),
            ));
        };
        history.push((id.as_str(), answer));
        step = rcs_core::graph::next_question(graph, history.iter().copied())
            .map_err(|e| row_error(e.code(), e.to_string()))?;
    }
    classify(graph, history).map_err(|e| row_error(e.code(), e.to_string()))
}

/// Classifies every non-blank line of `input`. Malformed rows yield an
/// error result and processing continues.
pub fn classify_lines(graph: &DecisionGraph, input: &str) -> Vec<RowResult> {
    input
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| match serde_json::from_str::<AnswerRow>(line) {
            Ok(parsed) => RowResult {
                row: i + 1,
                id: parsed.id.clone(),
                result: match classify_row(graph, &parsed) {
                    Ok(outcome) => RowOutcome::Outcome(outcome),
                    Err(e) => RowOutcome::Error(e),
                },
            },
            Err(e) => RowResult {
                row: i + 1,
                id: None,
                result: RowOutcome::Error(row_error("MALFORMED_ROW", e.to_string())),
            },
        })
        .collect()
}

/// `Q1a=yes Q1b=none ...` for an outcome's rationale.
pub fn render_path(outcome: &RiskOutcomeSet) -> String {
    outcome
        .rationale
        .iter()
        .map(|r| format!("{}={}", r.node_id, r.answer))
        .collect::<Vec<_>>()
        .join(" ")
}
