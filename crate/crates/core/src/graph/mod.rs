//! Question-flow decision graphs.
//!
//! A graph is a set of [`QuestionNode`]s connected by [`TransitionRule`]s.
//! Every node has exactly one rule per answer bucket (yes/no for binary
//! questions, none/some for multi-select questions). Rules carry
//! [`OutcomeAction`]s that accumulate risk labels along the path; the
//! accumulated set at `TERMINAL` is the classification.
//!
//! Graphs are loaded from a JSON document ([`GraphDocument`]) and only
//! become a [`DecisionGraph`] after [`validate`] reports zero violations.

mod enumerate;
mod label;
mod traverse;
mod validate;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use enumerate::{enumerate_paths, EnumeratedPath, PathStep};
pub use label::{
    check_exclusivity, AssignedLabel, LabelConflict, RationaleEntry, RiskCategory, RiskLabel,
    RiskOutcomeSet, TransparencyBasis, UnknownLabel, LOW_RISK_BASIS,
};
pub use traverse::{classify, next_question, TraversalError};
pub use validate::{validate, ValidationReport, Violation, ViolationClass};

/// Sentinel used in `next` for rules that end the questionnaire.
pub const TERMINAL: &str = "TERMINAL";

/// Display text of the implicit empty selection on multi-select questions.
pub const NONE_OF_THE_ABOVE: &str = "None of the above";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    Binary,
    MultiSelect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionItem {
    pub id: String,
    pub label: String,
    pub legal_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionNode {
    pub id: String,
    pub prompt: String,
    pub answer_mode: AnswerMode,
    #[serde(default)]
    pub options: Vec<OptionItem>,
    pub legal_ref: String,
    #[serde(default)]
    pub phrasing_note: Option<String>,
}

impl QuestionNode {
    pub fn option(&self, id: &str) -> Option<&OptionItem> {
        self.options.iter().find(|o| o.id == id)
    }

    /// Returns the answer bucket `answer` falls into, or why it is illegal
    /// for this node.
    pub fn bucket_of(&self, answer: &AnswerValue) -> Result<Predicate, String> {
        match (self.answer_mode, answer) {
            (AnswerMode::Binary, AnswerValue::Binary(Binary::Yes)) => Ok(Predicate::IsYes),
            (AnswerMode::Binary, AnswerValue::Binary(Binary::No)) => Ok(Predicate::IsNo),
            (AnswerMode::Binary, AnswerValue::Selection(_)) => {
                Err("binary question expects yes or no".to_string())
            }
            (AnswerMode::MultiSelect, AnswerValue::Binary(_)) => {
                Err("multi-select question expects a list of option ids".to_string())
            }
            (AnswerMode::MultiSelect, AnswerValue::Selection(ids)) => {
                if let Some(unknown) = ids.iter().find(|id| self.option(id).is_none()) {
                    return Err(format!("unknown option `{unknown}`"));
                }
                Ok(if ids.is_empty() {
                    Predicate::NoneSelected
                } else {
                    Predicate::AnySelected
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binary {
    Yes,
    No,
}

/// An answer to one question. On the wire a binary answer is the string
/// `"yes"`/`"no"`; a selection is an array of option ids, where the empty
/// array means "none of the above".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Binary(Binary),
    Selection(BTreeSet<String>),
}

impl AnswerValue {
    pub fn yes() -> Self {
        Self::Binary(Binary::Yes)
    }

    pub fn no() -> Self {
        Self::Binary(Binary::No)
    }

    pub fn none_selected() -> Self {
        Self::Selection(BTreeSet::new())
    }

    pub fn select<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::Selection(ids.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Binary(Binary::Yes) => f.write_str("yes"),
            Self::Binary(Binary::No) => f.write_str("no"),
            Self::Selection(ids) if ids.is_empty() => f.write_str("none"),
            Self::Selection(ids) => {
                write!(
                    f,
                    "{{{}}}",
                    ids.iter().cloned().collect::<Vec<_>>().join(",")
                )
            }
        }
    }
}

/// Answer bucket a rule fires on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    IsYes,
    IsNo,
    AnySelected,
    NoneSelected,
}

impl Predicate {
    /// The two buckets of a mode, in enumeration order (yes/none first).
    pub fn buckets(mode: AnswerMode) -> [Predicate; 2] {
        match mode {
            AnswerMode::Binary => [Self::IsYes, Self::IsNo],
            AnswerMode::MultiSelect => [Self::NoneSelected, Self::AnySelected],
        }
    }

    pub fn applies_to(self, mode: AnswerMode) -> bool {
        Self::buckets(mode).contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IsYes => "is_yes",
            Self::IsNo => "is_no",
            Self::AnySelected => "any_selected",
            Self::NoneSelected => "none_selected",
        }
    }

    /// Short form used in path tables.
    pub fn short(self) -> &'static str {
        match self {
            Self::IsYes => "yes",
            Self::IsNo => "no",
            Self::AnySelected => "some",
            Self::NoneSelected => "none",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    AddLabel,
    /// Adds the label and ends the questionnaire; the rule must point at
    /// `TERMINAL`.
    ShortCircuit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeAction {
    pub kind: ActionKind,
    pub label: RiskLabel,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub from: String,
    pub predicate: Predicate,
    #[serde(default)]
    pub actions: Vec<OutcomeAction>,
    pub next: String,
}

impl TransitionRule {
    pub fn is_terminal(&self) -> bool {
        self.next == TERMINAL
    }

    pub fn short_circuits(&self) -> bool {
        self.actions
            .iter()
            .any(|a| a.kind == ActionKind::ShortCircuit)
    }
}

/// Serialized form of a decision graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub version: String,
    pub start: String,
    pub nodes: Vec<QuestionNode>,
    pub rules: Vec<TransitionRule>,
}

impl GraphDocument {
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }
}

/// Where the questionnaire stands after a sequence of answers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "node_id")]
pub enum Step {
    Question(String),
    Terminal,
}

impl Step {
    pub fn from_next(next: &str) -> Self {
        if next == TERMINAL {
            Self::Terminal
        } else {
            Self::Question(next.to_string())
        }
    }

    pub fn question(&self) -> Option<&str> {
        match self {
            Self::Question(id) => Some(id),
            Self::Terminal => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::Terminal)
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Question(id) => f.write_str(id),
            Self::Terminal => f.write_str(TERMINAL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Parse(String),
    #[error("graph failed validation: {}", .0.summary())]
    Validation(ValidationReport),
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Parse(_) => "PARSE_ERROR",
            Self::Validation(_) => "VALIDATION_ERROR",
        }
    }
}

/// A validated, immutable decision graph.
#[derive(Debug, Clone)]
pub struct DecisionGraph {
    doc: GraphDocument,
    node_index: HashMap<String, usize>,
    rule_index: HashMap<(String, Predicate), usize>,
}

impl DecisionGraph {
    pub fn from_document(doc: GraphDocument) -> Result<Self, GraphError> {
        let report = validate(&doc);
        if !report.is_clean() {
            return Err(GraphError::Validation(report));
        }
        let node_index = doc
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let rule_index = doc
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.from.clone(), r.predicate), i))
            .collect();
        Ok(Self {
            doc,
            node_index,
            rule_index,
        })
    }

    pub fn version(&self) -> &str {
        &self.doc.version
    }

    pub fn start(&self) -> &str {
        &self.doc.start
    }

    pub fn node(&self, id: &str) -> Option<&QuestionNode> {
        self.node_index.get(id).map(|&i| &self.doc.nodes[i])
    }

    pub fn nodes(&self) -> &[QuestionNode] {
        &self.doc.nodes
    }

    pub fn rules(&self) -> &[TransitionRule] {
        &self.doc.rules
    }

    /// The unique rule for a node's answer bucket. Total on validated graphs
    /// for every `(node, bucket)` with a matching mode.
    pub fn rule(&self, node_id: &str, predicate: Predicate) -> Option<&TransitionRule> {
        self.rule_index
            .get(&(node_id.to_string(), predicate))
            .map(|&i| &self.doc.rules[i])
    }

    pub fn document(&self) -> &GraphDocument {
        &self.doc
    }

    /// Always clean for a constructed graph; provided so callers can report
    /// on a graph the same way as on a raw document.
    pub fn validate(&self) -> ValidationReport {
        validate(&self.doc)
    }
}

/// Parses and validates a graph document.
pub fn load_graph(text: &str) -> Result<DecisionGraph, GraphError> {
    DecisionGraph::from_document(GraphDocument::from_json(text)?)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Single binary question with two terminal branches.
    pub fn toy_document() -> GraphDocument {
        serde_json::from_value(serde_json::json!({
            "version": "toy-1",
            "start": "Q",
            "nodes": [
                { "id": "Q", "prompt": "Is it AI?", "answer_mode": "binary", "legal_ref": "Art. 3.1" }
            ],
            "rules": [
                { "from": "Q", "predicate": "is_yes", "actions": [], "next": "TERMINAL" },
                { "from": "Q", "predicate": "is_no",
                  "actions": [{ "kind": "short_circuit", "label": "NOT_AI_SYSTEM", "basis": "Art. 3.1" }],
                  "next": "TERMINAL" }
            ]
        }))
        .unwrap()
    }
}
