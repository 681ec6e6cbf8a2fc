use serde::{Deserialize, Serialize};

use super::{
    ActionKind, AnswerMode, AnswerValue, AssignedLabel, DecisionGraph, Predicate, QuestionNode,
    RationaleEntry, RiskLabel, RiskOutcomeSet, TERMINAL,
};

/// One step of a binarized path: the question and the answer bucket taken.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub node_id: String,
    pub bucket: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumeratedPath {
    pub steps: Vec<PathStep>,
    pub outcome: RiskOutcomeSet,
}

impl EnumeratedPath {
    /// Concrete answers for this path: `some` is represented by selecting
    /// the node's first option.
    pub fn representative_history(&self, graph: &DecisionGraph) -> Vec<(String, AnswerValue)> {
        self.steps
            .iter()
            .map(|s| {
                let node = graph.node(&s.node_id).expect("path nodes exist");
                (s.node_id.clone(), representative_answer(node, s.bucket))
            })
            .collect()
    }

    /// Compact form such as `Q1a=yes Q1b=none Q2=no`.
    pub fn render(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("{}={}", s.node_id, s.bucket.short()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub(crate) fn representative_answer(node: &QuestionNode, bucket: Predicate) -> AnswerValue {
    match (node.answer_mode, bucket) {
        (AnswerMode::Binary, Predicate::IsYes) => AnswerValue::yes(),
        (AnswerMode::Binary, _) => AnswerValue::no(),
        (AnswerMode::MultiSelect, Predicate::AnySelected) => {
            AnswerValue::select(node.options.first().map(|o| o.id.clone()))
        }
        (AnswerMode::MultiSelect, _) => AnswerValue::none_selected(),
    }
}

/// Every maximal path of the graph at yes/no and none/some granularity, in
/// depth-first order with yes/none explored first.
pub fn enumerate_paths(graph: &DecisionGraph) -> Vec<EnumeratedPath> {
    let mut out = Vec::new();
    let mut steps = Vec::new();
    let mut rationale = Vec::new();
    let mut labels = Vec::new();
    descend(
        graph,
        graph.start(),
        &mut steps,
        &mut rationale,
        &mut labels,
        &mut out,
    );
    out
}

fn descend<'g>(
    graph: &'g DecisionGraph,
    node_id: &'g str,
    steps: &mut Vec<PathStep>,
    rationale: &mut Vec<RationaleEntry>,
    labels: &mut Vec<(RiskLabel, &'g str)>,
    out: &mut Vec<EnumeratedPath>,
) {
    if node_id == TERMINAL {
        let outcome = RiskOutcomeSet::from_assignments(labels.iter().copied(), rationale.clone())
            .expect("validated graphs never produce conflicting labels");
        out.push(EnumeratedPath {
            steps: steps.clone(),
            outcome,
        });
        return;
    }
    let node = graph
        .node(node_id)
        .expect("validated graphs have no dangling edges");
    for bucket in Predicate::buckets(node.answer_mode) {
        let rule = graph
            .rule(node_id, bucket)
            .expect("validated graphs are total");
        let mark = labels.len();
        labels.extend(rule.actions.iter().map(|a| (a.label, a.basis.as_str())));
        steps.push(PathStep {
            node_id: node_id.to_string(),
            bucket,
        });
        rationale.push(RationaleEntry {
            node_id: node_id.to_string(),
            answer: representative_answer(node, bucket),
            predicate: bucket,
            next: rule.next.clone(),
            legal_ref: node.legal_ref.clone(),
            labels_added: rule
                .actions
                .iter()
                .map(|a| AssignedLabel {
                    label: a.label,
                    bases: vec![a.basis.clone()],
                })
                .collect(),
            short_circuit: rule
                .actions
                .iter()
                .any(|a| a.kind == ActionKind::ShortCircuit),
        });
        descend(graph, &rule.next, steps, rationale, labels, out);
        rationale.pop();
        steps.pop();
        labels.truncate(mark);
    }
}
