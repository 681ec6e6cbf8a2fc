use super::{
    ActionKind, AnswerValue, DecisionGraph, LabelConflict, RationaleEntry, RiskLabel,
    RiskOutcomeSet, Step,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraversalError {
    #[error("answer #{position} is for `{found}` but the path expects {expected}")]
    InvalidPrefix {
        position: usize,
        expected: Step,
        found: String,
    },
    #[error("illegal answer for `{node}`: {reason}")]
    IllegalAnswer { node: String, reason: String },
    #[error("path is incomplete; next question is {next}")]
    IncompletePath { next: Step },
    #[error(transparent)]
    OutcomeConflict(#[from] LabelConflict),
}

impl TraversalError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidPrefix { .. } => "INVALID_PREFIX",
            Self::IllegalAnswer { .. } => "ILLEGAL_ANSWER",
            Self::IncompletePath { .. } => "INCOMPLETE_PATH",
            Self::OutcomeConflict(_) => "OUTCOME_CONFLICT",
        }
    }
}

struct Walk<'g> {
    step: Step,
    assignments: Vec<(RiskLabel, &'g str)>,
    rationale: Vec<RationaleEntry>,
}

fn walk<'g, 'h, I>(graph: &'g DecisionGraph, history: I) -> Result<Walk<'g>, TraversalError>
where
    I: IntoIterator<Item = (&'h str, &'h AnswerValue)>,
{
    let mut step = Step::Question(graph.start().to_string());
    let mut assignments = Vec::new();
    let mut rationale = Vec::new();

    for (position, (node_id, answer)) in history.into_iter().enumerate() {
        if step.question() != Some(node_id) {
            return Err(TraversalError::InvalidPrefix {
                position,
                expected: step,
                found: node_id.to_string(),
            });
        }
        let node = graph
            .node(node_id)
            .expect("current step of a validated graph is a known node");
        let bucket = node
            .bucket_of(answer)
            .map_err(|reason| TraversalError::IllegalAnswer {
                node: node_id.to_string(),
                reason,
            })?;
        let rule = graph
            .rule(node_id, bucket)
            .expect("validated graphs are total");

        let mut labels_added = Vec::new();
        for action in &rule.actions {
            assignments.push((action.label, action.basis.as_str()));
            labels_added.push(super::AssignedLabel {
                label: action.label,
                bases: vec![action.basis.clone()],
            });
        }
        rationale.push(RationaleEntry {
            node_id: node_id.to_string(),
            answer: answer.clone(),
            predicate: bucket,
            next: rule.next.clone(),
            legal_ref: node.legal_ref.clone(),
            labels_added,
            short_circuit: rule
                .actions
                .iter()
                .any(|a| a.kind == ActionKind::ShortCircuit),
        });
        step = Step::from_next(&rule.next);
    }

    Ok(Walk {
        step,
        assignments,
        rationale,
    })
}

/// Returns the question that follows `history`, or `Step::Terminal` once the
/// path is complete. An empty history yields the start node.
pub fn next_question<'h, I>(graph: &DecisionGraph, history: I) -> Result<Step, TraversalError>
where
    I: IntoIterator<Item = (&'h str, &'h AnswerValue)>,
{
    walk(graph, history).map(|w| w.step)
}

/// Folds the outcome actions along a complete path.
pub fn classify<'h, I>(graph: &DecisionGraph, history: I) -> Result<RiskOutcomeSet, TraversalError>
where
    I: IntoIterator<Item = (&'h str, &'h AnswerValue)>,
{
    let w = walk(graph, history)?;
    if !w.step.is_terminal() {
        return Err(TraversalError::IncompletePath { next: w.step });
    }
    Ok(RiskOutcomeSet::from_assignments(
        w.assignments,
        w.rationale,
    )?)
}
