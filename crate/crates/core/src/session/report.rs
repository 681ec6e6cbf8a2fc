use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AnsweredQuestion, ClassificationSession, SystemMetadata};
use crate::graph::{RiskCategory, RiskOutcomeSet};

/// Exportable result of a finalized session. Built only from session
/// state, so regenerating it from a replayed log yields the same value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub session_id: String,
    pub graph_version: String,
    pub metadata: SystemMetadata,
    pub created_at: DateTime<Utc>,
    pub generated_at: DateTime<Utc>,
    pub answers: Vec<AnsweredQuestion>,
    pub outcome: RiskOutcomeSet,
    pub categories: Vec<RiskCategory>,
}

impl ClassificationReport {
    pub(crate) fn from_session(session: &ClassificationSession) -> Option<Self> {
        let outcome = session.result.clone()?;
        Some(Self {
            session_id: session.session_id.clone(),
            graph_version: session.graph_version.clone(),
            metadata: session.metadata.clone(),
            created_at: session.created_at,
            generated_at: session.finalized_at?,
            answers: session.answers.clone(),
            categories: outcome.categories(),
            outcome,
        })
    }

    /// Plain-text rendering for terminals and downloads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        let _ = writeln!(out, "Risk classification report");
        let _ = writeln!(out, "session:       {}", self.session_id);
        let _ = writeln!(out, "graph version: {}", self.graph_version);
        let _ = writeln!(out, "generated:     {}", self.generated_at.to_rfc3339());
        let _ = writeln!(out);
        let _ = writeln!(out, "system:        {}", m.system_name);
        let _ = writeln!(out, "description:   {}", m.description);
        if !m.intended_users.is_empty() {
            let _ = writeln!(out, "users:         {}", m.intended_users);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "outcome: {}", self.outcome.summary());
        for assigned in &self.outcome.labels {
            let _ = writeln!(out, "  {} [{}]", assigned.label, assigned.bases.join("; "));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "answers:");
        for (entry, answered) in self.outcome.rationale.iter().zip(&self.answers) {
            let _ = write!(
                out,
                "  {:<4} {:<28} ({})",
                entry.node_id,
                entry.answer.to_string(),
                entry.legal_ref
            );
            if entry.short_circuit {
                let _ = write!(out, " stop");
            }
            let _ = writeln!(out);
            if let Some(j) = answered
                .justification
                .as_deref()
                .filter(|j| !j.trim().is_empty())
            {
                let _ = writeln!(out, "       note: {}", j.trim());
            }
        }
        out
    }
}
