use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::SystemMetadata;
use crate::graph::{AnswerValue, RiskLabel};

/// One record of a session's append-only event stream. Serialized as
/// `{session_id, seq, ts, kind, payload}`; `seq` starts at 1 and increases
/// by one per event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session_id: String,
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Created {
        metadata: SystemMetadata,
        tutorial_confirmed: bool,
        graph_version: String,
        #[serde(default)]
        user_ref: Option<String>,
    },
    AnswerSubmitted {
        node_id: String,
        answer: AnswerValue,
        #[serde(default)]
        justification: Option<String>,
    },
    AnswerRevised {
        node_id: String,
        answer: AnswerValue,
        #[serde(default)]
        justification: Option<String>,
        /// Nodes whose answers the revision dropped, in path order.
        discarded: Vec<String>,
    },
    Finalized {
        labels: Vec<RiskLabel>,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Created { .. } => "created",
            Self::AnswerSubmitted { .. } => "answer_submitted",
            Self::AnswerRevised { .. } => "answer_revised",
            Self::Finalized { .. } => "finalized",
        }
    }
}
