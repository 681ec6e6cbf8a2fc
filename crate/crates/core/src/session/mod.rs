//! Event-sourced classification sessions.
//!
//! A session is the fold of its [`SessionEvent`] stream. Every command
//! (`start`, `submit_answer`, `revise_answer`, `finalize`) validates its
//! input, produces one event and applies it through the same code path that
//! [`ClassificationSession::replay`] uses, so a replayed session is
//! identical to the live one.

mod event;
mod report;
mod store;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::graph::{
    classify, next_question, AnswerValue, DecisionGraph, RiskOutcomeSet, Step, TraversalError,
};

pub use event::{EventBody, SessionEvent};
pub use report::ClassificationReport;
pub use store::{is_valid_session_id, EventLogStore, LoadedLog, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    Standalone,
    Embedded,
}

/// Context about the system under assessment. Captured for documentation
/// and credibility checks; it never influences routing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemMetadata {
    pub system_name: String,
    #[serde(default)]
    pub input_modalities: Vec<String>,
    #[serde(default)]
    pub output_modalities: Vec<String>,
    #[serde(default)]
    pub intended_users: String,
    pub deployment: Deployment,
    pub description: String,
}

impl SystemMetadata {
    pub fn check(&self) -> Result<(), SessionError> {
        if self.system_name.trim().is_empty() {
            return Err(SessionError::InvalidMetadata {
                field: "system_name",
            });
        }
        if self.description.trim().is_empty() {
            return Err(SessionError::InvalidMetadata {
                field: "description",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    Draft,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsweredQuestion {
    pub node_id: String,
    pub answer: AnswerValue,
    #[serde(default)]
    pub justification: Option<String>,
    pub answered_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("the tutorial must be confirmed before starting")]
    TutorialNotConfirmed,
    #[error("metadata field `{field}` must not be empty")]
    InvalidMetadata { field: &'static str },
    #[error("`{found}` is not the current question; expected {expected}")]
    OutOfOrder { expected: Step, found: String },
    #[error("illegal answer for `{node}`: {reason}")]
    IllegalAnswer { node: String, reason: String },
    #[error("session is finalized")]
    SessionFinalized,
    #[error("`{0}` has not been answered in this session")]
    UnknownNode(String),
    #[error("path is incomplete; next question is {next}")]
    IncompletePath { next: Step },
    #[error("session uses graph `{session}` but `{graph}` was supplied")]
    VersionMismatch { session: String, graph: String },
    #[error("event #{found} does not follow #{last}")]
    Sequence { last: u64, found: u64 },
    #[error("invalid event stream: {0}")]
    InvalidStream(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::TutorialNotConfirmed => "TUTORIAL_NOT_CONFIRMED",
            Self::InvalidMetadata { .. } => "INVALID_METADATA",
            Self::OutOfOrder { .. } => "OUT_OF_ORDER",
            Self::IllegalAnswer { .. } => "ILLEGAL_ANSWER",
            Self::SessionFinalized => "SESSION_FINALIZED",
            Self::UnknownNode(_) => "UNKNOWN_NODE",
            Self::IncompletePath { .. } => "INCOMPLETE_PATH",
            Self::VersionMismatch { .. } => "VERSION_MISMATCH",
            Self::Sequence { .. } => "OUT_OF_ORDER",
            Self::InvalidStream(_) => "INVALID_STREAM",
        }
    }
}

impl From<TraversalError> for SessionError {
    fn from(err: TraversalError) -> Self {
        match err {
            TraversalError::IllegalAnswer { node, reason } => Self::IllegalAnswer { node, reason },
            TraversalError::IncompletePath { next } => Self::IncompletePath { next },
            other => Self::InvalidStream(other.to_string()),
        }
    }
}

/// State of one practitioner's classification journey.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationSession {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub tutorial_confirmed: bool,
    pub metadata: SystemMetadata,
    pub graph_version: String,
    #[serde(default)]
    pub user_ref: Option<String>,
    pub answers: Vec<AnsweredQuestion>,
    pub status: SessionStatus,
    #[serde(default)]
    pub result: Option<RiskOutcomeSet>,
    #[serde(default)]
    pub finalized_at: Option<DateTime<Utc>>,
    pub current: Step,
    pub last_seq: u64,
}

impl ClassificationSession {
    /// Opens a draft session at the graph's start node.
    pub fn start(
        graph: &DecisionGraph,
        session_id: impl Into<String>,
        metadata: SystemMetadata,
        tutorial_confirmed: bool,
        user_ref: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<(Self, SessionEvent), SessionError> {
        let event = SessionEvent {
            session_id: session_id.into(),
            seq: 1,
            ts: now,
            body: EventBody::Created {
                metadata,
                tutorial_confirmed,
                graph_version: graph.version().to_string(),
                user_ref,
            },
        };
        let session = Self::from_created(graph, &event)?;
        Ok((session, event))
    }

    fn from_created(graph: &DecisionGraph, event: &SessionEvent) -> Result<Self, SessionError> {
        let EventBody::Created {
            metadata,
            tutorial_confirmed,
            graph_version,
            user_ref,
        } = &event.body
        else {
            return Err(SessionError::InvalidStream(format!(
                "first event is `{}`, expected `created`",
                event.body.kind()
            )));
        };
        if event.seq != 1 {
            return Err(SessionError::Sequence {
                last: 0,
                found: event.seq,
            });
        }
        if !tutorial_confirmed {
            return Err(SessionError::TutorialNotConfirmed);
        }
        metadata.check()?;
        if graph_version != graph.version() {
            return Err(SessionError::VersionMismatch {
                session: graph_version.clone(),
                graph: graph.version().to_string(),
            });
        }
        Ok(Self {
            session_id: event.session_id.clone(),
            created_at: event.ts,
            tutorial_confirmed: true,
            metadata: metadata.clone(),
            graph_version: graph_version.clone(),
            user_ref: user_ref.clone(),
            answers: Vec::new(),
            status: SessionStatus::Draft,
            result: None,
            finalized_at: None,
            current: Step::Question(graph.start().to_string()),
            last_seq: 1,
        })
    }

    /// Rebuilds a session from its complete event stream.
    pub fn replay<'e, I>(graph: &DecisionGraph, events: I) -> Result<Self, SessionError>
    where
        I: IntoIterator<Item = &'e SessionEvent>,
    {
        let mut events = events.into_iter();
        let first = events
            .next()
            .ok_or_else(|| SessionError::InvalidStream("empty event stream".into()))?;
        let mut session = Self::from_created(graph, first)?;
        for event in events {
            session.apply(graph, event)?;
        }
        Ok(session)
    }

    /// Applies events in order and stops at the first one that does not
    /// apply. Returns the session and how many events were accepted.
    pub fn recover<'e, I>(graph: &DecisionGraph, events: I) -> Option<(Self, usize)>
    where
        I: IntoIterator<Item = &'e SessionEvent>,
    {
        let mut events = events.into_iter();
        let mut session = Self::from_created(graph, events.next()?).ok()?;
        let mut applied = 1;
        for event in events {
            if session.apply(graph, event).is_err() {
                break;
            }
            applied += 1;
        }
        Some((session, applied))
    }

    pub fn is_finalized(&self) -> bool {
        self.status == SessionStatus::Finalized
    }

    pub fn history(&self) -> impl Iterator<Item = (&str, &AnswerValue)> {
        self.answers.iter().map(|a| (a.node_id.as_str(), &a.answer))
    }

    fn check_graph(&self, graph: &DecisionGraph) -> Result<(), SessionError> {
        if graph.version() != self.graph_version {
            return Err(SessionError::VersionMismatch {
                session: self.graph_version.clone(),
                graph: graph.version().to_string(),
            });
        }
        Ok(())
    }

    fn next_event(&self, ts: DateTime<Utc>, body: EventBody) -> SessionEvent {
        SessionEvent {
            session_id: self.session_id.clone(),
            seq: self.last_seq + 1,
            ts,
            body,
        }
    }

    /// Answers the current question and advances.
    pub fn submit_answer(
        &mut self,
        graph: &DecisionGraph,
        node_id: &str,
        answer: AnswerValue,
        justification: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<SessionEvent, SessionError> {
        let event = self.next_event(
            now,
            EventBody::AnswerSubmitted {
                node_id: node_id.to_string(),
                answer,
                justification,
            },
        );
        self.apply(graph, &event)?;
        Ok(event)
    }

    /// Replaces the answer at `node_id` and drops every later answer.
    pub fn revise_answer(
        &mut self,
        graph: &DecisionGraph,
        node_id: &str,
        answer: AnswerValue,
        justification: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<SessionEvent, SessionError> {
        let discarded = match self.answers.iter().position(|a| a.node_id == node_id) {
            Some(i) => self.answers[i + 1..]
                .iter()
                .map(|a| a.node_id.clone())
                .collect(),
            None => Vec::new(),
        };
        let event = self.next_event(
            now,
            EventBody::AnswerRevised {
                node_id: node_id.to_string(),
                answer,
                justification,
                discarded,
            },
        );
        self.apply(graph, &event)?;
        Ok(event)
    }

    /// Classifies the completed path and freezes the session.
    pub fn finalize(
        &mut self,
        graph: &DecisionGraph,
        now: DateTime<Utc>,
    ) -> Result<(SessionEvent, ClassificationReport), SessionError> {
        self.check_graph(graph)?;
        if self.is_finalized() {
            return Err(SessionError::SessionFinalized);
        }
        let outcome = classify(graph, self.history())?;
        let event = self.next_event(
            now,
            EventBody::Finalized {
                labels: outcome.label_set(),
            },
        );
        self.apply(graph, &event)?;
        let report = self.report().expect("finalized session has a report");
        Ok((event, report))
    }

    /// The report of a finalized session.
    pub fn report(&self) -> Option<ClassificationReport> {
        ClassificationReport::from_session(self)
    }

    /// Applies one event. Leaves the session untouched on error.
    pub fn apply(
        &mut self,
        graph: &DecisionGraph,
        event: &SessionEvent,
    ) -> Result<(), SessionError> {
        self.check_graph(graph)?;
        if event.session_id != self.session_id {
            return Err(SessionError::InvalidStream(format!(
                "event for session `{}` applied to `{}`",
                event.session_id, self.session_id
            )));
        }
        if self.is_finalized() {
            return Err(SessionError::SessionFinalized);
        }
        if event.seq != self.last_seq + 1 {
            return Err(SessionError::Sequence {
                last: self.last_seq,
                found: event.seq,
            });
        }

        match &event.body {
            EventBody::Created { .. } => {
                return Err(SessionError::InvalidStream(
                    "`created` may only open a stream".into(),
                ))
            }
            EventBody::AnswerSubmitted {
                node_id,
                answer,
                justification,
            } => {
                if self.current.question() != Some(node_id.as_str()) {
                    return Err(SessionError::OutOfOrder {
                        expected: self.current.clone(),
                        found: node_id.clone(),
                    });
                }
                let mut answers = self.answers.clone();
                answers.push(AnsweredQuestion {
                    node_id: node_id.clone(),
                    answer: answer.clone(),
                    justification: justification.clone(),
                    answered_at: event.ts,
                });
                self.current = advance(graph, &answers)?;
                self.answers = answers;
            }
            EventBody::AnswerRevised {
                node_id,
                answer,
                justification,
                discarded,
            } => {
                let Some(index) = self.answers.iter().position(|a| &a.node_id == node_id) else {
                    return Err(SessionError::UnknownNode(node_id.clone()));
                };
                let expected_discard: Vec<&str> = self.answers[index + 1..]
                    .iter()
                    .map(|a| a.node_id.as_str())
                    .collect();
                if expected_discard != discarded.iter().map(String::as_str).collect::<Vec<_>>() {
                    return Err(SessionError::InvalidStream(format!(
                        "revision of `{node_id}` lists discarded answers that do not match the session"
                    )));
                }
                let mut answers = self.answers[..index].to_vec();
                answers.push(AnsweredQuestion {
                    node_id: node_id.clone(),
                    answer: answer.clone(),
                    justification: justification.clone(),
                    answered_at: event.ts,
                });
                self.current = advance(graph, &answers)?;
                self.answers = answers;
            }
            EventBody::Finalized { labels } => {
                self.metadata.check()?;
                let outcome = classify(graph, self.history())?;
                if &outcome.label_set() != labels {
                    return Err(SessionError::InvalidStream(format!(
                        "recorded outcome does not match classification {}",
                        outcome.summary()
                    )));
                }
                self.result = Some(outcome);
                self.status = SessionStatus::Finalized;
                self.finalized_at = Some(event.ts);
            }
        }
        self.last_seq = event.seq;
        Ok(())
    }
}

fn advance(graph: &DecisionGraph, answers: &[AnsweredQuestion]) -> Result<Step, SessionError> {
    next_question(
        graph,
        answers.iter().map(|a| (a.node_id.as_str(), &a.answer)),
    )
    .map_err(|err| match err {
        // The submitted node was checked against `current` already, so
        // a prefix failure can only come from a corrupt answer list.
        TraversalError::InvalidPrefix { .. } => SessionError::InvalidStream(err.to_string()),
        other => other.into(),
    })
}
