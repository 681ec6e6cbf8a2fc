//! Append-only interaction telemetry and the usage analytics derived from it.

mod analytics;
mod store;

use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::content::{MaterialKind, SupportCatalog};

pub use analytics::{dwell_times, support_usage, DwellTime, HistogramBin, KindUsage, SupportUsage};
pub use store::{TelemetryStore, TelemetryStoreError};

pub const DEFAULT_SKEW_TOLERANCE: Duration = Duration::seconds(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    QuestionShown,
    QuestionAnswered,
    SupportOpened,
    Revision,
    TutorialConfirmed,
    Finalized,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::QuestionShown => "question_shown",
            Self::QuestionAnswered => "question_answered",
            Self::SupportOpened => "support_opened",
            Self::Revision => "revision",
            Self::TutorialConfirmed => "tutorial_confirmed",
            Self::Finalized => "finalized",
        }
    }

    fn needs_node(self) -> bool {
        matches!(
            self,
            Self::QuestionShown | Self::QuestionAnswered | Self::Revision
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub session_id: String,
    pub ts: DateTime<Utc>,
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TelemetryError {
    #[error("event at {ts} precedes the latest event of session `{session_id}` ({last})")]
    OutOfOrderTs {
        session_id: String,
        ts: DateTime<Utc>,
        last: DateTime<Utc>,
    },
    #[error("unknown support material `{0}`")]
    UnknownMaterial(String),
    #[error("`{kind}` events require `{field}`")]
    MissingField {
        kind: &'static str,
        field: &'static str,
    },
    #[error("session id must not be empty")]
    EmptySession,
}

impl TelemetryError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::OutOfOrderTs { .. } => "OUT_OF_ORDER_TS",
            Self::UnknownMaterial(_) => "UNKNOWN_MATERIAL",
            Self::MissingField { .. } | Self::EmptySession => "INVALID_EVENT",
        }
    }

    pub fn field(&self) -> Option<&'static str> {
        match self {
            Self::OutOfOrderTs { .. } => Some("ts"),
            Self::UnknownMaterial(_) => Some("material_id"),
            Self::MissingField { field, .. } => Some(field),
            Self::EmptySession => Some("session_id"),
        }
    }
}

/// Admission control for the telemetry stream: per-session time order with a
/// clock-skew tolerance, and material ids checked against a catalog.
///
/// An event up to `skew` earlier than its session's latest event is accepted
/// with its timestamp raised to that latest value, so stored streams are
/// always non-decreasing per session.
#[derive(Debug, Clone)]
pub struct TelemetryLog {
    skew: Duration,
    latest: HashMap<String, DateTime<Utc>>,
    materials: Option<HashMap<String, MaterialKind>>,
}

impl Default for TelemetryLog {
    fn default() -> Self {
        Self::new(DEFAULT_SKEW_TOLERANCE)
    }
}

impl TelemetryLog {
    pub fn new(skew: Duration) -> Self {
        Self {
            skew,
            latest: HashMap::new(),
            materials: None,
        }
    }

    /// Restricts `support_opened` to materials of the given catalogs. May be
    /// called once per content version.
    pub fn with_catalog(mut self, catalog: &SupportCatalog) -> Self {
        self.materials
            .get_or_insert_with(HashMap::new)
            .extend(catalog.materials.iter().map(|m| (m.id.clone(), m.kind)));
        self
    }

    pub fn skew(&self) -> Duration {
        self.skew
    }

    /// Marks the start of a session; earlier events for it are rejected.
    pub fn open_session(&mut self, session_id: &str, started_at: DateTime<Utc>) {
        let entry = self
            .latest
            .entry(session_id.to_string())
            .or_insert(started_at);
        if *entry < started_at {
            *entry = started_at;
        }
    }

    /// Rebuilds ordering state from previously stored events.
    pub fn seed<'e, I>(&mut self, events: I)
    where
        I: IntoIterator<Item = &'e InteractionEvent>,
    {
        for e in events {
            self.open_session(&e.session_id, e.ts);
        }
    }

    pub fn material_kind(&self, id: &str) -> Option<MaterialKind> {
        self.materials.as_ref()?.get(id).copied()
    }

    /// Checks `event` and returns the form to persist.
    pub fn admit(
        &mut self,
        mut event: InteractionEvent,
    ) -> Result<InteractionEvent, TelemetryError> {
        if event.session_id.is_empty() {
            return Err(TelemetryError::EmptySession);
        }
        if event.kind.needs_node() && event.node_context.is_none() {
            return Err(TelemetryError::MissingField {
                kind: event.kind.as_str(),
                field: "node_context",
            });
        }
        if event.kind == InteractionKind::SupportOpened {
            let Some(id) = event.material_id.as_deref() else {
                return Err(TelemetryError::MissingField {
                    kind: event.kind.as_str(),
                    field: "material_id",
                });
            };
            if let Some(known) = &self.materials {
                if !known.contains_key(id) {
                    return Err(TelemetryError::UnknownMaterial(id.to_string()));
                }
            }
        }
        if let Some(&last) = self.latest.get(&event.session_id) {
            if event.ts < last {
                if last - event.ts > self.skew {
                    return Err(TelemetryError::OutOfOrderTs {
                        session_id: event.session_id,
                        ts: event.ts,
                        last,
                    });
                }
                event.ts = last;
            }
        }
        self.latest.insert(event.session_id.clone(), event.ts);
        Ok(event)
    }
}
