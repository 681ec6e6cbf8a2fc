use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use chrono::{DateTime, Utc};
use serde_json::json;

use rcs_core::content::{shipped_bundle, ContentBundle, ContentError};
use rcs_core::graph::DecisionGraph;
use rcs_core::session::{ClassificationSession, EventLogStore, SessionEvent, StoreError};
use rcs_core::survey::{check_unique, LikertResponse};
use rcs_core::telemetry::{
    InteractionEvent, InteractionKind, TelemetryLog, TelemetryStore, TelemetryStoreError,
};

use crate::error::ApiError;
use crate::ServiceConfig;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("content bundle rejected: {0}")]
    Content(#[from] ContentError),
    #[error("archived content `{version}` differs from the bundle being loaded")]
    ArchiveConflict { version: String },
    #[error("session store: {0}")]
    Store(#[from] StoreError),
    #[error("telemetry store: {0}")]
    Telemetry(#[from] TelemetryStoreError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {detail}")]
    CorruptSurvey {
        path: PathBuf,
        line: usize,
        detail: String,
    },
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Content(e) => e.code(),
            Self::ArchiveConflict { .. } => "VERSION_CONFLICT",
            Self::Store(e) => e.code(),
            Self::Telemetry(_) | Self::Io { .. } => "IO_ERROR",
            Self::CorruptSurvey { .. } => "CORRUPT_LOG",
        }
    }
}

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> ServiceError {
    let context = context.into();
    move |source| ServiceError::Io { context, source }
}

/// A content version the service can serve, with its response body
/// rendered once.
pub(crate) struct LoadedContent {
    pub bundle: ContentBundle,
    pub body: Bytes,
}

pub(crate) type SessionSlot = Arc<tokio::sync::Mutex<Option<ClassificationSession>>>;

pub(crate) struct Telemetry {
    pub log: TelemetryLog,
    pub store: TelemetryStore,
}

pub(crate) struct Surveys {
    pub path: PathBuf,
    pub responses: Vec<LikertResponse>,
}

pub(crate) struct Inner {
    pub current: String,
    pub content: BTreeMap<String, LoadedContent>,
    pub sessions: EventLogStore,
    pub slots: Mutex<HashMap<String, SessionSlot>>,
    /// Finalized session per user reference.
    pub submissions: Mutex<HashMap<String, String>>,
    pub telemetry: Mutex<Telemetry>,
    pub telemetry_reader: TelemetryStore,
    pub surveys: RwLock<Surveys>,
    pub enforce_single_submission: bool,
    pub snapshot_every: u64,
}

/// Shared handle to the service state.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    /// Loads content, archives it, repairs logs and rebuilds indexes.
    /// Fails if the bundle is invalid or conflicts with an archived version.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let data = &config.data_dir;
        fs::create_dir_all(data).map_err(io(format!("create {}", data.display())))?;

        let bundle = match &config.content_bundle {
            Some(path) => ContentBundle::from_path(path)?,
            None => shipped_bundle().clone(),
        };
        let current = bundle.version().to_string();
        archive(&data.join("content"), &bundle)?;

        let mut content = BTreeMap::new();
        for (version, archived) in load_archive(&data.join("content"))? {
            let archived = match &config.expert_contact {
                Some(c) => archived.with_expert_contact(c),
                None => archived,
            };
            content.insert(version, render(archived));
        }

        let sessions = EventLogStore::open(data.join("sessions"))?;
        let telemetry_store = TelemetryStore::open(data.join("telemetry"))?;
        let repaired = telemetry_store.repair()?;
        if repaired > 0 {
            tracing::warn!(bytes = repaired, "dropped incomplete telemetry records");
        }

        let mut log = TelemetryLog::new(config.clock_skew);
        for loaded in content.values() {
            log = log.with_catalog(loaded.bundle.catalog());
        }
        telemetry_store.for_each(|e| log.seed([&e]))?;

        let mut submissions = HashMap::new();
        for id in sessions.session_ids()? {
            let version = sessions.pinned_version(&id)?;
            let graph = graph_of(&content, &version).ok_or_else(|| {
                ServiceError::Content(ContentError::Parse(format!(
                    "session `{id}` uses unknown content version `{version}`"
                )))
            })?;
            let session = sessions.restore(graph, &id)?;
            log.open_session(&id, session.created_at);
            if let (true, Some(user)) = (session.is_finalized(), &session.user_ref) {
                submissions.insert(user.clone(), id.clone());
            }
        }

        let surveys = load_surveys(&data.join("surveys").join("responses.ndjson"))?;

        tracing::info!(version = %current, sessions = submissions.len(), "service state ready");
        Ok(Self(Arc::new(Inner {
            current,
            content,
            sessions,
            slots: Mutex::new(HashMap::new()),
            submissions: Mutex::new(submissions),
            telemetry: Mutex::new(Telemetry {
                log,
                store: telemetry_store.clone(),
            }),
            telemetry_reader: telemetry_store,
            surveys: RwLock::new(surveys),
            enforce_single_submission: config.enforce_single_submission,
            snapshot_every: config.snapshot_every.max(1),
        })))
    }

    pub(crate) fn current(&self) -> &LoadedContent {
        &self.0.content[&self.0.current]
    }

    pub(crate) fn content(&self, version: &str) -> Option<&LoadedContent> {
        self.0.content.get(version)
    }

    pub(crate) fn graph(&self, version: &str) -> Result<&DecisionGraph, ApiError> {
        graph_of(&self.0.content, version)
            .ok_or_else(|| ApiError::not_found(format!("content version `{version}`")))
    }

    pub(crate) fn slot(&self, id: &str) -> SessionSlot {
        self.0
            .slots
            .lock()
            .expect("slot map lock")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Loads the session into its slot on first use.
    pub(crate) fn ensure_loaded(
        &self,
        id: &str,
        slot: &mut Option<ClassificationSession>,
    ) -> Result<(), ApiError> {
        if slot.is_some() {
            return Ok(());
        }
        if !self.0.sessions.exists(id) {
            self.0.slots.lock().expect("slot map lock").remove(id);
            return Err(ApiError::not_found(format!("session `{id}`")));
        }
        let version = self.0.sessions.pinned_version(id)?;
        let graph = self.graph(&version)?;
        *slot = Some(self.0.sessions.restore(graph, id)?);
        Ok(())
    }

    /// Persists an event already applied to `session`.
    pub(crate) fn persist(
        &self,
        session: &ClassificationSession,
        event: &SessionEvent,
    ) -> Result<(), ApiError> {
        self.0.sessions.append(event)?;
        if session.is_finalized() || event.seq.is_multiple_of(self.0.snapshot_every) {
            if let Err(e) = self.0.sessions.write_snapshot(session) {
                tracing::warn!(session = %session.session_id, "snapshot failed: {e}");
            }
        }
        Ok(())
    }

    pub(crate) fn load_events(&self, id: &str) -> Result<Vec<SessionEvent>, ApiError> {
        Ok(self.0.sessions.load(id)?.events)
    }

    pub(crate) fn enforce_single_submission(&self) -> bool {
        self.0.enforce_single_submission
    }

    pub(crate) fn submission_of(&self, user_ref: &str) -> Option<String> {
        self.0
            .submissions
            .lock()
            .expect("submissions lock")
            .get(user_ref)
            .cloned()
    }

    pub(crate) fn open_telemetry(&self, session_id: &str, at: DateTime<Utc>) {
        self.0
            .telemetry
            .lock()
            .expect("telemetry lock")
            .log
            .open_session(session_id, at);
    }

    /// Admits every event, then durably appends them in order. Nothing is
    /// stored if any event is rejected.
    pub(crate) fn record_events(&self, events: Vec<InteractionEvent>) -> Result<usize, ApiError> {
        let mut t = self.0.telemetry.lock().expect("telemetry lock");
        let mut log = t.log.clone();
        let admitted = events
            .into_iter()
            .map(|e| log.admit(e))
            .collect::<Result<Vec<_>, _>>()?;
        for event in &admitted {
            t.store.append(event)?;
        }
        t.log = log;
        Ok(admitted.len())
    }

    /// Telemetry the service derives from session commands.
    pub(crate) fn record_server_event(
        &self,
        session_id: &str,
        kind: InteractionKind,
        node: Option<&str>,
        ts: DateTime<Utc>,
    ) {
        let event = InteractionEvent {
            session_id: session_id.to_string(),
            ts,
            kind,
            node_context: node.map(str::to_string),
            material_id: None,
        };
        if let Err(e) = self.record_events(vec![event]) {
            tracing::warn!(
                session = session_id,
                code = e.code,
                "telemetry not recorded: {}",
                e.message
            );
        }
    }

    pub(crate) fn telemetry_events(&self) -> Result<Vec<InteractionEvent>, ApiError> {
        Ok(self.0.telemetry_reader.read_all()?)
    }

    pub(crate) fn material_kind(&self, id: &str) -> Option<rcs_core::content::MaterialKind> {
        self.0
            .content
            .values()
            .find_map(|c| c.bundle.catalog().material(id).map(|m| m.kind))
    }

    pub(crate) fn add_responses(&self, new: Vec<LikertResponse>) -> Result<usize, ApiError> {
        let mut surveys = self.0.surveys.write().expect("survey lock");
        let mut combined = surveys.responses.clone();
        combined.extend(new.iter().cloned());
        check_unique(&combined).map_err(|e| match e {
            rcs_core::survey::SurveyError::Duplicate {
                respondent_id,
                statement_id,
                ..
            } => ApiError::new(
                "DUPLICATE_RESPONSE",
                format!("respondent `{respondent_id}` already answered `{statement_id}`"),
            ),
            other => other.into(),
        })?;
        let path = surveys.path.clone();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        let mut buf = Vec::new();
        for r in &new {
            serde_json::to_writer(&mut buf, r).expect("responses serialize");
            buf.push(b'\n');
        }
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
        f.write_all(&buf)
            .and_then(|_| f.sync_data())
            .map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
        let n = new.len();
        surveys.responses = combined;
        Ok(n)
    }

    pub(crate) fn responses(&self) -> Vec<LikertResponse> {
        self.0
            .surveys
            .read()
            .expect("survey lock")
            .responses
            .clone()
    }
}

fn graph_of<'a>(
    content: &'a BTreeMap<String, LoadedContent>,
    version: &str,
) -> Option<&'a DecisionGraph> {
    content.get(version).map(|c| c.bundle.graph())
}

fn render(bundle: ContentBundle) -> LoadedContent {
    let body = serde_json::to_vec(&json!({
        "version": bundle.version(),
        "graph": bundle.graph().document(),
        "support": bundle.catalog(),
    }))
    .expect("content serializes");
    LoadedContent {
        bundle,
        body: Bytes::from(body),
    }
}

/// Stores `bundle` under `<root>/<version>/` unless that version is already
/// archived, in which case the archived copy must be identical.
fn archive(root: &Path, bundle: &ContentBundle) -> Result<(), ServiceError> {
    let dir = root.join(bundle.version());
    let graph_path = dir.join("graph.json");
    if graph_path.exists() {
        let archived = ContentBundle::from_path(&graph_path)?;
        if archived.graph().document() != bundle.graph().document()
            || archived.catalog() != bundle.catalog()
        {
            return Err(ServiceError::ArchiveConflict {
                version: bundle.version().to_string(),
            });
        }
        return Ok(());
    }
    fs::create_dir_all(&dir).map_err(io(format!("create {}", dir.display())))?;
    let write = |name: &str, value: serde_json::Value| -> Result<(), ServiceError> {
        let path = dir.join(name);
        let tmp = dir.join(format!("{name}.tmp"));
        let text = serde_json::to_string_pretty(&value).expect("content serializes");
        fs::write(&tmp, text).map_err(io(format!("write {}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(io(format!("rename {}", path.display())))
    };
    write(
        "graph.support.json",
        serde_json::to_value(bundle.catalog()).expect("catalog serializes"),
    )?;
    write(
        "graph.json",
        serde_json::to_value(bundle.graph().document()).expect("graph serializes"),
    )
}

fn load_archive(root: &Path) -> Result<Vec<(String, ContentBundle)>, ServiceError> {
    let mut out = Vec::new();
    let entries = fs::read_dir(root).map_err(io(format!("read {}", root.display())))?;
    for entry in entries {
        let entry = entry.map_err(io(format!("read {}", root.display())))?;
        let graph_path = entry.path().join("graph.json");
        if !graph_path.exists() {
            continue;
        }
        let bundle = ContentBundle::from_path(&graph_path)?;
        out.push((bundle.version().to_string(), bundle));
    }
    Ok(out)
}

fn load_surveys(path: &Path) -> Result<Surveys, ServiceError> {
    let mut text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io(format!("read {}", path.display()))(e)),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        text.truncate(keep);
        let f = fs::OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(io(format!("open {}", path.display())))?;
        f.set_len(keep as u64)
            .map_err(io(format!("truncate {}", path.display())))?;
        tracing::warn!(path = %path.display(), "dropped incomplete survey record");
    }
    let mut responses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let response = serde_json::from_str(line).map_err(|e| ServiceError::CorruptSurvey {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        responses.push(response);
    }
    Ok(Surveys {
        path: path.to_path_buf(),
        responses,
    })
}
