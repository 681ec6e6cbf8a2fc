use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rcs_core::content::SupportMaterial;
use rcs_core::graph::{AnswerValue, QuestionNode};
use rcs_core::session::{
    ClassificationReport, ClassificationSession, EventBody, SessionError, SystemMetadata,
};
use rcs_core::survey::{read_responses_csv, summarize, LikertResponse};
use rcs_core::telemetry::{
    dwell_times, support_usage, DwellTime, InteractionEvent, InteractionKind,
};

use crate::error::ApiError;
use crate::state::AppState;

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/graph", get(get_graph))
        .route("/v1/graph/{version}", get(get_graph_version))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/answers", post(post_answer))
        .route("/v1/sessions/{id}/revisions", post(post_revision))
        .route("/v1/sessions/{id}/finalize", post(post_finalize))
        .route("/v1/sessions/{id}/report", get(get_report))
        .route("/v1/events", post(post_events))
        .route("/v1/surveys", post(post_surveys))
        .route("/v1/analytics/support-usage", get(get_support_usage))
        .route("/v1/analytics/likert", get(get_likert))
        .route("/v1/analytics/dwell", get(get_dwell))
        .fallback(|| async { ApiError::not_found("route") })
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn content_response(version: &str, body: &Bytes, headers: &HeaderMap) -> Response {
    let etag = format!("\"{version}\"");
    let fresh = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    let etag = HeaderValue::from_str(&etag).expect("version is a valid header value");
    if fresh {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    (
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("application/json"),
            ),
            (header::ETAG, etag),
            (header::CACHE_CONTROL, HeaderValue::from_static("no-cache")),
        ],
        Body::from(body.clone()),
    )
        .into_response()
}

async fn get_graph(State(state): State<AppState>, headers: HeaderMap) -> Response {
    let current = state.current();
    content_response(current.bundle.version(), &current.body, &headers)
}

async fn get_graph_version(
    State(state): State<AppState>,
    Path(version): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let content = state
        .content(&version)
        .ok_or_else(|| ApiError::not_found(format!("content version `{version}`")))?;
    Ok(content_response(&version, &content.body, &headers))
}

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a ClassificationSession,
    current_node: Option<&'a QuestionNode>,
    materials: Vec<&'a SupportMaterial>,
}

fn view(state: &AppState, session: &ClassificationSession) -> ApiResult<Value> {
    let bundle = &state
        .content(&session.graph_version)
        .ok_or_else(|| ApiError::not_found(format!("content version `{}`", session.graph_version)))?
        .bundle;
    let (current_node, materials) = match session.current.question() {
        Some(id) => (bundle.graph().node(id), bundle.materials_for(id)?),
        None => (None, Vec::new()),
    };
    Ok(serde_json::to_value(SessionView {
        session,
        current_node,
        materials,
    })
    .expect("session view serializes"))
}

#[derive(Deserialize)]
struct CreateSession {
    #[serde(default)]
    metadata: Option<Value>,
    #[serde(default)]
    tutorial_confirmed: bool,
    #[serde(default)]
    user_ref: Option<String>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse(&body)?;
    if !req.tutorial_confirmed {
        return Err(SessionError::TutorialNotConfirmed.into());
    }
    let metadata: SystemMetadata = match req.metadata {
        None | Some(Value::Null) => {
            return Err(
                ApiError::new("INVALID_METADATA", "metadata is required").with_field("metadata")
            )
        }
        Some(v) => serde_json::from_value(v).map_err(|e| {
            ApiError::new("INVALID_METADATA", format!("invalid metadata: {e}"))
                .with_field("metadata")
        })?,
    };
    let user_ref = req.user_ref.filter(|u| !u.trim().is_empty());
    if let Some(user) = &user_ref {
        if state.enforce_single_submission() && state.submission_of(user).is_some() {
            return Err(duplicate_submission(user));
        }
    }

    let id = uuid::Uuid::new_v4().to_string();
    let graph = state.current().bundle.graph();
    let (session, event) =
        ClassificationSession::start(graph, id.clone(), metadata, true, user_ref, Utc::now())?;
    let slot = state.slot(&id);
    let mut guard = slot.lock().await;
    state.persist(&session, &event)?;
    state.open_telemetry(&id, session.created_at);
    state.record_server_event(
        &id,
        InteractionKind::TutorialConfirmed,
        None,
        session.created_at,
    );
    let body = view(&state, &session)?;
    *guard = Some(session);
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, format!("/v1/sessions/{id}"))],
        Json(body),
    )
        .into_response())
}

fn duplicate_submission(user: &str) -> ApiError {
    ApiError::new(
        "DUPLICATE_SUBMISSION",
        format!("user `{user}` has already submitted a classification"),
    )
    .with_field("user_ref")
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let slot = state.slot(&id);
    let mut guard = slot.lock().await;
    state.ensure_loaded(&id, &mut guard)?;
    Ok(Json(view(&state, guard.as_ref().expect("loaded"))?))
}

#[derive(Deserialize)]
struct AnswerRequest {
    node_id: String,
    answer: AnswerValue,
    #[serde(default)]
    justification: Option<String>,
    /// Expected sequence number of the resulting event; resending an
    /// already-applied one is a no-op.
    #[serde(default)]
    seq: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Command {
    Answer,
    Revise,
}

async fn post_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    answer_command(state, id, parse(&body)?, Command::Answer).await
}

async fn post_revision(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    answer_command(state, id, parse(&body)?, Command::Revise).await
}

/// Resolves an explicit `seq`: `Ok(true)` when the same event was already
/// applied, `Ok(false)` when the command should run.
fn check_seq(
    state: &AppState,
    session: &ClassificationSession,
    seq: Option<u64>,
    same: impl Fn(&EventBody) -> bool,
) -> ApiResult<bool> {
    let Some(seq) = seq else { return Ok(false) };
    let next = session.last_seq + 1;
    if seq == next {
        return Ok(false);
    }
    let current = session.current.question();
    if seq == 0 || seq > next {
        return Err(
            ApiError::new("OUT_OF_ORDER", format!("expected seq {next}, got {seq}"))
                .with_field("seq")
                .with_current(current),
        );
    }
    let events = state.load_events(&session.session_id)?;
    match events.iter().find(|e| e.seq == seq) {
        Some(e) if same(&e.body) => Ok(true),
        _ => Err(ApiError::new(
            "OUT_OF_ORDER",
            format!("seq {seq} was already used by a different event"),
        )
        .with_field("seq")
        .with_current(current)),
    }
}

async fn answer_command(
    state: AppState,
    id: String,
    req: AnswerRequest,
    command: Command,
) -> ApiResult<Json<Value>> {
    let slot = state.slot(&id);
    let mut guard = slot.lock().await;
    state.ensure_loaded(&id, &mut guard)?;
    let session = guard.as_ref().expect("loaded");

    let repeated = check_seq(&state, session, req.seq, |body| match (command, body) {
        (
            Command::Answer,
            EventBody::AnswerSubmitted {
                node_id,
                answer,
                justification,
            },
        )
        | (
            Command::Revise,
            EventBody::AnswerRevised {
                node_id,
                answer,
                justification,
                ..
            },
        ) => {
            *node_id == req.node_id && *answer == req.answer && *justification == req.justification
        }
        _ => false,
    })?;
    if repeated {
        return Ok(Json(view(&state, session)?));
    }

    let graph = state.graph(&session.graph_version)?;
    let mut next = session.clone();
    let now = Utc::now();
    let event = match command {
        Command::Answer => {
            next.submit_answer(graph, &req.node_id, req.answer, req.justification, now)
        }
        Command::Revise => {
            next.revise_answer(graph, &req.node_id, req.answer, req.justification, now)
        }
    }?;
    state.persist(&next, &event)?;
    let kind = match command {
        Command::Answer => InteractionKind::QuestionAnswered,
        Command::Revise => InteractionKind::Revision,
    };
    state.record_server_event(&id, kind, Some(&req.node_id), now);
    let body = view(&state, &next)?;
    *guard = Some(next);
    Ok(Json(body))
}

#[derive(Deserialize, Default)]
struct FinalizeRequest {
    #[serde(default)]
    seq: Option<u64>,
}

async fn post_finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ClassificationReport>> {
    let req: FinalizeRequest = if body.iter().all(u8::is_ascii_whitespace) {
        FinalizeRequest::default()
    } else {
        parse(&body)?
    };
    let slot = state.slot(&id);
    let mut guard = slot.lock().await;
    state.ensure_loaded(&id, &mut guard)?;
    let session = guard.as_ref().expect("loaded");

    if check_seq(&state, session, req.seq, |b| {
        matches!(b, EventBody::Finalized { .. })
    })? {
        return Ok(Json(
            session.report().expect("finalized session has a report"),
        ));
    }

    let graph = state.graph(&session.graph_version)?;
    let mut next = session.clone();
    let now = Utc::now();
    let user = next.user_ref.clone();
    let enforce = state.enforce_single_submission();
    let mut submissions = state.0.submissions.lock().expect("submissions lock");
    if let (true, Some(user)) = (enforce, &user) {
        if submissions.get(user).is_some_and(|other| *other != id) {
            return Err(duplicate_submission(user));
        }
    }
    let (event, report) = next.finalize(graph, now)?;
    state.persist(&next, &event)?;
    if let Some(user) = user {
        submissions.insert(user, id.clone());
    }
    drop(submissions);
    state.record_server_event(&id, InteractionKind::Finalized, None, now);
    *guard = Some(next);
    Ok(Json(report))
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn get_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let slot = state.slot(&id);
    let mut guard = slot.lock().await;
    state.ensure_loaded(&id, &mut guard)?;
    let session = guard.as_ref().expect("loaded");
    let report = session.report().ok_or_else(|| {
        ApiError::new("NOT_FINALIZED", "the session has not been finalized")
            .with_current(session.current.question())
    })?;
    Ok(match q.format.as_deref() {
        Some("text") => (
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            report.to_text(),
        )
            .into_response(),
        None | Some("json") => Json(report).into_response(),
        Some(other) => {
            return Err(
                ApiError::bad_request(format!("unknown report format `{other}`"))
                    .with_field("format"),
            )
        }
    })
}

async fn post_events(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let value: Value = parse(&body)?;
    let events: Vec<InteractionEvent> = match value {
        Value::Array(_) => serde_json::from_value(value),
        other => serde_json::from_value(other).map(|e| vec![e]),
    }
    .map_err(|e| ApiError::new("INVALID_EVENT", format!("malformed event: {e}")))?;
    let accepted = state.record_events(events)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": accepted }))).into_response())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SurveyUpload {
    List(Vec<LikertResponse>),
    Wrapped { responses: Vec<LikertResponse> },
}

async fn post_surveys(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/json");
    let responses = if content_type.starts_with("text/csv") {
        read_responses_csv(body.as_ref())?
    } else if content_type.starts_with("application/json") {
        match serde_json::from_slice::<SurveyUpload>(&body) {
            Ok(SurveyUpload::List(r)) | Ok(SurveyUpload::Wrapped { responses: r }) => r,
            Err(e) => {
                return Err(ApiError::new(
                    "MALFORMED_SURVEY",
                    format!("invalid survey body: {e}"),
                ))
            }
        }
    } else {
        return Err(ApiError::new(
            "UNSUPPORTED_MEDIA_TYPE",
            format!("expected application/json or text/csv, got `{content_type}`"),
        ));
    };
    let stored = state.add_responses(responses)?;
    Ok((StatusCode::CREATED, Json(json!({ "stored": stored }))).into_response())
}

async fn get_support_usage(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let events = state.telemetry_events()?;
    let usage = support_usage(&events, |id| state.material_kind(id));
    Ok(Json(serde_json::to_value(usage).expect("usage serializes")))
}

async fn get_likert(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "statements": summarize(&state.responses()) }))
}

#[derive(Deserialize)]
struct DwellQuery {
    #[serde(default)]
    session_id: Option<String>,
}

async fn get_dwell(
    State(state): State<AppState>,
    Query(q): Query<DwellQuery>,
) -> ApiResult<Json<Value>> {
    let events = state.telemetry_events()?;
    Ok(Json(match q.session_id {
        Some(session) => {
            let seconds: serde_json::Map<String, Value> = dwell_times(&events, &session)
                .into_iter()
                .map(|(node, d)| (node, json!(d.num_milliseconds() as f64 / 1000.0)))
                .collect();
            json!({ "session_id": session, "seconds": seconds })
        }
        None => json!({ "nodes": DwellTime::summarize(&events) }),
    }))
}
