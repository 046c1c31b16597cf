use std::collections::HashMap;
use std::path::Path;

use adlsim_core::analysis::{build_report, render_text, FailureMode};
use adlsim_core::export::ExportFormat;
use adlsim_core::gateway::RequestKind;
use adlsim_core::prompt::{ChatMessage, PromptBundle};
use adlsim_core::scenario::{
    validate_scenario, AdlKind, CareSettingKind, DementiaStage, ScenarioInput, SettingDuration, Tagged,
};
use adlsim_core::session::{BackgroundSurvey, CaregiverInput, CaregiverOutcome, EngineError, SessionId};
use adlsim_core::strategy::Strategy;
use axum::body::{to_bytes, Body};
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::CorsLayer;
use tower_http::services::{ServeDir, ServeFile};
use tower_http::trace::TraceLayer;

use crate::error::ApiError;
use crate::extract::ApiJson;
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;

/// Largest response body the credential scrubber buffers.
const MAX_SCRUB_BYTES: usize = 64 * 1024 * 1024;

/// The `/api` routes with JSON error fallbacks, access-token gating and
/// credential scrubbing. Static UI assets are served when `ui_dir` is set.
pub fn router(state: AppState, cors_origin: Option<&str>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/catalog", get(catalog))
        .route("/session", post(create_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/survey", post(submit_survey))
        .route("/session/{id}/simulation", post(start_simulation))
        .route("/session/{id}/rating", post(submit_rating))
        .route("/session/{id}/suggestions", get(get_suggestions))
        .route("/session/{id}/caregiver", post(submit_caregiver))
        .route("/session/{id}/end", post(end_simulation))
        .route("/session/{id}/reset", post(reset_simulation))
        .route("/session/{id}/transcript", get(transcript))
        .route("/analysis/report", get(analysis_report))
        .route("/annotation/{session}/{simulation}/{turn}", post(annotate))
        .route("/chat", post(chat))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state.clone());

    let mut app = Router::new().nest("/api", api);
    app = match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")))),
        None => app.fallback(not_found),
    };
    if let Some(origin) = cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION, header::HeaderName::from_static("x-access-token")]),
        );
    }
    app.layer(middleware::from_fn_with_state(state, scrub_credential))
        .layer(CatchPanicLayer::custom(|_| ApiError::internal().into_response()))
        .layer(TraceLayer::new_for_http())
}

async fn not_found() -> ApiError {
    ApiError::not_found()
}

async fn method_not_allowed() -> ApiError {
    ApiError::method_not_allowed()
}

fn presented_token(req: &Request) -> Option<&str> {
    let headers = req.headers();
    if let Some(v) = headers.get("x-access-token").and_then(|v| v.to_str().ok()) {
        return Some(v.trim());
    }
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(expected) = &state.access_token {
        if presented_token(&req) != Some(expected.as_ref()) {
            return ApiError::unauthorized().into_response();
        }
    }
    next.run(req).await
}

async fn scrub_credential(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let resp = next.run(req).await;
    let Some(credential) = &state.credential else { return resp };
    let (mut parts, body) = resp.into_parts();
    let bytes = match to_bytes(body, MAX_SCRUB_BYTES).await {
        Ok(b) => b,
        Err(_) => return ApiError::internal().into_response(),
    };
    let text = String::from_utf8_lossy(&bytes);
    let scrubbed = credential.redact(&text);
    if scrubbed == text {
        return Response::from_parts(parts, Body::from(bytes));
    }
    parts.headers.remove(header::CONTENT_LENGTH);
    Response::from_parts(parts, Body::from(scrubbed))
}

fn session_id(raw: &str) -> ApiResult<SessionId> {
    SessionId::parse(raw).ok_or_else(|| EngineError::UnknownSession(raw.to_owned()).into())
}

fn parse_index(raw: &str, what: &str) -> ApiResult<u32> {
    raw.trim().parse().map_err(|_| ApiError::invalid_request(format!("`{what}` must be a non-negative integer")))
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "backend": state.backend_label,
        "model": state.engine.gateway().default_model(),
    }))
}

#[derive(Serialize)]
struct Choice {
    value: &'static str,
    label: String,
}

/// Option lists for the scenario form and suggestion cards.
async fn catalog(State(state): State<AppState>) -> Json<serde_json::Value> {
    let stages: Vec<Choice> = DementiaStage::ALL
        .into_iter()
        .map(|s| Choice { value: s.as_str(), label: s.display_name().to_owned() })
        .collect();
    let care_settings: Vec<Choice> = CareSettingKind::ALL
        .iter()
        .map(|&k| Choice {
            value: k.as_str(),
            label: if k == CareSettingKind::Other { "Other".into() } else { Tagged::known(k).description() },
        })
        .collect();
    let durations: Vec<Choice> =
        SettingDuration::ALL.iter().map(|&d| Choice { value: d.as_str(), label: d.as_str().replace('_', " ") }).collect();
    let adls: Vec<Choice> = AdlKind::ALL
        .iter()
        .map(|&k| Choice {
            value: k.as_str(),
            label: if k == AdlKind::Other { "Other".into() } else { Tagged::known(k).display_name() },
        })
        .collect();
    let strategies: Vec<_> = Strategy::ALL
        .into_iter()
        .map(|s| json!({"strategy": s, "label": s.label(), "definition": s.definition()}))
        .collect();
    Json(json!({
        "stages": stages,
        "care_settings": care_settings,
        "setting_durations": durations,
        "adls": adls,
        "strategies": strategies,
        "failure_modes": FailureMode::ALL.iter().map(|m| json!({"code": m.as_str(), "description": m.description()})).collect::<Vec<_>>(),
        "max_turns": state.engine.config().max_turns,
    }))
}

async fn create_session(State(state): State<AppState>) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let id = state.engine.create_session().await?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let view = state.engine.session_view(&session_id(&id)?).await?;
    Ok(Json(view).into_response())
}

async fn submit_survey(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ApiJson(survey): ApiJson<BackgroundSurvey>,
) -> ApiResult<Json<serde_json::Value>> {
    state.engine.submit_survey(&session_id(&id)?, survey).await?;
    Ok(Json(json!({ "ok": true })))
}

async fn start_simulation(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ApiJson(input): ApiJson<ScenarioInput>,
) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let scenario = validate_scenario(&input).map_err(EngineError::from)?;
    let started = state.engine.start_simulation(&id, scenario).await?;
    Ok((StatusCode::CREATED, Json(started)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingBody {
    score: i64,
    #[serde(default)]
    critique: Option<String>,
}

async fn submit_rating(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ApiJson(body): ApiJson<RatingBody>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = session_id(&id)?;
    state.engine.submit_rating(&id, body.score, body.critique.as_deref()).await?;
    Ok(Json(json!({ "ok": true, "state": state.engine.simulation_state(&id).await? })))
}

async fn get_suggestions(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    let set = state.engine.get_suggestions(&session_id(&id)?).await?;
    let options: Vec<_> = set
        .iter()
        .map(|(s, text)| json!({"strategy": s, "label": s.label(), "definition": s.definition(), "text": text}))
        .collect();
    Ok(Json(json!({ "options": options })))
}

async fn submit_caregiver(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ApiJson(input): ApiJson<CaregiverInput>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = session_id(&id)?;
    let outcome = state.engine.submit_caregiver(&id, input).await?;
    let current = state.engine.simulation_state(&id).await?;
    Ok(Json(match outcome {
        CaregiverOutcome::NextTurn { patient_turn } => {
            json!({ "ended": false, "patient_turn": patient_turn, "state": current })
        }
        CaregiverOutcome::Ended { reason } => json!({ "ended": true, "reason": reason, "state": current }),
    }))
}

async fn end_simulation(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    let id = session_id(&id)?;
    state.engine.end_simulation(&id).await?;
    Ok(Json(json!({ "ended": true, "state": state.engine.simulation_state(&id).await? })))
}

async fn reset_simulation(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    let id = session_id(&id)?;
    state.engine.reset_simulation(&id).await?;
    Ok(Json(json!({ "reset": true, "state": state.engine.simulation_state(&id).await? })))
}

async fn transcript(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<HashMap<String, String>>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let Query(query) = query.map_err(|e| ApiError::invalid_request(e.body_text()))?;
    let id = session_id(&id)?;
    let simulation = query
        .get("simulation")
        .ok_or_else(|| ApiError::invalid_request("query parameter `simulation` is required"))
        .and_then(|s| parse_index(s, "simulation"))?;
    let format = ExportFormat::parse(query.get("format").map_or("txt", String::as_str))?;
    let doc = state.engine.export(&id, simulation, format).await?;
    let disposition = format!("attachment; filename=\"{}\"", doc.file_name);
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(format.content_type())),
            (header::CONTENT_DISPOSITION, HeaderValue::from_str(&disposition).map_err(|_| ApiError::internal())?),
        ],
        doc.body,
    )
        .into_response())
}

async fn analysis_report(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let engine = state.engine.clone();
    let snapshot = tokio::task::spawn_blocking(move || engine.snapshot())
        .await
        .map_err(|_| ApiError::internal())??;
    let report = build_report(&snapshot);
    match query.get("format").map(String::as_str) {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("text") => Ok((
            [(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"))],
            render_text(&report),
        )
            .into_response()),
        Some(other) => Err(EngineError::UnsupportedFormat(other.to_owned()).into()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationBody {
    codes: Vec<String>,
}

async fn annotate(
    State(state): State<AppState>,
    UrlPath((session, simulation, turn)): UrlPath<(String, String, String)>,
    ApiJson(body): ApiJson<AnnotationBody>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = session_id(&session)?;
    let simulation = parse_index(&simulation, "simulation")?;
    let turn = parse_index(&turn, "turn")?;
    let codes = body
        .codes
        .iter()
        .map(|c| FailureMode::parse(c).ok_or_else(|| ApiError::invalid_request(format!("unknown failure code `{c}`"))))
        .collect::<ApiResult<Vec<_>>>()?;
    let record = state.engine.annotate(&id, simulation, turn, &codes).await?;
    Ok(Json(json!({
        "session_id": record.session_id,
        "simulation_index": record.simulation_index,
        "turn_index": record.turn_index,
        "failure_codes": record.failure_codes.unwrap_or_default(),
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatBody {
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    messages: Vec<ChatMessage>,
}

/// Raw pass-through to the configured model.
async fn chat(State(state): State<AppState>, ApiJson(body): ApiJson<ChatBody>) -> ApiResult<Json<serde_json::Value>> {
    if body.messages.is_empty() {
        return Err(ApiError::invalid_request("`messages` must contain at least one message"));
    }
    let gateway = state.engine.gateway();
    let bundle = PromptBundle { system_text: String::new(), messages: body.messages };
    let mut req = gateway.request(bundle, RequestKind::PatientTurn, None);
    if let Some(model) = body.model.filter(|m| !m.trim().is_empty()) {
        req.model_id = model;
    }
    let resp = gateway.complete(&req).await?;
    Ok(Json(json!({ "text": resp.text })))
}
