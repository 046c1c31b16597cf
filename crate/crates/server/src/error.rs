use adlsim_core::export::ExportError;
use adlsim_core::gateway::GatewayError;
use adlsim_core::scenario::FieldError;
use adlsim_core::session::EngineError;
use adlsim_core::store::StoreError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Every code an error response may carry.
pub const ERROR_CODES: &[&str] = &[
    "unknown_session",
    "unknown_simulation",
    "unknown_turn",
    "not_found",
    "method_not_allowed",
    "wrong_phase",
    "simulation_active",
    "suggestions_required",
    "score_out_of_range",
    "empty_response",
    "invalid_scenario",
    "invalid_request",
    "unsupported_format",
    "unauthorized",
    "upstream_error",
    "upstream_unreachable",
    "malformed_response",
    "parse_retry_exhausted",
    "timeout",
    "credential_missing",
    "store_unavailable",
    "id_space_exhausted",
    "internal_error",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub status: StatusCode,
    /// Per-field problems for `invalid_scenario`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code));
        Self { code, message: message.into(), status, fields: Vec::new() }
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    }

    pub fn method_not_allowed() -> Self {
        Self::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed for this endpoint")
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid access token")
    }

    pub fn internal() -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", "internal server error")
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let (status, code) = match &e {
            GatewayError::Timeout => (StatusCode::GATEWAY_TIMEOUT, "timeout"),
            GatewayError::UpstreamError { .. } => (StatusCode::BAD_GATEWAY, "upstream_error"),
            GatewayError::Unreachable(_) => (StatusCode::BAD_GATEWAY, "upstream_unreachable"),
            GatewayError::MalformedResponse(_) => (StatusCode::BAD_GATEWAY, "malformed_response"),
            GatewayError::CredentialMissing => (StatusCode::SERVICE_UNAVAILABLE, "credential_missing"),
            GatewayError::InvalidRequest(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        let (status, code) = match e {
            EngineError::Gateway(g) => return g.into(),
            EngineError::InvalidScenario(errs) => {
                let mut err = Self::new(S::UNPROCESSABLE_ENTITY, "invalid_scenario", message);
                err.fields = errs.0;
                return err;
            }
            EngineError::UnknownSession(_) => (S::NOT_FOUND, "unknown_session"),
            EngineError::UnknownSimulation { .. } => (S::NOT_FOUND, "unknown_simulation"),
            EngineError::UnknownTurn { .. } => (S::NOT_FOUND, "unknown_turn"),
            EngineError::SimulationActive => (S::CONFLICT, "simulation_active"),
            EngineError::WrongPhase { .. } => (S::CONFLICT, "wrong_phase"),
            EngineError::SuggestionsRequired => (S::CONFLICT, "suggestions_required"),
            EngineError::ScoreOutOfRange(_) => (S::UNPROCESSABLE_ENTITY, "score_out_of_range"),
            EngineError::EmptyResponse => (S::UNPROCESSABLE_ENTITY, "empty_response"),
            EngineError::UnsupportedFormat(_) => (S::UNPROCESSABLE_ENTITY, "unsupported_format"),
            EngineError::ParseRetryExhausted(_) => (S::BAD_GATEWAY, "parse_retry_exhausted"),
            EngineError::Store(StoreError::InvalidRecord(_)) => (S::INTERNAL_SERVER_ERROR, "internal_error"),
            EngineError::Store(_) => (S::SERVICE_UNAVAILABLE, "store_unavailable"),
            EngineError::IdSpaceExhausted => (S::SERVICE_UNAVAILABLE, "id_space_exhausted"),
        };
        Self::new(status, code, message)
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        EngineError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::warn!(code = self.code, status = self.status.as_u16(), "request failed: {}", self.message);
        }
        (self.status, Json(&self)).into_response()
    }
}
