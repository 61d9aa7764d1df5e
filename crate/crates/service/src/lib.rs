//! HTTP front end for the forecast engine.
//!
//! Routes:
//! - `POST /api/v1/forecast`: scenario JSON in, report JSON out;
//! - `POST /api/v1/compare`: `{"scenarios": [...]}` in, reports plus a ranking out;
//! - `GET /healthz`.
//!
//! Every request runs on its own engine instance; nothing is shared between
//! requests except immutable configuration.

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use heartcast_core::forecast::Report;
use heartcast_core::{run_forecast_with, EngineOptions, Error, RelaxationStep, Scenario};
use serde::Serialize;
use serde_json::Value;
use tower_http::cors::CorsLayer;

pub const BODY_LIMIT_BYTES: usize = 1 << 20;
pub const MAX_COMPARE_SCENARIOS: usize = 8;

#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub engine: EngineOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxation_log: Option<Vec<RelaxationStep>>,
    #[serde(skip)]
    status: StatusCode,
}

impl ApiError {
    fn invalid(message: impl Into<String>, field_path: Option<String>) -> Self {
        ApiError {
            code: "invalid_scenario",
            message: message.into(),
            field_path,
            relaxation_log: None,
            status: StatusCode::BAD_REQUEST,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            code: "internal",
            message: message.into(),
            field_path: None,
            relaxation_log: None,
            status: StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Maps an engine error; `prefix` locates the scenario inside the request.
    fn from_engine(e: Error, prefix: Option<&str>) -> Self {
        let e = match prefix {
            Some(p) => e.with_path_prefix(p),
            None => e,
        };
        match e {
            Error::Validation { ref field_path, .. } => {
                let path = (!field_path.is_empty()).then(|| field_path.clone());
                ApiError::invalid(e.to_string(), path)
            }
            Error::Ingestion { .. } | Error::Io { .. } => {
                ApiError::invalid(e.to_string(), prefix.map(str::to_string))
            }
            Error::InsufficientData {
                ref relaxation_log, ..
            } => ApiError {
                code: "insufficient_data",
                relaxation_log: Some(relaxation_log.clone()),
                message: e.to_string(),
                field_path: prefix.map(str::to_string),
                status: StatusCode::UNPROCESSABLE_ENTITY,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/forecast", post(forecast))
        .route("/api/v1/compare", post(compare))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT_BYTES))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn healthz() -> Json<Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn not_found() -> impl IntoResponse {
    (StatusCode::NOT_FOUND, "not found")
}

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("malformed JSON: {e}"), None))
}

async fn run(state: &AppState, scenario: Scenario, prefix: Option<&str>) -> Result<Report, ApiError> {
    let engine = state.engine.clone();
    tokio::task::spawn_blocking(move || run_forecast_with(&scenario, &engine))
        .await
        .map_err(|e| ApiError::internal(format!("engine task failed: {e}")))?
        .map_err(|e| ApiError::from_engine(e, prefix))
}

async fn forecast(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let value = parse_body(&body)?;
    let scenario = Scenario::from_json_value(value).map_err(|e| ApiError::from_engine(e, None))?;
    let report = run(&state, scenario, None).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], report.to_json()).into_response())
}

#[derive(Debug, Serialize)]
struct CompareResponse {
    reports: Vec<Report>,
    ranking: Vec<usize>,
}

/// Indices ordered by best option value, highest first; ties keep input order.
pub fn rank_reports(reports: &[Report]) -> Vec<usize> {
    let best: Vec<f64> = reports
        .iter()
        .map(|r| r.options.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| best[b].total_cmp(&best[a]));
    order
}

async fn compare(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let value = parse_body(&body)?;
    let Value::Object(mut obj) = value else {
        return Err(ApiError::invalid("expected an object with a `scenarios` array", None));
    };
    if let Some(extra) = obj.keys().find(|k| k.as_str() != "scenarios") {
        return Err(ApiError::invalid(format!("unknown field `{extra}`"), Some(extra.clone())));
    }
    let Some(Value::Array(items)) = obj.remove("scenarios") else {
        return Err(ApiError::invalid("`scenarios` must be an array", Some("scenarios".into())));
    };
    if items.is_empty() || items.len() > MAX_COMPARE_SCENARIOS {
        return Err(ApiError::invalid(
            format!("between 1 and {MAX_COMPARE_SCENARIOS} scenarios are accepted, got {}", items.len()),
            Some("scenarios".into()),
        ));
    }
    let mut scenarios = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let prefix = format!("scenarios[{i}]");
        scenarios.push(Scenario::from_json_value(item).map_err(|e| ApiError::from_engine(e, Some(&prefix)))?);
    }
    let mut reports = Vec::with_capacity(scenarios.len());
    for (i, s) in scenarios.into_iter().enumerate() {
        let prefix = format!("scenarios[{i}]");
        reports.push(run(&state, s, Some(&prefix)).await?);
    }
    let ranking = rank_reports(&reports);
    let body = serde_json::to_string_pretty(&CompareResponse { reports, ranking })
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}
