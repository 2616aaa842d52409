//! HTTP endpoints.
//!
//! * `GET /models?type=<base>&source=<lang>` lists registered models.
//! * `POST /translate` translates `text` (one sentence per line).
//! * `GET /healthz` reports liveness and the resident models.
//!
//! Errors are JSON objects with `code` and `message`, plus `allowed` for
//! unknown enum values, `limit` for oversize input and an opaque `error_id`
//! for internal failures (details go to the server log only).

use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lowmt_core::adapter::SCHEMA_VERSION;
use lowmt_core::backends::{self, BackendError, BaseModel, LoadedModel, ModelDescriptor, ModelKey, Registry, TrainingCategory, TranslationRequest};
use lowmt_core::{Direction, Lang};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::trace::TraceLayer;

use crate::config::ServerConfig;
use crate::manager::ModelManager;

pub type Manager = ModelManager<ModelKey, LoadedModel, BackendError>;

pub struct AppState {
    config: ServerConfig,
    registry: Arc<RwLock<Registry>>,
    manager: Manager,
}

impl AppState {
    pub fn new(config: ServerConfig, registry: Registry) -> Arc<Self> {
        Self::with_manager(config, registry, |m| m)
    }

    /// Like [`new`](Self::new), letting the caller adjust the manager (for
    /// example to attach an observer).
    pub fn with_manager(config: ServerConfig, registry: Registry, f: impl FnOnce(Manager) -> Manager) -> Arc<Self> {
        let registry = Arc::new(RwLock::new(registry));
        let reg = registry.clone();
        let manager = ModelManager::new(config.capacity, move |key: &ModelKey| {
            let descriptor = reg
                .read()
                .unwrap_or_else(|p| p.into_inner())
                .find(key)
                .cloned()
                .ok_or_else(|| BackendError::NotFound(key.to_string()))?;
            tracing::info!(model = %key, "loading model");
            backends::load(&descriptor)
        });
        Arc::new(Self {
            config,
            registry,
            manager: f(manager),
        })
    }

    pub fn manager(&self) -> &Manager {
        &self.manager
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// Re-reads the registry directory so newly registered models appear.
    fn refresh(&self) -> Result<(), ApiError> {
        let root = self.registry.read().unwrap_or_else(|p| p.into_inner()).root().to_path_buf();
        let fresh = Registry::open(&root).map_err(|e| ApiError::internal(&e))?;
        *self.registry.write().unwrap_or_else(|p| p.into_inner()) = fresh;
        Ok(())
    }

    fn find(&self, key: &ModelKey) -> Option<ModelDescriptor> {
        self.registry.read().unwrap_or_else(|p| p.into_inner()).find(key).cloned()
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    allowed: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    limit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            allowed: None,
            limit: None,
            error_id: None,
        }
    }

    fn bad_value(field: &'static str, value: &str, allowed: Vec<String>) -> Self {
        Self {
            allowed: Some(allowed),
            ..Self::new(StatusCode::BAD_REQUEST, "invalid_value", format!("unknown {field} `{value}`"))
        }
    }

    fn too_large(what: &str, limit: usize) -> Self {
        Self {
            limit: Some(limit),
            ..Self::new(StatusCode::PAYLOAD_TOO_LARGE, "input_too_large", format!("{what} exceeds the limit of {limit}"))
        }
    }

    /// Logs `err` under a fresh id and returns an error carrying only the id.
    fn internal(err: &dyn std::fmt::Display) -> Self {
        let id = uuid::Uuid::new_v4().to_string();
        tracing::error!(error_id = %id, error = %err, "request failed");
        Self {
            error_id: Some(id),
            ..Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", "translation failed")
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_type: BaseModel,
    pub training_category: TrainingCategory,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub display_name: String,
}

impl From<&ModelDescriptor> for ModelInfo {
    fn from(d: &ModelDescriptor) -> Self {
        Self {
            model_type: d.model_type,
            training_category: d.training_category,
            source_lang: d.direction.source,
            target_lang: d.direction.target,
            display_name: d.display_name.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelList {
    pub schema_version: u32,
    pub models: Vec<ModelInfo>,
}

#[derive(Debug, Deserialize)]
pub struct ModelQuery {
    #[serde(rename = "type")]
    pub model_type: Option<String>,
    pub source: Option<String>,
}

fn parse_base(s: &str) -> Result<BaseModel, ApiError> {
    s.parse()
        .map_err(|_| ApiError::bad_value("model_type", s, BaseModel::ALL.iter().map(|b| b.to_string()).collect()))
}

fn parse_lang(field: &'static str, s: &str) -> Result<Lang, ApiError> {
    s.parse()
        .map_err(|_| ApiError::bad_value(field, s, Lang::ALL.iter().map(|l| l.to_string()).collect()))
}

async fn list_models(State(state): State<Arc<AppState>>, Query(q): Query<ModelQuery>) -> Result<Json<ModelList>, ApiError> {
    let base = q.model_type.as_deref().filter(|s| !s.is_empty()).map(parse_base).transpose()?;
    let source = q.source.as_deref().filter(|s| !s.is_empty()).map(|s| parse_lang("source", s)).transpose()?;
    state.refresh()?;
    let registry = state.registry.read().unwrap_or_else(|p| p.into_inner());
    let models = registry.filter(base, source).into_iter().map(ModelInfo::from).collect();
    Ok(Json(ModelList {
        schema_version: SCHEMA_VERSION,
        models,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateBody {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub model_type: String,
    pub training_category: String,
    pub source_lang: String,
    pub target_lang: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranslateResponse {
    pub schema_version: u32,
    pub translation: String,
    pub model: ModelInfo,
    pub latency_ms: f64,
    /// Line indices where the model produced nothing and the input was echoed.
    pub copied: Vec<usize>,
}

impl TranslateBody {
    fn key(&self) -> Result<ModelKey, ApiError> {
        if let Some(v) = self.schema_version.filter(|v| *v != SCHEMA_VERSION) {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "unsupported_schema",
                format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})"),
            ));
        }
        let base = parse_base(&self.model_type)?;
        let category: TrainingCategory = self.training_category.parse().map_err(|_| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_value",
                format!(
                    "unknown training_category `{}`; expected baseline, ft or ft-syn-<h:h|1:k|custom>[-<base>]",
                    self.training_category
                ),
            )
        })?;
        let src = parse_lang("source_lang", &self.source_lang)?;
        let tgt = parse_lang("target_lang", &self.target_lang)?;
        let direction = Direction::new(src, tgt)
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "invalid_value", "source_lang and target_lang must differ"))?;
        Ok(ModelKey::new(base, category, direction))
    }
}

async fn translate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<TranslateResponse>, ApiError> {
    let started = Instant::now();
    let body: TranslateBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", format!("invalid request body: {e}")))?;
    let key = body.key()?;
    let chars = body.text.chars().count();
    if chars > state.config.max_input_chars {
        return Err(ApiError::too_large("text length", state.config.max_input_chars));
    }
    if body.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_text", "text is empty"));
    }
    let lines: Vec<String> = body.text.lines().map(str::to_string).collect();
    if lines.len() > state.config.max_batch {
        return Err(ApiError::too_large("line count", state.config.max_batch));
    }
    let descriptor = match state.find(&key) {
        Some(d) => d,
        None => {
            state.refresh()?;
            state.find(&key).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "model_not_found", format!("no model registered as {key}")))?
        }
    };

    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let model = worker.manager.acquire(&key)?;
        let mut model = model.lock().unwrap_or_else(|p| p.into_inner());
        let mut req = TranslationRequest::new(lines, key.direction);
        req.options = worker.config.decoding;
        model.translate_batch(&req)
    })
    .await
    .map_err(|e| ApiError::internal(&e))?;
    let result = match result {
        Ok(r) => r,
        Err(BackendError::NotFound(_)) => {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "model_not_found", format!("no model registered as {key}")));
        }
        Err(e) => return Err(ApiError::internal(&e)),
    };
    let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
    tracing::info!(model = %key, lines = result.sentences.len(), latency_ms, "translated");
    Ok(Json(TranslateResponse {
        schema_version: SCHEMA_VERSION,
        translation: result.sentences.join("\n"),
        model: ModelInfo::from(&descriptor),
        latency_ms,
        copied: result.copied,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub capacity: usize,
    pub resident: Vec<ModelKey>,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        capacity: state.manager.capacity(),
        resident: state.manager.resident(),
    })
}

fn cors(origins: &[String]) -> CorsLayer {
    let base = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    if origins.iter().any(|o| o == "*") {
        return base.allow_origin(AllowOrigin::any());
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
    base.allow_origin(list)
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors(&state.config.cors_origins);
    Router::new()
        .route("/models", get(list_models))
        .route("/translate", post(translate))
        .route("/healthz", get(healthz))
        .layer(TraceLayer::new_for_http())
        .layer(cors)
        .with_state(state)
}
