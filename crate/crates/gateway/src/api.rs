//! HTTP routes. Handlers parse and authenticate, then hand the work to the
//! orchestrator on the blocking pool; per-user ordering is its job.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vitalchat_core::delivery::{ChatEnvelope, DeliveryError, LoopbackTransport};
use vitalchat_core::orchestrator::{BurstStatus, Orchestrator, OrchestratorError, UserProfile};
use vitalchat_core::wire::SensorBurst;

#[derive(Clone)]
pub struct AppState {
    pub orchestrator: Arc<Orchestrator>,
    pub loopback: Arc<LoopbackTransport>,
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }

    fn unauthorized(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::UNAUTHORIZED, msg.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let status = match &e {
            OrchestratorError::UnknownDevice(_) => StatusCode::UNAUTHORIZED,
            OrchestratorError::UnknownUser(_) => StatusCode::NOT_FOUND,
            OrchestratorError::DuplicatePhone(_) | OrchestratorError::DeviceInUse(_) => StatusCode::CONFLICT,
            OrchestratorError::Profile(_) | OrchestratorError::Delivery(DeliveryError::InvalidEnvelope(_)) => {
                StatusCode::BAD_REQUEST
            }
            OrchestratorError::Transcription(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs orchestrator work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn parse<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// Resolves `Authorization: Bearer <token>` to the user it was issued to.
fn authenticate(state: &AppState, headers: &HeaderMap) -> ApiResult<UserProfile> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
    state
        .orchestrator
        .store()
        .user_by_token(token)
        .ok_or_else(|| ApiError::unauthorized("unknown token"))
}

pub fn router(state: AppState, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/signup", post(signup))
        .route("/v1/sensors", post(sensors))
        .route("/v1/webhook", post(webhook))
        .route("/v1/media", post(upload_media))
        .route("/v1/media/{id}", get(get_media))
        .route("/v1/outbox", get(outbox))
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({"status": "ok", "users": state.orchestrator.store().users().len()}))
}

#[derive(Debug, Deserialize)]
struct SignupRequest {
    phone: String,
    passcode: String,
    #[serde(default)]
    device_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SignupResponse {
    pub phone: String,
    pub token: String,
    pub device_id: String,
    pub created: bool,
}

async fn signup(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<SignupResponse>)> {
    let req: SignupRequest = parse(&body)?;
    let orch = state.orchestrator.clone();
    let out = blocking(move || Ok(orch.register(&req.phone, &req.passcode, req.device_id.as_deref())?)).await?;
    let status = if out.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((
        status,
        Json(SignupResponse {
            phone: out.profile.phone,
            token: out.profile.token,
            device_id: out.profile.device_id,
            created: out.created,
        }),
    ))
}

/// One burst in an upload; the device id comes from the enclosing upload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UploadBurst {
    pub ts: u32,
    pub accel_x: Vec<i16>,
    pub accel_y: Vec<i16>,
    pub accel_z: Vec<i16>,
    pub ir: Vec<u16>,
    pub red: Vec<u16>,
    pub temp_wrist: Vec<u16>,
    pub temp_ambient: Vec<u16>,
    /// Set by the band when it flagged the window for immediate evaluation.
    #[serde(default)]
    pub anomaly: bool,
}

impl UploadBurst {
    pub fn from_burst(b: &SensorBurst, anomaly: bool) -> Self {
        UploadBurst {
            ts: b.ts,
            accel_x: b.accel_x.clone(),
            accel_y: b.accel_y.clone(),
            accel_z: b.accel_z.clone(),
            ir: b.ir.clone(),
            red: b.red.clone(),
            temp_wrist: b.temp_wrist.clone(),
            temp_ambient: b.temp_ambient.clone(),
            anomaly,
        }
    }

    fn into_burst(self, device_id: &str) -> SensorBurst {
        SensorBurst {
            ts: self.ts,
            device_id: device_id.to_owned(),
            accel_x: self.accel_x,
            accel_y: self.accel_y,
            accel_z: self.accel_z,
            ir: self.ir,
            red: self.red,
            temp_wrist: self.temp_wrist,
            temp_ambient: self.temp_ambient,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorUpload {
    pub device_id: String,
    pub bursts: Vec<UploadBurst>,
    #[serde(default)]
    pub uploaded_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub accepted: usize,
    pub duplicates: usize,
    pub paused: usize,
    pub urgent: usize,
}

async fn sensors(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Json<UploadReceipt>> {
    let upload: SensorUpload = parse(&body)?;
    let profile = authenticate(&state, &headers)?;
    if profile.device_id != upload.device_id {
        return Err(ApiError::unauthorized(format!("device {} is not paired with this token", upload.device_id)));
    }
    if upload.bursts.windows(2).any(|w| w[0].ts > w[1].ts) {
        return Err(ApiError::bad_request("bursts must be in time order"));
    }
    let bursts: Vec<(SensorBurst, bool)> = upload
        .bursts
        .into_iter()
        .map(|b| {
            let anomaly = b.anomaly;
            let burst = b.into_burst(&upload.device_id);
            burst.validate().map(|_| (burst, anomaly))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;

    let orch = state.orchestrator.clone();
    let receipt = blocking(move || {
        let mut r = UploadReceipt {
            accepted: 0,
            duplicates: 0,
            paused: 0,
            urgent: 0,
        };
        for (burst, anomaly) in &bursts {
            let out = orch.handle_sensor_burst(burst, *anomaly)?;
            match out.status {
                BurstStatus::Stored => r.accepted += 1,
                BurstStatus::Duplicate => r.duplicates += 1,
                BurstStatus::Paused => r.paused += 1,
            }
            if !out.delivered.is_empty() {
                r.urgent += 1;
            }
        }
        Ok(r)
    })
    .await?;
    Ok(Json(receipt))
}

const KINDS: [&str; 4] = ["text", "audio", "button", "image"];

async fn webhook(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let mut raw: Value = parse(&body)?;
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("body must be a JSON object"))?;
    match obj.get("kind").and_then(Value::as_str) {
        Some(k) if KINDS.contains(&k) => {}
        Some(k) => return Err(ApiError::bad_request(format!("unknown kind {k:?}"))),
        None => return Err(ApiError::bad_request("missing kind")),
    }
    obj.entry("direction").or_insert_with(|| json!("inbound"));
    let envelope: ChatEnvelope =
        serde_json::from_value(raw).map_err(|e| ApiError::bad_request(format!("malformed envelope: {e}")))?;

    let orch = state.orchestrator.clone();
    let out = blocking(move || Ok(orch.handle_user_message(&envelope)?)).await?;
    Ok(Json(json!({
        "handled": out.handled,
        "tier": out.tier,
        "replies": out.delivered.len(),
    })))
}

async fn get_media(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.orchestrator.media().get(&id) {
        Some(obj) => ([(header::CONTENT_TYPE, obj.content_type)], obj.bytes).into_response(),
        None => ApiError(StatusCode::NOT_FOUND, "no such media".into()).into_response(),
    }
}

/// Stores a clip (e.g. a voice note) so a webhook envelope can reference it.
async fn upload_media(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    authenticate(&state, &headers)?;
    if body.is_empty() {
        return Err(ApiError::bad_request("empty media body"));
    }
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/octet-stream")
        .to_owned();
    let id = state
        .orchestrator
        .media()
        .put(&content_type, body.to_vec())
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

#[derive(Debug, Deserialize)]
struct OutboxQuery {
    #[serde(default)]
    cursor: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    100
}

/// Outbound messages for the token's user at global positions >= `cursor`.
async fn outbox(State(state): State<AppState>, headers: HeaderMap, Query(q): Query<OutboxQuery>) -> ApiResult<Response> {
    let profile = authenticate(&state, &headers)?;
    let page = state.loopback.outbox(q.cursor, Some(&profile.phone), q.limit.clamp(1, 500));
    Ok(Json(page).into_response())
}
