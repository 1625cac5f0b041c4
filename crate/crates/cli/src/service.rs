//! Stateless HTTP API used by scripts and the annotation UI.
//!
//! - `POST /v1/mask`: [`GenerateRequest`] JSON in, mask PNG out;
//! - `POST /v1/evaluate`: two masks (inline base64 PNG or file path) in,
//!   confusion counts and scores out;
//! - `GET /healthz`: `ok <version>`.
//!
//! Errors are JSON `{"error": {"code": ..., "message": ...}}`.

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use stemtrace_core::dataset::read_mask_png;
use stemtrace_core::metrics::{confusion, ConfusionCounts, Scores};
use stemtrace_core::BinaryMask;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::request::{render_png, GenerateRequest};
use crate::VERSION;

pub const ENV_ADDR: &str = "STEMTRACE_ADDR";
pub const ENV_ALLOWED_ORIGINS: &str = "STEMTRACE_ALLOWED_ORIGINS";
pub const ENV_MAX_BODY_BYTES: &str = "STEMTRACE_MAX_BODY_BYTES";

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_BODY_BYTES: usize = 10 * 1024 * 1024;

pub const HEADER_TAU: &str = "x-stemtrace-tau";
pub const HEADER_SAMPLES: &str = "x-stemtrace-samples-per-segment";
pub const HEADER_CLAMP: &str = "x-stemtrace-clamp-ends";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    /// Origins allowed cross-origin access; empty means same-origin only.
    pub allowed_origins: Vec<String>,
    pub max_body_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            addr: DEFAULT_ADDR.parse().unwrap(),
            allowed_origins: Vec::new(),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut cfg = Self::default();
        if let Some(addr) = lookup(ENV_ADDR) {
            cfg.addr = addr
                .parse()
                .map_err(|e| format!("{ENV_ADDR}={addr:?}: {e}"))?;
        }
        if let Some(origins) = lookup(ENV_ALLOWED_ORIGINS) {
            cfg.allowed_origins = origins
                .split(',')
                .map(str::trim)
                .filter(|o| !o.is_empty())
                .map(str::to_string)
                .collect();
        }
        if let Some(limit) = lookup(ENV_MAX_BODY_BYTES) {
            cfg.max_body_bytes = limit
                .parse()
                .map_err(|e| format!("{ENV_MAX_BODY_BYTES}={limit:?}: {e}"))?;
        }
        Ok(cfg)
    }
}

#[derive(Clone)]
struct AppState {
    max_body_bytes: usize,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = serde_json::json!({ "error": ErrorBody { code, message: message.into() } });
    (status, Json(body)).into_response()
}

fn require_json(headers: &HeaderMap) -> Result<(), Box<Response>> {
    let ok = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .is_some_and(|v| v.trim().eq_ignore_ascii_case("application/json"));
    if ok {
        Ok(())
    } else {
        Err(Box::new(error(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media_type",
            "request body must be sent as application/json",
        )))
    }
}

/// Content type, size limit and JSON decoding, in that order.
fn json_body<T: for<'de> Deserialize<'de>>(
    headers: &HeaderMap,
    body: Result<Bytes, BytesRejection>,
    limit: usize,
) -> Result<T, Box<Response>> {
    require_json(headers)?;
    let bytes = body.map_err(|rejection| {
        Box::new(if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
            error(
                StatusCode::PAYLOAD_TOO_LARGE,
                "body_too_large",
                format!("request body exceeds {limit} bytes"),
            )
        } else {
            error(rejection.status(), "unreadable_body", rejection.body_text())
        })
    })?;
    serde_json::from_slice(&bytes).map_err(|e| {
        Box::new(error(
            StatusCode::BAD_REQUEST,
            "invalid_json",
            format!("invalid request body: {e}"),
        ))
    })
}

async fn health() -> String {
    format!("ok {VERSION}")
}

async fn mask(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    let req: GenerateRequest = match json_body(&headers, body, state.max_body_bytes) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    let rendered = tokio::task::spawn_blocking(move || render_png(&req)).await;
    match rendered {
        Ok(Ok((png, info))) => {
            let mut h = HeaderMap::new();
            h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
            h.insert(HeaderName::from_static(HEADER_TAU), HeaderValue::from(info.tau));
            if let Ok(v) = HeaderValue::from_str(&info.sampling_header()) {
                h.insert(HeaderName::from_static(HEADER_SAMPLES), v);
            }
            h.insert(
                HeaderName::from_static(HEADER_CLAMP),
                HeaderValue::from_static(if info.clamp_ends { "true" } else { "false" }),
            );
            (StatusCode::OK, h, png).into_response()
        }
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e.code(), e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e.to_string()),
    }
}

/// A mask given inline or by server-side path.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRef {
    #[serde(default)]
    pub png_base64: Option<String>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub pred: MaskRef,
    pub gt: MaskRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

fn load_mask(which: &str, r: &MaskRef) -> Result<BinaryMask, (String, String)> {
    let bytes = match (&r.png_base64, &r.path) {
        (Some(b64), None) => base64::engine::general_purpose::STANDARD
            .decode(b64.trim())
            .map_err(|e| ("invalid_base64".into(), format!("{which}: {e}")))?,
        (None, Some(path)) => std::fs::read(path)
            .map_err(|e| ("unreadable_mask".into(), format!("{which}: {}: {e}", path.display())))?,
        _ => {
            return Err((
                "invalid_mask_ref".into(),
                format!("{which}: give exactly one of png_base64 or path"),
            ))
        }
    };
    read_mask_png(&bytes).map_err(|e| ("undecodable_mask".into(), format!("{which}: {e}")))
}

fn evaluate_pair(req: &EvaluateRequest) -> Result<EvaluateResponse, (String, String)> {
    let pred = load_mask("pred", &req.pred)?;
    let gt = load_mask("gt", &req.gt)?;
    let counts = confusion(&pred, &gt).map_err(|e| ("dimension_mismatch".into(), e.to_string()))?;
    Ok(EvaluateResponse {
        width: pred.width(),
        height: pred.height(),
        counts,
        scores: Scores::from_counts(&counts),
    })
}

async fn evaluate(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    let req: EvaluateRequest = match json_body(&headers, body, state.max_body_bytes) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    match tokio::task::spawn_blocking(move || evaluate_pair(&req)).await {
        Ok(Ok(resp)) => (StatusCode::OK, Json(resp)).into_response(),
        Ok(Err((code, message))) => error(StatusCode::BAD_REQUEST, &code, message),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e.to_string()),
    }
}

pub fn router(config: &ServiceConfig) -> Router {
    let state = AppState {
        max_body_bytes: config.max_body_bytes,
    };
    let app = Router::new()
        .route("/healthz", get(health))
        .route("/v1/mask", post(mask))
        .route("/v1/evaluate", post(evaluate))
        .layer(DefaultBodyLimit::max(config.max_body_bytes))
        .with_state(state);
    if config.allowed_origins.is_empty() {
        return app;
    }
    let origins: Vec<HeaderValue> = config
        .allowed_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    app.layer(
        CorsLayer::new()
            .allow_origin(AllowOrigin::list(origins))
            .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
            .allow_headers([header::CONTENT_TYPE])
            .expose_headers([
                HeaderName::from_static(HEADER_TAU),
                HeaderName::from_static(HEADER_SAMPLES),
                HeaderName::from_static(HEADER_CLAMP),
            ]),
    )
}

pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!("stemtrace {VERSION} listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(&config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
