//! Annotation and review HTTP API.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/samples?status=pending\|done&annotator=<id>` | sample summaries |
//! | GET | `/api/samples/{id}` | sample metadata and image URLs |
//! | GET | `/api/samples/{id}/image/{k}` | screenshot `k` (0-based) |
//! | POST | `/api/samples/{id}/annotations` | 201 with the updated consensus |
//! | GET | `/api/samples/{id}/consensus` | consensus or `null` |
//! | GET | `/api/runs` | run ids |
//! | GET | `/api/runs/{id}/failures?unanimous=true` | failure queue |
//! | GET, POST | `/api/runs/{id}/reviews` | reviewer verdicts |
//! | GET | `/api/catalog` | driver catalog |
//! | GET | `/api/rubric` | rubric text |
//!
//! Errors are `{"error": <class>, "message": <text>}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::consensus::{ground_truth_table, ConsensusLabel, ConsensusRule, Driver};
use crate::corpus::{AnnotationSubmission, Category, CorpusError, Review, ReviewVerdict, Sample, Store};
use crate::harness::{HarnessConfig, HarnessError};
use crate::report::{failure_queue, FailureCase};

/// Header carrying the shared token in LAN mode.
pub const TOKEN_HEADER: &str = "x-layoutjudge-token";

pub const DEFAULT_RUBRIC: &str = "Judge the page as a shopper would on first sight. \
Label it Complex if it feels visually overwhelming or hard to scan, otherwise Not Complex. \
When Complex, tick every driver that contributed.";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceOptions {
    pub addr: SocketAddr,
    /// Required in the token header when set.
    pub token: Option<String>,
    pub ui_dir: Option<PathBuf>,
    pub rubric: String,
    pub consensus_quorum: f64,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8787)),
            token: None,
            ui_dir: None,
            rubric: DEFAULT_RUBRIC.into(),
            consensus_quorum: 0.5,
        }
    }
}

impl ServiceOptions {
    pub fn from_config(cfg: &HarnessConfig) -> Result<Self, HarnessError> {
        let s = &cfg.serve;
        let token = if s.lan {
            match std::env::var(&s.token_env) {
                Ok(t) if !t.trim().is_empty() => Some(t),
                _ => {
                    return Err(HarnessError::Config(format!(
                        "LAN mode needs a shared token in the `{}` environment variable",
                        s.token_env
                    )))
                }
            }
        } else {
            None
        };
        let ip = if s.lan { [0, 0, 0, 0] } else { [127, 0, 0, 1] };
        let rubric = match &s.rubric {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| HarnessError::Config(format!("rubric {}: {e}", p.display())))?,
            None => DEFAULT_RUBRIC.into(),
        };
        Ok(Self {
            addr: SocketAddr::from((ip, s.port)),
            token,
            ui_dir: s.ui_dir.clone(),
            rubric,
            consensus_quorum: cfg.consensus_quorum,
        })
    }
}

struct AppState {
    store: RwLock<Store>,
    options: ServiceOptions,
}

type Shared = Arc<AppState>;

/// JSON error response.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    class: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, class: &'static str, message: impl Into<String>) -> Self {
        Self { status, class, message: message.into() }
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let status = match &e {
            CorpusError::UnknownSample(_) | CorpusError::UnknownRun(_) => StatusCode::NOT_FOUND,
            CorpusError::DuplicateAnnotation { .. } => StatusCode::CONFLICT,
            CorpusError::DriversWithoutComplex { .. }
            | CorpusError::UnknownDriver(_)
            | CorpusError::SampleMismatch { .. }
            | CorpusError::InvalidAnnotation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.class(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.class, "message": self.message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn read(state: &AppState) -> std::sync::RwLockReadGuard<'_, Store> {
    state.store.read().unwrap_or_else(|p| p.into_inner())
}

/// Sample entry of `GET /api/samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub id: String,
    pub query: String,
    pub category: Category,
    pub screenshot_count: usize,
    pub annotation_count: usize,
    /// Whether the `annotator` from the query has annotated this sample.
    pub annotated_by_annotator: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDetail {
    pub sample: Sample,
    pub image_urls: Vec<String>,
    pub annotation_count: usize,
    pub consensus: Option<ConsensusLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCreated {
    pub annotation: crate::corpus::Annotation,
    pub consensus: ConsensusLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub driver: Driver,
    pub name: String,
    pub description: String,
    pub question: u8,
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    status: Option<String>,
    annotator: Option<String>,
}

#[derive(Debug, Deserialize)]
struct FailureQuery {
    #[serde(default)]
    unanimous: bool,
}

#[derive(Debug, Deserialize)]
struct ReviewSubmission {
    sample_id: String,
    reviewer_id: String,
    verdict: ReviewVerdict,
    #[serde(default)]
    note: Option<String>,
}

async fn list_samples(State(state): State<Shared>, Query(q): Query<SampleQuery>) -> ApiResult<Json<Vec<SampleSummary>>> {
    let store = read(&state);
    let pending = match q.status.as_deref() {
        None | Some("all") => None,
        Some("pending") => Some(true),
        Some("done") => Some(false),
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_query",
                format!("status `{other}` is not pending, done or all"),
            ))
        }
    };
    let rows = store
        .samples()
        .iter()
        .filter_map(|s| {
            let anns = store.annotations_for(&s.id);
            let mine = q.annotator.as_ref().map(|a| anns.iter().any(|x| &x.annotator_id == a));
            let done = mine.unwrap_or(!anns.is_empty());
            if pending.is_some_and(|p| p == done) {
                return None;
            }
            Some(SampleSummary {
                id: s.id.clone(),
                query: s.query.clone(),
                category: s.category,
                screenshot_count: s.screenshots.len(),
                annotation_count: anns.len(),
                annotated_by_annotator: mine,
            })
        })
        .collect();
    Ok(Json(rows))
}

async fn get_sample(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SampleDetail>> {
    let store = read(&state);
    let sample = store.sample(&id).ok_or_else(|| CorpusError::UnknownSample(id.clone()))?.clone();
    let image_urls = (0..sample.screenshots.len()).map(|k| format!("/api/samples/{id}/image/{k}")).collect();
    Ok(Json(SampleDetail {
        annotation_count: store.annotations_for(&id).len(),
        consensus: store.consensus(&id)?,
        image_urls,
        sample,
    }))
}

async fn get_image(State(state): State<Shared>, Path((id, k)): Path<(String, usize)>) -> ApiResult<Response> {
    let store = read(&state);
    let sample = store.sample(&id).ok_or_else(|| CorpusError::UnknownSample(id.clone()))?;
    let shot = sample.screenshots.get(k).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_image", format!("sample `{id}` has no screenshot {k}"))
    })?;
    let bytes = store.read_image(shot)?;
    Ok(([(header::CONTENT_TYPE, shot.media_type.mime())], bytes).into_response())
}

async fn post_annotation(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<AnnotationCreated>)> {
    let submission: AnnotationSubmission = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string()))?;
    let overwrite = submission.overwrite;
    let mut store = state.store.write().unwrap_or_else(|p| p.into_inner());
    if store.sample(&id).is_none() {
        return Err(CorpusError::UnknownSample(id).into());
    }
    let annotation = submission.into_annotation(&id, Utc::now())?;
    let annotation = store.store_annotation(annotation, overwrite)?;
    let consensus = store.consensus(&id)?.expect("just annotated");
    Ok((StatusCode::CREATED, Json(AnnotationCreated { annotation, consensus })))
}

async fn get_consensus(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Option<ConsensusLabel>>> {
    Ok(Json(read(&state).consensus(&id)?))
}

async fn list_runs(State(state): State<Shared>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(read(&state).run_ids()?))
}

async fn get_failures(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<FailureQuery>,
) -> ApiResult<Json<Vec<FailureCase>>> {
    let store = read(&state);
    let run = store.load_run(&id)?;
    let rule = ConsensusRule::new(state.options.consensus_quorum)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "config", e.to_string()))?;
    let truth = ground_truth_table(store.samples(), store.annotations(), rule, true)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "consensus", e.to_string()))?;
    Ok(Json(failure_queue(&run, &truth, store.samples(), q.unanimous)))
}

async fn get_reviews(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Vec<Review>>> {
    let store = read(&state);
    if !store.run_ids()?.contains(&id) {
        return Err(CorpusError::UnknownRun(id).into());
    }
    Ok(Json(store.reviews(&id)?))
}

async fn post_review(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Review>)> {
    let sub: ReviewSubmission = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string()))?;
    if sub.reviewer_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", "reviewer_id is empty"));
    }
    let store = state.store.write().unwrap_or_else(|p| p.into_inner());
    let run = store.load_run(&id)?;
    if run.record(&sub.sample_id).is_none() {
        return Err(CorpusError::UnknownSample(sub.sample_id).into());
    }
    let review = Review {
        sample_id: sub.sample_id,
        reviewer_id: sub.reviewer_id,
        verdict: sub.verdict,
        note: sub.note,
        submitted_at: Utc::now(),
    };
    store.add_review(&id, &review)?;
    Ok((StatusCode::CREATED, Json(review)))
}

/// The driver catalog in catalog order.
pub fn catalog() -> Vec<CatalogEntry> {
    Driver::CATALOG
        .iter()
        .map(|&d| CatalogEntry {
            driver: d,
            name: d.name().into(),
            description: d.description().into(),
            question: d.question(),
        })
        .collect()
}

async fn get_catalog() -> Json<Vec<CatalogEntry>> {
    Json(catalog())
}

async fn get_rubric(State(state): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({"text": state.options.rubric}))
}

async fn require_token(State(state): State<Shared>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = &state.options.token {
        let given = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", format!("missing or wrong {TOKEN_HEADER} header"))
                .into_response();
        }
    }
    next.run(req).await
}

/// The API router over `store`.
pub fn router(store: Store, options: ServiceOptions) -> Router {
    let ui_dir = options.ui_dir.clone();
    let state: Shared = Arc::new(AppState { store: RwLock::new(store), options });
    let api = Router::new()
        .route("/api/samples", get(list_samples))
        .route("/api/samples/{id}", get(get_sample))
        .route("/api/samples/{id}/image/{k}", get(get_image))
        .route("/api/samples/{id}/annotations", axum::routing::post(post_annotation))
        .route("/api/samples/{id}/consensus", get(get_consensus))
        .route("/api/runs", get(list_runs))
        .route("/api/runs/{id}/failures", get(get_failures))
        .route("/api/runs/{id}/reviews", get(get_reviews).post(post_review))
        .route("/api/catalog", get(get_catalog))
        .route("/api/rubric", get(get_rubric))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(store: Store, options: ServiceOptions) -> Result<(), HarnessError> {
    let addr = options.addr;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| HarnessError::Io { path: PathBuf::from(addr.to_string()), source })?;
    eprintln!("serving on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
    axum::serve(listener, router(store, options))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| HarnessError::Io { path: PathBuf::from(addr.to_string()), source })
}
