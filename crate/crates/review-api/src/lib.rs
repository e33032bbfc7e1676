//! JSON API over the final pairs: stratified samples for reviewers, verdict
//! submission and the per-stratum evaluation report.
//!
//! ```text
//! GET  /api/sample?per_stratum=N&seed=S   -> ReviewItem[]
//! GET  /api/pair/{pair_id}                -> ReviewItem
//! POST /api/pair/{pair_id}/verdict        -> Verdict
//! GET  /api/report                        -> ReportRow[] (or CSV with Accept: text/csv)
//! ```

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;
use tower_http::services::ServeDir;

use pplink_core::pipeline::{files, read_jsonl, Context, PipelineError, Stage};
use pplink_core::review::{
    evaluation_report, report_csv, stratified_sample, Classification, ReviewItem, Verdict, VerdictError, VerdictStore,
};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Verdicts(#[from] VerdictError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Review items plus the verdict journal. Items are read once at start-up.
pub struct AppState {
    items: Vec<ReviewItem>,
    by_id: HashMap<String, usize>,
    verdicts: VerdictStore,
    default_seed: u64,
}

impl AppState {
    pub fn new(items: Vec<ReviewItem>, verdicts: VerdictStore, default_seed: u64) -> Self {
        let by_id = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.pair_id.clone(), i))
            .collect();
        Self {
            items,
            by_id,
            verdicts,
            default_seed,
        }
    }

    /// Loads `review_items.jsonl` from the stage directory and opens the
    /// configured verdict journal.
    pub fn from_context(ctx: &Context) -> Result<Self, ServeError> {
        let items: Vec<ReviewItem> = read_jsonl(Stage::Report, ctx.path(files::REVIEW_ITEMS))?;
        let verdicts = VerdictStore::open(&ctx.stage_path(&ctx.config.paths.verdicts))?;
        Ok(Self::new(items, verdicts, ctx.config.seed))
    }

    pub fn items(&self) -> &[ReviewItem] {
        &self.items
    }

    pub fn verdicts(&self) -> &VerdictStore {
        &self.verdicts
    }

    fn item(&self, pair_id: &str) -> Option<&ReviewItem> {
        self.by_id.get(pair_id).map(|&i| &self.items[i])
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/sample", get(sample))
        .route("/api/pair/{pair_id}", get(pair))
        .route("/api/pair/{pair_id}/verdict", post(verdict))
        .route("/api/report", get(report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Deserialize)]
struct SampleQuery {
    per_stratum: Option<usize>,
    seed: Option<u64>,
}

async fn sample(State(state): State<Shared>, Query(q): Query<SampleQuery>) -> Response {
    let Some(per_stratum) = q.per_stratum else {
        return error(StatusCode::BAD_REQUEST, "per_stratum is required");
    };
    let seed = q.seed.unwrap_or(state.default_seed);
    Json(stratified_sample(&state.items, per_stratum, seed)).into_response()
}

async fn pair(State(state): State<Shared>, UrlPath(pair_id): UrlPath<String>) -> Response {
    match state.item(&pair_id) {
        Some(item) => Json(item).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown pair {pair_id}")),
    }
}

#[derive(Deserialize)]
struct VerdictBody {
    classification: String,
    reviewer_id: String,
}

async fn verdict(State(state): State<Shared>, UrlPath(pair_id): UrlPath<String>, body: String) -> Response {
    if state.item(&pair_id).is_none() {
        return error(StatusCode::NOT_FOUND, format!("unknown pair {pair_id}"));
    }
    let body: VerdictBody = match serde_json::from_str(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("bad verdict body: {e}")),
    };
    let classification: Classification = match body.classification.parse() {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    if body.reviewer_id.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "reviewer_id is empty");
    }
    let v = Verdict {
        pair_id,
        classification,
        reviewer_id: body.reviewer_id,
        timestamp: Utc::now(),
    };
    match state.verdicts.submit(v) {
        Ok(stored) => Json(stored).into_response(),
        Err(e) => {
            log::error!("{e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

async fn report(State(state): State<Shared>, headers: HeaderMap) -> Response {
    let rows = evaluation_report(&state.verdicts.verdicts(), &state.items);
    let wants_csv = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|a| a.contains("text/csv"));
    if wants_csv {
        ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], report_csv(&rows)).into_response()
    } else {
        Json(rows).into_response()
    }
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, bind: &str, static_dir: Option<PathBuf>) -> Result<(), ServeError> {
    let addr: SocketAddr = bind.parse().map_err(|e| ServeError::Bind {
        addr: bind.to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, e),
    })?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: bind.to_string(),
            source,
        })?;
    log::info!("review API listening on http://{}", listener.local_addr()?);
    let app = router(Arc::new(state), static_dir.as_deref());
    axum::serve(listener, app).await?;
    Ok(())
}

/// Blocking wrapper around [`serve`] for callers without a runtime.
pub fn serve_blocking(ctx: &Context) -> Result<(), ServeError> {
    let state = AppState::from_context(ctx)?;
    let static_dir = ctx.config.serve.static_dir.as_ref().map(|d| ctx.config.input(d));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(state, &ctx.config.serve.bind, static_dir))
}
