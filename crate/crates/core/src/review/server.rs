//! JSON review API. Handlers hold no state between requests; every write to
//! a campaign goes through that campaign's mutex.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use super::ops::{agreement, next_pending, progress, reconcile, submit_verdict, ReconcileRequest, ReviewError};
use super::verdict::{FailureMode, Label, Verdict};
use crate::analytics::stats::StatsError;
use crate::store::{Store, StoreError};

#[derive(Clone)]
pub struct AppState {
    campaigns: Arc<BTreeMap<String, Arc<Mutex<Store>>>>,
}

impl AppState {
    pub fn new(stores: Vec<Store>) -> Self {
        let campaigns = stores
            .into_iter()
            .map(|s| (s.id().to_string(), Arc::new(Mutex::new(s))))
            .collect();
        AppState {
            campaigns: Arc::new(campaigns),
        }
    }

    fn campaign(&self, id: &str) -> Result<Arc<Mutex<Store>>, ApiError> {
        self.campaigns
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "not_found", format!("no campaign `{id}`")))
    }
}

pub struct ApiError(StatusCode, &'static str, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "message": self.2 }))).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let msg = e.to_string();
        let (status, kind) = match &e {
            ReviewError::Verdict(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_verdict"),
            ReviewError::Stats(StatsError::DegenerateMarginals { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "kappa_undefined"),
            ReviewError::Stats(_) => (StatusCode::UNPROCESSABLE_ENTITY, "statistics"),
            ReviewError::EmptyIntersection { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "empty_intersection"),
            ReviewError::NoVerdicts(_) => (StatusCode::CONFLICT, "no_verdicts"),
            ReviewError::NotDisagreement(_) => (StatusCode::CONFLICT, "not_a_disagreement"),
            ReviewError::Store(StoreError::NotFound(_)) => (StatusCode::NOT_FOUND, "not_found"),
            ReviewError::Store(StoreError::Phase(_)) => (StatusCode::CONFLICT, "phase"),
            ReviewError::Store(StoreError::Integrity(_)) => (StatusCode::CONFLICT, "integrity"),
            ReviewError::Store(StoreError::Verdict(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_verdict"),
            ReviewError::Store(StoreError::Validation(_)) => (StatusCode::BAD_REQUEST, "invalid_request"),
            ReviewError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store"),
        };
        ApiError(status, kind, msg)
    }
}

#[derive(Serialize)]
struct CampaignListing {
    id: String,
    phase: String,
    programs: usize,
    mutants: usize,
}

async fn list_campaigns(State(state): State<AppState>) -> Result<Json<Vec<CampaignListing>>, ApiError> {
    let mut out = Vec::new();
    for (id, store) in state.campaigns.iter() {
        let store = store.lock().expect("store lock");
        let c = store.campaign().map_err(ReviewError::from)?;
        out.push(CampaignListing {
            id: id.clone(),
            phase: c.phase.to_string(),
            programs: c.program_ids.len(),
            mutants: c.mutant_ids.len(),
        });
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
struct NextQuery {
    rater: String,
    #[serde(default)]
    blind: bool,
}

async fn next(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    let store = state.campaign(&id)?;
    let store = store.lock().expect("store lock");
    match next_pending(&store, &q.rater, q.blind)? {
        Some(item) => Ok(Json(item).into_response()),
        None => Ok(Json(json!({ "done": true })).into_response()),
    }
}

#[derive(Deserialize)]
struct VerdictBody {
    mutant_id: String,
    rater_id: String,
    label: Label,
    #[serde(default)]
    failure_mode: Option<FailureMode>,
    #[serde(default)]
    recognized_as_bug: bool,
    #[serde(default)]
    note: String,
}

async fn post_verdict(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<VerdictBody>,
) -> Result<Json<Verdict>, ApiError> {
    let store = state.campaign(&id)?;
    let mut store = store.lock().expect("store lock");
    let mut v = Verdict::new(body.mutant_id, body.rater_id, body.label);
    v.failure_mode = body.failure_mode;
    v.recognized_as_bug = body.recognized_as_bug;
    v.note = body.note;
    Ok(Json(submit_verdict(&mut store, v)?))
}

#[derive(Deserialize)]
struct AgreementQuery {
    a: String,
    b: String,
}

async fn get_agreement(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<AgreementQuery>,
) -> Result<Response, ApiError> {
    let store = state.campaign(&id)?;
    let store = store.lock().expect("store lock");
    Ok(Json(agreement(&store, &q.a, &q.b)?).into_response())
}

async fn post_reconcile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<ReconcileRequest>,
) -> Result<Response, ApiError> {
    let store = state.campaign(&id)?;
    let mut store = store.lock().expect("store lock");
    Ok(Json(reconcile(&mut store, body)?).into_response())
}

async fn get_progress(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = state.campaign(&id)?;
    let store = store.lock().expect("store lock");
    Ok(Json(progress(&store)?).into_response())
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/campaigns", get(list_campaigns))
        .route("/campaigns/{id}/next", get(next))
        .route("/campaigns/{id}/verdicts", post(post_verdict))
        .route("/campaigns/{id}/agreement", get(get_agreement))
        .route("/campaigns/{id}/reconcile", post(post_reconcile))
        .route("/campaigns/{id}/progress", get(get_progress))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until the process is stopped. `on_bound` receives the
/// actual address (useful with port 0).
pub fn serve(
    stores: Vec<Store>,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        on_bound(listener.local_addr()?);
        axum::serve(listener, router(AppState::new(stores), static_dir)).await
    })
}
