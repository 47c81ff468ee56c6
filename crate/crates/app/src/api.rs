//! Local HTTP service used by the group console.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cohort_core::influence::FlipProfile;
use cohort_core::{evaluate_partition, CancelToken, ModelError, ModelParams, NodeId, Partition, SocialNetwork, SolveError, SolveResult};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::solve::{run_solve, SolveOptions};
use crate::store::{Roster, RosterStore, StoreError};

#[derive(Clone)]
pub struct AppState {
    store: Arc<RosterStore>,
    workers: Arc<Semaphore>,
}

impl AppState {
    /// `workers` bounds how many solves run at once.
    pub fn new(store: RosterStore, workers: usize) -> Self {
        AppState {
            store: Arc::new(store),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    pub fn store(&self) -> &RosterStore {
        &self.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/rosters", post(create_roster).get(list_rosters))
        .route("/rosters/{id}", get(get_roster).put(update_roster).delete(delete_roster))
        .route("/rosters/{id}/solve", post(solve))
        .route("/rosters/{id}/evaluate", post(evaluate))
        .route("/rosters/{id}/results/{rid}", get(get_result))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(id) => {
                let mut err = ApiError::new(StatusCode::NOT_FOUND, "not_found", message);
                err.details = json!({ "id": id });
                err
            }
            StoreError::ConflictingUpdate { expected, found, .. } => {
                let mut err = ApiError::new(StatusCode::CONFLICT, "conflicting_update", message);
                err.details = json!({ "expected_version": expected, "current_version": found });
                err
            }
            StoreError::StorageFull => ApiError::new(StatusCode::INSUFFICIENT_STORAGE, "storage_full", message),
            StoreError::InvalidNetwork(v) => {
                let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_network", message);
                err.details = json!(v.iter().map(ToString::to_string).collect::<Vec<_>>());
                err
            }
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", message)
            }
        }
    }
}

impl From<SolveError> for ApiError {
    fn from(e: SolveError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        let (status, code) = match &e {
            SolveError::InfeasibleBounds { .. } => (S::UNPROCESSABLE_ENTITY, "infeasible_bounds"),
            SolveError::UnsatisfiableConstraints(_) => (S::CONFLICT, "unsatisfiable_constraints"),
            SolveError::InstanceTooLarge { .. } => (S::UNPROCESSABLE_ENTITY, "instance_too_large"),
            SolveError::NoFeasibleSplit => (S::UNPROCESSABLE_ENTITY, "no_feasible_split"),
            SolveError::TimeBudgetZero | SolveError::InvalidConfig(_) | SolveError::ConstraintsUnsupported(_) => {
                (S::BAD_REQUEST, "bad_request")
            }
            SolveError::Model(ModelError::InvalidPartition(_)) => (S::UNPROCESSABLE_ENTITY, "invalid_partition"),
            SolveError::Model(ModelError::InvalidNetwork(_)) => (S::UNPROCESSABLE_ENTITY, "invalid_network"),
            SolveError::Model(_) => (S::UNPROCESSABLE_ENTITY, "invalid_params"),
            SolveError::Cancelled => (S::SERVICE_UNAVAILABLE, "cancelled"),
            SolveError::Influence(_) => (S::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, message)
    }
}

/// JSON body extractor whose rejections use the service's error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(rejection) => Err(rejection_error(rejection)),
        }
    }
}

fn rejection_error(r: JsonRejection) -> ApiError {
    ApiError::bad_request(r.body_text())
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
struct CreateRoster {
    name: String,
    network: SocialNetwork,
}

#[derive(Debug, Deserialize)]
struct UpdateRoster {
    version: u64,
    name: Option<String>,
    network: SocialNetwork,
}

async fn create_roster(State(st): State<AppState>, Body(req): Body<CreateRoster>) -> Result<impl IntoResponse, ApiError> {
    let roster = st.store.create(&req.name, req.network)?;
    Ok((StatusCode::CREATED, Json(roster)))
}

async fn list_rosters(State(st): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(st.store.list()?))
}

async fn get_roster(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Roster>, ApiError> {
    Ok(Json(st.store.get(&id)?))
}

async fn update_roster(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<UpdateRoster>,
) -> Result<Json<Roster>, ApiError> {
    Ok(Json(st.store.update(&id, req.version, req.name.as_deref(), req.network)?))
}

async fn delete_roster(State(st): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    st.store.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Default, Deserialize)]
pub struct SolveRequest {
    #[serde(flatten)]
    pub options: SolveOptions,
    /// Participants missing today; they are left out of this solve only.
    #[serde(default)]
    pub absent: Vec<NodeId>,
    /// With absentees, everyone else stays in the group they had in the
    /// roster's latest result unless this is set.
    #[serde(default)]
    pub reoptimize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResponse {
    pub result_id: String,
    pub result: SolveResult,
    pub deviancy_warning: bool,
}

/// Cancels the solve if the request future is dropped (client went away).
struct CancelOnDrop(CancelToken);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.cancel();
    }
}

async fn solve(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<SolveRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let roster = st.store.get(&id)?;
    let mut net = roster.network.clone();
    let mut opts = req.options;
    for node in &req.absent {
        if net.node(node).is_none() {
            let mut err = ApiError::bad_request(format!("absent participant {node} is not on the roster"));
            err.details = json!({ "node": node });
            return Err(err);
        }
        net = net.without_node(node);
        opts.constraints = opts.constraints.without_node(node);
    }
    if !req.absent.is_empty() && !req.reoptimize {
        if let Some(last) = roster.history.last() {
            let previous = st.store.get_result(&id, &last.result_id)?.result.partition;
            for node in &net.nodes {
                if let Some(g) = previous.group_of(&node.id) {
                    opts.constraints.pinned.entry(node.id.clone()).or_insert(g);
                }
            }
        }
    }
    let _permit = st.workers.acquire().await.expect("semaphore is never closed");
    let token = CancelToken::new();
    let _guard = CancelOnDrop(token.clone());
    let run_opts = opts.clone();
    let result = tokio::task::spawn_blocking(move || run_solve(&net, &run_opts, Some(token)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let stored = st.store.add_result(&id, roster.version, opts.constraints, result)?;
    Ok((
        StatusCode::CREATED,
        Json(SolveResponse {
            result_id: stored.id,
            deviancy_warning: stored.deviancy_warning,
            result: stored.result,
        }),
    ))
}

#[derive(Debug, Deserialize)]
struct EvaluateRequest {
    partition: Partition,
    #[serde(default)]
    params: ModelParams,
}

#[derive(Debug, Serialize)]
struct EvaluateResponse {
    expected_nonusers: f64,
    success: f64,
    flips: FlipProfile,
    deviancy_warning: bool,
}

async fn evaluate(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<EvaluateRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let roster = st.store.get(&id)?;
    let ev = evaluate_partition(&roster.network, &req.partition, &req.params)?;
    Ok(Json(EvaluateResponse {
        expected_nonusers: ev.expected_nonusers,
        success: ev.success,
        deviancy_warning: ev.success < 0.0,
        flips: ev.flips,
    }))
}

async fn get_result(
    State(st): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(st.store.get_result(&id, &rid)?))
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: AppState, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
