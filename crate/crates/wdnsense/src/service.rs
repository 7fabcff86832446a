//! HTTP facade over placement sessions and solve jobs.
//!
//! State lives in memory and is mirrored to a data directory
//! (`sessions/*.json`, `jobs/*.json`) before any response is sent, so a
//! restarted service picks up where it stopped. Solves run as jobs on a
//! bounded worker pool and are polled by id.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use wdnsense_core::anneal::BRUTE_FORCE_LIMIT;
use wdnsense_core::placement::{build_placement_qubo, solve_placement};
use wdnsense_core::{CentralityMap, MarkStatus, Network, Pins, PlacementError, Session};

use crate::error::{Error, Result};
use crate::files;
use crate::formats::{
    self, CentralityDoc, FormatError, HistogramDoc, HyperparamsDoc, NetworkDoc, ReportDoc, ResultDoc, ScheduleDoc,
    SessionDoc, SCHEMA_VERSION,
};
use crate::parallel;
use crate::pipeline::SolverKind;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub data_dir: PathBuf,
    /// Concurrent jobs; defaults to the available parallelism.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Pending, JobStatus::Running)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Solve,
    Replan,
}

/// Everything a job needs to run, captured at submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmittedDoc {
    pub hyperparams: HyperparamsDoc,
    #[serde(default)]
    pub schedule: ScheduleDoc,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub installed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobDoc {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub submitted: SubmittedDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportDoc>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Deserialize)]
struct SolveRequest {
    hyperparams: HyperparamsDoc,
    #[serde(default)]
    schedule: ScheduleDoc,
    #[serde(default)]
    solver: SolverKind,
    #[serde(default)]
    exact_limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct CreateSessionRequest {
    hyperparams: HyperparamsDoc,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StatusArg {
    Installed,
    Rejected,
}

#[derive(Debug, Deserialize)]
struct MarkRequest {
    node: String,
    status: StatusArg,
}

#[derive(Debug, Deserialize)]
struct UnmarkRequest {
    node: String,
}

#[derive(Debug, Default, Deserialize)]
struct ReplanRequest {
    #[serde(default)]
    schedule: ScheduleDoc,
    #[serde(default)]
    solver: SolverKind,
    #[serde(default)]
    exact_limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct HistogramQuery {
    bins: Option<usize>,
}

const DEFAULT_BINS: usize = 20;

/// Error response: `{"error": {"status", "message", "field"?}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("no {what} `{id}`"))
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = serde_json::json!({ "status": self.status.as_u16(), "message": self.message });
        if let Some(field) = self.field {
            body["field"] = serde_json::Value::String(field);
        }
        (self.status, Json(serde_json::json!({ "error": body }))).into_response()
    }
}

impl From<FormatError> for ApiError {
    fn from(err: FormatError) -> Self {
        match err {
            FormatError::Field { path, message } => {
                ApiError::new(StatusCode::BAD_REQUEST, format!("field `{path}`: {message}")).field(path)
            }
            FormatError::Placement(e) => e.into(),
            other => ApiError::new(StatusCode::BAD_REQUEST, other.to_string()),
        }
    }
}

impl From<PlacementError> for ApiError {
    fn from(err: PlacementError) -> Self {
        let status = match &err {
            PlacementError::MarkConflict { .. } => StatusCode::CONFLICT,
            PlacementError::TooManyInstalled { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            PlacementError::UnknownNode(_) => return ApiError::new(StatusCode::BAD_REQUEST, err.to_string()).field("node"),
            PlacementError::InvalidHyperparams { .. } | PlacementError::SensorCount { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, err.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        match err {
            Error::Format(e) => e.into(),
            Error::Placement(e) => e.into(),
            other => ApiError::internal(other),
        }
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn parse_body<T: serde::de::DeserializeOwned>(body: &str) -> ApiResult<T> {
    Ok(formats::parse(body, true)?)
}

struct Slot {
    session: Session,
    /// Replan job currently pending or running; marks wait for it.
    active_job: Option<String>,
}

struct Shared {
    network: Network,
    weights: CentralityMap,
    network_doc: NetworkDoc,
    centrality_doc: CentralityDoc,
    data_dir: PathBuf,
    sessions: Mutex<BTreeMap<String, Arc<tokio::sync::Mutex<Slot>>>>,
    jobs: Mutex<BTreeMap<String, JobDoc>>,
    workers: Arc<tokio::sync::Semaphore>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

fn numeric_suffix(id: &str, prefix: char) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

fn list_docs(dir: &FsPath) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    match std::fs::read_dir(dir) {
        Ok(entries) => {
            for entry in entries {
                let path = entry
                    .map_err(|source| Error::Io {
                        path: dir.to_path_buf(),
                        source,
                    })?
                    .path();
                if path.extension().is_some_and(|e| e == "json") {
                    paths.push(path);
                }
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(source) => {
            return Err(Error::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
    }
    paths.sort();
    Ok(paths)
}

impl AppState {
    /// Loads persisted sessions and jobs from the data directory. Jobs that
    /// were running when the service stopped are marked failed; pending ones
    /// are queued again. Must be called inside a tokio runtime.
    pub async fn open(network: Network, weights: CentralityMap, config: ServeConfig) -> Result<AppState> {
        let nodes = parallel::tailored_centrality(&network)?.1;
        let centrality_doc = CentralityDoc::new(&weights, Some(nodes));
        let workers = config
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1);

        let mut sessions = BTreeMap::new();
        let mut max_session = 0;
        for path in list_docs(&config.data_dir.join("sessions"))? {
            let doc: SessionDoc = files::read_doc(&path, true)?;
            let session = files::in_file(&path, doc.into_session(&network))?;
            max_session = max_session.max(numeric_suffix(&session.id, 's').unwrap_or(0));
            let slot = Slot {
                session,
                active_job: None,
            };
            sessions.insert(slot.session.id.clone(), Arc::new(tokio::sync::Mutex::new(slot)));
        }
        let mut jobs = BTreeMap::new();
        let mut max_job = 0;
        for path in list_docs(&config.data_dir.join("jobs"))? {
            let job: JobDoc = files::read_doc(&path, true)?;
            max_job = max_job.max(numeric_suffix(&job.id, 'j').unwrap_or(0));
            jobs.insert(job.id.clone(), job);
        }

        let state = AppState {
            shared: Arc::new(Shared {
                network_doc: NetworkDoc::from_network(&network),
                network,
                weights,
                centrality_doc,
                data_dir: config.data_dir,
                sessions: Mutex::new(sessions),
                jobs: Mutex::new(BTreeMap::new()),
                workers: Arc::new(tokio::sync::Semaphore::new(workers)),
                next_session: AtomicU64::new(max_session + 1),
                next_job: AtomicU64::new(max_job + 1),
            }),
        };

        let mut requeue = Vec::new();
        for (id, mut job) in jobs {
            if job.status == JobStatus::Running {
                job.status = JobStatus::Failed;
                job.error = Some("interrupted by a service restart".to_string());
                state.save_job(&job)?;
            }
            if job.status == JobStatus::Pending {
                if let Some(slot) = job.session.as_ref().and_then(|s| state.slot(s).ok()) {
                    slot.lock().await.active_job = Some(id.clone());
                }
                requeue.push(id.clone());
            }
            state.shared.jobs.lock().unwrap().insert(id, job);
        }
        for id in requeue {
            state.spawn_job(id);
        }
        Ok(state)
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/network", get(get_network))
            .route("/centrality", get(get_centrality))
            .route("/solve", post(post_solve))
            .route("/jobs/{id}", get(get_job))
            .route("/results/{id}", get(get_result))
            .route("/results/{id}/histogram", get(get_histogram))
            .route("/sessions", post(create_session))
            .route("/sessions/{id}", get(get_session))
            .route("/sessions/{id}/mark", post(mark))
            .route("/sessions/{id}/unmark", post(unmark))
            .route("/sessions/{id}/replan", post(replan))
            .with_state(self.clone())
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.shared.data_dir.join("sessions").join(format!("{id}.json"))
    }

    fn job_path(&self, id: &str) -> PathBuf {
        self.shared.data_dir.join("jobs").join(format!("{id}.json"))
    }

    fn save_session(&self, session: &Session) -> Result<()> {
        files::write_doc(&self.session_path(&session.id), &SessionDoc::new(session))
    }

    fn save_job(&self, job: &JobDoc) -> Result<()> {
        files::write_doc(&self.job_path(&job.id), job)
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<Slot>>> {
        self.shared
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    fn job(&self, id: &str) -> ApiResult<JobDoc> {
        self.shared
            .jobs
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }

    fn check_sensors(&self, hp: &HyperparamsDoc) -> ApiResult<()> {
        let nodes = self.shared.network.node_count();
        if hp.sensors == 0 || hp.sensors > nodes {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("sensors must be between 1 and the {nodes} network nodes"),
            )
            .field("hyperparams.sensors"));
        }
        Ok(())
    }

    /// Persists a new pending job and queues it.
    fn submit(&self, kind: JobKind, session: Option<String>, submitted: SubmittedDoc) -> ApiResult<JobDoc> {
        let id = format!("j{}", self.shared.next_job.fetch_add(1, Ordering::SeqCst));
        let job = JobDoc {
            schema_version: SCHEMA_VERSION,
            id: id.clone(),
            kind,
            status: JobStatus::Pending,
            session,
            submitted,
            error: None,
            result: None,
            report: None,
        };
        self.save_job(&job)?;
        self.shared.jobs.lock().unwrap().insert(id.clone(), job.clone());
        self.spawn_job(id);
        Ok(job)
    }

    /// Applies a status transition and persists it.
    fn advance(&self, id: &str, update: impl FnOnce(&mut JobDoc)) -> Result<JobDoc> {
        let mut jobs = self.shared.jobs.lock().unwrap();
        let current = jobs.get_mut(id).expect("queued jobs stay registered");
        let mut next = current.clone();
        update(&mut next);
        assert!(
            current.status.can_become(next.status),
            "job {id}: {:?} -> {:?}",
            current.status,
            next.status
        );
        self.save_job(&next)?;
        *current = next.clone();
        Ok(next)
    }

    fn spawn_job(&self, id: String) {
        let state = self.clone();
        tokio::spawn(async move {
            let _permit = state.shared.workers.clone().acquire_owned().await.expect("pool stays open");
            let job = match state.advance(&id, |j| j.status = JobStatus::Running) {
                Ok(job) => job,
                Err(e) => {
                    eprintln!("job {id}: {e}");
                    return;
                }
            };
            let worker = state.clone();
            let outcome = tokio::task::spawn_blocking(move || worker.execute(&job))
                .await
                .unwrap_or_else(|e| Err(format!("job panicked: {e}")));
            state.finish(&id, outcome).await;
        });
    }

    fn execute(&self, job: &JobDoc) -> std::result::Result<(ResultDoc, ReportDoc), String> {
        let submitted = &job.submitted;
        let hp = submitted.hyperparams.to_hyperparams().map_err(|e| e.to_string())?;
        let config = submitted.schedule.to_config().map_err(|e| e.to_string())?;
        let solver = submitted
            .solver
            .build(config, submitted.exact_limit.unwrap_or(BRUTE_FORCE_LIMIT));
        let net = &self.shared.network;
        let weights = &self.shared.weights;
        let pins = Pins {
            installed: submitted.installed.iter().cloned().collect(),
            rejected: submitted.rejected.iter().cloned().collect(),
        };
        let (report, result) = match job.kind {
            JobKind::Solve => solve_placement(net, weights, &hp, solver.as_ref(), None),
            JobKind::Replan => {
                let mut session = Session {
                    id: job.session.clone().unwrap_or_default(),
                    pins: pins.clone(),
                    hyperparams: hp,
                    last_report: None,
                };
                session.replan(net, weights, solver.as_ref())
            }
        }
        .map_err(|e| e.to_string())?;
        let model = build_placement_qubo(net, weights, &hp, Some(&pins)).map_err(|e| e.to_string())?;
        Ok((
            ResultDoc::new(solver.name(), &result, model.registry()),
            ReportDoc::new(&report),
        ))
    }

    async fn finish(&self, id: &str, outcome: std::result::Result<(ResultDoc, ReportDoc), String>) {
        let job = self.job(id).expect("running job is registered");
        let mut outcome = outcome;
        if let Some(session_id) = &job.session {
            if let Ok(slot) = self.slot(session_id) {
                let mut slot = slot.lock().await;
                if let Ok((_, report)) = &outcome {
                    let mut next = slot.session.clone();
                    match report.to_report() {
                        Ok(r) => {
                            next.last_report = Some(r);
                            match self.save_session(&next) {
                                Ok(()) => slot.session = next,
                                Err(e) => outcome = Err(e.to_string()),
                            }
                        }
                        Err(e) => outcome = Err(e.to_string()),
                    }
                }
                slot.active_job = None;
            }
        }
        let saved = self.advance(id, |j| match outcome {
            Ok((result, report)) => {
                j.status = JobStatus::Done;
                j.result = Some(result);
                j.report = Some(report);
            }
            Err(message) => {
                j.status = JobStatus::Failed;
                j.error = Some(message);
            }
        });
        if let Err(e) = saved {
            eprintln!("job {id}: {e}");
        }
    }
}

async fn get_network(State(state): State<AppState>) -> Json<NetworkDoc> {
    Json(state.shared.network_doc.clone())
}

async fn get_centrality(State(state): State<AppState>) -> Json<CentralityDoc> {
    Json(state.shared.centrality_doc.clone())
}

async fn post_solve(State(state): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<JobDoc>)> {
    let req: SolveRequest = parse_body(&body)?;
    req.hyperparams.to_hyperparams()?;
    req.schedule.to_config()?;
    state.check_sensors(&req.hyperparams)?;
    let submitted = SubmittedDoc {
        hyperparams: req.hyperparams,
        schedule: req.schedule,
        solver: req.solver,
        exact_limit: req.exact_limit,
        installed: Vec::new(),
        rejected: Vec::new(),
    };
    let job = state.submit(JobKind::Solve, None, submitted)?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobDoc>> {
    Ok(Json(state.job(&id)?))
}

fn finished_result(state: &AppState, id: &str) -> ApiResult<ResultDoc> {
    let job = state.job(id)?;
    match (job.status, job.result) {
        (JobStatus::Done, Some(result)) => Ok(result),
        (JobStatus::Failed, _) => Err(ApiError::not_found("result for failed job", id)),
        _ => Err(ApiError::new(StatusCode::CONFLICT, format!("job `{id}` has not finished"))),
    }
}

async fn get_result(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ResultDoc>> {
    Ok(Json(finished_result(&state, &id)?))
}

async fn get_histogram(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HistogramQuery>,
) -> ApiResult<Json<HistogramDoc>> {
    let bins = query.bins.unwrap_or(DEFAULT_BINS);
    if bins == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bins must be at least 1").field("bins"));
    }
    let result = finished_result(&state, &id)?;
    let table = wdnsense_core::anneal::histogram(&result.energies, bins).map_err(ApiError::internal)?;
    Ok(Json(HistogramDoc::new(&table)))
}

async fn create_session(State(state): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<SessionDoc>)> {
    let req: CreateSessionRequest = parse_body(&body)?;
    state.check_sensors(&req.hyperparams)?;
    let hp = req.hyperparams.to_hyperparams()?;
    let id = format!("s{}", state.shared.next_session.fetch_add(1, Ordering::SeqCst));
    let session = Session::new(id.clone(), hp)?;
    state.save_session(&session)?;
    let doc = SessionDoc::new(&session);
    let slot = Slot {
        session,
        active_job: None,
    };
    state
        .shared
        .sessions
        .lock()
        .unwrap()
        .insert(id, Arc::new(tokio::sync::Mutex::new(slot)));
    Ok((StatusCode::CREATED, Json(doc)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionDoc>> {
    let slot = state.slot(&id)?;
    let slot = slot.lock().await;
    Ok(Json(SessionDoc::new(&slot.session)))
}

fn replan_in_progress(slot: &Slot) -> ApiResult<()> {
    match &slot.active_job {
        Some(job) => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("replan job `{job}` is still in progress for this session"),
        )),
        None => Ok(()),
    }
}

/// Applies `change` to a copy of the session, persists it, then commits.
async fn update_session(
    state: &AppState,
    id: &str,
    change: impl FnOnce(&mut Session, &Network) -> std::result::Result<(), PlacementError>,
) -> ApiResult<Json<SessionDoc>> {
    let slot = state.slot(id)?;
    let mut slot = slot.lock().await;
    replan_in_progress(&slot)?;
    let mut next = slot.session.clone();
    change(&mut next, &state.shared.network)?;
    if next != slot.session {
        state.save_session(&next)?;
        slot.session = next;
    }
    Ok(Json(SessionDoc::new(&slot.session)))
}

async fn mark(State(state): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<Json<SessionDoc>> {
    let req: MarkRequest = parse_body(&body)?;
    let status = match req.status {
        StatusArg::Installed => MarkStatus::Installed,
        StatusArg::Rejected => MarkStatus::Rejected,
    };
    update_session(&state, &id, |s, net| s.mark(net, &req.node, status)).await
}

async fn unmark(State(state): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<Json<SessionDoc>> {
    let req: UnmarkRequest = parse_body(&body)?;
    update_session(&state, &id, |s, net| s.unmark(net, &req.node).map(|_| ())).await
}

async fn replan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult<(StatusCode, Json<JobDoc>)> {
    let req: ReplanRequest = if body.trim().is_empty() {
        ReplanRequest::default()
    } else {
        parse_body(&body)?
    };
    req.schedule.to_config()?;
    let slot = state.slot(&id)?;
    let mut slot = slot.lock().await;
    replan_in_progress(&slot)?;
    let session = &slot.session;
    let submitted = SubmittedDoc {
        hyperparams: HyperparamsDoc::from_hyperparams(&session.hyperparams),
        schedule: req.schedule,
        solver: req.solver,
        exact_limit: req.exact_limit,
        installed: session.installed().iter().cloned().collect(),
        rejected: session.rejected().iter().cloned().collect(),
    };
    let job = state.submit(JobKind::Replan, Some(id), submitted)?;
    slot.active_job = Some(job.id.clone());
    Ok((StatusCode::ACCEPTED, Json(job)))
}

/// Binds `addr` and serves until the process is stopped.
pub fn serve_blocking(network: Network, weights: CentralityMap, config: ServeConfig, addr: &str) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new().map_err(|source| Error::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    runtime.block_on(async {
        let state = AppState::open(network, weights, config).await?;
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| Error::Io {
            path: PathBuf::from(addr),
            source,
        })?;
        eprintln!("listening on {addr}");
        axum::serve(listener, state.router()).await.map_err(|source| Error::Io {
            path: PathBuf::from(addr),
            source,
        })
    })
}
