//! HTTP API: job lifecycle, progress, results and the prompt registry.
//!
//! Jobs run on a bounded pool (one at a time by default) and every backend
//! they create shares one request limit, so concurrent jobs cannot overload
//! a shared model endpoint.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cultsim::agents::{AgentError, PromptKind, PromptLibrary};
use cultsim::backend::{Backend, ConcurrencyLimit};
use cultsim::engine::{now_secs, run_experiment, Progress};
use cultsim::results::ResultsDir;
use cultsim::{SimulationConfig, Topology, TopologyKind};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub results_root: PathBuf,
    pub registry: PathBuf,
    /// Jobs executed at the same time.
    pub max_jobs: usize,
    /// Backend requests in flight across all jobs.
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Pending,
    /// Run requested, waiting for a free worker.
    Queued,
    Running { seed: usize, generation: usize },
    Done,
    Failed { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub id: String,
    #[serde(flatten)]
    pub state: JobState,
    pub n_seeds: usize,
    pub n_generations: usize,
    pub created_at: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<f64>,
    pub results_path: PathBuf,
    #[serde(skip)]
    pub config: SimulationConfig,
}

struct Shared {
    config: ServiceConfig,
    jobs: Mutex<BTreeMap<String, JobRecord>>,
    workers: Arc<Semaphore>,
    limit: Arc<ConcurrencyLimit>,
    library: Mutex<PromptLibrary>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, AgentError> {
        let library = PromptLibrary::with_registry(&config.registry)?;
        Ok(AppState(Arc::new(Shared {
            workers: Arc::new(Semaphore::new(config.max_jobs.max(1))),
            limit: ConcurrencyLimit::new(config.parallelism),
            library: Mutex::new(library),
            jobs: Mutex::new(BTreeMap::new()),
            config,
        })))
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.0.jobs.lock().unwrap().get(id).cloned()
    }

    fn set_state(&self, id: &str, state: JobState) {
        let mut jobs = self.0.jobs.lock().unwrap();
        if let Some(job) = jobs.get_mut(id) {
            if matches!(state, JobState::Done | JobState::Failed { .. }) {
                job.finished_at = Some(now_secs());
            }
            if matches!(state, JobState::Running { .. }) && job.started_at.is_none() {
                job.started_at = Some(now_secs());
            }
            job.state = state;
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/simulations", post(create_job).get(list_jobs))
        .route("/simulations/{id}", get(job_status))
        .route("/simulations/{id}/run", post(run_job))
        .route("/simulations/{id}/status", get(job_status))
        .route("/simulations/{id}/config", get(job_config))
        .route("/simulations/{id}/metrics", get(job_metrics))
        .route("/simulations/{id}/seeds/{seed}/{artifact}", get(seed_artifact))
        .route("/topology/preview", get(topology_preview))
        .route("/prompts", get(list_prompts).post(add_prompt))
        .route("/personalities", get(list_personalities).post(add_personality))
        .with_state(state)
}

/// JSON error body with a status code.
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.to_string())
}

fn not_found(msg: impl ToString) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, msg.to_string())
}

fn internal(msg: impl ToString) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, msg.to_string())
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid JSON body: {e}")))
}

async fn create_job(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let config: SimulationConfig = parse_body(&body)?;
    config.validate().map_err(bad_request)?;
    let id = uuid::Uuid::new_v4().to_string();
    let record = JobRecord {
        id: id.clone(),
        state: JobState::Pending,
        n_seeds: config.n_seeds,
        n_generations: config.generations(),
        created_at: now_secs(),
        started_at: None,
        finished_at: None,
        results_path: state.0.config.results_root.join(&id),
        config,
    };
    state.0.jobs.lock().unwrap().insert(id.clone(), record);
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response())
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobRecord>> {
    Json(state.0.jobs.lock().unwrap().values().cloned().collect())
}

fn find(state: &AppState, id: &str) -> Result<JobRecord, ApiError> {
    state.job(id).ok_or_else(|| not_found(format!("no simulation `{id}`")))
}

async fn job_status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    find(&state, &id).map(Json)
}

async fn job_config(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SimulationConfig>, ApiError> {
    find(&state, &id).map(|j| Json(j.config))
}

async fn run_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = {
        let mut jobs = state.0.jobs.lock().unwrap();
        let job = jobs.get_mut(&id).ok_or_else(|| not_found(format!("no simulation `{id}`")))?;
        if job.state != JobState::Pending {
            return Err(ApiError(StatusCode::CONFLICT, format!("simulation `{id}` has already been started")));
        }
        job.state = JobState::Queued;
        job.clone()
    };
    let worker_state = state.clone();
    let response = Json(json!({ "id": id, "state": "queued" }));
    tokio::spawn(async move {
        let Ok(_slot) = worker_state.0.workers.clone().acquire_owned().await else { return };
        let blocking_state = worker_state.clone();
        let joined = tokio::task::spawn_blocking(move || execute(&blocking_state, &job)).await;
        if let Err(e) = joined {
            worker_state.set_state(&id, JobState::Failed { reason: format!("worker crashed: {e}") });
        }
    });
    Ok((StatusCode::ACCEPTED, response).into_response())
}

fn execute(state: &AppState, job: &JobRecord) {
    let config = &job.config;
    let backend = match Backend::with_limit(&config.backend, &config.params, Arc::clone(&state.0.limit)) {
        Ok(b) => b,
        Err(e) => return state.set_state(&job.id, JobState::Failed { reason: e.to_string() }),
    };
    let generations = config.generations();
    let progress = |p: Progress| {
        let update = match p {
            Progress::SeedStarted { seed_index } => Some((seed_index, 0)),
            Progress::GenerationDone { seed_index, generation } if generation + 1 < generations => {
                Some((seed_index, generation + 1))
            }
            _ => None,
        };
        if let Some((seed, generation)) = update {
            state.set_state(&job.id, JobState::Running { seed, generation });
        }
    };
    state.set_state(&job.id, JobState::Running { seed: 0, generation: 0 });
    let dir = ResultsDir::new(&job.results_path);
    let final_state = match run_experiment(config, &backend, Some(&dir), &progress) {
        Ok(outcome) if outcome.is_complete() => JobState::Done,
        Ok(outcome) => JobState::Failed {
            reason: outcome.failures.iter().map(|(_, e)| e.to_string()).collect::<Vec<_>>().join("; "),
        },
        Err(e) => JobState::Failed { reason: e.to_string() },
    };
    state.set_state(&job.id, final_state);
}

fn json_file(path: &FsPath) -> Result<Response, ApiError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(not_found(format!("{} is not available yet", path.file_name().unwrap_or_default().to_string_lossy())))
        }
        Err(e) => Err(internal(e)),
    }
}

async fn job_metrics(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = find(&state, &id)?;
    json_file(&job.results_path.join("summary_metrics.json"))
}

async fn seed_artifact(
    State(state): State<AppState>,
    Path((id, seed, artifact)): Path<(String, usize, String)>,
) -> Result<Response, ApiError> {
    let job = find(&state, &id)?;
    if seed >= job.n_seeds {
        return Err(not_found(format!("simulation `{id}` has {} seed(s)", job.n_seeds)));
    }
    let dir = ResultsDir::new(&job.results_path);
    let file = match artifact.as_str() {
        "matrix" => {
            let path = dir.seed_dir(seed).join("similarity_matrix.csv");
            if !path.exists() {
                return Err(not_found("similarity matrix is not available yet"));
            }
            let m = dir.read_matrix(seed).map_err(internal)?;
            let rows: Vec<&[f64]> = m.rows().collect();
            return Ok(Json(json!({ "size": m.size(), "rows": rows })).into_response());
        }
        "stories" => "stories.json",
        "keywords" => "keywords.json",
        "layout" => "layout.json",
        "chains" => "word_chains.json",
        "metrics" => "metrics.json",
        "status" => "status.json",
        other => return Err(not_found(format!("unknown artifact `{other}`"))),
    };
    json_file(&dir.seed_dir(seed).join(file))
}

#[derive(Debug, Deserialize)]
pub struct PreviewQuery {
    pub kind: String,
    pub agents: usize,
    pub cliques: Option<usize>,
}

async fn topology_preview(Query(q): Query<PreviewQuery>) -> Result<Json<serde_json::Value>, ApiError> {
    let kind = TopologyKind::parse(&q.kind, q.cliques).map_err(bad_request)?;
    let topology = Topology::build(kind, q.agents).map_err(bad_request)?;
    Ok(Json(json!({
        "kind": kind,
        "n_agents": topology.n_agents(),
        "directed": kind == TopologyKind::Sequence,
        "nodes": (0..topology.n_agents()).collect::<Vec<_>>(),
        "edges": topology.edges(),
    })))
}

async fn list_prompts(State(state): State<AppState>) -> Json<serde_json::Value> {
    let lib = state.0.library.lock().unwrap();
    Json(json!({ "initialization": lib.initialization, "transformation": lib.transformation }))
}

#[derive(Debug, Deserialize)]
struct NewPrompt {
    kind: PromptKind,
    name: String,
    text: String,
}

async fn add_prompt(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let p: NewPrompt = parse_body(&body)?;
    if p.text.trim().is_empty() {
        return Err(bad_request("prompt text must not be empty"));
    }
    let registry = state.0.config.registry.clone();
    state.0.library.lock().unwrap().add_prompt(&registry, p.kind, &p.name, &p.text).map_err(registry_error)?;
    Ok((StatusCode::CREATED, Json(json!({ "kind": p.kind, "name": p.name }))).into_response())
}

async fn list_personalities(State(state): State<AppState>) -> Json<BTreeMap<String, String>> {
    Json(state.0.library.lock().unwrap().personalities.clone())
}

#[derive(Debug, Deserialize)]
struct NewPersonality {
    name: String,
    text: String,
}

async fn add_personality(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let p: NewPersonality = parse_body(&body)?;
    let registry = state.0.config.registry.clone();
    state.0.library.lock().unwrap().add_personality(&registry, &p.name, &p.text).map_err(registry_error)?;
    Ok((StatusCode::CREATED, Json(json!({ "name": p.name }))).into_response())
}

fn registry_error(e: AgentError) -> ApiError {
    match e {
        AgentError::Io { .. } => internal(e),
        other => bad_request(other),
    }
}

pub async fn serve(bind: &str, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
