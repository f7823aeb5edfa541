//! HTTP service for beacon planning projects.
//!
//! Projects live in a directory store, one archive per project, with an
//! in-memory write-through cache. Detection runs as a background job that
//! clients poll; edits apply synchronously and re-trace the graph.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, Semaphore};

use beaconplan::export::{ExportFormat, GraphDocument};
use beaconplan::imagecore::RasterImage;
use beaconplan::learn::{default_models, Mode, ModelSet, SvmModel};
use beaconplan::overlay::{encode_png, render_overlay};
use beaconplan::pathfind::Zone;
use beaconplan::planner::PhaseTimings;
use beaconplan::project::{load_project, save_project, EditOp, PlanMeta, Project};
use beaconplan::skelgraph::{parse_scale, Compass};
use beaconplan::Error;

#[derive(Clone, Debug)]
pub struct Config {
    pub store: PathBuf,
    pub workers: usize,
    /// Shared bearer token required on every request when set.
    pub token: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Detection,
    Regen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobResult {
    pub nodes: usize,
    pub edges: usize,
    pub candidates: usize,
    pub timings: Option<PhaseTimings>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub project_id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub progress: f64,
    pub result: Option<JobResult>,
    pub error: Option<String>,
}

struct Entry {
    project: Mutex<Project>,
    /// Bumped by every change except a detection commit.
    generation: AtomicU64,
}

pub struct AppState {
    config: Config,
    projects: Mutex<HashMap<String, Arc<Entry>>>,
    jobs: std::sync::Mutex<HashMap<String, Job>>,
    workers: Semaphore,
    next_project: AtomicU64,
    next_job: AtomicU64,
}

impl AppState {
    pub fn new(config: Config) -> std::io::Result<Arc<Self>> {
        std::fs::create_dir_all(&config.store)?;
        let mut highest = 0;
        for e in std::fs::read_dir(&config.store)? {
            let name = e?.file_name().to_string_lossy().into_owned();
            if let Some(n) = name.strip_prefix('p').and_then(|n| n.parse::<u64>().ok()) {
                highest = highest.max(n);
            }
        }
        Ok(Arc::new(Self {
            workers: Semaphore::new(config.workers.max(1)),
            config,
            projects: Mutex::new(HashMap::new()),
            jobs: std::sync::Mutex::new(HashMap::new()),
            next_project: AtomicU64::new(highest + 1),
            next_job: AtomicU64::new(1),
        }))
    }

    async fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        let mut map = self.projects.lock().await;
        if let Some(e) = map.get(id) {
            return Ok(e.clone());
        }
        let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        let dir = self.config.store.join(id);
        if !valid || !dir.join("manifest.json").exists() {
            return Err(ApiError::not_found(format!("project {id} not found")));
        }
        let project = tokio::task::spawn_blocking(move || load_project(dir)).await.map_err(ApiError::internal)??;
        let e = Arc::new(Entry { project: Mutex::new(project), generation: AtomicU64::new(0) });
        map.insert(id.to_string(), e.clone());
        Ok(e)
    }

    async fn persist(&self, project: &Project) -> Result<(), ApiError> {
        let dir = self.config.store.join(&project.id);
        let snapshot = project.clone();
        tokio::task::spawn_blocking(move || save_project(&snapshot, dir)).await.map_err(ApiError::internal)??;
        Ok(())
    }

    fn update_job(&self, id: &str, f: impl FnOnce(&mut Job)) {
        let mut jobs = self.jobs.lock().unwrap();
        if let Some(job) = jobs.get_mut(id) {
            if !job.state.is_terminal() {
                f(job);
            }
        }
    }

    fn new_job(&self, project_id: &str, kind: JobKind) -> Job {
        let id = format!("j{}", self.next_job.fetch_add(1, Ordering::SeqCst));
        Job {
            id,
            project_id: project_id.to_string(),
            kind,
            state: JobState::Queued,
            progress: 0.0,
            result: None,
            error: None,
        }
    }
}

/// JSON error response.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self { status, kind: kind.into(), message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownNode(_) | Error::NoGraph | Error::NoFloorPlan => StatusCode::NOT_FOUND,
            Error::Occupied { .. } | Error::Locked(_) => StatusCode::CONFLICT,
            Error::Io(_) | Error::Integrity(_) | Error::Csv(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"kind": self.kind, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/floorplan", post(upload_floorplan).get(get_floorplan))
        .route("/projects/{id}/meta", put(set_meta))
        .route("/projects/{id}/zones", put(set_zones))
        .route("/projects/{id}/models", post(set_models))
        .route("/projects/{id}/detect", post(run_detection))
        .route("/projects/{id}/graph", get(get_graph))
        .route("/projects/{id}/overlay", get(get_overlay))
        .route("/projects/{id}/edits", post(post_edits))
        .route("/projects/{id}/export", get(export))
        .route("/jobs/{id}", get(get_job))
        .layer(DefaultBodyLimit::max(256 * 1024 * 1024))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

async fn auth(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

fn summary(p: &Project) -> Value {
    let results = p.results.as_ref().map(|r| {
        json!({
            "candidates": r.candidates.len(),
            "nodes": r.graph.nodes.len(),
            "edges": r.graph.edges.len(),
            "timings": r.timings,
        })
    });
    json!({
        "id": p.id,
        "created": p.created,
        "updated": p.updated,
        "source": p.source,
        "width": p.plan.as_ref().map(|i| i.width()),
        "height": p.plan.as_ref().map(|i| i.height()),
        "meta": p.meta,
        "zones": p.zones,
        "options": p.options,
        "models": p.models.iter().map(|m| &m.positive_kind).collect::<Vec<_>>(),
        "custom_templates": p.templates.as_ref().map(|t| t.len()),
        "results": results,
        "edits": p.edits,
    })
}

async fn create_project(State(state): State<Arc<AppState>>) -> ApiResult<(StatusCode, Json<Value>)> {
    let id = format!("p{}", state.next_project.fetch_add(1, Ordering::SeqCst));
    let project = Project::new(id.clone());
    state.persist(&project).await?;
    let body = summary(&project);
    let entry = Arc::new(Entry { project: Mutex::new(project), generation: AtomicU64::new(0) });
    state.projects.lock().await.insert(id, entry);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_project(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let entry = state.entry(&id).await?;
    let p = entry.project.lock().await;
    Ok(Json(summary(&p)))
}

/// Multipart upload; the first part carrying data is the raster.
async fn upload_floorplan(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    mut multipart: Multipart,
) -> ApiResult<Json<Value>> {
    let entry = state.entry(&id).await?;
    let mut upload: Option<(Option<String>, Bytes)> = None;
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::invalid(e.to_string()))? {
        let name = field.file_name().map(str::to_string);
        let bytes = field.bytes().await.map_err(|e| ApiError::invalid(e.to_string()))?;
        if !bytes.is_empty() {
            upload = Some((name, bytes));
            break;
        }
    }
    let (name, bytes) = upload.ok_or_else(|| ApiError::invalid("no file in upload"))?;
    let img = tokio::task::spawn_blocking(move || RasterImage::decode(&bytes))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_image", e.to_string()))?;
    let mut p = entry.project.lock().await;
    p.set_plan(img, name);
    entry.generation.fetch_add(1, Ordering::SeqCst);
    state.persist(&p).await?;
    Ok(Json(summary(&p)))
}

async fn get_floorplan(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.entry(&id).await?;
    let p = entry.project.lock().await;
    let plan = p.plan.as_ref().ok_or(Error::NoFloorPlan)?;
    let png = plan.encode_png()?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScaleInput {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
struct MetaBody {
    dpi: Option<f64>,
    scale: Option<ScaleInput>,
    map_orientation: Option<Compass>,
}

async fn set_meta(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<MetaBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let scale = match body.scale {
        Some(ScaleInput::Number(s)) => Some(s),
        Some(ScaleInput::Text(t)) => Some(parse_scale(&t)?),
        None => None,
    };
    let entry = state.entry(&id).await?;
    let mut p = entry.project.lock().await;
    let meta = PlanMeta {
        dpi: body.dpi.or(p.meta.dpi),
        scale: scale.or(p.meta.scale),
        map_orientation: body.map_orientation.unwrap_or(p.meta.map_orientation),
    };
    p.set_meta(meta)?;
    entry.generation.fetch_add(1, Ordering::SeqCst);
    state.persist(&p).await?;
    Ok(Json(summary(&p)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ZonesBody {
    Wrapped { zones: Vec<Zone>, cutoff: Option<u32> },
    List(Vec<Zone>),
}

async fn set_zones(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ZonesBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let (zones, cutoff) = match body {
        ZonesBody::Wrapped { zones, cutoff } => (zones, cutoff),
        ZonesBody::List(zones) => (zones, None),
    };
    let entry = state.entry(&id).await?;
    let mut p = entry.project.lock().await;
    if let Some(c) = cutoff {
        if c != p.options.zone_cutoff {
            p.options.zone_cutoff = c;
            p.results = None;
            p.edits.clear();
        }
    }
    p.set_zones(zones)?;
    entry.generation.fetch_add(1, Ordering::SeqCst);
    state.persist(&p).await?;
    Ok(Json(summary(&p)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelsBody {
    Bundled { bundled: bool },
    Set(ModelSet),
    Single(SvmModel),
}

async fn set_models(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ModelsBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let models = match body {
        ModelsBody::Bundled { bundled: true } => default_models(),
        ModelsBody::Bundled { bundled: false } => Vec::new(),
        ModelsBody::Set(s) => s.models,
        ModelsBody::Single(m) => vec![m],
    };
    let entry = state.entry(&id).await?;
    let mut p = entry.project.lock().await;
    p.set_models(models)?;
    entry.generation.fetch_add(1, Ordering::SeqCst);
    state.persist(&p).await?;
    Ok(Json(summary(&p)))
}

#[derive(Deserialize)]
struct DetectQuery {
    option: Option<u8>,
    mode: Option<String>,
    seed: Option<u64>,
}

async fn run_detection(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<DetectQuery>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let entry = state.entry(&id).await?;
    let p = entry.project.lock().await;
    let mut pipeline = p.options.pipeline.clone();
    if let Some(o) = q.option {
        pipeline.option = o;
    }
    if let Some(m) = &q.mode {
        pipeline.mode = m.parse::<Mode>()?;
    }
    if let Some(s) = q.seed {
        pipeline.seed = s;
    }
    pipeline.validate()?;

    let mut job = state.new_job(&id, JobKind::Detection);
    {
        let mut jobs = state.jobs.lock().unwrap();
        let busy = jobs
            .values()
            .any(|j| j.project_id == id && j.kind == JobKind::Detection && !j.state.is_terminal());
        if busy {
            return Err(ApiError::new(StatusCode::CONFLICT, "conflict", format!("detection already running for {id}")));
        }
        if let Err(e) = p.check_ready(&pipeline) {
            job.state = JobState::Failed;
            job.error = Some(e.to_string());
        }
        jobs.insert(job.id.clone(), job.clone());
    }
    if job.state == JobState::Failed {
        return Ok((StatusCode::ACCEPTED, Json(job)));
    }
    let mut snapshot = p.clone();
    snapshot.options.pipeline = pipeline;
    let generation = entry.generation.load(Ordering::SeqCst);
    drop(p);

    let job_id = job.id.clone();
    let st = state.clone();
    tokio::spawn(async move {
        let _permit = st.workers.acquire().await;
        st.update_job(&job_id, |j| {
            j.state = JobState::Running;
            j.progress = 0.05;
        });
        let outcome = tokio::task::spawn_blocking(move || {
            let r = snapshot.detect();
            (snapshot, r)
        })
        .await;
        let (snapshot, r) = match outcome {
            Ok(v) => v,
            Err(e) => {
                st.update_job(&job_id, |j| {
                    j.state = JobState::Failed;
                    j.error = Some(e.to_string());
                });
                return;
            }
        };
        if let Err(e) = r {
            st.update_job(&job_id, |j| {
                j.state = JobState::Failed;
                j.error = Some(e.to_string());
            });
            return;
        }
        st.update_job(&job_id, |j| j.progress = 0.9);
        let mut p = entry.project.lock().await;
        if entry.generation.load(Ordering::SeqCst) != generation {
            st.update_job(&job_id, |j| {
                j.state = JobState::Failed;
                j.error = Some("project changed while detection was running".into());
            });
            return;
        }
        *p = snapshot;
        let r = p.results.as_ref().unwrap();
        let result = JobResult {
            nodes: r.graph.nodes.len(),
            edges: r.graph.edges.len(),
            candidates: r.candidates.len(),
            timings: Some(r.timings),
        };
        match st.persist(&p).await {
            Ok(()) => st.update_job(&job_id, |j| {
                j.state = JobState::Done;
                j.progress = 1.0;
                j.result = Some(result);
            }),
            Err(e) => st.update_job(&job_id, |j| {
                j.state = JobState::Failed;
                j.error = Some(e.message);
            }),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    let jobs = state.jobs.lock().unwrap();
    jobs.get(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("job {id} not found")))
}

async fn get_graph(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<GraphDocument>> {
    let entry = state.entry(&id).await?;
    let p = entry.project.lock().await;
    Ok(Json(GraphDocument::from_graph(p.graph()?)))
}

async fn get_overlay(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.entry(&id).await?;
    let p = entry.project.lock().await;
    let plan = p.plan.clone().ok_or(Error::NoFloorPlan)?;
    let results = p.results.clone().ok_or(Error::NoGraph)?;
    drop(p);
    let png = tokio::task::spawn_blocking(move || {
        render_overlay(&plan, Some(&results.skeleton), &results.graph, 0).and_then(|img| encode_png(&img))
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EditsBody {
    Wrapped { ops: Vec<EditOp> },
    List(Vec<EditOp>),
}

async fn post_edits(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<EditsBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let ops = match body {
        EditsBody::Wrapped { ops } | EditsBody::List(ops) => ops,
    };
    let entry = state.entry(&id).await?;
    let mut p = entry.project.lock().await;
    p.apply_edits(&ops)?;
    entry.generation.fetch_add(1, Ordering::SeqCst);
    state.persist(&p).await?;
    let g = p.graph()?;
    let mut job = None;
    if ops.iter().any(EditOp::is_structural) {
        let mut j = state.new_job(&id, JobKind::Regen);
        j.state = JobState::Done;
        j.progress = 1.0;
        j.result = Some(JobResult { nodes: g.nodes.len(), edges: g.edges.len(), candidates: 0, timings: None });
        state.jobs.lock().unwrap().insert(j.id.clone(), j.clone());
        job = Some(j);
    }
    Ok(Json(json!({"graph": GraphDocument::from_graph(g), "job": job, "edits": p.edits.len()})))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let format: ExportFormat = q.format.as_deref().unwrap_or("json").parse()?;
    let entry = state.entry(&id).await?;
    let p = entry.project.lock().await;
    let text = p.export(format)?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, format.content_type().parse().unwrap());
    let disposition = format!("attachment; filename=\"{}-graph.{}\"", p.id, format.extension());
    headers.insert(header::CONTENT_DISPOSITION, disposition.parse().map_err(ApiError::internal)?);
    Ok((headers, text).into_response())
}
