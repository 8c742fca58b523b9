//! HTTP service over a simworks workspace.
//!
//! JSON bodies in both directions are canonical form. The log, trace and
//! export routes return plain text, JSON lines and a tar archive.

mod config;
mod error;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use simworks_core::bundle::{export_bundle, validate_bundle, ExperimentBundle, BUNDLE_FILE};
use simworks_core::canonical::{self, ContentHash, Value};
use simworks_core::catalog::Catalog;
use simworks_core::executor::{trace_file, Executor, RunRecord, LOG_FILE, MEASURES_FILE};
use simworks_core::registry::{static_check, ComponentTree, ExpectedHead};
use simworks_core::templates::{TemplateDraft, VersionSelector};
use simworks_core::workspace::Workspace;
use tokio::sync::Semaphore;

pub use config::{Limits, ServiceConfig, StoresConfig};
pub use error::ApiError;

const CANONICAL_JSON: &str = "application/json";

pub(crate) fn canonical_response<T: Serialize + ?Sized>(status: StatusCode, body: &T) -> Response {
    match canonical::encode(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, CANONICAL_JSON)], bytes).into_response(),
        Err(e) => {
            eprintln!("response encoding failed: {e}");
            (StatusCode::INTERNAL_SERVER_ERROR, [(header::CONTENT_TYPE, CANONICAL_JSON)], &b"{\"code\":\"INTERNAL\",\"detail\":\"response encoding failed\",\"http_status\":500}"[..])
                .into_response()
        }
    }
}

fn ok<T: Serialize + ?Sized>(body: &T) -> Response {
    canonical_response(StatusCode::OK, body)
}

type ApiResult = Result<Response, ApiError>;

fn decode_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    canonical::decode(bytes).map_err(|e| ApiError::bad_request("PARSE_ERROR", format!("request body: {e}")))
}

pub struct AppState {
    pub workspace: Workspace,
    pub executor: Arc<Executor>,
    token: String,
    open_reads: bool,
    workers: Arc<Semaphore>,
    max_workers: u32,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Result<Self, String> {
        let workspace = Workspace::open(&config.stores.root).map_err(|e| format!("{}: {e}", config.stores.root))?;
        let executor = workspace
            .executor(config.limits.executor_config())
            .map_err(|e| format!("{}: {e}", config.stores.root))?;
        let workers = config.limits.workers.max(1);
        Ok(AppState {
            workspace,
            executor: Arc::new(executor),
            token: config.token.clone(),
            open_reads: config.open_reads,
            workers: Arc::new(Semaphore::new(workers as usize)),
            max_workers: workers,
        })
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/bundles", post(post_bundle))
        .route("/v1/bundles/{hash}", get(get_bundle))
        .route("/v1/bundles/{hash}/export", get(export))
        .route("/v1/runs", post(post_run))
        .route("/v1/runs/batch", post(post_batch))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/log", get(get_log))
        .route("/v1/runs/{id}/trace", get(get_trace))
        .route("/v1/runs/{id}/measures", get(get_measures))
        .route("/v1/runs/{id}/verify", post(verify))
        .route("/v1/templates", get(list_templates).post(publish_template))
        .route("/v1/templates/{name}/{version}", get(get_template))
        .route("/v1/components/check", post(check_component))
        .route("/v1/components/{a}/{b}", post(commit_component))
        .route("/v1/components/{commit_id}/tree", get(component_tree))
        .route("/v1/catalog", get(catalog))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

async fn auth(State(state): State<Shared>, req: Request, next: Next) -> Response {
    let needs_token = req.method() != Method::GET || !state.open_reads;
    if needs_token && !has_token(req.headers(), &state.token) {
        return ApiError::unauthorized().into_response();
    }
    next.run(req).await
}

fn has_token(headers: &HeaderMap, token: &str) -> bool {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == token)
}

/// Serve until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), String> {
    let state = Arc::new(AppState::new(&config)?);
    let listener = tokio::net::TcpListener::bind(&config.listen_address)
        .await
        .map_err(|e| format!("listen_address {}: {e}", config.listen_address))?;
    eprintln!("listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServiceConfig) -> Result<(), String> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(serve(config))
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BundleCreated {
    bundle_hash: ContentHash,
}

async fn post_bundle(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let bundle: ExperimentBundle = decode_body(&body)?;
    let state = s.clone();
    let hash = blocking(move || {
        let ws = &state.workspace;
        let report = validate_bundle(&bundle, &ws.templates, &ws.registry)?;
        if !report.ok {
            return Err(ApiError::from_report(&report));
        }
        Ok(ws.put_bundle(&bundle)?)
    })
    .await?;
    Ok(canonical_response(StatusCode::CREATED, &BundleCreated { bundle_hash: hash }))
}

fn stored_bundle(s: &AppState, hash: &str) -> Result<ExperimentBundle, ApiError> {
    s.workspace
        .get_bundle(hash)?
        .ok_or_else(|| ApiError::not_found(format!("bundle {hash}")))
}

async fn get_bundle(State(s): State<Shared>, UrlPath(hash): UrlPath<String>) -> ApiResult {
    let b = stored_bundle(&s, &hash)?;
    Ok(ok(&b))
}

#[derive(Deserialize)]
struct ExportQuery {
    run_id: Option<String>,
}

/// The export layout as a tar archive; `?run_id=` adds that run's outputs.
async fn export(State(s): State<Shared>, UrlPath(hash): UrlPath<String>, Query(q): Query<ExportQuery>) -> ApiResult {
    let state = s.clone();
    let archive = blocking(move || {
        let b = stored_bundle(&state, &hash)?;
        let run_dir = match &q.run_id {
            Some(id) => {
                let rec = state.executor.record(id)?;
                if rec.bundle_hash.as_str() != hash {
                    return Err(ApiError::unprocessable("RUN_BUNDLE_MISMATCH", format!("run {id} executed another bundle")).field("run_id"));
                }
                Some(state.executor.run_dir(id))
            }
            None => None,
        };
        let tmp = tempfile::tempdir().map_err(ApiError::internal)?;
        let dest = tmp.path().join("export");
        export_bundle(&b, &state.workspace.root().join("bundles"), run_dir.as_deref(), &dest)?;
        tar_dir(&dest).map_err(ApiError::internal)
    })
    .await?;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/x-tar")],
        archive,
    )
        .into_response())
}

fn tar_dir(dir: &Path) -> std::io::Result<Vec<u8>> {
    let mut builder = tar::Builder::new(Vec::new());
    builder.mode(tar::HeaderMode::Deterministic);
    builder.append_dir_all(".", dir)?;
    builder.into_inner()
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RunRequest {
    bundle_hash: String,
}

#[derive(Serialize)]
struct RunAccepted {
    run_id: String,
}

async fn post_run(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: RunRequest = decode_body(&body)?;
    let state = s.clone();
    let (record, bundle) = blocking(move || {
        let b = stored_bundle(&state, &req.bundle_hash).map_err(|e| e.field("bundle_hash"))?;
        Ok((state.executor.prepare(&b)?, b))
    })
    .await?;
    let run_id = record.run_id.clone();
    let state = s.clone();
    tokio::spawn(async move {
        let Ok(_permit) = state.workers.clone().acquire_owned().await else {
            return;
        };
        let ex = state.executor.clone();
        let id = record.run_id.clone();
        if let Err(e) = tokio::task::spawn_blocking(move || ex.run_prepared(record, &bundle)).await {
            eprintln!("run {id}: worker panicked: {e}");
        }
    });
    Ok(canonical_response(StatusCode::ACCEPTED, &RunAccepted { run_id }))
}

#[derive(Deserialize)]
struct BatchRequest {
    bundle_hashes: Vec<String>,
    #[serde(default = "one")]
    parallelism: u32,
}

fn one() -> u32 {
    1
}

#[derive(Serialize)]
struct BatchAccepted {
    run_ids: Vec<String>,
}

async fn post_batch(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: BatchRequest = decode_body(&body)?;
    if req.parallelism == 0 {
        return Err(ApiError::unprocessable("BAD_PARALLELISM", "parallelism must be positive").field("parallelism"));
    }
    let state = s.clone();
    let (prepared, bundles) = blocking(move || {
        let mut bundles = Vec::new();
        for (i, h) in req.bundle_hashes.iter().enumerate() {
            bundles.push(stored_bundle(&state, h).map_err(|e| e.field(format!("bundle_hashes[{i}]")))?);
        }
        let prepared = bundles
            .iter()
            .map(|b| state.executor.prepare(b))
            .collect::<Result<Vec<RunRecord>, _>>()?;
        Ok((prepared, bundles))
    })
    .await?;
    let run_ids: Vec<String> = prepared.iter().map(|r| r.run_id.clone()).collect();
    let permits = req.parallelism.min(s.max_workers);
    let state = s.clone();
    tokio::spawn(async move {
        let Ok(_permits) = state.workers.clone().acquire_many_owned(permits).await else {
            return;
        };
        let ex = state.executor.clone();
        let res = tokio::task::spawn_blocking(move || ex.run_batch(prepared, &bundles, permits as usize)).await;
        match res {
            Ok(Err(e)) => eprintln!("batch failed: {e}"),
            Err(e) => eprintln!("batch worker panicked: {e}"),
            Ok(Ok(_)) => {}
        }
    });
    Ok(canonical_response(StatusCode::ACCEPTED, &BatchAccepted { run_ids }))
}

async fn get_run(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(ok(&s.executor.record(&id)?))
}

/// Existing run directory for `id`, or 404.
fn run_dir(s: &AppState, id: &str) -> Result<PathBuf, ApiError> {
    s.executor.record(id)?;
    Ok(s.executor.run_dir(id))
}

#[derive(Deserialize)]
struct LogQuery {
    #[serde(default)]
    from_byte: u64,
}

/// Log bytes from `from_byte` on. The log is append-only, so a byte once
/// served never changes; `X-Next-Byte` is the offset for the next poll.
async fn get_log(State(s): State<Shared>, UrlPath(id): UrlPath<String>, Query(q): Query<LogQuery>) -> ApiResult {
    let path = run_dir(&s, &id)?.join(LOG_FILE);
    let bytes = std::fs::read(&path).map_err(ApiError::internal)?;
    let start = (q.from_byte as usize).min(bytes.len());
    // Only whole lines, so a reader never sees a half-written one.
    let end = bytes[start..]
        .iter()
        .rposition(|&c| c == b'\n')
        .map_or(start, |i| start + i + 1);
    let chunk = bytes[start..end].to_vec();
    let mut res = (StatusCode::OK, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], chunk).into_response();
    res.headers_mut().insert("x-next-byte", HeaderValue::from(end as u64));
    Ok(res)
}

#[derive(Deserialize)]
struct TraceQuery {
    #[serde(default)]
    user: u32,
}

async fn get_trace(State(s): State<Shared>, UrlPath(id): UrlPath<String>, Query(q): Query<TraceQuery>) -> ApiResult {
    let path = run_dir(&s, &id)?.join(trace_file(q.user));
    let bytes = read_output(&path, || format!("trace for user {} of run {id}", q.user))?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "application/jsonl")], Body::from(bytes)).into_response())
}

async fn get_measures(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let path = run_dir(&s, &id)?.join(MEASURES_FILE);
    let bytes = read_output(&path, || format!("measures of run {id}"))?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, CANONICAL_JSON)], bytes).into_response())
}

fn read_output(path: &Path, what: impl FnOnce() -> String) -> Result<Vec<u8>, ApiError> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::not_found(what())),
        Err(e) => Err(ApiError::internal(e)),
    }
}

#[derive(Deserialize)]
struct VerifyRequest {
    trace_hashes: Vec<ContentHash>,
}

/// Re-executes the run's bundle and compares against the given hashes.
async fn verify(State(s): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let req: VerifyRequest = decode_body(&body)?;
    let state = s.clone();
    let out = blocking(move || {
        let dir = run_dir(&state, &id)?;
        let bundle = ExperimentBundle::read(&dir.join(BUNDLE_FILE))?;
        let (verdict, record) = state.executor.verify_reproduction(&bundle, &req.trace_hashes)?;
        let mut v = canonical::to_value(&verdict).map_err(ApiError::internal)?;
        if let (Value::Map(m), Some(r)) = (&mut v, record) {
            m.insert("run_id".into(), Value::Str(r.run_id));
        }
        Ok(v)
    })
    .await?;
    Ok(ok(&out))
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TemplateEntry {
    name: String,
    version: u32,
    status: simworks_core::templates::TemplateStatus,
}

#[derive(Serialize)]
struct TemplateList {
    templates: Vec<TemplateEntry>,
}

async fn list_templates(State(s): State<Shared>) -> ApiResult {
    let templates = s
        .workspace
        .templates
        .list()?
        .into_iter()
        .map(|(name, version, status)| TemplateEntry { name, version, status })
        .collect();
    Ok(ok(&TemplateList { templates }))
}

#[derive(Serialize)]
struct TemplateView<'a> {
    status: simworks_core::templates::TemplateStatus,
    template: &'a simworks_core::templates::EnvironmentTemplate,
}

async fn get_template(State(s): State<Shared>, UrlPath((name, version)): UrlPath<(String, String)>) -> ApiResult {
    let sel: VersionSelector = version
        .parse()
        .map_err(|e: String| ApiError::not_found(e).field("version"))?;
    let stored = s.workspace.templates.get(&name, sel)?;
    Ok(ok(&TemplateView {
        status: stored.status,
        template: &stored.template,
    }))
}

#[derive(Deserialize)]
struct PublishRequest {
    draft: TemplateDraft,
    /// Dataset files by the relative paths the draft names.
    #[serde(default)]
    files: BTreeMap<String, String>,
}

async fn publish_template(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: PublishRequest = decode_body(&body)?;
    let state = s.clone();
    let r = blocking(move || {
        let tmp = tempfile::tempdir().map_err(ApiError::internal)?;
        write_tree(tmp.path(), &req.files)?;
        Ok(state.workspace.templates.publish(&req.draft, tmp.path())?)
    })
    .await?;
    Ok(canonical_response(StatusCode::CREATED, &r))
}

fn write_tree(root: &Path, files: &BTreeMap<String, String>) -> Result<(), ApiError> {
    for (rel, text) in files {
        if !simworks_core::model::is_relative_clean(rel) {
            return Err(ApiError::unprocessable("PATH_ESCAPE", format!("{rel:?} must be relative without '..'")).field("files"));
        }
        let p = root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(ApiError::internal)?;
        }
        std::fs::write(&p, text).map_err(ApiError::internal)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Components
// ---------------------------------------------------------------------------

/// Present-but-null and absent are different: null means "no parent yet".
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<ContentHash>>, D::Error> {
    Option::<ContentHash>::deserialize(d).map(Some)
}

#[derive(Deserialize)]
struct CommitRequest {
    files: BTreeMap<String, String>,
    author: String,
    message: String,
    /// Expected current head; a mismatch is 409 CONCURRENT_HEAD.
    #[serde(default, deserialize_with = "present")]
    parent: Option<Option<ContentHash>>,
}

#[derive(Serialize)]
struct CommitCreated {
    commit_id: ContentHash,
    tree_hash: ContentHash,
}

async fn commit_component(State(s): State<Shared>, UrlPath((namespace, name)): UrlPath<(String, String)>, body: Bytes) -> ApiResult {
    let req: CommitRequest = decode_body(&body)?;
    let state = s.clone();
    let commit = blocking(move || {
        let tree = ComponentTree::from_text_map(req.files);
        let expected = req.parent.map_or(ExpectedHead::Current, ExpectedHead::Exactly);
        Ok(state
            .workspace
            .registry
            .commit_component_cas(&namespace, &name, &tree, &req.author, &req.message, expected)?)
    })
    .await?;
    Ok(canonical_response(
        StatusCode::CREATED,
        &CommitCreated {
            commit_id: commit.commit_id,
            tree_hash: commit.tree_hash,
        },
    ))
}

#[derive(Serialize)]
struct TreeView {
    commit: simworks_core::registry::RegistryCommit,
    files: BTreeMap<String, String>,
}

async fn component_tree(State(s): State<Shared>, UrlPath(commit_id): UrlPath<String>) -> ApiResult {
    let reg = &s.workspace.registry;
    let commit = reg.get_commit(&commit_id)?;
    let files = reg.tree(&commit_id)?.to_text_map().map_err(ApiError::internal)?;
    Ok(ok(&TreeView { commit, files }))
}

#[derive(Deserialize)]
struct CheckRequest {
    files: BTreeMap<String, String>,
}

async fn check_component(body: Bytes) -> ApiResult {
    let req: CheckRequest = decode_body(&body)?;
    Ok(ok(&static_check(&ComponentTree::from_text_map(req.files))))
}

async fn catalog() -> ApiResult {
    Ok(ok(&Catalog::builtin()))
}

/// Store and executor calls touch the filesystem; keep them off the reactor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}
