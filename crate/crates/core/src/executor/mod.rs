//! Run lifecycle: run directories, component checkouts, subprocess
//! injection, limits, outputs and reproduction checks.
//!
//! ```text
//! run/<run_id>/bundle.canon.json
//! run/<run_id>/record.canon.json
//! run/<run_id>/components/<node_id>/
//! run/<run_id>/outputs/trace.u<k>.jsonl
//! run/<run_id>/outputs/measures.canon.json
//! run/<run_id>/run.log
//! ```

pub mod protocol;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{bundle_hash, validate_bundle, ExperimentBundle, BUNDLE_FILE};
use crate::canonical::{self, ContentHash};
use crate::engine::components::AnyComponent;
use crate::engine::{
    compute_session_measures, CustomComponents, EngineError, RunMeasures, SessionContext, SessionLimits, Simulation,
};
use crate::fsutil::{now_rfc3339, write_atomic};
use crate::model::{ComponentRole, ComponentSource, ParameterSchema, PipelineNode};
use crate::registry::Registry;
use crate::templates::TemplateStore;
use crate::ENGINE_VERSION;

use protocol::{External, LaunchSpec};

pub const RECORD_FILE: &str = "record.canon.json";
pub const LOG_FILE: &str = "run.log";
pub const MEASURES_FILE: &str = "outputs/measures.canon.json";

pub fn trace_file(user: u32) -> String {
    format!("outputs/trace.u{user}.jsonl")
}

#[derive(Debug, Clone)]
pub struct ExecutorConfig {
    pub wall_clock: Duration,
    pub request_timeout: Duration,
    pub max_sessions: u32,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            wall_clock: Duration::from_secs(60),
            request_timeout: Duration::from_secs(5),
            max_sessions: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Queued,
    Running,
    Completed,
    Failed,
}

impl RunStatus {
    pub fn is_final(self) -> bool {
        matches!(self, RunStatus::Completed | RunStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    pub detail: String,
}

impl RunFailure {
    fn new(code: &str, detail: impl Into<String>) -> Self {
        RunFailure {
            code: code.to_owned(),
            node_id: None,
            detail: detail.into(),
        }
    }
}

impl From<EngineError> for RunFailure {
    fn from(e: EngineError) -> Self {
        let node_id = match &e {
            EngineError::Component { node_id, .. } => Some(node_id.clone()),
            EngineError::MissingQrels(node) => Some(node.clone()),
            _ => None,
        };
        RunFailure {
            code: e.code().to_owned(),
            node_id,
            detail: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutputs {
    /// Relative to the run directory, one per user in user order.
    pub traces: Vec<String>,
    pub trace_hashes: Vec<ContentHash>,
    pub measures: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub bundle_hash: ContentHash,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished: Option<String>,
    pub log: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<RunOutputs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<RunFailure>,
}

impl RunRecord {
    pub fn trace_hashes(&self) -> &[ContentHash] {
        self.outputs.as_ref().map(|o| o.trace_hashes.as_slice()).unwrap_or_default()
    }
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("run {0} not found")]
    RunNotFound(String),
    #[error("{0}")]
    Format(#[from] canonical::CanonicalError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl ExecutorError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecutorError::RunNotFound(_) => "RUN_NOT_FOUND",
            ExecutorError::Format(_) => "PARSE_ERROR",
            ExecutorError::Io(_) => "STORE_IO",
        }
    }
}

/// Append-only run log with lines `RFC3339 LEVEL message`.
#[derive(Clone)]
pub struct RunLog {
    file: Arc<Mutex<File>>,
}

impl RunLog {
    fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RunLog {
            file: Arc::new(Mutex::new(file)),
        })
    }

    fn write(&self, level: &str, msg: &str) {
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        for line in msg.lines() {
            let _ = writeln!(f, "{} {level} {line}", now_rfc3339());
        }
    }

    pub fn info(&self, msg: &str) {
        self.write("INFO", msg);
    }

    pub fn warn(&self, msg: &str) {
        self.write("WARN", msg);
    }

    pub fn error(&self, msg: &str) {
        self.write("ERROR", msg);
    }
}

/// Outcome of re-executing a bundle against recorded trace hashes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reproduction {
    Pass,
    Fail {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        first_divergent_user: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<RunFailure>,
    },
    ScopeLimited,
}

impl Reproduction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reproduction::Pass => "PASS",
            Reproduction::Fail { .. } => "FAIL",
            Reproduction::ScopeLimited => "SCOPE_LIMITED",
        }
    }
}

pub struct Executor {
    runs_root: PathBuf,
    templates: TemplateStore,
    registry: Registry,
    config: ExecutorConfig,
}

impl Executor {
    pub fn new(runs_root: impl Into<PathBuf>, templates: TemplateStore, registry: Registry, config: ExecutorConfig) -> io::Result<Self> {
        let runs_root = runs_root.into();
        fs::create_dir_all(&runs_root)?;
        Ok(Executor {
            runs_root,
            templates,
            registry,
            config,
        })
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateStore {
        &self.templates
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.runs_root.join(run_id)
    }

    /// Create the run directory and a QUEUED record.
    pub fn prepare(&self, bundle: &ExperimentBundle) -> Result<RunRecord, ExecutorError> {
        let run_id = format!("r{}", uuid::Uuid::now_v7().simple());
        let dir = self.run_dir(&run_id);
        fs::create_dir_all(dir.join("outputs"))?;
        fs::write(dir.join(BUNDLE_FILE), canonical::encode(bundle)?)?;
        File::create(dir.join(LOG_FILE))?;
        let record = RunRecord {
            run_id,
            bundle_hash: bundle_hash(bundle)?,
            status: RunStatus::Queued,
            started: None,
            finished: None,
            log: LOG_FILE.to_owned(),
            outputs: None,
            failure: None,
        };
        self.save(&record)?;
        Ok(record)
    }

    fn save(&self, record: &RunRecord) -> Result<(), ExecutorError> {
        write_atomic(&self.run_dir(&record.run_id).join(RECORD_FILE), &canonical::encode(record)?)?;
        Ok(())
    }

    pub fn record(&self, run_id: &str) -> Result<RunRecord, ExecutorError> {
        if !crate::model::is_identifier(run_id) {
            return Err(ExecutorError::RunNotFound(run_id.to_owned()));
        }
        match fs::read(self.run_dir(run_id).join(RECORD_FILE)) {
            Ok(b) => Ok(canonical::decode(&b)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(ExecutorError::RunNotFound(run_id.to_owned())),
            Err(e) => Err(e.into()),
        }
    }

    /// Run ids in creation order.
    pub fn list_runs(&self) -> Result<Vec<String>, ExecutorError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.runs_root)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if self.run_dir(&name).join(RECORD_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn execute(&self, bundle: &ExperimentBundle) -> Result<RunRecord, ExecutorError> {
        let record = self.prepare(bundle)?;
        self.run_prepared(record, bundle)
    }

    /// Move a QUEUED record through RUNNING to its final status.
    pub fn run_prepared(&self, mut record: RunRecord, bundle: &ExperimentBundle) -> Result<RunRecord, ExecutorError> {
        let dir = self.run_dir(&record.run_id);
        let log = RunLog::open(&dir.join(LOG_FILE))?;
        record.status = RunStatus::Running;
        record.started = Some(now_rfc3339());
        self.save(&record)?;
        log.info(&format!("run {} started, bundle {}", record.run_id, record.bundle_hash));

        match self.simulate(bundle, &dir, &log) {
            Ok(outputs) => {
                log.info(&format!("completed {} sessions", outputs.traces.len()));
                record.status = RunStatus::Completed;
                record.outputs = Some(outputs);
            }
            Err(failure) => {
                log.error(&format!("failed: {} {}", failure.code, failure.detail));
                record.status = RunStatus::Failed;
                record.failure = Some(failure);
            }
        }
        record.finished = Some(now_rfc3339());
        self.save(&record)?;
        Ok(record)
    }

    fn simulate(&self, bundle: &ExperimentBundle, dir: &Path, log: &RunLog) -> Result<RunOutputs, RunFailure> {
        let started = Instant::now();
        let deadline = started + self.config.wall_clock;
        let report = validate_bundle(bundle, &self.templates, &self.registry)
            .map_err(|e| RunFailure::new(e.code(), e.to_string()))?;
        if let Some(v) = report.violations.first() {
            return Err(RunFailure {
                code: v.code.clone(),
                node_id: v.node_id.clone(),
                detail: v.detail.clone(),
            });
        }
        if bundle.engine_version != ENGINE_VERSION {
            return Err(RunFailure::new("ENGINE_MISMATCH", format!("engine is {ENGINE_VERSION}")));
        }
        if bundle.repetitions > self.config.max_sessions {
            return Err(RunFailure::new(
                "SESSION_CAP",
                format!("{} repetitions exceed the cap of {}", bundle.repetitions, self.config.max_sessions),
            ));
        }

        let env = self
            .templates
            .resolve_environment(&bundle.template_ref)
            .and_then(|e| e.load())
            .map_err(|e| RunFailure::new(e.code(), e.to_string()))?;
        log.info(&format!(
            "environment {}: {} documents, {} topics",
            bundle.template_ref,
            env.index.doc_count(),
            env.topics.len()
        ));

        let injected = self.checkout_components(bundle, dir, deadline, log.clone())?;
        let sim = Simulation {
            pipeline: &bundle.pipeline,
            env: &env,
            master_seed: bundle.seeds.master,
            session: &bundle.session,
        };
        let limits = SessionLimits {
            deadline: Some(deadline),
        };
        let mut outputs = RunOutputs {
            traces: Vec::new(),
            trace_hashes: Vec::new(),
            measures: MEASURES_FILE.to_owned(),
        };
        let mut sessions = Vec::new();
        let io_fail = |e: io::Error| RunFailure::new("STORE_IO", e.to_string());
        for user in 0..bundle.repetitions {
            let outcome = sim.run_user(user, &injected, limits).map_err(RunFailure::from)?;
            let rel = trace_file(user);
            fs::write(dir.join(&rel), &outcome.trace.bytes).map_err(io_fail)?;
            log.info(&format!(
                "user {user} topic {} ended {} after {} events",
                outcome.topic_id,
                outcome.end_reason.as_str(),
                outcome.trace.events.len()
            ));
            outputs.traces.push(rel);
            outputs.trace_hashes.push(outcome.trace.hash());
            sessions.push(compute_session_measures(&outcome.trace.events, env.qrels.as_deref()));
        }
        let measures = RunMeasures::from_sessions(sessions);
        let bytes = canonical::encode(&measures).map_err(|e| RunFailure::new("PARSE_ERROR", e.to_string()))?;
        write_atomic(&dir.join(MEASURES_FILE), &bytes).map_err(io_fail)?;
        Ok(outputs)
    }

    fn checkout_components(
        &self,
        bundle: &ExperimentBundle,
        dir: &Path,
        deadline: Instant,
        log: RunLog,
    ) -> Result<Injected, RunFailure> {
        let mut nodes = HashMap::new();
        for node in &bundle.pipeline.nodes {
            let ComponentSource::Registry { commit_id, .. } = &node.component.source else {
                continue;
            };
            let fail = |code: &str, detail: String| RunFailure {
                code: code.to_owned(),
                node_id: Some(node.node_id.to_string()),
                detail,
            };
            let checkout = protocol::checkout_dir(dir, node.node_id.as_str());
            let tree = self
                .registry
                .checkout(commit_id.as_str(), &checkout)
                .map_err(|e| fail(e.code(), e.to_string()))?;
            let manifest = tree.manifest().map_err(|e| fail(e.code(), e.to_string()))?;
            let schema = tree.schema().map_err(|e| fail(e.code(), e.to_string()))?;
            log.info(&format!("node {} checked out {commit_id}", node.node_id));
            nodes.insert(
                node.node_id.to_string(),
                InjectedNode {
                    spec: LaunchSpec {
                        node_id: node.node_id.to_string(),
                        checkout: checkout.canonicalize().unwrap_or(checkout),
                        manifest,
                        request_timeout: self.config.request_timeout,
                        deadline: Some(deadline),
                    },
                    schema,
                },
            );
        }
        Ok(Injected { nodes, log })
    }

    /// Run bundles on up to `parallelism` workers; records come back in
    /// submission order and one failure never stops the others.
    pub fn execute_batch(&self, bundles: &[ExperimentBundle], parallelism: usize) -> Result<Vec<RunRecord>, ExecutorError> {
        let prepared = bundles.iter().map(|b| self.prepare(b)).collect::<Result<Vec<_>, _>>()?;
        self.run_batch(prepared, bundles, parallelism)
    }

    /// Execute already-prepared records (see [`Executor::prepare`]).
    pub fn run_batch(
        &self,
        prepared: Vec<RunRecord>,
        bundles: &[ExperimentBundle],
        parallelism: usize,
    ) -> Result<Vec<RunRecord>, ExecutorError> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<RunRecord, ExecutorError>>>> =
            prepared.iter().map(|_| Mutex::new(None)).collect();
        let workers = parallelism.clamp(1, bundles.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= bundles.len() {
                        break;
                    }
                    let out = self.run_prepared(prepared[i].clone(), &bundles[i]);
                    *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(out);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every slot is filled"))
            .collect()
    }

    /// True when any node is flagged external, on the bundle or in its
    /// registry manifest.
    pub fn involves_external(&self, bundle: &ExperimentBundle) -> bool {
        bundle.any_external()
            || bundle.pipeline.nodes.iter().any(|n| match &n.component.source {
                ComponentSource::Registry { commit_id, .. } => self
                    .registry
                    .tree(commit_id.as_str())
                    .and_then(|t| t.manifest())
                    .is_ok_and(|m| m.external),
                ComponentSource::Builtin => false,
            })
    }

    pub fn verify_reproduction(
        &self,
        bundle: &ExperimentBundle,
        recorded: &[ContentHash],
    ) -> Result<(Reproduction, Option<RunRecord>), ExecutorError> {
        if self.involves_external(bundle) {
            return Ok((Reproduction::ScopeLimited, None));
        }
        let record = self.execute(bundle)?;
        let verdict = match &record.failure {
            Some(f) => Reproduction::Fail {
                first_divergent_user: None,
                failure: Some(f.clone()),
            },
            None => compare_hashes(record.trace_hashes(), recorded),
        };
        Ok((verdict, Some(record)))
    }
}

pub fn compare_hashes(actual: &[ContentHash], recorded: &[ContentHash]) -> Reproduction {
    let n = actual.len().max(recorded.len());
    match (0..n).find(|&i| actual.get(i) != recorded.get(i)) {
        None => Reproduction::Pass,
        Some(i) => Reproduction::Fail {
            first_divergent_user: Some(i as u32),
            failure: None,
        },
    }
}

struct InjectedNode {
    spec: LaunchSpec,
    schema: ParameterSchema,
}

/// Starts registry components as subprocesses, one per node per session.
struct Injected {
    nodes: HashMap<String, InjectedNode>,
    log: RunLog,
}

impl CustomComponents for Injected {
    fn instantiate(&self, node: &PipelineNode, ctx: &SessionContext<'_>) -> Result<AnyComponent, EngineError> {
        let id = node.node_id.to_string();
        let injected = self
            .nodes
            .get(&id)
            .ok_or_else(|| EngineError::Config(format!("node {id} was not checked out")))?;
        let params = injected.schema.resolve(&node.component.params);
        let role = node.component.role;
        let ext = External::start(&injected.spec, role, params, ctx.topic, Some(self.log.clone())).map_err(|e| {
            EngineError::Component {
                node_id: id.clone(),
                code: e.code,
                detail: e.detail,
            }
        })?;
        Ok(match role {
            ComponentRole::QueryGenerator => AnyComponent::QueryGenerator(Box::new(ext)),
            ComponentRole::SnippetClassifier => AnyComponent::SnippetClassifier(Box::new(ext)),
            ComponentRole::DocumentClassifier => AnyComponent::DocumentClassifier(Box::new(ext)),
            ComponentRole::StoppingStrategy => AnyComponent::StoppingStrategy(Box::new(ext)),
            ComponentRole::SearchBackend => {
                return Err(EngineError::Config(format!("node {id}: registry search backends are not supported")))
            }
        })
    }
}
