//! `simworks`: headless front end over a workspace directory.
//!
//! Exit codes: 0 success or PASS, 2 invalid input (validation failure,
//! unparsable file, non-empty diff with `--exit-code`), 3 run or replay
//! failure, 4 I/O or configuration error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use simworks_api::ServiceConfig;
use simworks_core::bundle::{bundle_hash, diff_bundles, export_bundle, import_bundle, validate_bundle, BundleDiff, BundleError, ExperimentBundle};
use simworks_core::canonical::{self, ContentHash, Value};
use simworks_core::dataset::Qrels;
use simworks_core::engine::{compute_session_measures, RunMeasures, SessionTrace, TraceEvent};
use simworks_core::executor::{ExecutorConfig, Reproduction, RunRecord, RunStatus, LOG_FILE, RECORD_FILE};
use simworks_core::model::ValidationReport;
use simworks_core::registry::{static_check, ComponentTree, ExpectedHead, RegistryError};
use simworks_core::templates::{TemplateError, TemplateStatus, VersionSelector};
use simworks_core::workspace::Workspace;

const INVALID: u8 = 2;
const RUN_FAILED: u8 = 3;
const IO: u8 = 4;

#[derive(Parser)]
#[command(name = "simworks", version, about = "Validate, run and replay search-session simulation bundles")]
struct Cli {
    /// Workspace holding templates, the component registry, bundles and runs.
    #[arg(long, global = true, env = "SIMWORKS_STORE", default_value = ".simworks")]
    store: PathBuf,
    /// Canonical JSON on standard output instead of tables.
    #[arg(long, global = true)]
    porcelain: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a bundle against the schema, the template store and the registry.
    Validate { bundle: PathBuf },
    /// Execute a bundle and copy its outputs to a directory.
    Run {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replace seeds.master before hashing and executing.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Identity-relevant differences between two bundles.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Exit 2 when the bundles differ.
        #[arg(long)]
        exit_code: bool,
    },
    /// Write the export layout for a bundle, optionally with run outputs.
    Export {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory written by `run --out`.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Verify an export and store its bundle in the workspace.
    Import { dir: PathBuf },
    /// Re-execute a bundle and compare with recorded trace hashes.
    ReplayCheck {
        bundle: PathBuf,
        /// File with {trace_hashes} and optionally {bundle_hash}, such as replay.canon.json.
        manifest: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
    },
    #[command(subcommand)]
    Template(TemplateCommand),
    #[command(subcommand)]
    Component(ComponentCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Session measures of a trace file.
    Measures {
        trace: PathBuf,
        #[arg(long)]
        qrels: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long)]
    wall_clock_ms: Option<u64>,
    #[arg(long)]
    request_timeout_ms: Option<u64>,
    #[arg(long)]
    max_sessions: Option<u32>,
}

impl LimitArgs {
    fn config(&self) -> ExecutorConfig {
        let d = ExecutorConfig::default();
        ExecutorConfig {
            wall_clock: self.wall_clock_ms.map_or(d.wall_clock, Duration::from_millis),
            request_timeout: self.request_timeout_ms.map_or(d.request_timeout, Duration::from_millis),
            max_sessions: self.max_sessions.unwrap_or(d.max_sessions),
        }
    }
}

#[derive(Subcommand)]
enum TemplateCommand {
    /// Publish a draft; dataset paths resolve next to the draft file.
    Publish { draft: PathBuf },
    Get {
        name: String,
        /// A version number or "active".
        #[arg(default_value = "active")]
        version: String,
    },
    List,
}

#[derive(Subcommand)]
enum ComponentCommand {
    /// Commit a component directory; the name comes from its manifest.
    Commit {
        dir: PathBuf,
        #[arg(long)]
        namespace: String,
        #[arg(long)]
        author: String,
        #[arg(long)]
        message: String,
        /// Expected current head, or "none" for a first commit.
        #[arg(long)]
        parent: Option<String>,
    },
    Checkout {
        commit_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Static checks on a component directory.
    Check { dir: PathBuf },
}

struct Failure {
    exit: u8,
    message: String,
}

fn fail(exit: u8, message: impl Into<String>) -> Failure {
    Failure {
        exit,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit)
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let out = Out { porcelain: cli.porcelain };
    match &cli.command {
        Command::Validate { bundle } => validate(&out, &cli.store, bundle),
        Command::Run { bundle, out: dest, seed, limits } => run(&out, &cli.store, bundle, dest, *seed, limits),
        Command::Diff { a, b, exit_code } => diff(&out, a, b, *exit_code),
        Command::Export { bundle, out: dest, run } => export(&out, bundle, dest, run.as_deref()),
        Command::Import { dir } => import(&out, &cli.store, dir),
        Command::ReplayCheck { bundle, manifest, limits } => replay_check(&out, &cli.store, bundle, manifest, limits),
        Command::Template(t) => template(&out, &cli.store, t),
        Command::Component(c) => component(&out, &cli.store, c),
        Command::Serve { config } => {
            let cfg = ServiceConfig::read(config).map_err(|e| fail(IO, e))?;
            simworks_api::serve_blocking(cfg).map_err(|e| fail(IO, format!("{}: {e}", config.display())))?;
            Ok(0)
        }
        Command::Measures { trace, qrels } => measures(&out, trace, qrels.as_deref()),
    }
}

/// Machine output in canonical form, or a human rendering.
struct Out {
    porcelain: bool,
}

impl Out {
    fn emit<T: Serialize + ?Sized>(&self, value: &T, human: impl FnOnce() -> String) -> Result<(), Failure> {
        let text = if self.porcelain {
            let mut bytes = canonical::encode(value).map_err(|e| fail(IO, format!("encoding output: {e}")))?;
            bytes.push(b'\n');
            bytes
        } else {
            human().into_bytes()
        };
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(&text)
            .and_then(|_| stdout.flush())
            .map_err(|e| fail(IO, format!("stdout: {e}")))
    }
}

fn open_store(store: &Path) -> Result<Workspace, Failure> {
    Workspace::open(store).map_err(|e| fail(IO, format!("store {}: {e}", store.display())))
}

fn bundle_failure(path: &Path, e: BundleError) -> Failure {
    let exit = match e {
        BundleError::Io(_) | BundleError::StoreIo(_) | BundleError::DestNotEmpty(_) | BundleError::MissingFile(_) => IO,
        _ => INVALID,
    };
    fail(exit, format!("{}: {e}", path.display()))
}

fn read_bundle(path: &Path) -> Result<ExperimentBundle, Failure> {
    ExperimentBundle::read(path).map_err(|e| bundle_failure(path, e))
}

fn read_canonical<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let bytes = fs::read(path).map_err(|e| fail(IO, format!("{}: {e}", path.display())))?;
    canonical::decode(&bytes).map_err(|e| fail(INVALID, format!("{}: {}: {e}", path.display(), e.code())))
}

fn hash_of(b: &ExperimentBundle, path: &Path) -> Result<ContentHash, Failure> {
    bundle_hash(b).map_err(|e| fail(INVALID, format!("{}: {}: {e}", path.display(), e.code())))
}

/// Validation failure: every violation goes to stderr, naming file and field.
fn check_valid(ws: &Workspace, b: &ExperimentBundle, path: &Path) -> Result<ValidationReport, Failure> {
    let report = validate_bundle(b, &ws.templates, &ws.registry).map_err(|e| bundle_failure(path, e))?;
    for v in &report.violations {
        let mut at = Vec::new();
        if let Some(n) = &v.node_id {
            at.push(format!("node {n}"));
        }
        if let Some(f) = &v.field {
            at.push(format!("field {f}"));
        }
        let at = if at.is_empty() { String::new() } else { format!(" [{}]", at.join(", ")) };
        eprintln!("{}: {}: {}{at}", path.display(), v.code, v.detail);
    }
    Ok(report)
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    bundle_hash: ContentHash,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

fn validate(out: &Out, store: &Path, path: &Path) -> Outcome {
    let ws = open_store(store)?;
    let b = read_bundle(path)?;
    let hash = hash_of(&b, path)?;
    let report = check_valid(&ws, &b, path)?;
    out.emit(&ValidateOutput { bundle_hash: hash.clone(), report: &report }, || {
        if report.ok {
            format!("valid  {hash}\n")
        } else {
            format!("invalid  {} violation(s)\n", report.violations.len())
        }
    })?;
    Ok(if report.ok { 0 } else { INVALID })
}

/// What `replay-check` compares against; `run --out` writes one.
#[derive(Serialize, Deserialize)]
struct ReplayManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bundle_hash: Option<ContentHash>,
    trace_hashes: Vec<ContentHash>,
}

const REPLAY_FILE: &str = "replay.canon.json";

fn prepare_out_dir(dir: &Path) -> Result<(), Failure> {
    let io = |e: std::io::Error| fail(IO, format!("{}: {e}", dir.display()));
    if dir.exists() && fs::read_dir(dir).map_err(io)?.next().is_some() {
        return Err(fail(IO, format!("{}: DEST_NOT_EMPTY: output directory must be absent or empty", dir.display())));
    }
    fs::create_dir_all(dir).map_err(io)
}

fn copy_dir(src: &Path, dest: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dest)?;
    for entry in fs::read_dir(src)? {
        let entry = entry?;
        let target = dest.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RunOutput<'a> {
    bundle_hash: &'a ContentHash,
    run_id: &'a str,
    status: RunStatus,
    trace_hashes: &'a [ContentHash],
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a simworks_core::executor::RunFailure>,
}

fn run(out: &Out, store: &Path, path: &Path, dest: &Path, seed: Option<u64>, limits: &LimitArgs) -> Outcome {
    let ws = open_store(store)?;
    let mut b = read_bundle(path)?;
    if let Some(s) = seed {
        b.seeds.master = s;
    }
    let hash = hash_of(&b, path)?;
    if !check_valid(&ws, &b, path)?.ok {
        return Err(fail(INVALID, format!("{}: bundle {hash} is invalid", path.display())));
    }
    prepare_out_dir(dest)?;
    let ex = ws.executor(limits.config()).map_err(|e| fail(IO, format!("store {}: {e}", store.display())))?;
    let record = ex.execute(&b).map_err(|e| fail(IO, format!("run of {}: {e}", path.display())))?;

    let run_dir = ex.run_dir(&record.run_id);
    let io = |e: std::io::Error| fail(IO, format!("{}: {e}", dest.display()));
    for f in ["bundle.canon.json", RECORD_FILE, LOG_FILE] {
        fs::copy(run_dir.join(f), dest.join(f)).map_err(io)?;
    }
    copy_dir(&run_dir.join("outputs"), &dest.join("outputs")).map_err(io)?;
    let replay = ReplayManifest {
        bundle_hash: Some(hash.clone()),
        trace_hashes: record.trace_hashes().to_vec(),
    };
    let bytes = canonical::encode(&replay).map_err(|e| fail(IO, e.to_string()))?;
    fs::write(dest.join(REPLAY_FILE), bytes).map_err(io)?;

    out.emit(
        &RunOutput {
            bundle_hash: &hash,
            run_id: &record.run_id,
            status: record.status,
            trace_hashes: record.trace_hashes(),
            failure: record.failure.as_ref(),
        },
        || human_run(&hash, &record),
    )?;
    match &record.failure {
        None => Ok(0),
        Some(f) => Err(fail(
            RUN_FAILED,
            format!(
                "run {} failed: {}{}: {}",
                record.run_id,
                f.code,
                f.node_id.as_ref().map(|n| format!(" at node {n}")).unwrap_or_default(),
                f.detail
            ),
        )),
    }
}

fn human_run(hash: &ContentHash, r: &RunRecord) -> String {
    let status = format!("{:?}", r.status).to_uppercase();
    let mut s = format!("bundle_hash  {hash}\nrun_id       {}\nstatus       {status}\n", r.run_id);
    for (i, h) in r.trace_hashes().iter().enumerate() {
        s.push_str(&format!("trace u{i:<6} {h}\n"));
    }
    s
}

fn diff(out: &Out, a: &Path, b: &Path, exit_code: bool) -> Outcome {
    let d = diff_bundles(&read_bundle(a)?, &read_bundle(b)?);
    out.emit(&d, || human_diff(&d))?;
    Ok(if exit_code && !d.is_empty() { INVALID } else { 0 })
}

fn show(v: &Option<Value>) -> String {
    match v {
        Some(v) => canonical::encode_string(v).unwrap_or_default(),
        None => "(unset)".into(),
    }
}

fn human_diff(d: &BundleDiff) -> String {
    if d.is_empty() {
        return "no differences\n".into();
    }
    let mut s = String::new();
    if d.structure_changed {
        s.push_str("pipeline structure changed\n");
    }
    for c in &d.seed_changed {
        s.push_str(&format!("seed          {} -> {}\n", c.old, c.new));
    }
    for c in &d.template_changed {
        s.push_str(&format!("template      {} -> {}\n", c.old, c.new));
    }
    for c in &d.component_changed {
        s.push_str(&format!("component     {}: {} -> {}\n", c.node_id, c.old.name, c.new.name));
    }
    for c in &d.param_changed {
        s.push_str(&format!("param         {}.{}: {} -> {}\n", c.node_id, c.key, show(&c.old), show(&c.new)));
    }
    for c in &d.field_changed {
        s.push_str(&format!("field         {}: {} -> {}\n", c.field, show(&Some(c.old.clone())), show(&Some(c.new.clone()))));
    }
    s
}

fn export(out: &Out, path: &Path, dest: &Path, run: Option<&Path>) -> Outcome {
    let b = read_bundle(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest = export_bundle(&b, base, run, dest).map_err(|e| bundle_failure(path, e))?;
    out.emit(&manifest, || {
        manifest
            .files
            .iter()
            .map(|(p, h)| format!("{h}  {p}\n"))
            .collect()
    })?;
    Ok(0)
}

#[derive(Serialize)]
struct ImportOutput {
    bundle_hash: ContentHash,
    has_outputs: bool,
}

fn import(out: &Out, store: &Path, dir: &Path) -> Outcome {
    let imported = import_bundle(dir).map_err(|e| bundle_failure(dir, e))?;
    let ws = open_store(store)?;
    let hash = ws
        .put_bundle(&imported.bundle)
        .map_err(|e| fail(IO, format!("store {}: {e}", store.display())))?;
    let o = ImportOutput {
        bundle_hash: hash,
        has_outputs: imported.has_outputs,
    };
    out.emit(&o, || format!("imported  {}\n", o.bundle_hash))?;
    Ok(0)
}

fn replay_check(out: &Out, store: &Path, path: &Path, manifest_path: &Path, limits: &LimitArgs) -> Outcome {
    let ws = open_store(store)?;
    let b = read_bundle(path)?;
    let manifest: ReplayManifest = read_canonical(manifest_path)?;
    let hash = hash_of(&b, path)?;
    if let Some(recorded) = &manifest.bundle_hash {
        if *recorded != hash {
            return Err(fail(
                RUN_FAILED,
                format!("{}: FAIL: manifest records bundle {recorded}, {} is {hash}", manifest_path.display(), path.display()),
            ));
        }
    }
    if !check_valid(&ws, &b, path)?.ok {
        return Err(fail(INVALID, format!("{}: bundle {hash} is invalid", path.display())));
    }
    let ex = ws.executor(limits.config()).map_err(|e| fail(IO, format!("store {}: {e}", store.display())))?;
    let (verdict, record) = ex
        .verify_reproduction(&b, &manifest.trace_hashes)
        .map_err(|e| fail(IO, format!("replay of {}: {e}", path.display())))?;
    let mut v = canonical::to_value(&verdict).map_err(|e| fail(IO, e.to_string()))?;
    if let (Value::Map(m), Some(r)) = (&mut v, &record) {
        m.insert("run_id".into(), Value::Str(r.run_id.clone()));
    }
    out.emit(&v, || format!("{}\n", verdict.as_str()))?;
    match verdict {
        Reproduction::Pass | Reproduction::ScopeLimited => Ok(0),
        Reproduction::Fail {
            first_divergent_user,
            failure,
        } => {
            let why = match (first_divergent_user, failure) {
                (_, Some(f)) => format!("re-execution failed: {} {}", f.code, f.detail),
                (Some(u), None) => format!("trace of user {u} differs from {}", manifest_path.display()),
                (None, None) => "traces differ".into(),
            };
            Err(fail(RUN_FAILED, format!("FAIL: {why}")))
        }
    }
}

fn template_failure(what: &str, e: TemplateError) -> Failure {
    let exit = if matches!(e, TemplateError::Io(_)) { IO } else { INVALID };
    fail(exit, format!("{what}: {e}"))
}

#[derive(Serialize)]
struct TemplateEntry {
    name: String,
    version: u32,
    status: TemplateStatus,
}

fn template(out: &Out, store: &Path, cmd: &TemplateCommand) -> Outcome {
    let ws = open_store(store)?;
    match cmd {
        TemplateCommand::Publish { draft } => {
            let r = ws
                .templates
                .publish_file(draft)
                .map_err(|e| template_failure(&draft.display().to_string(), e))?;
            out.emit(&r, || format!("published  {r}\n"))?;
        }
        TemplateCommand::Get { name, version } => {
            let sel: VersionSelector = version.parse().map_err(|e: String| fail(INVALID, format!("version: {e}")))?;
            let stored = ws.templates.get(name, sel).map_err(|e| template_failure(name, e))?;
            let t = &stored.template;
            let view = BTreeMap::from([
                ("status", canonical::to_value(&stored.status).map_err(|e| fail(IO, e.to_string()))?),
                ("template", canonical::to_value(t).map_err(|e| fail(IO, e.to_string()))?),
            ]);
            out.emit(&view, || {
                let mut s = format!(
                    "{}@{}  {:?}\nengine   {}\nbackend  {}\ncorpus   {}\ntopics   {}\n",
                    t.name, t.version, stored.status, t.engine_version, t.backend.kind.as_str(), t.dataset.corpus.sha256, t.dataset.topics.sha256
                );
                if let Some(q) = &t.dataset.qrels {
                    s.push_str(&format!("qrels    {}\n", q.sha256));
                }
                s.push_str(&format!("baselines {}\n", t.baselines.len()));
                s
            })?;
        }
        TemplateCommand::List => {
            let list: Vec<TemplateEntry> = ws
                .templates
                .list()
                .map_err(|e| template_failure(&store.display().to_string(), e))?
                .into_iter()
                .map(|(name, version, status)| TemplateEntry { name, version, status })
                .collect();
            out.emit(&BTreeMap::from([("templates", &list)]), || {
                list.iter()
                    .map(|t| format!("{:<24} {:>4}  {:?}\n", t.name, t.version, t.status))
                    .collect()
            })?;
        }
    }
    Ok(0)
}

fn registry_failure(what: &str, e: RegistryError) -> Failure {
    let exit = match e {
        RegistryError::Io(_) | RegistryError::Corrupt(_) | RegistryError::DestNotEmpty(_) => IO,
        RegistryError::ConcurrentHead(_) => RUN_FAILED,
        _ => INVALID,
    };
    fail(exit, format!("{what}: {e}"))
}

#[derive(Serialize)]
struct CommitOutput {
    commit_id: ContentHash,
    tree_hash: ContentHash,
}

fn component(out: &Out, store: &Path, cmd: &ComponentCommand) -> Outcome {
    match cmd {
        ComponentCommand::Commit {
            dir,
            namespace,
            author,
            message,
            parent,
        } => {
            let ws = open_store(store)?;
            let what = dir.display().to_string();
            let tree = ComponentTree::from_dir(dir).map_err(|e| fail(IO, format!("{what}: {e}")))?;
            let name = tree.manifest().map_err(|e| registry_failure(&what, e))?.name;
            let expected = match parent.as_deref() {
                None => ExpectedHead::Current,
                Some("none") => ExpectedHead::Exactly(None),
                Some(p) => ExpectedHead::Exactly(Some(
                    ContentHash::parse(p).ok_or_else(|| fail(INVALID, format!("--parent: {p:?} is not a commit id")))?,
                )),
            };
            let c = ws
                .registry
                .commit_component_cas(namespace, name.as_str(), &tree, author, message, expected)
                .map_err(|e| registry_failure(&what, e))?;
            let o = CommitOutput {
                commit_id: c.commit_id,
                tree_hash: c.tree_hash,
            };
            out.emit(&o, || format!("commit  {}\ntree    {}\n", o.commit_id, o.tree_hash))?;
            Ok(0)
        }
        ComponentCommand::Checkout { commit_id, out: dest } => {
            let ws = open_store(store)?;
            let tree = ws.registry.checkout(commit_id, dest).map_err(|e| registry_failure(commit_id, e))?;
            let o = BTreeMap::from([("tree_hash", tree.tree_hash())]);
            out.emit(&o, || format!("checked out {commit_id} into {}\n", dest.display()))?;
            Ok(0)
        }
        ComponentCommand::Check { dir } => {
            let tree = ComponentTree::from_dir(dir).map_err(|e| fail(IO, format!("{}: {e}", dir.display())))?;
            let report = static_check(&tree);
            out.emit(&report, || {
                if report.findings.is_empty() {
                    return "no findings\n".into();
                }
                report
                    .findings
                    .iter()
                    .map(|f| format!("{:?}  {}  {}: {}\n", f.severity, f.code, f.path.as_deref().unwrap_or("-"), f.detail))
                    .collect()
            })?;
            Ok(if report.has_errors() { INVALID } else { 0 })
        }
    }
}

/// Measures for every session in a trace file (one or more users).
fn measures(out: &Out, trace: &Path, qrels: Option<&Path>) -> Outcome {
    let bytes = fs::read(trace).map_err(|e| fail(IO, format!("{}: {e}", trace.display())))?;
    let events = SessionTrace::parse(&bytes).map_err(|e| fail(INVALID, format!("{}: {}: {e}", trace.display(), e.code())))?;
    let qrels = match qrels {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| fail(IO, format!("{}: {e}", p.display())))?;
            Some(Qrels::parse(std::io::BufReader::new(f)).map_err(|e| fail(INVALID, format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let mut by_user: BTreeMap<u32, Vec<TraceEvent>> = BTreeMap::new();
    for e in events {
        by_user.entry(e.user).or_default().push(e);
    }
    let sessions = by_user
        .values()
        .map(|ev| compute_session_measures(ev, qrels.as_ref()))
        .collect();
    let m = RunMeasures::from_sessions(sessions);
    out.emit(&m, || {
        let mut s = format!(
            "{:>5} {:<10} {:>7} {:>8} {:>6} {:>6} {:>9} {:>9}  {}\n",
            "user", "topic", "queries", "snippets", "clicks", "marked", "precision", "sim_time", "end"
        );
        for r in &m.sessions {
            let p = r.marked_precision.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:>5} {:<10} {:>7} {:>8} {:>6} {:>6} {:>9} {:>9.1}  {}\n",
                r.user, r.topic_id, r.queries_issued, r.snippets_examined, r.clicks, r.docs_marked, p, r.session_sim_time, r.end_reason
            ));
        }
        for (k, v) in &m.mean {
            s.push_str(&format!("mean {k} = {v:.4}\n"));
        }
        s
    })?;
    Ok(0)
}
