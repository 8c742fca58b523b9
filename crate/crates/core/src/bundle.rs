//! Experiment bundles: the unit of sharing, archiving and replication.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{self, CanonicalError, ContentHash, Value};
use crate::catalog::Catalog;
use crate::fsutil::{self, hash_file, write_atomic};
use crate::model::{
    is_relative_clean, validate_pipeline, ComponentCatalog, ComponentRef, ComponentRole, ComponentSource,
    ParameterSchema, PipelineGraph, RegistryLookup, ValidationReport, Violation,
};
use crate::registry::{Registry, RegistryError};
use crate::templates::{TemplateError, TemplateRef, TemplateStore, VersionSelector};

pub const FORMAT_VERSION: &str = "1";
pub const BUNDLE_FILE: &str = "bundle.canon.json";
pub const MANIFEST_FILE: &str = "MANIFEST.canon.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
}

/// Simulated seconds charged per action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeCosts {
    pub query: f64,
    pub snippet: f64,
    pub doc: f64,
    pub mark: f64,
}

impl Default for TimeCosts {
    fn default() -> Self {
        TimeCosts {
            query: 10.0,
            snippet: 3.0,
            doc: 20.0,
            mark: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub costs: TimeCosts,
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_budget() -> f64 {
    600.0
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            costs: TimeCosts::default(),
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    Qrels,
    Topics,
    Corpus,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxFile {
    pub kind: AuxKind,
    pub path: String,
    pub sha256: ContentHash,
}

/// Volatile provenance; stored but never part of the bundle identity.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BundleMeta {
    #[serde(default)]
    pub created_utc: String,
    #[serde(default)]
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBundle {
    pub format_version: String,
    pub engine_version: String,
    pub template_ref: TemplateRef,
    pub pipeline: PipelineGraph,
    pub seeds: Seeds,
    pub repetitions: u32,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub aux_files: Vec<AuxFile>,
    #[serde(default)]
    pub meta: BundleMeta,
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("PARSE_ERROR: {0}")]
    Parse(CanonicalError),
    #[error("HASH_MISMATCH: {path}")]
    HashMismatch { path: String },
    #[error("MISSING_FILE: {0}")]
    MissingFile(String),
    #[error("BAD_AUX_PATH: {0:?}")]
    BadAuxPath(String),
    #[error("DEST_NOT_EMPTY: {0}")]
    DestNotEmpty(String),
    #[error("STORE_IO: {0}")]
    StoreIo(String),
    #[error("IO: {0}")]
    Io(#[from] io::Error),
    #[error("{}: {}", .0.code(), .0)]
    Format(CanonicalError),
}

impl BundleError {
    pub fn code(&self) -> &'static str {
        match self {
            BundleError::Parse(_) => "PARSE_ERROR",
            BundleError::HashMismatch { .. } => "HASH_MISMATCH",
            BundleError::MissingFile(_) => "MISSING_FILE",
            BundleError::BadAuxPath(_) => "BAD_AUX_PATH",
            BundleError::DestNotEmpty(_) => "DEST_NOT_EMPTY",
            BundleError::StoreIo(_) => "STORE_IO",
            BundleError::Io(_) => "IO",
            BundleError::Format(e) => e.code(),
        }
    }
}

impl ExperimentBundle {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        canonical::decode(bytes).map_err(BundleError::Parse)
    }

    pub fn read(path: &Path) -> Result<Self, BundleError> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => BundleError::MissingFile(path.display().to_string()),
            _ => e.into(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BundleError> {
        canonical::encode(self).map_err(BundleError::Format)
    }

    /// Canonical value with the volatile `meta` block removed.
    pub fn identity_value(&self) -> Result<Value, CanonicalError> {
        let mut v = canonical::to_value(self)?;
        if let Value::Map(m) = &mut v {
            m.remove("meta");
        }
        Ok(v)
    }

    pub fn any_external(&self) -> bool {
        self.pipeline.any_external()
    }
}

/// Identity hash of a bundle; `meta` is excluded.
pub fn bundle_hash(b: &ExperimentBundle) -> Result<ContentHash, CanonicalError> {
    canonical::content_hash(&b.identity_value()?)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Builtin catalog plus pre-resolved registry lookups.
struct ResolvedCatalog {
    builtin: Catalog,
    registry: HashMap<(String, String), RegistryLookup>,
}

impl ComponentCatalog for ResolvedCatalog {
    fn builtin_schema(&self, role: ComponentRole, name: &str) -> Option<ParameterSchema> {
        self.builtin.builtin_schema(role, name)
    }

    fn registry_component(&self, commit_id: &str, path: &str) -> RegistryLookup {
        self.registry
            .get(&(commit_id.to_owned(), path.to_owned()))
            .cloned()
            .unwrap_or(RegistryLookup::Unavailable)
    }
}

fn lookup_registry(registry: &Registry, commit_id: &str, path: &str) -> Result<RegistryLookup, BundleError> {
    if !canonical::is_hex64(commit_id) {
        return Ok(RegistryLookup::Unavailable);
    }
    let tree = match registry.tree(commit_id) {
        Ok(t) => t,
        Err(RegistryError::CommitNotFound(_)) => return Ok(RegistryLookup::CommitNotFound),
        Err(RegistryError::Io(e)) => return Err(BundleError::StoreIo(e.to_string())),
        Err(e) => return Err(BundleError::StoreIo(e.to_string())),
    };
    let manifest = tree.manifest().map_err(|e| BundleError::StoreIo(e.to_string()))?;
    let schema = tree.schema().map_err(|e| BundleError::StoreIo(e.to_string()))?;
    Ok(RegistryLookup::Found {
        category: manifest.category,
        name: manifest.name.to_string(),
        schema,
        has_path: tree.files.contains_key(path),
    })
}

/// Full validation: structure, template resolution, registry commits,
/// engine pin. Store read failures are errors; everything else is data.
pub fn validate_bundle(
    b: &ExperimentBundle,
    templates: &TemplateStore,
    registry: &Registry,
) -> Result<ValidationReport, BundleError> {
    let mut resolved = HashMap::new();
    for node in &b.pipeline.nodes {
        if let ComponentSource::Registry { commit_id, path } = &node.component.source {
            let key = (commit_id.clone(), path.clone());
            if let std::collections::hash_map::Entry::Vacant(slot) = resolved.entry(key) {
                slot.insert(lookup_registry(registry, commit_id, path)?);
            }
        }
    }
    let catalog = ResolvedCatalog {
        builtin: Catalog::builtin(),
        registry: resolved,
    };
    let mut v = validate_pipeline(&b.pipeline, &catalog).violations;

    for node in &b.pipeline.nodes {
        if let ComponentSource::Registry { commit_id, path } = &node.component.source {
            if let RegistryLookup::Found { name, .. } = catalog.registry_component(commit_id, path) {
                if name != node.component.name.as_str() {
                    v.push(
                        Violation::new(
                            "COMPONENT_NAME_MISMATCH",
                            format!("commit declares component {name}, node names {}", node.component.name),
                        )
                        .at_node(node.node_id.as_str()),
                    );
                }
            }
        }
    }

    if b.format_version != FORMAT_VERSION {
        v.push(
            Violation::new("UNSUPPORTED_FORMAT", format!("format_version {:?} is not {FORMAT_VERSION:?}", b.format_version))
                .field("format_version"),
        );
    }
    if b.repetitions == 0 {
        v.push(Violation::new("BAD_REPETITIONS", "repetitions must be positive").field("repetitions"));
    }
    if b.seeds.master > i64::MAX as u64 {
        v.push(Violation::new("BAD_SEED", "seeds.master must be at most 2^63-1").field("seeds.master"));
    }
    let s = &b.session;
    let costs = [s.costs.query, s.costs.snippet, s.costs.doc, s.costs.mark];
    if costs.iter().any(|c| !c.is_finite() || *c < 0.0) || !s.budget.is_finite() || s.budget < 0.0 {
        v.push(Violation::new("BAD_SESSION_CONFIG", "costs and budget must be finite and non-negative").field("session"));
    }
    let mut seen_aux = BTreeSet::new();
    for (i, aux) in b.aux_files.iter().enumerate() {
        if !is_relative_clean(&aux.path) {
            v.push(
                Violation::new("BAD_AUX_PATH", format!("{:?} must be relative without '..'", aux.path))
                    .field(format!("aux_files[{i}].path")),
            );
        } else if !seen_aux.insert(aux.path.as_str()) {
            v.push(Violation::new("BAD_AUX_PATH", format!("{:?} listed twice", aux.path)).field(format!("aux_files[{i}].path")));
        }
    }

    match templates.get(b.template_ref.name.as_str(), VersionSelector::Exact(b.template_ref.version)) {
        Ok(stored) => {
            let t = &stored.template;
            if t.engine_version != b.engine_version {
                v.push(
                    Violation::new(
                        "ENGINE_MISMATCH",
                        format!("bundle pins {:?}, template {} pins {:?}", b.engine_version, b.template_ref, t.engine_version),
                    )
                    .field("engine_version"),
                );
            }
            if let Some(node) = b.pipeline.node_for_role(ComponentRole::SearchBackend) {
                if node.component.source == ComponentSource::Builtin && node.component.name != *t.backend.kind.as_str() {
                    v.push(
                        Violation::new(
                            "BACKEND_MISMATCH",
                            format!("template backend is {}, pipeline uses {}", t.backend.kind.as_str(), node.component.name),
                        )
                        .at_node(node.node_id.as_str()),
                    );
                }
            }
        }
        Err(TemplateError::NotFound(_)) => {
            v.push(Violation::new("TEMPLATE_NOT_FOUND", format!("template {} is not in the store", b.template_ref)).field("template_ref"))
        }
        Err(e) => return Err(BundleError::StoreIo(e.to_string())),
    }

    Ok(ValidationReport::from_violations(v))
}

// ---------------------------------------------------------------------------
// Diff
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamChange {
    pub node_id: String,
    pub key: String,
    pub old: Option<Value>,
    pub new: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentChange {
    pub node_id: String,
    pub old: ComponentRef,
    pub new: ComponentRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedChange {
    pub old: u64,
    pub new: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateChange {
    pub old: TemplateRef,
    pub new: TemplateRef,
}

/// A change to a top-level field without a dedicated entry kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    pub old: Value,
    pub new: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BundleDiff {
    pub param_changed: Vec<ParamChange>,
    pub component_changed: Vec<ComponentChange>,
    pub seed_changed: Vec<SeedChange>,
    pub template_changed: Vec<TemplateChange>,
    pub field_changed: Vec<FieldChange>,
    pub structure_changed: bool,
}

impl BundleDiff {
    pub fn is_empty(&self) -> bool {
        self.param_changed.is_empty()
            && self.component_changed.is_empty()
            && self.seed_changed.is_empty()
            && self.template_changed.is_empty()
            && self.field_changed.is_empty()
            && !self.structure_changed
    }
}

fn same_component(a: &ComponentRef, b: &ComponentRef) -> bool {
    a.role == b.role && a.name == b.name && a.source == b.source && a.external == b.external
}

/// Account for every identity-relevant difference between two bundles.
pub fn diff_bundles(a: &ExperimentBundle, b: &ExperimentBundle) -> BundleDiff {
    let mut d = BundleDiff::default();
    if a.seeds != b.seeds {
        d.seed_changed.push(SeedChange {
            old: a.seeds.master,
            new: b.seeds.master,
        });
    }
    if a.template_ref != b.template_ref {
        d.template_changed.push(TemplateChange {
            old: a.template_ref.clone(),
            new: b.template_ref.clone(),
        });
    }
    let field = |name: &str, old: Result<Value, CanonicalError>, new: Result<Value, CanonicalError>| {
        let (old, new) = (old.unwrap_or(Value::Null), new.unwrap_or(Value::Null));
        (old != new).then(|| FieldChange {
            field: name.to_owned(),
            old,
            new,
        })
    };
    let fields = [
        field("format_version", canonical::to_value(&a.format_version), canonical::to_value(&b.format_version)),
        field("engine_version", canonical::to_value(&a.engine_version), canonical::to_value(&b.engine_version)),
        field("repetitions", canonical::to_value(&a.repetitions), canonical::to_value(&b.repetitions)),
        field("session", canonical::to_value(&a.session), canonical::to_value(&b.session)),
        field("aux_files", canonical::to_value(&a.aux_files), canonical::to_value(&b.aux_files)),
    ];
    d.field_changed.extend(fields.into_iter().flatten());

    let ids = |g: &PipelineGraph| g.nodes.iter().map(|n| n.node_id.to_string()).collect::<Vec<_>>();
    if ids(&a.pipeline) != ids(&b.pipeline) || a.pipeline.edges != b.pipeline.edges {
        d.structure_changed = true;
        return d;
    }
    for (na, nb) in a.pipeline.nodes.iter().zip(&b.pipeline.nodes) {
        let (ca, cb) = (&na.component, &nb.component);
        let node_id = na.node_id.to_string();
        if !same_component(ca, cb) {
            d.component_changed.push(ComponentChange {
                node_id,
                old: ca.clone(),
                new: cb.clone(),
            });
            continue;
        }
        let keys: BTreeSet<&String> = ca.params.keys().chain(cb.params.keys()).collect();
        for key in keys {
            let (old, new) = (ca.params.get(key), cb.params.get(key));
            if old != new {
                d.param_changed.push(ParamChange {
                    node_id: node_id.clone(),
                    key: key.clone(),
                    old: old.cloned(),
                    new: new.cloned(),
                });
            }
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Export / import
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExportManifest {
    pub files: BTreeMap<String, ContentHash>,
}

/// Write the export layout into `dest` (absent or empty):
/// `bundle.canon.json`, `aux/<path>`, optional `outputs/trace.jsonl` and
/// `outputs/measures.canon.json`, and `MANIFEST.canon.json`.
///
/// Aux paths are resolved against `aux_base`; `run_dir` is a completed run
/// directory whose per-user traces are concatenated in user order.
pub fn export_bundle(
    b: &ExperimentBundle,
    aux_base: &Path,
    run_dir: Option<&Path>,
    dest: &Path,
) -> Result<ExportManifest, BundleError> {
    if dest.exists() && fs::read_dir(dest)?.next().is_some() {
        return Err(BundleError::DestNotEmpty(dest.display().to_string()));
    }
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    files.insert(BUNDLE_FILE.to_owned(), b.to_bytes()?);
    for aux in &b.aux_files {
        if !is_relative_clean(&aux.path) {
            return Err(BundleError::BadAuxPath(aux.path.clone()));
        }
        let src = fsutil::join_relative(aux_base, &aux.path);
        let bytes = fs::read(&src).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => BundleError::MissingFile(aux.path.clone()),
            _ => e.into(),
        })?;
        if ContentHash::of_bytes(&bytes) != aux.sha256 {
            return Err(BundleError::HashMismatch { path: aux.path.clone() });
        }
        files.insert(format!("aux/{}", aux.path), bytes);
    }
    if let Some(run) = run_dir {
        let outputs = run.join("outputs");
        let mut trace = Vec::new();
        for user in 0.. {
            match fs::read(outputs.join(format!("trace.u{user}.jsonl"))) {
                Ok(bytes) => trace.extend(bytes),
                Err(e) if e.kind() == io::ErrorKind::NotFound => break,
                Err(e) => return Err(e.into()),
            }
        }
        files.insert("outputs/trace.jsonl".into(), trace);
        let measures = outputs.join("measures.canon.json");
        let bytes = fs::read(&measures).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => BundleError::MissingFile(measures.display().to_string()),
            _ => e.into(),
        })?;
        files.insert("outputs/measures.canon.json".into(), bytes);
    }

    let mut manifest = ExportManifest::default();
    for (rel, bytes) in &files {
        let target = fsutil::join_relative(dest, rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&target, bytes)?;
        manifest.files.insert(rel.clone(), ContentHash::of_bytes(bytes));
    }
    write_atomic(
        &dest.join(MANIFEST_FILE),
        &canonical::encode(&manifest).map_err(BundleError::Format)?,
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedBundle {
    pub bundle: ExperimentBundle,
    pub manifest: ExportManifest,
    /// Directory the aux paths resolve against (`<src>/aux`).
    pub aux_dir: PathBuf,
    pub aux_files: Vec<PathBuf>,
    pub has_outputs: bool,
}

/// Read a prior export, verifying every recorded hash first.
pub fn import_bundle(src: &Path) -> Result<ImportedBundle, BundleError> {
    let manifest_path = src.join(MANIFEST_FILE);
    let bytes = fs::read(&manifest_path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => BundleError::MissingFile(MANIFEST_FILE.into()),
        _ => e.into(),
    })?;
    let manifest: ExportManifest = canonical::decode(&bytes).map_err(BundleError::Parse)?;
    for (rel, expected) in &manifest.files {
        if !is_relative_clean(rel) {
            return Err(BundleError::BadAuxPath(rel.clone()));
        }
        let actual = hash_file(&fsutil::join_relative(src, rel)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => BundleError::MissingFile(rel.clone()),
            _ => e.into(),
        })?;
        if &actual != expected {
            return Err(BundleError::HashMismatch { path: rel.clone() });
        }
    }
    if !manifest.files.contains_key(BUNDLE_FILE) {
        return Err(BundleError::MissingFile(BUNDLE_FILE.into()));
    }
    let bundle = ExperimentBundle::read(&src.join(BUNDLE_FILE))?;
    let aux_dir = src.join("aux");
    let mut aux_files = Vec::new();
    for aux in &bundle.aux_files {
        let rel = format!("aux/{}", aux.path);
        match manifest.files.get(&rel) {
            None => return Err(BundleError::MissingFile(rel)),
            Some(h) if *h != aux.sha256 => return Err(BundleError::HashMismatch { path: rel }),
            Some(_) => aux_files.push(fsutil::join_relative(src, &rel)),
        }
    }
    let has_outputs = manifest.files.contains_key("outputs/trace.jsonl");
    Ok(ImportedBundle {
        bundle,
        manifest,
        aux_dir,
        aux_files,
        has_outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ident;

    pub(crate) fn sample() -> ExperimentBundle {
        use ComponentRole::*;
        ExperimentBundle {
            format_version: FORMAT_VERSION.into(),
            engine_version: "ref/0.1".into(),
            template_ref: TemplateRef::new("demo", 1),
            pipeline: PipelineGraph::linear([
                ComponentRef::builtin(QueryGenerator, "single_term"),
                ComponentRef::builtin(SnippetClassifier, "random_attract").with_param("p", 0.5),
                ComponentRef::builtin(DocumentClassifier, "always_relevant"),
                ComponentRef::builtin(StoppingStrategy, "fixed_depth").with_param("k", 3i64),
                ComponentRef::builtin(SearchBackend, "bm25"),
            ]),
            seeds: Seeds { master: 7 },
            repetitions: 2,
            session: SessionConfig::default(),
            aux_files: vec![],
            meta: BundleMeta {
                created_utc: "2026-01-01T00:00:00Z".into(),
                author: "alice".into(),
            },
        }
    }

    #[test]
    fn meta_excluded_from_hash() {
        let a = sample();
        let mut b = sample();
        b.meta.created_utc = "2030-05-05T00:00:00Z".into();
        b.meta.author = "bob".into();
        assert_eq!(bundle_hash(&a).unwrap(), bundle_hash(&b).unwrap());
        assert!(diff_bundles(&a, &b).is_empty());
    }

    #[test]
    fn seed_changes_hash() {
        let a = sample();
        let mut b = sample();
        b.seeds.master = 8;
        assert_ne!(bundle_hash(&a).unwrap(), bundle_hash(&b).unwrap());
        assert_eq!(diff_bundles(&a, &b).seed_changed, vec![SeedChange { old: 7, new: 8 }]);
    }

    #[test]
    fn diff_single_param() {
        let a = sample();
        let mut b = sample();
        b.pipeline.nodes[3].component.params.insert("k".into(), Value::Int(5));
        let d = diff_bundles(&a, &b);
        assert_eq!(d.param_changed.len(), 1);
        let p = &d.param_changed[0];
        assert_eq!((p.node_id.as_str(), p.key.as_str()), ("stopping_strategy", "k"));
        assert_eq!((p.old.clone(), p.new.clone()), (Some(Value::Int(3)), Some(Value::Int(5))));
        assert!(!d.structure_changed && d.component_changed.is_empty());
    }

    #[test]
    fn diff_renamed_node_is_structural() {
        let a = sample();
        let mut b = sample();
        b.pipeline.nodes[0].node_id = Ident::new("gen").unwrap();
        let d = diff_bundles(&a, &b);
        assert!(d.structure_changed);
        assert!(d.param_changed.is_empty() && d.component_changed.is_empty());
    }

    #[test]
    fn diff_component_swap() {
        let a = sample();
        let mut b = sample();
        b.pipeline.nodes[1].component = ComponentRef::builtin(ComponentRole::SnippetClassifier, "rank_biased");
        let d = diff_bundles(&a, &b);
        assert_eq!(d.component_changed.len(), 1);
        assert!(d.param_changed.is_empty());
    }

    #[test]
    fn round_trip_bytes() {
        let a = sample();
        let back = ExperimentBundle::from_bytes(&a.to_bytes().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn export_import_round_trip() {
        let base = tempfile::tempdir().unwrap();
        fs::create_dir_all(base.path().join("data")).unwrap();
        fs::write(base.path().join("data/q.txt"), "t1 0 d1 1\n").unwrap();
        let mut b = sample();
        b.aux_files.push(AuxFile {
            kind: AuxKind::Qrels,
            path: "data/q.txt".into(),
            sha256: ContentHash::of_bytes(b"t1 0 d1 1\n"),
        });
        let out = base.path().join("export");
        let manifest = export_bundle(&b, base.path(), None, &out).unwrap();
        assert_eq!(manifest.files.len(), 2);
        let imported = import_bundle(&out).unwrap();
        assert_eq!(imported.bundle, b);
        assert_eq!(bundle_hash(&imported.bundle).unwrap(), bundle_hash(&b).unwrap());
        assert_eq!(imported.aux_files.len(), 1);

        fs::write(out.join("aux/data/q.txt"), "t1 0 d1 2\n").unwrap();
        match import_bundle(&out) {
            Err(BundleError::HashMismatch { path }) => assert_eq!(path, "aux/data/q.txt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn export_without_aux_lists_only_bundle() {
        let base = tempfile::tempdir().unwrap();
        let m = export_bundle(&sample(), base.path(), None, &base.path().join("e")).unwrap();
        assert_eq!(m.files.keys().collect::<Vec<_>>(), [BUNDLE_FILE]);
    }

    #[test]
    fn export_detects_aux_problems() {
        let base = tempfile::tempdir().unwrap();
        let mut b = sample();
        b.aux_files.push(AuxFile {
            kind: AuxKind::Other,
            path: "missing.txt".into(),
            sha256: ContentHash::of_bytes(b""),
        });
        let err = export_bundle(&b, base.path(), None, &base.path().join("e")).unwrap_err();
        assert_eq!(err.code(), "MISSING_FILE");
        fs::write(base.path().join("missing.txt"), "x").unwrap();
        let err = export_bundle(&b, base.path(), None, &base.path().join("e2")).unwrap_err();
        assert_eq!(err.code(), "HASH_MISMATCH");
    }
}
