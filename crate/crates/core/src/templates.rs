//! Environment templates: append-only, versioned packages of dataset,
//! backend configuration and baseline pipelines.
//!
//! Layout under the store root:
//!
//! ```text
//! index.canon.json                      active version per name
//! templates/<name>/<version>/template.canon.json
//! templates/<name>/<version>/{corpus.jsonl, topics.jsonl, qrels.txt}
//! ```
//!
//! A published version directory is never rewritten. Publishing stages the
//! new version in a hidden directory and renames it into place, then swaps
//! the index by atomic rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{self, CanonicalError, ContentHash, Value};
use crate::catalog::Catalog;
use crate::dataset::{parse_topics, Qrels, Topic};
use crate::fsutil::{self, hash_file, write_atomic, StoreLock};
use crate::model::{is_relative_clean, validate_pipeline, Ident, PipelineGraph, ValidationReport};
use crate::search::{Index, MockConfig, SearchError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: ContentHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub corpus: FileRef,
    pub topics: FileRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qrels: Option<FileRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendType {
    Bm25,
    Mock,
}

impl BackendType {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendType::Bm25 => "bm25",
            BackendType::Mock => "mock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(rename = "type")]
    pub kind: BackendType,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

/// Template content as submitted for publishing. Dataset paths are relative
/// to the directory the draft was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateDraft {
    pub name: Ident,
    pub engine_version: String,
    pub dataset: DatasetSpec,
    pub backend: BackendConfig,
    #[serde(default)]
    pub baselines: Vec<PipelineGraph>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStatus {
    Active,
    Superseded,
}

/// A published template version. `status` lives in the store index, not in
/// the immutable template file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentTemplate {
    pub name: Ident,
    pub version: u32,
    pub engine_version: String,
    pub dataset: DatasetSpec,
    pub backend: BackendConfig,
    pub baselines: Vec<PipelineGraph>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTemplate {
    pub template: EnvironmentTemplate,
    pub status: TemplateStatus,
    /// Exact bytes of `template.canon.json` as published.
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateRef {
    pub name: Ident,
    pub version: u32,
}

impl std::fmt::Display for TemplateRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

impl TemplateRef {
    pub fn new(name: &str, version: u32) -> Self {
        TemplateRef {
            name: Ident::new(name).expect("valid template name"),
            version,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VersionSelector {
    Exact(u32),
    Active,
}

impl std::str::FromStr for VersionSelector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "active" {
            return Ok(VersionSelector::Active);
        }
        match s.parse::<u32>() {
            Ok(v) if v >= 1 => Ok(VersionSelector::Exact(v)),
            _ => Err(format!("version must be a positive integer or \"active\", got {s:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("NOT_FOUND: template {0}")]
    NotFound(String),
    #[error("HASH_MISMATCH: {path} expected {expected} got {actual}")]
    HashMismatch {
        path: String,
        expected: ContentHash,
        actual: ContentHash,
    },
    #[error("MISSING_FILE: {0}")]
    MissingFile(String),
    #[error("INVALID_BASELINE: baseline {index}: {report:?}")]
    InvalidBaseline { index: usize, report: ValidationReport },
    #[error("BAD_TEMPLATE: {0}")]
    BadTemplate(String),
    #[error("DATASET_ERROR: {0}")]
    Dataset(#[from] SearchError),
    #[error("FORMAT_ERROR: {0}")]
    Format(#[from] CanonicalError),
    #[error("STORE_IO: {0}")]
    Io(#[from] std::io::Error),
}

impl TemplateError {
    pub fn code(&self) -> &'static str {
        match self {
            TemplateError::NotFound(_) => "NOT_FOUND",
            TemplateError::HashMismatch { .. } => "HASH_MISMATCH",
            TemplateError::MissingFile(_) => "MISSING_FILE",
            TemplateError::InvalidBaseline { .. } => "INVALID_BASELINE",
            TemplateError::BadTemplate(_) => "BAD_TEMPLATE",
            TemplateError::Dataset(e) => e.code(),
            TemplateError::Format(e) => e.code(),
            TemplateError::Io(_) => "STORE_IO",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    active: u32,
    versions: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct StoreIndex {
    templates: BTreeMap<String, IndexEntry>,
}

const TEMPLATE_FILE: &str = "template.canon.json";
const INDEX_FILE: &str = "index.canon.json";

#[derive(Debug, Clone)]
pub struct TemplateStore {
    root: PathBuf,
}

impl TemplateStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, TemplateError> {
        let root = root.into();
        fs::create_dir_all(root.join("templates"))?;
        Ok(TemplateStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn version_dir(&self, name: &str, version: u32) -> PathBuf {
        self.root.join("templates").join(name).join(version.to_string())
    }

    fn read_index(&self) -> Result<StoreIndex, TemplateError> {
        match fs::read(self.root.join(INDEX_FILE)) {
            Ok(bytes) => Ok(canonical::decode(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(StoreIndex::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Numeric version directories present on disk for `name`.
    fn versions_on_disk(&self, name: &str) -> Result<Vec<u32>, TemplateError> {
        let dir = self.root.join("templates").join(name);
        let mut out = Vec::new();
        match fs::read_dir(&dir) {
            Ok(rd) => {
                for entry in rd {
                    if let Some(v) = entry?.file_name().to_str().and_then(|s| s.parse::<u32>().ok()) {
                        out.push(v);
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Publish a draft whose dataset files live relative to `source_dir`.
    pub fn publish(&self, draft: &TemplateDraft, source_dir: &Path) -> Result<TemplateRef, TemplateError> {
        if draft.engine_version.trim().is_empty() {
            return Err(TemplateError::BadTemplate("engine_version must be non-empty".into()));
        }
        let catalog = Catalog::builtin();
        for (index, g) in draft.baselines.iter().enumerate() {
            let report = validate_pipeline(g, &catalog);
            if !report.ok {
                return Err(TemplateError::InvalidBaseline { index, report });
            }
        }
        if draft.backend.kind == BackendType::Mock {
            canonical::from_value::<MockConfig>(&Value::Map(draft.backend.params.clone()))?;
        }

        let mut files: Vec<(&str, &FileRef)> = vec![("corpus.jsonl", &draft.dataset.corpus), ("topics.jsonl", &draft.dataset.topics)];
        if let Some(q) = &draft.dataset.qrels {
            files.push(("qrels.txt", q));
        }
        let mut payloads = Vec::new();
        for (stored_name, fref) in &files {
            let src = source_dir.join(&fref.path);
            let bytes = fs::read(&src).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => TemplateError::MissingFile(src.display().to_string()),
                _ => e.into(),
            })?;
            let actual = ContentHash::of_bytes(&bytes);
            if actual != fref.sha256 {
                return Err(TemplateError::HashMismatch {
                    path: fref.path.clone(),
                    expected: fref.sha256.clone(),
                    actual,
                });
            }
            payloads.push((*stored_name, bytes));
        }
        // Dataset files must parse before they are published.
        let (corpus, topics) = (&payloads[0].1, &payloads[1].1);
        Index::from_reader(corpus.as_slice())?;
        parse_topics(topics.as_slice())?;
        if let Some((_, q)) = payloads.get(2) {
            Qrels::parse(q.as_slice())?;
        }

        let _lock = StoreLock::acquire(&self.root)?;
        let name = draft.name.as_str();
        let version = self.versions_on_disk(name)?.last().copied().unwrap_or(0) + 1;
        let stored_ref = |stored: &str, f: &FileRef| FileRef {
            path: stored.to_owned(),
            sha256: f.sha256.clone(),
        };
        let template = EnvironmentTemplate {
            name: draft.name.clone(),
            version,
            engine_version: draft.engine_version.clone(),
            dataset: DatasetSpec {
                corpus: stored_ref("corpus.jsonl", &draft.dataset.corpus),
                topics: stored_ref("topics.jsonl", &draft.dataset.topics),
                qrels: draft.dataset.qrels.as_ref().map(|q| stored_ref("qrels.txt", q)),
            },
            backend: draft.backend.clone(),
            baselines: draft.baselines.clone(),
        };

        let name_dir = self.root.join("templates").join(name);
        fs::create_dir_all(&name_dir)?;
        let staging = name_dir.join(format!(".staging-{}", uuid::Uuid::now_v7().simple()));
        fs::create_dir_all(&staging)?;
        let staged = (|| -> Result<(), TemplateError> {
            for (stored_name, bytes) in &payloads {
                fs::write(staging.join(stored_name), bytes)?;
            }
            fs::write(staging.join(TEMPLATE_FILE), canonical::encode(&template)?)?;
            fs::rename(&staging, self.version_dir(name, version))?;
            Ok(())
        })();
        if let Err(e) = staged {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }

        let mut index = self.read_index()?;
        let entry = index.templates.entry(name.to_owned()).or_default();
        entry.active = version;
        entry.versions = self.versions_on_disk(name)?;
        write_atomic(&self.root.join(INDEX_FILE), &canonical::encode(&index)?)?;

        Ok(TemplateRef {
            name: draft.name.clone(),
            version,
        })
    }

    /// Read a draft file and publish it, resolving dataset paths next to it.
    pub fn publish_file(&self, draft_path: &Path) -> Result<TemplateRef, TemplateError> {
        let bytes = fs::read(draft_path)?;
        let draft: TemplateDraft = canonical::decode(&bytes)?;
        let base = draft_path.parent().unwrap_or_else(|| Path::new("."));
        self.publish(&draft, base)
    }

    fn resolve_version(&self, name: &str, sel: VersionSelector) -> Result<u32, TemplateError> {
        let not_found = || TemplateError::NotFound(format!("{name}@{}", selector_str(sel)));
        match sel {
            VersionSelector::Exact(v) => Ok(v),
            VersionSelector::Active => self
                .read_index()?
                .templates
                .get(name)
                .map(|e| e.active)
                .ok_or_else(not_found),
        }
    }

    pub fn get(&self, name: &str, sel: VersionSelector) -> Result<StoredTemplate, TemplateError> {
        let not_found = || TemplateError::NotFound(format!("{name}@{}", selector_str(sel)));
        if !crate::model::is_identifier(name) {
            return Err(not_found());
        }
        let version = self.resolve_version(name, sel)?;
        let bytes = match fs::read(self.version_dir(name, version).join(TEMPLATE_FILE)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => return Err(e.into()),
        };
        let template: EnvironmentTemplate = canonical::decode(&bytes)?;
        let active = self.read_index()?.templates.get(name).map(|e| e.active);
        let status = if active == Some(version) {
            TemplateStatus::Active
        } else {
            TemplateStatus::Superseded
        };
        Ok(StoredTemplate { template, status, bytes })
    }

    pub fn exists(&self, r: &TemplateRef) -> bool {
        self.version_dir(r.name.as_str(), r.version).join(TEMPLATE_FILE).is_file()
    }

    /// Every (name, version, status) in the store, sorted.
    pub fn list(&self) -> Result<Vec<(String, u32, TemplateStatus)>, TemplateError> {
        let index = self.read_index()?;
        let mut out = Vec::new();
        for (name, entry) in &index.templates {
            for v in self.versions_on_disk(name)? {
                let status = if v == entry.active {
                    TemplateStatus::Active
                } else {
                    TemplateStatus::Superseded
                };
                out.push((name.clone(), v, status));
            }
        }
        Ok(out)
    }

    /// Materialize the exact pinned version, re-verifying dataset hashes.
    pub fn resolve_environment(&self, r: &TemplateRef) -> Result<Environment, TemplateError> {
        let stored = self.get(r.name.as_str(), VersionSelector::Exact(r.version))?;
        let dir = self.version_dir(r.name.as_str(), r.version);
        let t = &stored.template;
        let verify = |f: &FileRef| -> Result<PathBuf, TemplateError> {
            if !is_relative_clean(&f.path) {
                return Err(TemplateError::BadTemplate(format!("dataset path {:?} escapes the template", f.path)));
            }
            let p = fsutil::join_relative(&dir, &f.path);
            let actual = hash_file(&p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => TemplateError::MissingFile(p.display().to_string()),
                _ => e.into(),
            })?;
            if actual != f.sha256 {
                return Err(TemplateError::HashMismatch {
                    path: p.display().to_string(),
                    expected: f.sha256.clone(),
                    actual,
                });
            }
            Ok(p)
        };
        Ok(Environment {
            template_ref: r.clone(),
            engine_version: t.engine_version.clone(),
            corpus_path: verify(&t.dataset.corpus)?,
            topics_path: verify(&t.dataset.topics)?,
            qrels_path: t.dataset.qrels.as_ref().map(verify).transpose()?,
            backend: t.backend.clone(),
        })
    }
}

fn selector_str(sel: VersionSelector) -> String {
    match sel {
        VersionSelector::Exact(v) => v.to_string(),
        VersionSelector::Active => "active".into(),
    }
}

/// A resolved environment: verified dataset paths, backend config, engine pin.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub template_ref: TemplateRef,
    pub engine_version: String,
    pub corpus_path: PathBuf,
    pub topics_path: PathBuf,
    pub qrels_path: Option<PathBuf>,
    pub backend: BackendConfig,
}

impl Environment {
    pub fn load(&self) -> Result<LoadedEnvironment, TemplateError> {
        let open = |p: &Path| fs::File::open(p).map(BufReader::new);
        let index = Index::from_reader(open(&self.corpus_path)?)?;
        let topics = parse_topics(open(&self.topics_path)?)?;
        let qrels = match &self.qrels_path {
            Some(p) => Some(Arc::new(Qrels::parse(open(p)?)?)),
            None => None,
        };
        Ok(LoadedEnvironment {
            index: Arc::new(index),
            topics,
            qrels,
            backend: self.backend.clone(),
        })
    }
}

/// Dataset contents in memory, ready for the engine.
#[derive(Debug, Clone)]
pub struct LoadedEnvironment {
    pub index: Arc<Index>,
    pub topics: Vec<Topic>,
    pub qrels: Option<Arc<Qrels>>,
    pub backend: BackendConfig,
}
