//! Content-addressed registry for custom components.
//!
//! Git-like object model without remotes: file blobs, a tree listing and a
//! commit object all live under `objects/<first2>/<rest>`; each
//! `(namespace, name)` has a linear history whose head is the file
//! `heads/<namespace>/<name>`, updated by atomic rename under compare-and-set.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{self, CanonicalError, ContentHash, Value};
use crate::fsutil::{self, write_atomic, StoreLock};
use crate::model::{is_identifier, is_relative_clean, ComponentRole, Ident, ParameterSchema};

pub const MANIFEST_FILE: &str = "component.canon.json";
pub const SCHEMA_FILE: &str = "schema.canon.json";

/// Interpreter names accepted as `entrypoint[0]` without a matching file.
pub const ALLOWED_INTERPRETERS: &[&str] = &["python3", "python", "sh", "bash", "node", "ruby", "perl"];

/// Relative path → exact bytes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComponentTree {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl ComponentTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(mut self, path: &str, bytes: impl Into<Vec<u8>>) -> Self {
        self.files.insert(path.to_owned(), bytes.into());
        self
    }

    /// Hash of the sorted `[[path, sha256(bytes)], ...]` listing.
    pub fn tree_hash(&self) -> ContentHash {
        canonical::content_hash(&self.listing()).expect("tree listing contains only strings")
    }

    fn listing(&self) -> Value {
        // BTreeMap<String, _> iterates bytewise-sorted.
        Value::List(
            self.files
                .iter()
                .map(|(p, b)| Value::List(vec![Value::from(p.as_str()), Value::from(ContentHash::of_bytes(b).to_string())]))
                .collect(),
        )
    }

    pub fn manifest(&self) -> Result<ComponentManifest, RegistryError> {
        let bytes = self
            .files
            .get(MANIFEST_FILE)
            .ok_or_else(|| RegistryError::BadManifest(format!("{MANIFEST_FILE} is missing")))?;
        canonical::decode(bytes).map_err(|e| RegistryError::BadManifest(e.to_string()))
    }

    /// The declared schema, or an empty one when no schema file is present.
    pub fn schema(&self) -> Result<ParameterSchema, RegistryError> {
        match self.files.get(SCHEMA_FILE) {
            None => Ok(ParameterSchema::default()),
            Some(bytes) => canonical::decode(bytes).map_err(|e| RegistryError::BadSchema(e.to_string())),
        }
    }

    /// Read every regular file below `dir`.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut files = BTreeMap::new();
        for rel in fsutil::list_files(dir)? {
            let bytes = fs::read(fsutil::join_relative(dir, &rel))?;
            files.insert(rel, bytes);
        }
        Ok(ComponentTree { files })
    }

    /// Wire form for the HTTP API: path → UTF-8 text.
    pub fn to_text_map(&self) -> Result<BTreeMap<String, String>, RegistryError> {
        self.files
            .iter()
            .map(|(p, b)| {
                String::from_utf8(b.clone())
                    .map(|s| (p.clone(), s))
                    .map_err(|_| RegistryError::Io(io::Error::new(io::ErrorKind::InvalidData, format!("{p} is not UTF-8"))))
            })
            .collect()
    }

    pub fn from_text_map(map: BTreeMap<String, String>) -> Self {
        ComponentTree {
            files: map.into_iter().map(|(p, s)| (p, s.into_bytes())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentManifest {
    pub name: Ident,
    pub category: ComponentRole,
    pub entrypoint: Vec<String>,
    #[serde(default)]
    pub external: bool,
    /// Environment variable names passed through to the child process.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub env: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryCommit {
    pub commit_id: ContentHash,
    pub parent: Option<ContentHash>,
    pub tree_hash: ContentHash,
    pub author: String,
    pub message: String,
    pub category: ComponentRole,
    pub stored_at: String,
}

/// The identity fields of a commit; `stored_at` is deliberately absent.
#[derive(Serialize)]
struct CommitIdentity<'a> {
    parent: &'a Option<ContentHash>,
    tree_hash: &'a ContentHash,
    author: &'a str,
    message: &'a str,
    category: ComponentRole,
}

pub fn compute_commit_id(
    parent: &Option<ContentHash>,
    tree_hash: &ContentHash,
    author: &str,
    message: &str,
    category: ComponentRole,
) -> ContentHash {
    canonical::hash_of(&CommitIdentity {
        parent,
        tree_hash,
        author,
        message,
        category,
    })
    .expect("commit identity is always encodable")
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("BAD_MANIFEST: {0}")]
    BadManifest(String),
    #[error("BAD_SCHEMA: {0}")]
    BadSchema(String),
    #[error("PATH_ESCAPE: {0:?}")]
    PathEscape(String),
    #[error("CONCURRENT_HEAD: head of {0} moved")]
    ConcurrentHead(String),
    #[error("COMMIT_NOT_FOUND: {0}")]
    CommitNotFound(String),
    #[error("BAD_NAME: {0}")]
    BadName(String),
    #[error("DEST_NOT_EMPTY: {0}")]
    DestNotEmpty(String),
    #[error("CORRUPT_OBJECT: {0}")]
    Corrupt(String),
    #[error("IO: {0}")]
    Io(#[from] io::Error),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::BadManifest(_) => "BAD_MANIFEST",
            RegistryError::BadSchema(_) => "BAD_SCHEMA",
            RegistryError::PathEscape(_) => "PATH_ESCAPE",
            RegistryError::ConcurrentHead(_) => "CONCURRENT_HEAD",
            RegistryError::CommitNotFound(_) => "COMMIT_NOT_FOUND",
            RegistryError::BadName(_) => "BAD_NAME",
            RegistryError::DestNotEmpty(_) => "DEST_NOT_EMPTY",
            RegistryError::Corrupt(_) => "CORRUPT_OBJECT",
            RegistryError::Io(_) => "IO",
        }
    }
}

impl From<CanonicalError> for RegistryError {
    fn from(e: CanonicalError) -> Self {
        RegistryError::Corrupt(e.to_string())
    }
}

/// What the caller expects the current head to be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpectedHead {
    /// Whatever the head is when the commit starts.
    Current,
    Exactly(Option<ContentHash>),
}

#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
}

impl Registry {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("heads"))?;
        Ok(Registry { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, hash: &str) -> PathBuf {
        self.root.join("objects").join(&hash[..2]).join(&hash[2..])
    }

    fn head_path(&self, namespace: &str, name: &str) -> PathBuf {
        self.root.join("heads").join(namespace).join(name)
    }

    fn put_object(&self, hash: &ContentHash, bytes: &[u8]) -> io::Result<()> {
        let p = self.object_path(hash.as_str());
        if p.exists() {
            return Ok(());
        }
        write_atomic(&p, bytes)
    }

    fn get_object(&self, hash: &str) -> Result<Option<Vec<u8>>, RegistryError> {
        if !canonical::is_hex64(hash) {
            return Ok(None);
        }
        match fs::read(self.object_path(hash)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn head(&self, namespace: &str, name: &str) -> Result<Option<ContentHash>, RegistryError> {
        check_names(namespace, name)?;
        match fs::read_to_string(self.head_path(namespace, name)) {
            Ok(s) => ContentHash::parse(s.trim())
                .map(Some)
                .ok_or_else(|| RegistryError::Corrupt(format!("head {namespace}/{name}"))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn commit_component(
        &self,
        namespace: &str,
        name: &str,
        tree: &ComponentTree,
        author: &str,
        message: &str,
    ) -> Result<RegistryCommit, RegistryError> {
        self.commit_component_cas(namespace, name, tree, author, message, ExpectedHead::Current)
    }

    /// Commit with compare-and-set on the head: fails with CONCURRENT_HEAD if
    /// the head is not the expected parent when the commit is published.
    pub fn commit_component_cas(
        &self,
        namespace: &str,
        name: &str,
        tree: &ComponentTree,
        author: &str,
        message: &str,
        expected: ExpectedHead,
    ) -> Result<RegistryCommit, RegistryError> {
        check_names(namespace, name)?;
        check_tree_paths(tree)?;
        let manifest = tree.manifest()?;
        if manifest.name != *name {
            return Err(RegistryError::BadManifest(format!(
                "manifest name {} does not match component name {name}",
                manifest.name
            )));
        }
        let schema = tree.schema()?;
        if let Some(p) = schema.problems().first() {
            return Err(RegistryError::BadSchema(format!("{} on {}: {}", p.code, p.entry, p.detail)));
        }

        let parent = match expected {
            ExpectedHead::Current => self.head(namespace, name)?,
            ExpectedHead::Exactly(p) => p,
        };
        let tree_hash = tree.tree_hash();
        let commit_id = compute_commit_id(&parent, &tree_hash, author, message, manifest.category);
        let commit = RegistryCommit {
            commit_id: commit_id.clone(),
            parent: parent.clone(),
            tree_hash: tree_hash.clone(),
            author: author.to_owned(),
            message: message.to_owned(),
            category: manifest.category,
            stored_at: fsutil::now_rfc3339(),
        };

        for bytes in tree.files.values() {
            self.put_object(&ContentHash::of_bytes(bytes), bytes)?;
        }
        self.put_object(&tree_hash, &canonical::canonicalize(&tree.listing())?)?;

        let _lock = StoreLock::acquire(&self.root)?;
        if self.head(namespace, name)? != parent {
            return Err(RegistryError::ConcurrentHead(format!("{namespace}/{name}")));
        }
        let stored = match self.read_commit(commit_id.as_str())? {
            Some(existing) => existing,
            None => {
                self.put_object(&commit_id, &canonical::encode(&commit)?)?;
                commit
            }
        };
        write_atomic(&self.head_path(namespace, name), format!("{commit_id}\n").as_bytes())?;
        Ok(stored)
    }

    fn read_commit(&self, commit_id: &str) -> Result<Option<RegistryCommit>, RegistryError> {
        match self.get_object(commit_id)? {
            None => Ok(None),
            Some(bytes) => Ok(Some(canonical::decode(&bytes)?)),
        }
    }

    pub fn get_commit(&self, commit_id: &str) -> Result<RegistryCommit, RegistryError> {
        self.read_commit(commit_id)?
            .ok_or_else(|| RegistryError::CommitNotFound(commit_id.to_owned()))
    }

    pub fn contains(&self, commit_id: &str) -> bool {
        matches!(self.read_commit(commit_id), Ok(Some(_)))
    }

    /// Reassemble the committed tree from its objects.
    pub fn tree(&self, commit_id: &str) -> Result<ComponentTree, RegistryError> {
        let commit = self.get_commit(commit_id)?;
        let listing_bytes = self
            .get_object(commit.tree_hash.as_str())?
            .ok_or_else(|| RegistryError::Corrupt(format!("tree {} missing", commit.tree_hash)))?;
        let listing: Vec<(String, ContentHash)> = canonical::decode(&listing_bytes)?;
        let mut files = BTreeMap::new();
        for (path, hash) in listing {
            let bytes = self
                .get_object(hash.as_str())?
                .ok_or_else(|| RegistryError::Corrupt(format!("blob {hash} missing")))?;
            if ContentHash::of_bytes(&bytes) != hash {
                return Err(RegistryError::Corrupt(format!("blob {hash} does not match its content")));
            }
            files.insert(path, bytes);
        }
        let tree = ComponentTree { files };
        if tree.tree_hash() != commit.tree_hash {
            return Err(RegistryError::Corrupt(format!("tree {} does not re-hash", commit.tree_hash)));
        }
        Ok(tree)
    }

    /// Materialize a commit into `dest`, which must be absent or empty.
    pub fn checkout(&self, commit_id: &str, dest: &Path) -> Result<ComponentTree, RegistryError> {
        let tree = self.tree(commit_id)?;
        if dest.exists() && fs::read_dir(dest)?.next().is_some() {
            return Err(RegistryError::DestNotEmpty(dest.display().to_string()));
        }
        fs::create_dir_all(dest)?;
        let entry_file = tree
            .manifest()
            .ok()
            .and_then(|m| m.entrypoint.first().cloned())
            .map(|e| e.trim_start_matches("./").to_owned());
        for (path, bytes) in &tree.files {
            let target = fsutil::join_relative(dest, path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&target, bytes)?;
            #[cfg(unix)]
            if entry_file.as_deref() == Some(path.as_str()) {
                use std::os::unix::fs::PermissionsExt;
                fs::set_permissions(&target, fs::Permissions::from_mode(0o755))?;
            }
        }
        Ok(tree)
    }

    /// Linear history from the head back to the root commit.
    pub fn history(&self, namespace: &str, name: &str) -> Result<Vec<RegistryCommit>, RegistryError> {
        let mut out = Vec::new();
        let mut cursor = self.head(namespace, name)?;
        while let Some(id) = cursor {
            let c = self.get_commit(id.as_str())?;
            cursor = c.parent.clone();
            out.push(c);
        }
        Ok(out)
    }
}

fn check_names(namespace: &str, name: &str) -> Result<(), RegistryError> {
    for (what, v) in [("namespace", namespace), ("name", name)] {
        if !is_identifier(v) {
            return Err(RegistryError::BadName(format!("{what} {v:?} is not an identifier")));
        }
    }
    Ok(())
}

fn check_tree_paths(tree: &ComponentTree) -> Result<(), RegistryError> {
    for p in tree.files.keys() {
        if !is_relative_clean(p) {
            return Err(RegistryError::PathEscape(p.clone()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Static checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckReport {
    pub findings: Vec<Finding>,
}

impl CheckReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn codes(&self) -> Vec<&str> {
        self.findings.iter().map(|f| f.code.as_str()).collect()
    }
}

/// Editor-time validation of a component tree. Findings are data, never errors.
pub fn static_check(tree: &ComponentTree) -> CheckReport {
    let mut findings = Vec::new();
    let mut push = |code: &str, severity, path: Option<&str>, detail: String| {
        findings.push(Finding {
            code: code.to_owned(),
            severity,
            path: path.map(str::to_owned),
            detail,
        })
    };

    for p in tree.files.keys() {
        if !is_relative_clean(p) {
            push("PATH_ESCAPE", Severity::Error, Some(p), "paths must be relative without '..' or empty segments".into());
        }
    }

    match tree.manifest() {
        Err(e) => push("BAD_MANIFEST", Severity::Error, Some(MANIFEST_FILE), e.to_string()),
        Ok(m) => match m.entrypoint.first() {
            None => push("EMPTY_ENTRYPOINT", Severity::Error, Some(MANIFEST_FILE), "entrypoint must name a program".into()),
            Some(first) => {
                let rel = first.trim_start_matches("./");
                if !tree.files.contains_key(rel) && !ALLOWED_INTERPRETERS.contains(&first.as_str()) {
                    push(
                        "ENTRYPOINT_NOT_FOUND",
                        Severity::Error,
                        Some(MANIFEST_FILE),
                        format!("{first:?} is neither a file in the tree nor an allowed interpreter"),
                    );
                } else if ALLOWED_INTERPRETERS.contains(&first.as_str()) {
                    if let Some(script) = m.entrypoint.get(1) {
                        let rel = script.trim_start_matches("./");
                        if !script.starts_with('-') && !tree.files.contains_key(rel) {
                            push(
                                "SCRIPT_NOT_FOUND",
                                Severity::Warning,
                                Some(MANIFEST_FILE),
                                format!("{script:?} is not a file in the tree"),
                            );
                        }
                    }
                }
            }
        },
    }

    match tree.schema() {
        Err(e) => push("BAD_SCHEMA", Severity::Error, Some(SCHEMA_FILE), e.to_string()),
        Ok(schema) => {
            for p in schema.problems() {
                push(p.code, Severity::Error, Some(SCHEMA_FILE), format!("{}: {}", p.entry, p.detail));
            }
        }
    }

    CheckReport { findings }
}
