//! One directory holding every store:
//!
//! ```text
//! <root>/templates/   template store
//! <root>/registry/    component registry
//! <root>/bundles/     submitted bundles by content hash
//! <root>/run/         run directories
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bundle::{bundle_hash, BundleError, ExperimentBundle};
use crate::canonical::{self, is_hex64, ContentHash};
use crate::executor::{Executor, ExecutorConfig};
use crate::fsutil::write_atomic;
use crate::registry::{Registry, RegistryError};
use crate::templates::{TemplateError, TemplateStore};

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl WorkspaceError {
    pub fn code(&self) -> &'static str {
        match self {
            WorkspaceError::Template(e) => e.code(),
            WorkspaceError::Registry(e) => e.code(),
            WorkspaceError::Bundle(e) => e.code(),
            WorkspaceError::Io(_) => "STORE_IO",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    pub templates: TemplateStore,
    pub registry: Registry,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let root = root.into();
        fs::create_dir_all(root.join("bundles"))?;
        fs::create_dir_all(root.join("run"))?;
        Ok(Workspace {
            templates: TemplateStore::open(root.join("templates"))?,
            registry: Registry::open(root.join("registry"))?,
            root,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn executor(&self, config: ExecutorConfig) -> io::Result<Executor> {
        Executor::new(self.root.join("run"), self.templates.clone(), self.registry.clone(), config)
    }

    fn bundle_path(&self, hash: &str) -> PathBuf {
        self.root.join("bundles").join(format!("{hash}.canon.json"))
    }

    /// Store a bundle under its content hash; storing twice is a no-op.
    pub fn put_bundle(&self, bundle: &ExperimentBundle) -> Result<ContentHash, WorkspaceError> {
        let hash = bundle_hash(bundle).map_err(BundleError::Format)?;
        let path = self.bundle_path(hash.as_str());
        if !path.exists() {
            write_atomic(&path, &bundle.to_bytes()?)?;
        }
        Ok(hash)
    }

    pub fn get_bundle(&self, hash: &str) -> Result<Option<ExperimentBundle>, WorkspaceError> {
        if !is_hex64(hash) {
            return Ok(None);
        }
        match fs::read(self.bundle_path(hash)) {
            Ok(bytes) => Ok(Some(canonical::decode(&bytes).map_err(BundleError::Parse)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
