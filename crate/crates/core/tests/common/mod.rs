#![allow(dead_code)]

use std::path::{Path, PathBuf};

use simworks_core::bundle::ExperimentBundle;
use simworks_core::executor::{Executor, ExecutorConfig};
use simworks_core::templates::LoadedEnvironment;
use simworks_core::workspace::Workspace;
use tempfile::TempDir;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn bundle(name: &str) -> ExperimentBundle {
    ExperimentBundle::read(&fixtures().join(name)).expect("fixture bundle")
}

/// Fresh workspace with both fixture templates published as version 1.
pub fn workspace() -> (TempDir, Workspace) {
    let dir = TempDir::new().unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    for t in ["demo", "mock10"] {
        let path = fixtures().join("templates").join(t).join("template.canon.json");
        ws.templates.publish_file(&path).unwrap();
    }
    (dir, ws)
}

pub fn executor(ws: &Workspace) -> Executor {
    ws.executor(ExecutorConfig::default()).unwrap()
}

pub fn environment(ws: &Workspace, b: &ExperimentBundle) -> LoadedEnvironment {
    ws.templates.resolve_environment(&b.template_ref).unwrap().load().unwrap()
}
