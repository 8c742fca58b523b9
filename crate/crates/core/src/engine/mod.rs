//! The simulation engine: builtin components, the session loop, measures.

pub mod components;
pub mod measures;
pub mod rng;
pub mod session;

use thiserror::Error;

use crate::bundle::SessionConfig;
use crate::model::PipelineGraph;
use crate::templates::LoadedEnvironment;

pub use components::{BuiltinOnly, CustomComponents, SessionContext, StopAction};
pub use measures::{compute_session_measures, RunMeasures, SessionMeasures};
pub use session::{EndReason, EventKind, SessionLimits, SessionOutcome, SessionState, SessionTrace, TraceEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("node {0} needs relevance judgments but the template has none")]
    MissingQrels(String),
    #[error("search backend: {0}")]
    Backend(String),
    #[error("component {node_id} failed ({code}): {detail}")]
    Component {
        node_id: String,
        code: &'static str,
        detail: String,
    },
    #[error("wall-clock limit exceeded")]
    Timeout,
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Config(_) => "CONFIG_ERROR",
            EngineError::MissingQrels(_) => "MISSING_QRELS",
            EngineError::Backend(_) => "BACKEND_FAILURE",
            EngineError::Component { code, .. } => code,
            EngineError::Timeout => "TIMEOUT",
        }
    }
}

/// Everything that fixes the outcome of a simulation.
pub struct Simulation<'a> {
    pub pipeline: &'a PipelineGraph,
    pub env: &'a LoadedEnvironment,
    pub master_seed: u64,
    pub session: &'a SessionConfig,
}

impl Simulation<'_> {
    /// User `k` simulates topic `k mod |topics|`.
    pub fn run_user(
        &self,
        user: u32,
        custom: &dyn CustomComponents,
        limits: SessionLimits,
    ) -> Result<SessionOutcome, EngineError> {
        if self.env.topics.is_empty() {
            return Err(EngineError::Config("template has no topics".into()));
        }
        let topic = &self.env.topics[user as usize % self.env.topics.len()];
        let ctx = SessionContext {
            pipeline: self.pipeline,
            env: self.env,
            topic,
            user_index: user,
        };
        let mut parts = components::assemble(&ctx, custom)?;
        let nodes = session::NodeIds::from_pipeline(self.pipeline);
        session::run_session(user, topic, &mut parts, &nodes, self.session, self.master_seed, limits)
    }

    pub fn run_users(
        &self,
        users: u32,
        custom: &dyn CustomComponents,
        limits: SessionLimits,
    ) -> Result<Vec<SessionOutcome>, EngineError> {
        (0..users).map(|u| self.run_user(u, custom, limits)).collect()
    }
}
