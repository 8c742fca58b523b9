//! The per-user session loop and its trace.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bundle::SessionConfig;
use crate::canonical::{self, ContentHash, Value};
use crate::dataset::Topic;
use crate::model::ComponentRole;
use crate::search::SerpEntry;

use super::components::{ClickedDoc, ComponentError, SessionComponents, StopAction};
use super::rng::RngStream;
use super::EngineError;

/// What the stopping strategy and query generator can observe.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub topic: Topic,
    pub queries_issued: u32,
    pub current_query: Option<String>,
    pub snippets_examined_this_serp: u32,
    pub consecutive_unattractive: u32,
    /// Marked documents in marking order, no repeats.
    pub marked_docs: Vec<String>,
    pub sim_time: f64,
}

impl SessionState {
    pub fn new(topic: Topic) -> Self {
        SessionState {
            topic,
            queries_issued: 0,
            current_query: None,
            snippets_examined_this_serp: 0,
            consecutive_unattractive: 0,
            marked_docs: Vec::new(),
            sim_time: 0.0,
        }
    }

    /// The view sent to out-of-process components.
    pub fn summary(&self) -> Value {
        Value::map([
            ("queries_issued", Value::Int(self.queries_issued.into())),
            ("snippets_examined_this_serp", Value::Int(self.snippets_examined_this_serp.into())),
            ("consecutive_unattractive", Value::Int(self.consecutive_unattractive.into())),
            ("docs_marked", Value::Int(self.marked_docs.len() as i64)),
            ("sim_time_elapsed", Value::Float(self.sim_time)),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    QueryIssued,
    SnippetExamined,
    DocClicked,
    DocJudged,
    DocMarkedRelevant,
    SessionEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::QueryIssued => "QUERY_ISSUED",
            EventKind::SnippetExamined => "SNIPPET_EXAMINED",
            EventKind::DocClicked => "DOC_CLICKED",
            EventKind::DocJudged => "DOC_JUDGED",
            EventKind::DocMarkedRelevant => "DOC_MARKED_RELEVANT",
            EventKind::SessionEnd => "SESSION_END",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EndReason {
    /// The stopping strategy returned END.
    Stopped,
    /// The query generator ran out of queries.
    Exhausted,
    /// Simulated time went over the budget.
    Budget,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::Stopped => "STOPPED",
            EndReason::Exhausted => "EXHAUSTED",
            EndReason::Budget => "BUDGET",
        }
    }
}

/// One trace line; `seq` starts at 1 in every session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub user: u32,
    pub topic_id: String,
    pub action: EventKind,
    pub sim_time: f64,
    pub payload: BTreeMap<String, Value>,
}

impl TraceEvent {
    pub fn to_value(&self) -> Value {
        Value::map([
            ("seq", Value::Int(self.seq as i64)),
            ("user", Value::Int(self.user.into())),
            ("topic_id", Value::Str(self.topic_id.clone())),
            ("action", Value::Str(self.action.as_str().to_owned())),
            ("sim_time", Value::Float(self.sim_time)),
            ("payload", Value::Map(self.payload.clone())),
        ])
    }
}

/// Trace of one session as canonical JSON lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionTrace {
    pub events: Vec<TraceEvent>,
    pub bytes: Vec<u8>,
}

impl SessionTrace {
    fn push(&mut self, event: TraceEvent) -> Result<(), EngineError> {
        let line = canonical::canonicalize(&event.to_value()).map_err(|e| EngineError::Config(e.to_string()))?;
        self.bytes.extend_from_slice(&line);
        self.bytes.push(b'\n');
        self.events.push(event);
        Ok(())
    }

    pub fn hash(&self) -> ContentHash {
        ContentHash::of_bytes(&self.bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Vec<TraceEvent>, canonical::CanonicalError> {
        let mut out = Vec::new();
        for line in bytes.split(|b| *b == b'\n').filter(|l| !l.is_empty()) {
            out.push(canonical::decode(line)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub user: u32,
    pub topic_id: String,
    pub end_reason: EndReason,
    pub state: SessionState,
    pub trace: SessionTrace,
}

/// Optional wall-clock cutoff for a session.
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionLimits {
    pub deadline: Option<Instant>,
}

/// Identifies which node raised a component error.
pub struct NodeIds {
    pub query_generator: String,
    pub snippet_classifier: String,
    pub document_classifier: String,
    pub stopping: String,
}

impl NodeIds {
    pub fn from_pipeline(p: &crate::model::PipelineGraph) -> Self {
        let id = |role| p.node_for_role(role).map(|n| n.node_id.to_string()).unwrap_or_default();
        NodeIds {
            query_generator: id(ComponentRole::QueryGenerator),
            snippet_classifier: id(ComponentRole::SnippetClassifier),
            document_classifier: id(ComponentRole::DocumentClassifier),
            stopping: id(ComponentRole::StoppingStrategy),
        }
    }
}

struct Run<'a> {
    user: u32,
    config: &'a SessionConfig,
    limits: SessionLimits,
    state: SessionState,
    trace: SessionTrace,
}

enum Flow {
    Go,
    Ended(EndReason),
}

impl Run<'_> {
    fn emit(&mut self, event: EventKind, cost: f64, payload: BTreeMap<String, Value>) -> Result<Flow, EngineError> {
        self.state.sim_time += cost;
        let seq = self.trace.events.len() as u64 + 1;
        self.trace.push(TraceEvent {
            seq,
            user: self.user,
            topic_id: self.state.topic.topic_id.clone(),
            action: event,
            sim_time: self.state.sim_time,
            payload,
        })?;
        if self.state.sim_time > self.config.budget {
            return self.end(EndReason::Budget);
        }
        Ok(Flow::Go)
    }

    fn end(&mut self, reason: EndReason) -> Result<Flow, EngineError> {
        let seq = self.trace.events.len() as u64 + 1;
        self.trace.push(TraceEvent {
            seq,
            user: self.user,
            topic_id: self.state.topic.topic_id.clone(),
            action: EventKind::SessionEnd,
            sim_time: self.state.sim_time,
            payload: BTreeMap::from([("reason".to_owned(), Value::Str(reason.as_str().to_owned()))]),
        })?;
        Ok(Flow::Ended(reason))
    }

    fn check_deadline(&self) -> Result<(), EngineError> {
        match self.limits.deadline {
            Some(d) if Instant::now() >= d => Err(EngineError::Timeout),
            _ => Ok(()),
        }
    }
}

fn entry_payload(e: &SerpEntry) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("rank".to_owned(), Value::Int(e.rank.into())),
        ("doc_id".to_owned(), Value::Str(e.doc_id.clone())),
    ])
}

macro_rules! step {
    ($label:lifetime, $flow:expr) => {
        if let Flow::Ended(reason) = $flow? {
            break $label reason;
        }
    };
}

/// Simulate one user on one topic. Randomness comes only from streams
/// `u{user}/{node_id}` for the two classifier nodes; one draw per decision.
pub fn run_session(
    user: u32,
    topic: &Topic,
    components: &mut SessionComponents,
    nodes: &NodeIds,
    config: &SessionConfig,
    master_seed: u64,
    limits: SessionLimits,
) -> Result<SessionOutcome, EngineError> {
    let mut snippet_rng = RngStream::new(master_seed, format!("u{user}/{}", nodes.snippet_classifier));
    let mut doc_rng = RngStream::new(master_seed, format!("u{user}/{}", nodes.document_classifier));
    let blame = |node: &str| {
        let node = node.to_owned();
        move |e: ComponentError| EngineError::Component {
            node_id: node,
            code: e.code,
            detail: e.detail,
        }
    };
    let mut run = Run {
        user,
        config,
        limits,
        state: SessionState::new(topic.clone()),
        trace: SessionTrace::default(),
    };
    let costs = config.costs;

    let reason = 'session: loop {
        run.check_deadline()?;
        let query = components
            .query_generator
            .next_query(&run.state)
            .map_err(blame(&nodes.query_generator))?;
        let Some(query) = query else {
            step!('session, run.end(EndReason::Exhausted));
            unreachable!();
        };
        run.state.queries_issued += 1;
        run.state.current_query = Some(query.clone());
        run.state.snippets_examined_this_serp = 0;
        run.state.consecutive_unattractive = 0;
        step!('session, run.emit(
            EventKind::QueryIssued,
            costs.query,
            BTreeMap::from([("query".to_owned(), Value::Str(query.clone()))]),
        ));
        let serp = components.backend.search(&query).map_err(EngineError::Backend)?;

        for entry in &serp.entries {
            run.check_deadline()?;
            run.state.snippets_examined_this_serp += 1;
            step!('session, run.emit(EventKind::SnippetExamined, costs.snippet, entry_payload(entry)));

            let attractive = components
                .snippet_classifier
                .classify_snippet(topic, entry, snippet_rng.next_f64())
                .map_err(blame(&nodes.snippet_classifier))?;
            if attractive {
                run.state.consecutive_unattractive = 0;
                step!('session, run.emit(EventKind::DocClicked, 0.0, entry_payload(entry)));
                let mut doc = components.backend.document(&entry.doc_id).unwrap_or_else(|| ClickedDoc {
                    doc_id: entry.doc_id.clone(),
                    rank: 0,
                    title: String::new(),
                    body: String::new(),
                });
                doc.rank = entry.rank;
                let relevant = components
                    .document_classifier
                    .classify_document(topic, &doc, doc_rng.next_f64())
                    .map_err(blame(&nodes.document_classifier))?;
                let mut payload = entry_payload(entry);
                payload.insert("relevant".to_owned(), Value::Bool(relevant));
                step!('session, run.emit(EventKind::DocJudged, costs.doc, payload));
                if relevant && !run.state.marked_docs.contains(&entry.doc_id) {
                    run.state.marked_docs.push(entry.doc_id.clone());
                    step!('session, run.emit(EventKind::DocMarkedRelevant, costs.mark, entry_payload(entry)));
                }
            } else {
                run.state.consecutive_unattractive += 1;
            }

            match components.stopping.decide(&run.state).map_err(blame(&nodes.stopping))? {
                StopAction::Continue => {}
                StopAction::NextQuery => continue 'session,
                StopAction::End => {
                    step!('session, run.end(EndReason::Stopped));
                    unreachable!();
                }
            }
        }
    };

    Ok(SessionOutcome {
        user,
        topic_id: topic.topic_id.clone(),
        end_reason: reason,
        state: run.state,
        trace: run.trace,
    })
}
