//! Component interfaces and the builtin behavioral components.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::canonical::Value;
use crate::catalog::Catalog;
use crate::dataset::{Qrels, Topic};
use crate::model::{ComponentRole, ComponentSource, PipelineGraph, PipelineNode};
use crate::search::{mock_search, tokenize, Bm25Params, Index, MockConfig, Serp, SerpEntry};
use crate::templates::{BackendType, LoadedEnvironment};

use super::session::SessionState;
use super::EngineError;

/// Decision returned by a stopping strategy after each snippet step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopAction {
    Continue,
    NextQuery,
    End,
}

/// Failure inside one component; the engine attaches the node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentError {
    pub code: &'static str,
    pub detail: String,
}

impl ComponentError {
    pub fn new(code: &'static str, detail: impl Into<String>) -> Self {
        ComponentError {
            code,
            detail: detail.into(),
        }
    }
}

pub type ComponentResult<T> = Result<T, ComponentError>;

pub trait QueryGenerator: Send {
    fn next_query(&mut self, state: &SessionState) -> ComponentResult<Option<String>>;
}

pub trait SnippetClassifier: Send {
    fn classify_snippet(&mut self, topic: &Topic, entry: &SerpEntry, rand: f64) -> ComponentResult<bool>;
}

/// What a document classifier sees of a clicked document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickedDoc {
    pub doc_id: String,
    pub rank: u32,
    pub title: String,
    pub body: String,
}

pub trait DocumentClassifier: Send {
    fn classify_document(&mut self, topic: &Topic, doc: &ClickedDoc, rand: f64) -> ComponentResult<bool>;
}

pub trait StoppingStrategy: Send {
    fn decide(&mut self, state: &SessionState) -> ComponentResult<StopAction>;
}

pub trait SearchBackend: Send + Sync {
    fn search(&self, query: &str) -> Result<Serp, String>;
    fn document(&self, doc_id: &str) -> Option<ClickedDoc>;
}

/// One instantiated component of any role.
pub enum AnyComponent {
    QueryGenerator(Box<dyn QueryGenerator>),
    SnippetClassifier(Box<dyn SnippetClassifier>),
    DocumentClassifier(Box<dyn DocumentClassifier>),
    StoppingStrategy(Box<dyn StoppingStrategy>),
}

/// Context handed to component constructors.
pub struct SessionContext<'a> {
    pub pipeline: &'a PipelineGraph,
    pub env: &'a LoadedEnvironment,
    pub topic: &'a Topic,
    pub user_index: u32,
}

/// Supplies non-builtin components (the executor injects registry components).
pub trait CustomComponents: Sync {
    fn instantiate(&self, node: &PipelineNode, ctx: &SessionContext<'_>) -> Result<AnyComponent, EngineError>;
}

/// Rejects every registry component.
pub struct BuiltinOnly;

impl CustomComponents for BuiltinOnly {
    fn instantiate(&self, node: &PipelineNode, _ctx: &SessionContext<'_>) -> Result<AnyComponent, EngineError> {
        Err(EngineError::Config(format!(
            "node {} references a registry component; run it through the executor",
            node.node_id
        )))
    }
}

pub struct SessionComponents {
    pub query_generator: Box<dyn QueryGenerator>,
    pub snippet_classifier: Box<dyn SnippetClassifier>,
    pub document_classifier: Box<dyn DocumentClassifier>,
    pub stopping: Box<dyn StoppingStrategy>,
    pub backend: Box<dyn SearchBackend>,
}

fn node_for(pipeline: &PipelineGraph, role: ComponentRole) -> Result<&PipelineNode, EngineError> {
    pipeline
        .node_for_role(role)
        .ok_or_else(|| EngineError::Config(format!("pipeline has no {role} node")))
}

/// Build every component for one session.
pub fn assemble(ctx: &SessionContext<'_>, custom: &dyn CustomComponents) -> Result<SessionComponents, EngineError> {
    let make = |role| -> Result<AnyComponent, EngineError> {
        let node = node_for(ctx.pipeline, role)?;
        match node.component.source {
            ComponentSource::Builtin => instantiate_builtin(node, ctx),
            ComponentSource::Registry { .. } => custom.instantiate(node, ctx),
        }
    };
    let wrong = |role: ComponentRole| EngineError::Config(format!("component for {role} has the wrong category"));
    let AnyComponent::QueryGenerator(query_generator) = make(ComponentRole::QueryGenerator)? else {
        return Err(wrong(ComponentRole::QueryGenerator));
    };
    let AnyComponent::SnippetClassifier(snippet_classifier) = make(ComponentRole::SnippetClassifier)? else {
        return Err(wrong(ComponentRole::SnippetClassifier));
    };
    let AnyComponent::DocumentClassifier(document_classifier) = make(ComponentRole::DocumentClassifier)? else {
        return Err(wrong(ComponentRole::DocumentClassifier));
    };
    let AnyComponent::StoppingStrategy(stopping) = make(ComponentRole::StoppingStrategy)? else {
        return Err(wrong(ComponentRole::StoppingStrategy));
    };
    let backend = build_backend(node_for(ctx.pipeline, ComponentRole::SearchBackend)?, ctx.env)?;
    Ok(SessionComponents {
        query_generator,
        snippet_classifier,
        document_classifier,
        stopping,
        backend,
    })
}

// ---------------------------------------------------------------------------
// Parameter helpers
// ---------------------------------------------------------------------------

struct Params {
    node_id: String,
    values: BTreeMap<String, Value>,
}

impl Params {
    fn resolve(node: &PipelineNode) -> Result<Self, EngineError> {
        let c = &node.component;
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        let schema = CATALOG
            .get_or_init(Catalog::builtin)
            .find(c.role, c.name.as_str())
            .map(|b| b.schema.clone())
            .ok_or_else(|| EngineError::Config(format!("unknown builtin {} {}", c.role, c.name)))?;
        if let Some((key, why)) = schema.validate_params(&c.params).into_iter().next() {
            return Err(EngineError::Config(format!("node {}: parameter {key}: {why}", node.node_id)));
        }
        Ok(Params {
            node_id: node.node_id.to_string(),
            values: schema.resolve(&c.params),
        })
    }

    fn f64(&self, key: &str) -> f64 {
        self.values.get(key).and_then(Value::as_f64).unwrap_or_default()
    }

    fn count(&self, key: &str) -> u32 {
        self.values
            .get(key)
            .and_then(Value::as_i64)
            .and_then(|v| u32::try_from(v).ok())
            .unwrap_or_default()
    }

    fn string(&self, key: &str) -> String {
        self.values.get(key).and_then(Value::as_str).unwrap_or_default().to_owned()
    }
}

fn require_qrels(env: &LoadedEnvironment, node_id: &str) -> Result<Arc<Qrels>, EngineError> {
    env.qrels
        .clone()
        .ok_or_else(|| EngineError::MissingQrels(node_id.to_owned()))
}

pub fn instantiate_builtin(node: &PipelineNode, ctx: &SessionContext<'_>) -> Result<AnyComponent, EngineError> {
    let p = Params::resolve(node)?;
    let c = &node.component;
    let limit = |p: &Params| match p.count("max_queries") {
        0 => usize::MAX,
        n => n as usize,
    };
    Ok(match (c.role, c.name.as_str()) {
        (ComponentRole::QueryGenerator, "single_term") => {
            AnyComponent::QueryGenerator(Box::new(QueryList::new(single_term_queries(ctx.topic), limit(&p))))
        }
        (ComponentRole::QueryGenerator, "title_pairs") => {
            AnyComponent::QueryGenerator(Box::new(QueryList::new(title_pair_queries(ctx.topic), limit(&p))))
        }
        (ComponentRole::QueryGenerator, "fixed_queries") => {
            let queries = p
                .string("queries")
                .split(';')
                .map(str::trim)
                .filter(|q| !q.is_empty())
                .map(str::to_owned)
                .collect();
            AnyComponent::QueryGenerator(Box::new(QueryList::new(queries, usize::MAX)))
        }
        (ComponentRole::SnippetClassifier, "random_attract") => {
            AnyComponent::SnippetClassifier(Box::new(Attraction::Fixed(p.f64("p"))))
        }
        (ComponentRole::SnippetClassifier, "rank_biased") => {
            AnyComponent::SnippetClassifier(Box::new(Attraction::RankBiased(p.f64("gamma"))))
        }
        (ComponentRole::SnippetClassifier, "qrel_informed") => AnyComponent::SnippetClassifier(Box::new(Attraction::QrelInformed {
            qrels: require_qrels(ctx.env, &p.node_id)?,
            p_rel: p.f64("p_rel"),
            p_nonrel: p.f64("p_nonrel"),
        })),
        (ComponentRole::DocumentClassifier, "qrel_accuracy") => AnyComponent::DocumentClassifier(Box::new(Judge::QrelAccuracy {
            qrels: require_qrels(ctx.env, &p.node_id)?,
            p_tp: p.f64("p_tp"),
            p_fp: p.f64("p_fp"),
        })),
        (ComponentRole::DocumentClassifier, "always_relevant") => {
            AnyComponent::DocumentClassifier(Box::new(Judge::AlwaysRelevant))
        }
        (ComponentRole::StoppingStrategy, "fixed_depth") => AnyComponent::StoppingStrategy(Box::new(StopRules {
            depth: Some(p.count("k")),
            ..StopRules::default()
        })),
        (ComponentRole::StoppingStrategy, "frustration") => AnyComponent::StoppingStrategy(Box::new(StopRules {
            frustration: Some(p.count("n")),
            ..StopRules::default()
        })),
        (ComponentRole::StoppingStrategy, "total_marks") => AnyComponent::StoppingStrategy(Box::new(StopRules {
            marks: Some(p.count("m")),
            ..StopRules::default()
        })),
        (ComponentRole::StoppingStrategy, "combined") => {
            let on = |v: u32| (v > 0).then_some(v);
            AnyComponent::StoppingStrategy(Box::new(StopRules {
                depth: on(p.count("depth")),
                frustration: on(p.count("frustration")),
                marks: on(p.count("marks")),
            }))
        }
        (role, name) => return Err(EngineError::Config(format!("no builtin {role} named {name}"))),
    })
}

// ---------------------------------------------------------------------------
// Query generators
// ---------------------------------------------------------------------------

static STOPWORDS_TXT: &str = include_str!("../../data/stopwords.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_TXT.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

/// Topic terms minus stopwords, by (frequency desc, term asc).
pub fn single_term_queries(topic: &Topic) -> Vec<String> {
    let mut freq: HashMap<String, usize> = HashMap::new();
    for t in tokenize(&format!("{} {}", topic.title, topic.description)) {
        if !stopwords().contains(t.as_str()) {
            *freq.entry(t).or_default() += 1;
        }
    }
    let mut terms: Vec<(String, usize)> = freq.into_iter().collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.into_iter().map(|(t, _)| t).collect()
}

/// Title terms (stopwords and repeats dropped) in text order, then every
/// ordered pair `i < j` joined by a space.
pub fn title_pair_queries(topic: &Topic) -> Vec<String> {
    let mut seen = HashSet::new();
    let terms: Vec<String> = tokenize(&topic.title)
        .into_iter()
        .filter(|t| !stopwords().contains(t.as_str()) && seen.insert(t.clone()))
        .collect();
    let mut out = terms.clone();
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            out.push(format!("{} {}", terms[i], terms[j]));
        }
    }
    out
}

struct QueryList {
    queries: std::vec::IntoIter<String>,
}

impl QueryList {
    fn new(mut queries: Vec<String>, limit: usize) -> Self {
        queries.truncate(limit);
        QueryList {
            queries: queries.into_iter(),
        }
    }
}

impl QueryGenerator for QueryList {
    fn next_query(&mut self, _state: &SessionState) -> ComponentResult<Option<String>> {
        Ok(self.queries.next())
    }
}

// ---------------------------------------------------------------------------
// Classifiers
// ---------------------------------------------------------------------------

enum Attraction {
    Fixed(f64),
    RankBiased(f64),
    QrelInformed { qrels: Arc<Qrels>, p_rel: f64, p_nonrel: f64 },
}

impl Attraction {
    fn probability(&self, topic: &Topic, entry: &SerpEntry) -> f64 {
        match self {
            Attraction::Fixed(p) => *p,
            Attraction::RankBiased(gamma) => gamma.powi(entry.rank as i32 - 1),
            Attraction::QrelInformed { qrels, p_rel, p_nonrel } => {
                if qrels.is_relevant(&topic.topic_id, &entry.doc_id) {
                    *p_rel
                } else {
                    *p_nonrel
                }
            }
        }
    }
}

impl SnippetClassifier for Attraction {
    fn classify_snippet(&mut self, topic: &Topic, entry: &SerpEntry, rand: f64) -> ComponentResult<bool> {
        Ok(rand < self.probability(topic, entry))
    }
}

enum Judge {
    AlwaysRelevant,
    QrelAccuracy { qrels: Arc<Qrels>, p_tp: f64, p_fp: f64 },
}

impl DocumentClassifier for Judge {
    fn classify_document(&mut self, topic: &Topic, doc: &ClickedDoc, rand: f64) -> ComponentResult<bool> {
        Ok(match self {
            Judge::AlwaysRelevant => true,
            Judge::QrelAccuracy { qrels, p_tp, p_fp } => {
                let p = if qrels.is_relevant(&topic.topic_id, &doc.doc_id) { *p_tp } else { *p_fp };
                rand < p
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Stopping
// ---------------------------------------------------------------------------

/// Depth, frustration and marks rules; END outranks NEXT_QUERY outranks CONTINUE.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StopRules {
    pub depth: Option<u32>,
    pub frustration: Option<u32>,
    pub marks: Option<u32>,
}

impl StopRules {
    pub fn evaluate(&self, state: &SessionState) -> StopAction {
        let mut action = StopAction::Continue;
        if self.depth.is_some_and(|k| state.snippets_examined_this_serp >= k) {
            action = action.max(StopAction::NextQuery);
        }
        if self.frustration.is_some_and(|n| state.consecutive_unattractive >= n) {
            action = action.max(StopAction::NextQuery);
        }
        if self.marks.is_some_and(|m| state.marked_docs.len() >= m as usize) {
            action = action.max(StopAction::End);
        }
        action
    }
}

impl StoppingStrategy for StopRules {
    fn decide(&mut self, state: &SessionState) -> ComponentResult<StopAction> {
        Ok(self.evaluate(state))
    }
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct Bm25Backend {
    index: Arc<Index>,
    params: Bm25Params,
}

impl SearchBackend for Bm25Backend {
    fn search(&self, query: &str) -> Result<Serp, String> {
        Ok(self.index.search(query, &self.params))
    }

    fn document(&self, doc_id: &str) -> Option<ClickedDoc> {
        lookup_doc(&self.index, doc_id)
    }
}

struct MockBackend {
    index: Arc<Index>,
    config: MockConfig,
}

impl SearchBackend for MockBackend {
    fn search(&self, query: &str) -> Result<Serp, String> {
        let mut serp = mock_search(&self.config, query);
        for e in &mut serp.entries {
            if let Some(d) = self.index.document(&e.doc_id) {
                e.snippet = crate::search::make_snippet(&d.body, &crate::search::query_terms(query));
            }
        }
        Ok(serp)
    }

    fn document(&self, doc_id: &str) -> Option<ClickedDoc> {
        lookup_doc(&self.index, doc_id)
    }
}

fn lookup_doc(index: &Index, doc_id: &str) -> Option<ClickedDoc> {
    index.document(doc_id).map(|d| ClickedDoc {
        doc_id: d.doc_id.clone(),
        rank: 0,
        title: d.title.clone(),
        body: d.body.clone(),
    })
}

/// Template backend config overlaid by the node's explicit parameters.
pub fn build_backend(node: &PipelineNode, env: &LoadedEnvironment) -> Result<Box<dyn SearchBackend>, EngineError> {
    let name = node.component.name.as_str();
    if name != env.backend.kind.as_str() {
        return Err(EngineError::Backend(format!(
            "pipeline backend {name} does not match template backend {}",
            env.backend.kind.as_str()
        )));
    }
    match env.backend.kind {
        BackendType::Bm25 => {
            let mut merged = env.backend.params.clone();
            merged.extend(node.component.params.clone());
            let params = Bm25Params::from_params(&merged).map_err(|e| EngineError::Backend(e.to_string()))?;
            Ok(Box::new(Bm25Backend {
                index: env.index.clone(),
                params,
            }))
        }
        BackendType::Mock => {
            let config: MockConfig = crate::canonical::from_value(&Value::Map(env.backend.params.clone()))
                .map_err(|e| EngineError::Backend(format!("mock backend config: {e}")))?;
            Ok(Box::new(MockBackend {
                index: env.index.clone(),
                config,
            }))
        }
    }
}
