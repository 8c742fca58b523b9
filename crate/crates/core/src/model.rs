//! Pipeline graph, component roles, parameter schemas and structural validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canonical::{is_hex64, Value};

/// Identifier grammar: `[a-z][a-z0-9_]{0,63}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ident(String);

impl Ident {
    pub fn new(s: impl Into<String>) -> Result<Self, String> {
        let s = s.into();
        if is_identifier(&s) {
            Ok(Ident(s))
        } else {
            Err(format!("invalid identifier {s:?} (expected [a-z][a-z0-9_]{{0,63}})"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn is_identifier(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty()
        && b.len() <= 64
        && b[0].is_ascii_lowercase()
        && b[1..]
            .iter()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'_')
}

impl TryFrom<String> for Ident {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        Ident::new(s)
    }
}

impl From<Ident> for String {
    fn from(i: Ident) -> String {
        i.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Ident {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentRole {
    QueryGenerator,
    SnippetClassifier,
    DocumentClassifier,
    StoppingStrategy,
    SearchBackend,
}

impl ComponentRole {
    pub const ALL: [ComponentRole; 5] = [
        ComponentRole::QueryGenerator,
        ComponentRole::SnippetClassifier,
        ComponentRole::DocumentClassifier,
        ComponentRole::StoppingStrategy,
        ComponentRole::SearchBackend,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentRole::QueryGenerator => "query_generator",
            ComponentRole::SnippetClassifier => "snippet_classifier",
            ComponentRole::DocumentClassifier => "document_classifier",
            ComponentRole::StoppingStrategy => "stopping_strategy",
            ComponentRole::SearchBackend => "search_backend",
        }
    }

    /// The fixed adjacency table of the searcher loop.
    pub fn may_precede(self, to: ComponentRole) -> bool {
        use ComponentRole::*;
        matches!(
            (self, to),
            (QueryGenerator, SearchBackend)
                | (SearchBackend, SnippetClassifier)
                | (SnippetClassifier, DocumentClassifier)
                | (DocumentClassifier, StoppingStrategy)
                | (StoppingStrategy, QueryGenerator)
        )
    }
}

impl fmt::Display for ComponentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentRole {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ComponentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown component role {s:?}"))
    }
}

// ---------------------------------------------------------------------------
// Parameter schemas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Int,
    Float,
    String,
    Bool,
    Enum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: Ident,
    pub kind: ParamKind,
    pub default: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub required: bool,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind, default: Value) -> Self {
        ParamSpec {
            name: Ident::new(name).expect("builtin parameter names are identifiers"),
            kind,
            default,
            min: None,
            max: None,
            choices: None,
            description: String::new(),
            required: false,
        }
    }

    pub fn bounds(mut self, min: Option<f64>, max: Option<f64>) -> Self {
        self.min = min;
        self.max = max;
        self
    }

    pub fn describe(mut self, text: &str) -> Self {
        self.description = text.to_owned();
        self
    }

    /// Check one value against this entry. Returns a human-readable reason on failure.
    pub fn check(&self, v: &Value) -> Result<(), String> {
        match (self.kind, v) {
            (ParamKind::Int, Value::Int(i)) => self.check_bounds(*i as f64),
            (ParamKind::Float, Value::Float(f)) => self.check_bounds(*f),
            (ParamKind::String, Value::Str(_)) | (ParamKind::Bool, Value::Bool(_)) => Ok(()),
            (ParamKind::Enum, Value::Str(s)) => {
                let choices = self.choices.as_deref().unwrap_or_default();
                if choices.iter().any(|c| c == s) {
                    Ok(())
                } else {
                    Err(format!("{s:?} is not one of {choices:?}"))
                }
            }
            (kind, other) => Err(format!("expected {kind:?}, got {}", other.kind_name()).to_lowercase()),
        }
    }

    fn check_bounds(&self, x: f64) -> Result<(), String> {
        if let Some(min) = self.min {
            if x < min {
                return Err(format!("{x} is below minimum {min}"));
            }
        }
        if let Some(max) = self.max {
            if x > max {
                return Err(format!("{x} is above maximum {max}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterSchema {
    pub entries: Vec<ParamSpec>,
}

/// A problem with a schema itself (as opposed to a value checked against it).
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaProblem {
    pub code: &'static str,
    pub entry: String,
    pub detail: String,
}

impl ParameterSchema {
    pub fn new(entries: Vec<ParamSpec>) -> Self {
        ParameterSchema { entries }
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.entries.iter().find(|e| e.name == *name)
    }

    /// Well-formedness: unique names, enum choices present iff kind=enum,
    /// defaults satisfying their own bounds and choices.
    pub fn problems(&self) -> Vec<SchemaProblem> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            let name = e.name.to_string();
            if !seen.insert(name.clone()) {
                out.push(SchemaProblem {
                    code: "DUPLICATE_PARAM",
                    entry: name.clone(),
                    detail: "parameter name declared twice".into(),
                });
            }
            match (e.kind, &e.choices) {
                (ParamKind::Enum, None) => out.push(SchemaProblem {
                    code: "BAD_SCHEMA_CHOICES",
                    entry: name.clone(),
                    detail: "enum parameter needs choices".into(),
                }),
                (ParamKind::Enum, Some(c)) if c.is_empty() => out.push(SchemaProblem {
                    code: "BAD_SCHEMA_CHOICES",
                    entry: name.clone(),
                    detail: "enum parameter needs at least one choice".into(),
                }),
                (k, Some(_)) if k != ParamKind::Enum => out.push(SchemaProblem {
                    code: "BAD_SCHEMA_CHOICES",
                    entry: name.clone(),
                    detail: "choices are only allowed on enum parameters".into(),
                }),
                _ => {}
            }
            if let (Some(min), Some(max)) = (e.min, e.max) {
                if min > max {
                    out.push(SchemaProblem {
                        code: "BAD_SCHEMA_BOUNDS",
                        entry: name.clone(),
                        detail: format!("min {min} exceeds max {max}"),
                    });
                }
            }
            if let Err(why) = e.check(&e.default) {
                out.push(SchemaProblem {
                    code: "BAD_SCHEMA_DEFAULT",
                    entry: name,
                    detail: why,
                });
            }
        }
        out
    }

    /// Validate a parameter map; every failure names the offending key.
    pub fn validate_params(&self, params: &BTreeMap<String, Value>) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (key, value) in params {
            match self.get(key) {
                None => out.push((key.clone(), "unknown parameter".to_owned())),
                Some(spec) => {
                    if let Err(why) = spec.check(value) {
                        out.push((key.clone(), why));
                    }
                }
            }
        }
        for e in &self.entries {
            if e.required && !params.contains_key(e.name.as_str()) {
                out.push((e.name.to_string(), "required parameter missing".to_owned()));
            }
        }
        out
    }

    /// Schema defaults overlaid with explicit params.
    pub fn resolve(&self, params: &BTreeMap<String, Value>) -> BTreeMap<String, Value> {
        let mut out: BTreeMap<String, Value> = self
            .entries
            .iter()
            .map(|e| (e.name.to_string(), e.default.clone()))
            .collect();
        out.extend(params.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }
}

// ---------------------------------------------------------------------------
// Form inference
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    NumericInput,
    TextInput,
    Toggle,
    Choice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormField {
    pub name: String,
    pub widget: WidgetKind,
    pub initial: Value,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub options: Vec<String>,
    pub integer: bool,
    pub required: bool,
    pub help: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FormDescriptor {
    pub fields: Vec<FormField>,
}

pub fn infer_param_form(schema: &ParameterSchema) -> FormDescriptor {
    let fields = schema
        .entries
        .iter()
        .map(|e| {
            let widget = match e.kind {
                ParamKind::Int | ParamKind::Float => WidgetKind::NumericInput,
                ParamKind::String => WidgetKind::TextInput,
                ParamKind::Bool => WidgetKind::Toggle,
                ParamKind::Enum => WidgetKind::Choice,
            };
            FormField {
                name: e.name.to_string(),
                widget,
                initial: e.default.clone(),
                min: e.min,
                max: e.max,
                options: e.choices.clone().unwrap_or_default(),
                integer: e.kind == ParamKind::Int,
                required: e.required,
                help: e.description.clone(),
            }
        })
        .collect();
    FormDescriptor { fields }
}

// ---------------------------------------------------------------------------
// Pipeline graph
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentSource {
    Builtin,
    Registry { commit_id: String, path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRef {
    pub role: ComponentRole,
    pub name: Ident,
    pub source: ComponentSource,
    #[serde(default)]
    pub external: bool,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl ComponentRef {
    pub fn builtin(role: ComponentRole, name: &str) -> Self {
        ComponentRef {
            role,
            name: Ident::new(name).expect("valid builtin name"),
            source: ComponentSource::Builtin,
            external: false,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.to_owned(), v.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineNode {
    pub node_id: Ident,
    pub component: ComponentRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineEdge {
    pub from: Ident,
    pub to: Ident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineGraph {
    pub nodes: Vec<PipelineNode>,
    pub edges: Vec<PipelineEdge>,
}

impl PipelineGraph {
    pub fn node(&self, id: &str) -> Option<&PipelineNode> {
        self.nodes.iter().find(|n| n.node_id == *id)
    }

    pub fn node_for_role(&self, role: ComponentRole) -> Option<&PipelineNode> {
        self.nodes.iter().find(|n| n.component.role == role)
    }

    /// A five-node pipeline wired along the adjacency table, one node per
    /// role, with node ids equal to the role names.
    pub fn linear(components: [ComponentRef; 5]) -> Self {
        let nodes: Vec<PipelineNode> = components
            .into_iter()
            .map(|c| PipelineNode {
                node_id: Ident::new(c.role.as_str()).expect("role names are identifiers"),
                component: c,
            })
            .collect();
        let id = |r: ComponentRole| Ident::new(r.as_str()).expect("role names are identifiers");
        use ComponentRole::*;
        let edges = [
            (QueryGenerator, SearchBackend),
            (SearchBackend, SnippetClassifier),
            (SnippetClassifier, DocumentClassifier),
            (DocumentClassifier, StoppingStrategy),
            (StoppingStrategy, QueryGenerator),
        ]
        .into_iter()
        .map(|(a, b)| PipelineEdge { from: id(a), to: id(b) })
        .collect();
        PipelineGraph { nodes, edges }
    }

    pub fn any_external(&self) -> bool {
        self.nodes.iter().any(|n| n.component.external)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl Violation {
    pub fn new(code: &str, detail: impl Into<String>) -> Self {
        Violation {
            code: code.to_owned(),
            detail: detail.into(),
            node_id: None,
            field: None,
        }
    }

    pub fn at_node(mut self, node_id: impl Into<String>) -> Self {
        self.node_id = Some(node_id.into());
        self
    }

    pub fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code)?;
        if let Some(n) = &self.node_id {
            write!(f, " [node {n}]")?;
        }
        if let Some(fld) = &self.field {
            write!(f, " [field {fld}]")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn codes(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.code.as_str()).collect()
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// What a registry lookup for a custom component found.
#[derive(Debug, Clone, PartialEq)]
pub enum RegistryLookup {
    Found {
        category: ComponentRole,
        name: String,
        schema: ParameterSchema,
        has_path: bool,
    },
    CommitNotFound,
    /// No registry attached; registry refs are checked for syntax only.
    Unavailable,
}

/// Resolves component names to schemas for validation.
pub trait ComponentCatalog {
    fn builtin_schema(&self, role: ComponentRole, name: &str) -> Option<ParameterSchema>;

    fn registry_component(&self, _commit_id: &str, _path: &str) -> RegistryLookup {
        RegistryLookup::Unavailable
    }
}

/// Validate a pipeline against the structural invariants and the catalog.
/// Violations are reported in a deterministic order.
pub fn validate_pipeline(graph: &PipelineGraph, catalog: &dyn ComponentCatalog) -> ValidationReport {
    let mut v = Vec::new();

    let mut ids: HashMap<&str, &PipelineNode> = HashMap::new();
    for node in &graph.nodes {
        if ids.insert(node.node_id.as_str(), node).is_some() {
            v.push(
                Violation::new("DUPLICATE_NODE_ID", format!("node id {} used twice", node.node_id))
                    .at_node(node.node_id.as_str()),
            );
        }
    }

    let mut by_role: BTreeMap<ComponentRole, Vec<&str>> = BTreeMap::new();
    for node in &graph.nodes {
        by_role.entry(node.component.role).or_default().push(node.node_id.as_str());
    }
    for role in ComponentRole::ALL {
        match by_role.get(&role).map(Vec::len).unwrap_or(0) {
            0 => v.push(Violation::new("MISSING_ROLE", role.as_str()).field(role.as_str())),
            1 => {}
            n => v.push(
                Violation::new("DUPLICATE_ROLE", format!("{role} appears on {n} nodes"))
                    .field(role.as_str()),
            ),
        }
    }

    for (i, edge) in graph.edges.iter().enumerate() {
        let (Some(from), Some(to)) = (ids.get(edge.from.as_str()), ids.get(edge.to.as_str())) else {
            let missing = if ids.contains_key(edge.from.as_str()) { &edge.to } else { &edge.from };
            v.push(
                Violation::new("UNKNOWN_NODE", format!("edge {i} references unknown node {missing}"))
                    .field(format!("edges[{i}]")),
            );
            continue;
        };
        let (fr, tr) = (from.component.role, to.component.role);
        if !fr.may_precede(tr) {
            v.push(
                Violation::new("BAD_EDGE", format!("{} ({fr}) -> {} ({tr}) is not allowed", edge.from, edge.to))
                    .field(format!("edges[{i}]")),
            );
        }
    }

    if !graph.nodes.is_empty() && !weakly_connected(graph) {
        v.push(Violation::new("DISCONNECTED", "pipeline graph is not weakly connected"));
    }

    for node in &graph.nodes {
        let c = &node.component;
        let nid = node.node_id.as_str();
        let schema = match &c.source {
            ComponentSource::Builtin => match catalog.builtin_schema(c.role, c.name.as_str()) {
                Some(s) => Some(s),
                None => {
                    v.push(
                        Violation::new("UNKNOWN_COMPONENT", format!("no builtin {} named {}", c.role, c.name))
                            .at_node(nid),
                    );
                    None
                }
            },
            ComponentSource::Registry { commit_id, path } => {
                if !is_hex64(commit_id) {
                    v.push(
                        Violation::new(
                            "BAD_COMPONENT_REF",
                            format!("commit id must be 64 lowercase hex characters, got {} chars", commit_id.len()),
                        )
                        .at_node(nid)
                        .field("source.commit_id"),
                    );
                    None
                } else if !is_relative_clean(path) {
                    v.push(
                        Violation::new("BAD_COMPONENT_REF", format!("component path {path:?} must be relative"))
                            .at_node(nid)
                            .field("source.path"),
                    );
                    None
                } else if c.role == ComponentRole::SearchBackend {
                    v.push(
                        Violation::new("UNSUPPORTED_SOURCE", "search backends must be builtin").at_node(nid),
                    );
                    None
                } else {
                    match catalog.registry_component(commit_id, path) {
                        RegistryLookup::Unavailable => None,
                        RegistryLookup::CommitNotFound => {
                            v.push(
                                Violation::new("COMMIT_NOT_FOUND", format!("commit {commit_id} is not in the registry"))
                                    .at_node(nid),
                            );
                            None
                        }
                        RegistryLookup::Found {
                            category,
                            schema,
                            has_path,
                            ..
                        } => {
                            if !has_path {
                                v.push(
                                    Violation::new("COMMIT_NOT_FOUND", format!("commit {commit_id} has no file {path}"))
                                        .at_node(nid)
                                        .field("source.path"),
                                );
                            }
                            if category != c.role {
                                v.push(
                                    Violation::new(
                                        "ROLE_MISMATCH",
                                        format!("committed component is a {category}, node is a {}", c.role),
                                    )
                                    .at_node(nid),
                                );
                            }
                            Some(schema)
                        }
                    }
                }
            }
        };
        if let Some(schema) = schema {
            for (key, why) in schema.validate_params(&c.params) {
                v.push(
                    Violation::new("PARAM_INVALID", format!("{key}: {why}"))
                        .at_node(nid)
                        .field(format!("params.{key}")),
                );
            }
        }
    }

    ValidationReport::from_violations(v)
}

fn weakly_connected(graph: &PipelineGraph) -> bool {
    let index: HashMap<&str, usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.node_id.as_str(), i))
        .collect();
    let mut parent: Vec<usize> = (0..graph.nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in &graph.edges {
        if let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let root = find(&mut parent, 0);
    (0..graph.nodes.len()).all(|i| find(&mut parent, i) == root)
}

/// Relative path with no `..`, no empty segments and no absolute prefix.
pub fn is_relative_clean(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && !path.contains('\\')
        && !path.contains('\0')
        && path.split('/').all(|seg| !seg.is_empty() && seg != ".." && seg != ".")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;

    fn valid() -> PipelineGraph {
        use ComponentRole::*;
        PipelineGraph::linear([
            ComponentRef::builtin(QueryGenerator, "single_term"),
            ComponentRef::builtin(SnippetClassifier, "random_attract").with_param("p", 0.5),
            ComponentRef::builtin(DocumentClassifier, "always_relevant"),
            ComponentRef::builtin(StoppingStrategy, "fixed_depth").with_param("k", 3i64),
            ComponentRef::builtin(SearchBackend, "bm25"),
        ])
    }

    #[test]
    fn valid_graph_ok() {
        let r = validate_pipeline(&valid(), &Catalog::builtin());
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn missing_stopping_node() {
        let mut g = valid();
        g.nodes.retain(|n| n.component.role != ComponentRole::StoppingStrategy);
        g.edges.retain(|e| e.from != *"stopping_strategy" && e.to != *"stopping_strategy");
        let r = validate_pipeline(&g, &Catalog::builtin());
        assert!(!r.ok);
        let v = r.violations.iter().find(|v| v.code == "MISSING_ROLE").unwrap();
        assert_eq!(v.detail, "stopping_strategy");
    }

    #[test]
    fn backend_to_stopping_is_bad_edge() {
        let mut g = valid();
        g.edges.push(PipelineEdge {
            from: Ident::new("search_backend").unwrap(),
            to: Ident::new("stopping_strategy").unwrap(),
        });
        let r = validate_pipeline(&g, &Catalog::builtin());
        assert_eq!(r.codes(), vec!["BAD_EDGE"]);
    }

    #[test]
    fn duplicate_role_and_disconnected() {
        let mut g = valid();
        let mut extra = g.nodes[0].clone();
        extra.node_id = Ident::new("second_generator").unwrap();
        g.nodes.push(extra);
        let r = validate_pipeline(&g, &Catalog::builtin());
        assert!(r.has("DUPLICATE_ROLE"));
        assert!(r.has("DISCONNECTED"));
    }

    #[test]
    fn param_errors_name_the_key() {
        let mut g = valid();
        g.nodes[3].component.params.insert("k".into(), Value::Int(0));
        g.nodes[1].component.params.insert("bogus".into(), Value::Bool(true));
        g.nodes[1].component.params.insert("p".into(), Value::Int(1));
        let r = validate_pipeline(&g, &Catalog::builtin());
        let fields: Vec<_> = r.violations.iter().map(|v| v.field.clone().unwrap()).collect();
        assert!(r.violations.iter().all(|v| v.code == "PARAM_INVALID"));
        assert!(fields.contains(&"params.k".to_string()));
        assert!(fields.contains(&"params.bogus".to_string()));
        assert!(fields.contains(&"params.p".to_string()));
    }

    #[test]
    fn unknown_builtin_and_bad_commit() {
        let mut g = valid();
        g.nodes[0].component.name = Ident::new("oracle").unwrap();
        g.nodes[2].component.source = ComponentSource::Registry {
            commit_id: "a".repeat(63),
            path: "judge.py".into(),
        };
        let r = validate_pipeline(&g, &Catalog::builtin());
        assert!(r.has("UNKNOWN_COMPONENT"));
        assert!(r.has("BAD_COMPONENT_REF"));
    }

    #[test]
    fn removing_any_node_is_rejected() {
        let g = valid();
        for i in 0..g.nodes.len() {
            let mut h = g.clone();
            h.nodes.remove(i);
            assert!(!validate_pipeline(&h, &Catalog::builtin()).ok);
        }
    }

    #[test]
    fn unknown_role_rejected_at_parse() {
        let raw = br#"{"role":"logger","name":"x","source":{"kind":"builtin"}}"#;
        assert!(crate::canonical::decode::<ComponentRef>(raw).is_err());
    }

    #[test]
    fn identifier_grammar() {
        assert!(is_identifier("a"));
        assert!(is_identifier("fixed_depth2"));
        assert!(!is_identifier("Fixed"));
        assert!(!is_identifier("2x"));
        assert!(!is_identifier(""));
        assert!(!is_identifier(&"a".repeat(65)));
        assert!(is_identifier(&"a".repeat(64)));
    }

    #[test]
    fn form_inference() {
        let schema = ParameterSchema::new(vec![
            ParamSpec::new("k", ParamKind::Int, Value::Int(3)).bounds(Some(1.0), Some(100.0)),
            ParamSpec {
                choices: Some(vec!["a".into(), "b".into()]),
                ..ParamSpec::new("mode", ParamKind::Enum, Value::from("a"))
            },
            ParamSpec::new("on", ParamKind::Bool, Value::Bool(true)),
        ]);
        let form = infer_param_form(&schema);
        assert_eq!(form.fields.len(), 3);
        let k = &form.fields[0];
        assert_eq!(k.widget, WidgetKind::NumericInput);
        assert_eq!((k.min, k.max, &k.initial), (Some(1.0), Some(100.0), &Value::Int(3)));
        assert_eq!(form.fields[1].widget, WidgetKind::Choice);
        assert_eq!(form.fields[1].options.len(), 2);
        assert_eq!(form.fields[2].widget, WidgetKind::Toggle);
        assert!(infer_param_form(&ParameterSchema::default()).fields.is_empty());
    }

    #[test]
    fn schema_problems() {
        let bad = ParameterSchema::new(vec![
            ParamSpec::new("k", ParamKind::Int, Value::Int(0)).bounds(Some(1.0), None),
            ParamSpec::new("k", ParamKind::Int, Value::Int(1)),
            ParamSpec::new("m", ParamKind::Enum, Value::from("x")),
        ]);
        let codes: Vec<_> = bad.problems().iter().map(|p| p.code).collect();
        assert!(codes.contains(&"BAD_SCHEMA_DEFAULT"));
        assert!(codes.contains(&"DUPLICATE_PARAM"));
        assert!(codes.contains(&"BAD_SCHEMA_CHOICES"));
    }

    #[test]
    fn clean_paths() {
        assert!(is_relative_clean("a/b.txt"));
        assert!(!is_relative_clean("../a"));
        assert!(!is_relative_clean("/etc/passwd"));
        assert!(!is_relative_clean("a//b"));
        assert!(!is_relative_clean(""));
    }
}
