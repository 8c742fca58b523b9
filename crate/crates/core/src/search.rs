//! Embedded retrieval: an Okapi BM25 inverted index and a fixed-ranking mock.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{self, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerpEntry {
    pub rank: u32,
    pub doc_id: String,
    pub score: f64,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Serp {
    pub query: String,
    pub entries: Vec<SerpEntry>,
}

impl Serp {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub serp_depth: usize,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            serp_depth: 10,
        }
    }
}

impl Bm25Params {
    pub fn check(&self) -> Result<(), SearchError> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(SearchError::BadParams(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(SearchError::BadParams(format!("b must lie in [0,1], got {}", self.b)));
        }
        if self.serp_depth == 0 {
            return Err(SearchError::BadParams("serp_depth must be >= 1".into()));
        }
        Ok(())
    }

    /// Defaults overlaid by any `k1`, `b`, `serp_depth` keys in `params`.
    pub fn from_params(params: &BTreeMap<String, Value>) -> Result<Self, SearchError> {
        let mut p = Bm25Params::default();
        if let Some(v) = params.get("k1") {
            p.k1 = v.as_f64().ok_or_else(|| SearchError::BadParams("k1 must be numeric".into()))?;
        }
        if let Some(v) = params.get("b") {
            p.b = v.as_f64().ok_or_else(|| SearchError::BadParams("b must be numeric".into()))?;
        }
        if let Some(v) = params.get("serp_depth") {
            p.serp_depth = v
                .as_i64()
                .and_then(|d| usize::try_from(d).ok())
                .ok_or_else(|| SearchError::BadParams("serp_depth must be a non-negative integer".into()))?;
        }
        p.check()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("DUPLICATE_DOC_ID: {0}")]
    DuplicateDocId(String),
    #[error("PARSE_ERROR at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("BAD_BACKEND_PARAMS: {0}")]
    BadParams(String),
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            SearchError::DuplicateDocId(_) => "DUPLICATE_DOC_ID",
            SearchError::Parse { .. } => "PARSE_ERROR",
            SearchError::BadParams(_) => "BAD_BACKEND_PARAMS",
        }
    }
}

/// Lowercase, split on any non-alphanumeric character, drop empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Read a JSON-lines corpus. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, SearchError> {
    parse_jsonl(reader)
}

pub(crate) fn parse_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, SearchError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SearchError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = canonical::decode(line.as_bytes()).map_err(|e| SearchError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Immutable inverted index.
#[derive(Debug, Clone)]
pub struct Index {
    docs: Vec<Document>,
    doc_len: Vec<u32>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    avgdl: f64,
}

impl Index {
    pub fn build(docs: Vec<Document>) -> Result<Self, SearchError> {
        let mut seen = HashSet::new();
        for d in &docs {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(SearchError::DuplicateDocId(d.doc_id.clone()));
            }
        }
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        let mut total = 0u64;
        for (i, d) in docs.iter().enumerate() {
            let tokens = tokenize(&indexed_text(d));
            doc_len.push(tokens.len() as u32);
            total += tokens.len() as u64;
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, n) in tf {
                postings.entry(term).or_default().push((i as u32, n));
            }
        }
        let avgdl = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Ok(Index {
            docs,
            doc_len,
            postings,
            avgdl,
        })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, SearchError> {
        Index::build(parse_corpus(reader)?)
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn search(&self, query: &str, params: &Bm25Params) -> Serp {
        let terms = query_terms(query);
        let n = self.docs.len() as f64;
        let mut scores = vec![0.0f64; self.docs.len()];
        let mut touched = Vec::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = bm25_idf(n, list.len() as f64);
            for &(doc, tf) in list {
                let d = doc as usize;
                if scores[d] == 0.0 {
                    touched.push(d);
                }
                scores[d] += idf * bm25_tf_part(tf as f64, self.doc_len[d] as f64, self.avgdl, params);
            }
        }
        let mut hits: Vec<(usize, f64)> = touched
            .into_iter()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|d| (d, scores[d]))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0].doc_id.as_bytes().cmp(self.docs[b.0].doc_id.as_bytes()))
        });
        hits.truncate(params.serp_depth);
        let entries = hits
            .into_iter()
            .enumerate()
            .map(|(i, (d, score))| SerpEntry {
                rank: i as u32 + 1,
                doc_id: self.docs[d].doc_id.clone(),
                score,
                snippet: make_snippet(&self.docs[d].body, &terms),
            })
            .collect();
        Serp {
            query: query.to_owned(),
            entries,
        }
    }
}

/// Title and body joined by a single space.
pub fn indexed_text(d: &Document) -> String {
    format!("{} {}", d.title, d.body)
}

/// Distinct query tokens in first-occurrence order.
pub fn query_terms(query: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    tokenize(query).into_iter().filter(|t| seen.insert(t.clone())).collect()
}

pub fn bm25_idf(n: f64, df: f64) -> f64 {
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

pub fn bm25_tf_part(tf: f64, dl: f64, avgdl: f64, p: &Bm25Params) -> f64 {
    tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl))
}

pub const SNIPPET_CHARS: usize = 160;

/// First sentence containing a query term, else the body prefix; capped.
pub fn make_snippet(body: &str, terms: &[String]) -> String {
    let wanted: HashSet<&str> = terms.iter().map(String::as_str).collect();
    let chosen = body
        .split(['.', '?', '!'])
        .map(str::trim)
        .find(|s| tokenize(s).iter().any(|t| wanted.contains(t.as_str())))
        .unwrap_or(body);
    chosen.chars().take(SNIPPET_CHARS).collect()
}

/// Configuration of the deterministic mock backend.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(default)]
    pub ranking: Vec<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Vec<String>>,
}

/// The configured ranking (or the per-query override) with scores 1/rank.
pub fn mock_search(config: &MockConfig, query: &str) -> Serp {
    let ranking = config.overrides.get(query).unwrap_or(&config.ranking);
    Serp {
        query: query.to_owned(),
        entries: ranking
            .iter()
            .enumerate()
            .map(|(i, id)| SerpEntry {
                rank: i as u32 + 1,
                doc_id: id.clone(),
                score: 1.0 / (i as f64 + 1.0),
                snippet: String::new(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Document {
        Document {
            doc_id: id.into(),
            title: String::new(),
            body: body.into(),
        }
    }

    fn small() -> Index {
        Index::build(vec![doc("d1", "a b"), doc("d2", "a"), doc("d3", "c")]).unwrap()
    }

    #[test]
    fn counting() {
        let idx = small();
        assert_eq!(idx.doc_count(), 3);
        assert_eq!(idx.df("a"), 2);
        assert!((idx.avgdl() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_ranking() {
        let serp = small().search("a", &Bm25Params::default());
        let ids: Vec<_> = serp.entries.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(ids, ["d2", "d1"]);
        let idf = 1.6f64.ln();
        assert!((serp.entries[0].score - idf * 2.2 / 1.975).abs() < 1e-12);
        assert!((serp.entries[1].score - idf * 2.2 / 2.65).abs() < 1e-12);
        assert_eq!(serp.entries[0].rank, 1);
    }

    #[test]
    fn absent_term_and_empty_corpus() {
        assert!(small().search("zzz", &Bm25Params::default()).is_empty());
        let empty = Index::build(vec![]).unwrap();
        assert_eq!(empty.doc_count(), 0);
        assert!(empty.search("a", &Bm25Params::default()).is_empty());
    }

    #[test]
    fn duplicate_doc_id() {
        let err = Index::build(vec![doc("x", "a"), doc("x", "b")]).unwrap_err();
        assert_eq!(err.code(), "DUPLICATE_DOC_ID");
    }

    #[test]
    fn parse_error_has_line() {
        let src = "{\"doc_id\":\"a\",\"title\":\"\",\"body\":\"x\"}\n{oops\n";
        match parse_corpus(src.as_bytes()) {
            Err(SearchError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = Index::build(vec![doc("zz", "whale song"), doc("aa", "whale song"), doc("m", "other")]).unwrap();
        let serp = idx.search("whale", &Bm25Params::default());
        let ids: Vec<_> = serp.entries.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(ids, ["aa", "zz"]);
        assert_eq!(serp.entries[0].score, serp.entries[1].score);
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Blue-Whale, the SEA!"), ["blue", "whale", "the", "sea"]);
        assert!(tokenize("  ..  ").is_empty());
    }

    #[test]
    fn snippet_prefers_matching_sentence() {
        let body = "Nothing here. Whales sing loudly! The end";
        assert_eq!(make_snippet(body, &["whales".into()]), "Whales sing loudly");
        assert_eq!(make_snippet(body, &["zzz".into()]), body);
        let long = "x".repeat(500);
        assert_eq!(make_snippet(&long, &[]).chars().count(), SNIPPET_CHARS);
    }

    #[test]
    fn depth_truncates() {
        let docs = (0..20).map(|i| doc(&format!("d{i:02}"), &"w ".repeat(i + 1))).collect();
        let idx = Index::build(docs).unwrap();
        let p = Bm25Params {
            serp_depth: 5,
            ..Bm25Params::default()
        };
        assert_eq!(idx.search("w", &p).len(), 5);
    }

    #[test]
    fn mock_rankings() {
        let cfg = MockConfig {
            ranking: (1..=10).map(|i| format!("m{i}")).collect(),
            overrides: BTreeMap::from([("x".to_string(), vec!["o1".to_string()])]),
        };
        let serp = mock_search(&cfg, "anything");
        assert_eq!(serp.len(), 10);
        assert_eq!(serp.entries[0].score, 1.0);
        assert_eq!(serp.entries[1].score, 0.5);
        assert!((serp.entries[2].score - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mock_search(&cfg, "x").entries[0].doc_id, "o1");
        assert!(mock_search(&MockConfig::default(), "q").is_empty());
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params { b: 1.5, ..Default::default() }.check().is_err());
        assert!(Bm25Params { k1: -1.0, ..Default::default() }.check().is_err());
        assert!(Bm25Params { serp_depth: 0, ..Default::default() }.check().is_err());
        let p = Bm25Params::from_params(&BTreeMap::from([("serp_depth".to_string(), Value::Int(3))])).unwrap();
        assert_eq!(p.serp_depth, 3);
    }
}
