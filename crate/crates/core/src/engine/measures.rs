//! Session measures, derived from trace events only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonical::Value;
use crate::dataset::Qrels;

use super::session::{EventKind, TraceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeasures {
    pub user: u32,
    pub topic_id: String,
    pub queries_issued: u32,
    pub snippets_examined: u32,
    pub clicks: u32,
    pub docs_marked: u32,
    /// Share of marked documents the qrels call relevant, 0.0 with no
    /// marks; absent when the template has no qrels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked_precision: Option<f64>,
    pub session_sim_time: f64,
    pub end_reason: String,
}

pub fn compute_session_measures(events: &[TraceEvent], qrels: Option<&Qrels>) -> SessionMeasures {
    let mut m = SessionMeasures {
        user: events.first().map(|e| e.user).unwrap_or_default(),
        topic_id: events.first().map(|e| e.topic_id.clone()).unwrap_or_default(),
        queries_issued: 0,
        snippets_examined: 0,
        clicks: 0,
        docs_marked: 0,
        marked_precision: None,
        session_sim_time: 0.0,
        end_reason: String::new(),
    };
    let mut marked = Vec::new();
    for e in events {
        m.session_sim_time = e.sim_time;
        match e.action {
            EventKind::QueryIssued => m.queries_issued += 1,
            EventKind::SnippetExamined => m.snippets_examined += 1,
            EventKind::DocClicked => m.clicks += 1,
            EventKind::DocJudged => {}
            EventKind::DocMarkedRelevant => {
                m.docs_marked += 1;
                if let Some(d) = e.payload.get("doc_id").and_then(Value::as_str) {
                    marked.push(d.to_owned());
                }
            }
            EventKind::SessionEnd => {
                m.end_reason = e.payload.get("reason").and_then(Value::as_str).unwrap_or_default().to_owned();
            }
        }
    }
    if let Some(q) = qrels {
        let rel = marked.iter().filter(|d| q.is_relevant(&m.topic_id, d)).count();
        m.marked_precision = Some(if marked.is_empty() {
            0.0
        } else {
            rel as f64 / marked.len() as f64
        });
    }
    m
}

/// Per-session rows plus means over sessions of every numeric measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeasures {
    pub sessions: Vec<SessionMeasures>,
    pub mean: BTreeMap<String, f64>,
}

impl RunMeasures {
    pub fn from_sessions(mut sessions: Vec<SessionMeasures>) -> Self {
        sessions.sort_by_key(|s| s.user);
        let mut mean = BTreeMap::new();
        let n = sessions.len() as f64;
        if n > 0.0 {
            let sum = |f: &dyn Fn(&SessionMeasures) -> f64| sessions.iter().map(f).sum::<f64>() / n;
            mean.insert("queries_issued".into(), sum(&|s| s.queries_issued.into()));
            mean.insert("snippets_examined".into(), sum(&|s| s.snippets_examined.into()));
            mean.insert("clicks".into(), sum(&|s| s.clicks.into()));
            mean.insert("docs_marked".into(), sum(&|s| s.docs_marked.into()));
            mean.insert("session_sim_time".into(), sum(&|s| s.session_sim_time));
            let precisions: Vec<f64> = sessions.iter().filter_map(|s| s.marked_precision).collect();
            if !precisions.is_empty() {
                mean.insert(
                    "marked_precision".into(),
                    precisions.iter().sum::<f64>() / precisions.len() as f64,
                );
            }
        }
        RunMeasures { sessions, mean }
    }
}
