//! Topic and relevance-judgment file formats.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::search::{parse_jsonl, SearchError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
}

/// JSON-lines topics file.
pub fn parse_topics<R: BufRead>(reader: R) -> Result<Vec<Topic>, SearchError> {
    parse_jsonl(reader)
}

/// TREC-style judgments: `topic_id 0 doc_id grade`, relevant iff grade >= 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, SearchError> {
        let mut grades: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let err = |message: String| SearchError::Parse { line: i + 1, message };
            let line = line.map_err(|e| err(e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [topic, _iter, doc, grade] = fields[..] else {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            };
            let grade: u32 = grade
                .parse()
                .map_err(|_| err(format!("grade {grade:?} is not a non-negative integer")))?;
            grades.entry(topic.to_owned()).or_default().insert(doc.to_owned(), grade);
        }
        Ok(Qrels { grades })
    }

    pub fn grade(&self, topic_id: &str, doc_id: &str) -> Option<u32> {
        self.grades.get(topic_id)?.get(doc_id).copied()
    }

    pub fn is_relevant(&self, topic_id: &str, doc_id: &str) -> bool {
        self.grade(topic_id, doc_id).is_some_and(|g| g >= 1)
    }

    pub fn relevant(&self, topic_id: &str) -> BTreeSet<&str> {
        self.grades
            .get(topic_id)
            .map(|m| m.iter().filter(|(_, g)| **g >= 1).map(|(d, _)| d.as_str()).collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qrels_grades() {
        let q = Qrels::parse("t1 0 d1 2\nt1 0 d2 0\n\nt2 0 d1 1\n".as_bytes()).unwrap();
        assert!(q.is_relevant("t1", "d1"));
        assert!(!q.is_relevant("t1", "d2"));
        assert!(!q.is_relevant("t1", "d9"));
        assert_eq!(q.relevant("t1").into_iter().collect::<Vec<_>>(), ["d1"]);
    }

    #[test]
    fn qrels_bad_lines() {
        assert!(matches!(Qrels::parse("t1 0 d1\n".as_bytes()), Err(SearchError::Parse { line: 1, .. })));
        assert!(matches!(Qrels::parse("t 0 d -1\n".as_bytes()), Err(SearchError::Parse { .. })));
    }

    #[test]
    fn topics_jsonl() {
        let t = parse_topics("{\"topic_id\":\"t1\",\"title\":\"blue whale\",\"description\":\"the blue sea\"}\n".as_bytes())
            .unwrap();
        assert_eq!(t[0].title, "blue whale");
    }
}
