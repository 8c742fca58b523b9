//! Wire protocol v1 for out-of-process components.
//!
//! The engine writes one canonical object per line to the child's stdin and
//! reads one canonical object per line from its stdout. Replies must already
//! be in canonical form; anything else is a protocol error.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::canonical::{self, Value};
use crate::dataset::Topic;
use crate::engine::components::{
    ClickedDoc, ComponentError, ComponentResult, DocumentClassifier, QueryGenerator, SnippetClassifier, StopAction,
    StoppingStrategy,
};
use crate::engine::SessionState;
use crate::model::ComponentRole;
use crate::registry::ComponentManifest;
use crate::search::SerpEntry;

use super::RunLog;

pub const COMPONENT_TIMEOUT: &str = "COMPONENT_TIMEOUT";
pub const COMPONENT_PROTOCOL: &str = "COMPONENT_PROTOCOL";
pub const COMPONENT_EXIT: &str = "COMPONENT_EXIT";

/// Everything needed to start one component process.
#[derive(Debug, Clone)]
pub struct LaunchSpec {
    pub node_id: String,
    pub checkout: PathBuf,
    pub manifest: ComponentManifest,
    pub request_timeout: Duration,
    pub deadline: Option<Instant>,
}

impl LaunchSpec {
    /// A file in the checkout wins over a same-named program on PATH.
    fn command(&self) -> Command {
        let first = self.manifest.entrypoint[0].trim_start_matches("./");
        let local = self.checkout.join(first);
        let program = if local.is_file() {
            local.into_os_string()
        } else {
            first.into()
        };
        let mut cmd = Command::new(program);
        cmd.args(&self.manifest.entrypoint[1..])
            .current_dir(&self.checkout)
            .env_clear()
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(path) = std::env::var_os("PATH") {
            cmd.env("PATH", path);
        }
        for name in &self.manifest.env {
            if let Some(v) = std::env::var_os(name) {
                cmd.env(name, v);
            }
        }
        cmd
    }
}

enum Line {
    Text(String),
    Eof,
    Failed(String),
}

pub struct ComponentProcess {
    node_id: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Line>,
    request_timeout: Duration,
    deadline: Option<Instant>,
}

impl ComponentProcess {
    pub fn spawn(spec: &LaunchSpec, log: Option<RunLog>) -> ComponentResult<Self> {
        if spec.manifest.entrypoint.is_empty() {
            return Err(ComponentError::new(COMPONENT_EXIT, "empty entrypoint"));
        }
        let mut child = spec
            .command()
            .spawn()
            .map_err(|e| ComponentError::new(COMPONENT_EXIT, format!("failed to start {:?}: {e}", spec.manifest.entrypoint)))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut buf = Vec::new();
                let msg = match reader.read_until(b'\n', &mut buf) {
                    Ok(0) => Line::Eof,
                    Ok(_) => match String::from_utf8(buf) {
                        Ok(s) => Line::Text(s),
                        Err(_) => Line::Failed("reply is not UTF-8".into()),
                    },
                    Err(e) => Line::Failed(e.to_string()),
                };
                let last = !matches!(msg, Line::Text(_));
                if tx.send(msg).is_err() || last {
                    break;
                }
            }
        });
        let node = spec.node_id.clone();
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines() {
                let Ok(line) = line else { break };
                if let Some(log) = &log {
                    log.warn(&format!("[{node}] {line}"));
                }
            }
        });

        Ok(ComponentProcess {
            node_id: spec.node_id.clone(),
            child,
            stdin,
            lines: rx,
            request_timeout: spec.request_timeout,
            deadline: spec.deadline,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    /// Send one request and wait for the reply object.
    pub fn call(&mut self, request: &Value) -> ComponentResult<BTreeMap<String, Value>> {
        let mut line = canonical::canonicalize(request).map_err(|e| ComponentError::new(COMPONENT_PROTOCOL, e.to_string()))?;
        line.push(b'\n');
        let sent = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(&line).and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if sent.is_err() {
            return Err(self.exit_error("closed its input"));
        }

        let mut wait = self.request_timeout;
        let mut deadline_bound = false;
        if let Some(d) = self.deadline {
            let left = d.saturating_duration_since(Instant::now());
            if left < wait {
                wait = left;
                deadline_bound = true;
            }
        }
        match self.lines.recv_timeout(wait) {
            Ok(Line::Text(text)) => parse_reply(&text),
            Ok(Line::Eof) | Err(RecvTimeoutError::Disconnected) => Err(self.exit_error("closed its output")),
            Ok(Line::Failed(why)) => Err(ComponentError::new(COMPONENT_PROTOCOL, why)),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                if deadline_bound {
                    Err(ComponentError::new("TIMEOUT", "run wall-clock limit reached while waiting for a reply"))
                } else {
                    Err(ComponentError::new(
                        COMPONENT_TIMEOUT,
                        format!("no reply within {} ms", self.request_timeout.as_millis()),
                    ))
                }
            }
        }
    }

    fn exit_error(&mut self, what: &str) -> ComponentError {
        let deadline = Instant::now() + Duration::from_secs(2);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(s)) => break Some(s),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => break None,
            }
        };
        match status {
            Some(s) if !s.success() => ComponentError::new(COMPONENT_EXIT, format!("process {what} and exited with {s}")),
            _ => ComponentError::new(COMPONENT_PROTOCOL, format!("process {what} before replying")),
        }
    }
}

impl Drop for ComponentProcess {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Parse one reply line; it must be a canonical object followed by `\n`.
pub fn parse_reply(line: &str) -> ComponentResult<BTreeMap<String, Value>> {
    let bad = |why: &str| ComponentError::new(COMPONENT_PROTOCOL, format!("{why}: {:?}", line.trim_end_matches('\n')));
    let body = line.strip_suffix('\n').ok_or_else(|| bad("reply not newline-terminated"))?;
    let value = canonical::parse_canonical(body.as_bytes()).map_err(|_| bad("reply is not valid canonical JSON"))?;
    let again = canonical::canonicalize(&value).map_err(|_| bad("reply is not valid canonical JSON"))?;
    if again != body.as_bytes() {
        return Err(bad("reply is not in canonical form"));
    }
    match value {
        Value::Map(m) => Ok(m),
        _ => Err(bad("reply is not an object")),
    }
}

fn field<'a>(reply: &'a BTreeMap<String, Value>, key: &str) -> ComponentResult<&'a Value> {
    reply
        .get(key)
        .ok_or_else(|| ComponentError::new(COMPONENT_PROTOCOL, format!("reply lacks {key:?}")))
}

fn bool_field(reply: &BTreeMap<String, Value>, key: &str) -> ComponentResult<bool> {
    field(reply, key)?
        .as_bool()
        .ok_or_else(|| ComponentError::new(COMPONENT_PROTOCOL, format!("{key:?} must be a boolean")))
}

fn request(op: &str, fields: Vec<(&str, Value)>) -> Value {
    let mut m = BTreeMap::new();
    m.insert("op".to_owned(), Value::Str(op.to_owned()));
    for (k, v) in fields {
        m.insert(k.to_owned(), v);
    }
    Value::Map(m)
}

pub fn topic_value(t: &Topic) -> Value {
    Value::map([
        ("topic_id", Value::Str(t.topic_id.clone())),
        ("title", Value::Str(t.title.clone())),
        ("description", Value::Str(t.description.clone())),
    ])
}

/// A started and initialized component process acting in one role.
pub struct External {
    process: ComponentProcess,
}

impl External {
    /// Spawn and perform the `init` handshake.
    pub fn start(
        spec: &LaunchSpec,
        role: ComponentRole,
        params: BTreeMap<String, Value>,
        topic: &Topic,
        log: Option<RunLog>,
    ) -> ComponentResult<Self> {
        let mut process = ComponentProcess::spawn(spec, log)?;
        let reply = process.call(&request(
            "init",
            vec![
                ("category", Value::Str(role.as_str().to_owned())),
                ("params", Value::Map(params)),
                ("topic", topic_value(topic)),
            ],
        ))?;
        if !bool_field(&reply, "ok")? {
            return Err(ComponentError::new(COMPONENT_PROTOCOL, "init was refused"));
        }
        Ok(External { process })
    }

    pub fn node_id(&self) -> &str {
        self.process.node_id()
    }
}

impl QueryGenerator for External {
    fn next_query(&mut self, state: &SessionState) -> ComponentResult<Option<String>> {
        let reply = self
            .process
            .call(&request("next_query", vec![("state_summary", state.summary())]))?;
        match field(&reply, "query")? {
            Value::Null => Ok(None),
            Value::Str(q) => Ok(Some(q.clone())),
            _ => Err(ComponentError::new(COMPONENT_PROTOCOL, "\"query\" must be a string or null")),
        }
    }
}

impl SnippetClassifier for External {
    fn classify_snippet(&mut self, _topic: &Topic, entry: &SerpEntry, rand: f64) -> ComponentResult<bool> {
        let reply = self.process.call(&request(
            "classify_snippet",
            vec![
                ("snippet", Value::Str(entry.snippet.clone())),
                ("doc_id", Value::Str(entry.doc_id.clone())),
                ("rank", Value::Int(entry.rank.into())),
                ("rand", Value::Float(rand)),
            ],
        ))?;
        bool_field(&reply, "attractive")
    }
}

impl DocumentClassifier for External {
    fn classify_document(&mut self, _topic: &Topic, doc: &ClickedDoc, rand: f64) -> ComponentResult<bool> {
        let doc = Value::map([
            ("doc_id", Value::Str(doc.doc_id.clone())),
            ("rank", Value::Int(doc.rank.into())),
            ("title", Value::Str(doc.title.clone())),
            ("body", Value::Str(doc.body.clone())),
        ]);
        let reply = self
            .process
            .call(&request("classify_document", vec![("doc", doc), ("rand", Value::Float(rand))]))?;
        bool_field(&reply, "relevant")
    }
}

impl StoppingStrategy for External {
    fn decide(&mut self, state: &SessionState) -> ComponentResult<StopAction> {
        let reply = self
            .process
            .call(&request("decide", vec![("state_summary", state.summary())]))?;
        match field(&reply, "action")?.as_str() {
            Some("CONTINUE") => Ok(StopAction::Continue),
            Some("NEXT_QUERY") => Ok(StopAction::NextQuery),
            Some("END") => Ok(StopAction::End),
            _ => Err(ComponentError::new(
                COMPONENT_PROTOCOL,
                "\"action\" must be CONTINUE, NEXT_QUERY or END",
            )),
        }
    }
}

/// Checkout directory of a node inside a run directory.
pub fn checkout_dir(run_dir: &Path, node_id: &str) -> PathBuf {
    run_dir.join("components").join(node_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_must_be_canonical() {
        assert!(parse_reply("{\"ok\":true}\n").is_ok());
        for bad in ["{\"ok\": true}\n", "{\"b\":1,\"a\":2}\n", "[1]\n", "{\"ok\":true}", "nope\n"] {
            assert_eq!(parse_reply(bad).unwrap_err().code, COMPONENT_PROTOCOL, "{bad:?}");
        }
    }

    #[test]
    fn protocol_error_names_the_line() {
        let e = parse_reply("{\"action\" : \"END\"}\n").unwrap_err();
        assert!(e.detail.contains("{\\\"action\\\" : \\\"END\\\"}"), "{}", e.detail);
    }
}
