use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use simworks_core::bundle::{validate_bundle, ExperimentBundle};
use simworks_core::canonical::{self, parse_canonical, Value};
use simworks_core::workspace::Workspace;
use tempfile::TempDir;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

struct Store {
    dir: TempDir,
}

impl Store {
    /// Fresh store with both fixture templates published.
    fn new() -> Self {
        let s = Store { dir: TempDir::new().unwrap() };
        for t in ["demo", "mock10"] {
            let draft = fixture(&format!("templates/{t}/template.canon.json"));
            s.ok(&["template", "publish", draft.to_str().unwrap()]);
        }
        s
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_simworks"))
            .arg("--store")
            .arg(self.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn porcelain(&self, args: &[&str]) -> Value {
        let mut all = vec!["--porcelain"];
        all.extend_from_slice(args);
        let out = self.ok(&all);
        let v = parse_canonical(&out.stdout).unwrap();
        let mut again = canonical::canonicalize(&v).unwrap();
        again.push(b'\n');
        assert_eq!(again, out.stdout, "porcelain output is canonical");
        v
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let st = Store::new();
    st.ok(&["validate", s(&fixture("minimal.bundle.canon.json"))]);
    let out = st.run(&["validate", s(&fixture("missing_role.canon.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing_role.canon.json: MISSING_ROLE"), "{err}");

    assert_eq!(st.run(&["validate", "/no/such/bundle.canon.json"]).status.code(), Some(4));
    let garbage = st.path().join("garbage.json");
    fs::write(&garbage, "{oops").unwrap();
    let out = st.run(&["validate", s(&garbage)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("garbage.json"));
}

#[test]
fn run_then_replay_check_passes() {
    let st = Store::new();
    let bundle = fixture("minimal.bundle.canon.json");
    let (a, b) = (st.path().join("a"), st.path().join("b"));
    st.ok(&["run", s(&bundle), "--out", s(&a)]);
    st.ok(&["run", s(&bundle), "--out", s(&b)]);
    assert_eq!(
        fs::read(a.join("outputs/trace.u0.jsonl")).unwrap(),
        fs::read(b.join("outputs/trace.u0.jsonl")).unwrap()
    );
    let v = st.porcelain(&["replay-check", s(&bundle), s(&a.join("replay.canon.json"))]);
    assert_eq!(v["result"].as_str(), Some("PASS"));

    // A non-empty output directory is refused.
    assert_eq!(st.run(&["run", s(&bundle), "--out", s(&a)]).status.code(), Some(4));
}

#[test]
fn seed_override_changes_hash_and_replay_fails() {
    let st = Store::new();
    let bundle = fixture("stochastic.bundle.canon.json");
    let (a, b) = (st.path().join("a"), st.path().join("b"));
    let base = st.porcelain(&["run", s(&bundle), "--out", s(&a)]);
    let seeded = st.porcelain(&["run", s(&bundle), "--out", s(&b), "--seed", "2"]);
    assert_ne!(base["bundle_hash"], seeded["bundle_hash"]);
    assert_ne!(base["trace_hashes"], seeded["trace_hashes"]);

    // Hashes of the seed-2 run, claimed for the original bundle.
    let m = Value::map([("trace_hashes", seeded["trace_hashes"].clone())]);
    let manifest = st.path().join("m.canon.json");
    fs::write(&manifest, canonical::canonicalize(&m).unwrap()).unwrap();
    let out = st.run(&["replay-check", s(&bundle), s(&manifest)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn failed_run_exits_3() {
    let st = Store::new();
    let out = st.run(&[
        "run",
        s(&fixture("minimal.bundle.canon.json")),
        "--out",
        s(&st.path().join("o")),
        "--wall-clock-ms",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("TIMEOUT"));
}

#[test]
fn diff_exit_code() {
    let st = Store::new();
    let a = fixture("minimal.bundle.canon.json");
    let b = fixture("stochastic.bundle.canon.json");
    assert_eq!(st.run(&["diff", s(&a), s(&a), "--exit-code"]).status.code(), Some(0));
    assert_eq!(st.run(&["diff", s(&a), s(&b), "--exit-code"]).status.code(), Some(2));
    assert_eq!(st.run(&["diff", s(&a), s(&b)]).status.code(), Some(0));
    let d = st.porcelain(&["diff", s(&a), s(&b)]);
    assert_eq!(d["seed_changed"][0]["old"], Value::Int(42));
    assert_eq!(d["seed_changed"][0]["new"], Value::Int(1));
}

#[test]
fn export_import_round_trip() {
    let st = Store::new();
    let bundle = fixture("minimal.bundle.canon.json");
    let run = st.path().join("run");
    let exp = st.path().join("exp");
    st.ok(&["run", s(&bundle), "--out", s(&run)]);
    st.ok(&["export", s(&bundle), "--out", s(&exp), "--run", s(&run)]);
    let v = st.porcelain(&["import", s(&exp)]);
    assert_eq!(v["bundle_hash"].as_str(), Some("1484d30c3bd117302074b1676eabd6ed6754003ffe23ee07bb35d036f54f175a"));
    assert_eq!(v["has_outputs"], Value::Bool(true));

    fs::write(exp.join("outputs/trace.jsonl"), "tampered\n").unwrap();
    let out = st.run(&["import", s(&exp)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("HASH_MISMATCH"));
}

#[test]
fn porcelain_is_stable_for_deterministic_inputs() {
    let st = Store::new();
    let args = ["validate", s(&fixture("stochastic.bundle.canon.json"))].map(String::from);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(st.porcelain(&args), st.porcelain(&args));
    assert_eq!(st.porcelain(&["template", "list"]), st.porcelain(&["template", "list"]));
    let t = st.porcelain(&["template", "get", "demo", "1"]);
    assert_eq!(t["status"].as_str(), Some("active"));
    assert_eq!(t["template"]["version"], Value::Int(1));
}

#[test]
fn validation_report_matches_library() {
    let st = Store::new();
    let ws = Workspace::open(st.path()).unwrap();
    for name in ["invalid/bad_edge.canon.json", "invalid/param_invalid.canon.json", "minimal.bundle.canon.json"] {
        let path = fixture(name);
        let mut args = vec!["--porcelain", "validate"];
        args.push(s(&path));
        let out = st.run(&args);
        let cli = parse_canonical(&out.stdout).unwrap();
        let b = ExperimentBundle::read(&path).unwrap();
        let lib = canonical::to_value(&validate_bundle(&b, &ws.templates, &ws.registry).unwrap()).unwrap();
        assert_eq!(cli["violations"], lib["violations"], "{name}");
        assert_eq!(cli["ok"], lib["ok"], "{name}");
    }
}

#[test]
fn component_commit_checkout_check() {
    let st = Store::new();
    let src = fixture("components/stop_first");
    let common = ["--author", "tester", "--message", "first"];
    let mut args = vec!["component", "commit", s(&src), "--namespace", "t", "--parent", "none"];
    args.extend_from_slice(&common);
    let c = st.porcelain(&args);
    let commit = c["commit_id"].as_str().unwrap().to_owned();

    // Same parent expectation again: the head has moved.
    let mut stale = vec!["component", "commit", s(&src), "--namespace", "t", "--parent", "none"];
    stale.extend_from_slice(&common);
    let out = st.run(&stale);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CONCURRENT_HEAD"));

    let dest = st.path().join("co");
    let v = st.porcelain(&["component", "checkout", &commit, "--out", s(&dest)]);
    assert_eq!(v["tree_hash"], c["tree_hash"]);
    assert!(dest.join("stop.sh").is_file());

    st.ok(&["component", "check", s(&src)]);
    let broken = st.path().join("broken");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("main.sh"), "cat\n").unwrap();
    let out = st.run(&["--porcelain", "component", "check", s(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!parse_canonical(&out.stdout).unwrap()["findings"].as_list().unwrap().is_empty());
}

#[test]
fn measures_from_trace() {
    let st = Store::new();
    let run = st.path().join("run");
    st.ok(&["run", s(&fixture("minimal.bundle.canon.json")), "--out", s(&run)]);
    let m = st.porcelain(&["measures", s(&run.join("outputs/trace.u0.jsonl"))]);
    let row = &m["sessions"][0];
    assert_eq!(row["queries_issued"], Value::Int(2));
    assert_eq!(row["snippets_examined"], Value::Int(6));
    assert_eq!(row["session_sim_time"], Value::Float(38.0));
    assert_eq!(row["end_reason"].as_str(), Some("EXHAUSTED"));
    assert_eq!(row["marked_precision"], Value::Null);
    // Same as what the executor wrote.
    let written = parse_canonical(&fs::read(run.join("outputs/measures.canon.json")).unwrap()).unwrap();
    assert_eq!(m, written);

    let qrels = fixture("templates/demo/qrels.txt");
    let m = st.porcelain(&["measures", s(&run.join("outputs/trace.u0.jsonl")), "--qrels", s(&qrels)]);
    assert_eq!(m["sessions"][0]["marked_precision"], Value::Float(0.0));
}

#[test]
fn serve_rejects_bad_config() {
    let st = Store::new();
    let cfg = st.path().join("service.canon.json");
    fs::write(&cfg, "{\"listen_address\":\"127.0.0.1:0\",\"stores\":{\"root\":\"ws\"},\"token\":\"\"}").unwrap();
    let out = st.run(&["serve", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("token"));
    assert_eq!(st.run(&["serve", "--config", "/no/such/config"]).status.code(), Some(4));
}
