//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs without the test harness so the lines are always printed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use simworks_core::bundle::{bundle_hash, ExperimentBundle};
use simworks_core::canonical::{canonicalize, content_hash, parse_canonical, ContentHash, Value};
use simworks_core::engine::rng::SplitMix64;
use simworks_core::engine::{BuiltinOnly, EventKind, SessionLimits, SessionTrace, Simulation};
use simworks_core::executor::{Executor, ExecutorConfig, Reproduction, RunStatus};
use simworks_core::model::{ComponentRole, ComponentSource, Ident};
use simworks_core::registry::{compute_commit_id, ComponentTree, Registry};
use simworks_core::search::{Bm25Params, Document, Index};
use simworks_core::templates::{TemplateDraft, VersionSelector};
use simworks_core::workspace::Workspace;
use tempfile::TempDir;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bundle(name: &str) -> ExperimentBundle {
    ExperimentBundle::read(&fixtures().join(name)).expect("fixture bundle")
}

fn workspace() -> (TempDir, Workspace) {
    let dir = TempDir::new().unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    for t in ["demo", "mock10"] {
        ws.templates
            .publish_file(&fixtures().join("templates").join(t).join("template.canon.json"))
            .unwrap();
    }
    (dir, ws)
}

fn executor(ws: &Workspace) -> Executor {
    ws.executor(ExecutorConfig::default()).unwrap()
}

fn set_node(b: &mut ExperimentBundle, role: ComponentRole, name: &str, params: &[(&str, Value)]) {
    let node = b.pipeline.nodes.iter_mut().find(|n| n.component.role == role).unwrap();
    node.component.name = Ident::new(name).unwrap();
    node.component.params = params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
}

fn u0_bytes(ex: &Executor, run_id: &str) -> Vec<u8> {
    fs::read(ex.run_dir(run_id).join("outputs/trace.u0.jsonl")).unwrap()
}

// ---------------------------------------------------------------------------

fn determinism() -> Check {
    let (_d, ws) = workspace();
    let ex = executor(&ws);
    let b = bundle("minimal.bundle.canon.json");
    let t0 = Instant::now();
    let mut hashes = Vec::new();
    for _ in 0..20 {
        let rec = ex.execute(&b).map_err(|e| e.to_string())?;
        ensure!(rec.status == RunStatus::Completed, "run failed: {:?}", rec.failure);
        hashes.push(ContentHash::of_bytes(&u0_bytes(&ex, &rec.run_id)));
    }
    let elapsed = t0.elapsed();
    let distinct: std::collections::BTreeSet<_> = hashes.iter().collect();
    ensure!(distinct.len() == 1, "{} distinct trace.u0.jsonl hashes over 20 runs", distinct.len());
    ensure!(elapsed < Duration::from_secs(10), "20 runs took {elapsed:?}");
    Ok(format!("20 identical traces {}, {:.2}s", hashes[0], elapsed.as_secs_f64()))
}

fn seed_sensitivity() -> Check {
    let (_d, ws) = workspace();
    let ex = executor(&ws);
    let base = bundle("stochastic.bundle.canon.json");
    let mut differing = 0;
    for s in 0..20u64 {
        let run = |seed: u64| {
            let mut b = base.clone();
            b.seeds.master = seed;
            let rec = ex.execute(&b).unwrap();
            assert_eq!(rec.status, RunStatus::Completed, "{:?}", rec.failure);
            ContentHash::of_bytes(&u0_bytes(&ex, &rec.run_id))
        };
        if run(s) != run(s + 1) {
            differing += 1;
        }
    }
    ensure!(differing >= 19, "only {differing}/20 seed pairs differ");
    Ok(format!("{differing}/20 seed pairs give different trace.u0 hashes"))
}

fn reproducibility_scope() -> Check {
    let (_d, ws) = workspace();
    let ex = executor(&ws);
    let b = bundle("stochastic.bundle.canon.json");
    let recorded = ex.execute(&b).map_err(|e| e.to_string())?.trace_hashes().to_vec();
    let mut other = b.clone();
    other.seeds.master += 1;
    let other_hashes = ex.execute(&other).map_err(|e| e.to_string())?.trace_hashes().to_vec();
    let mut ext = b.clone();
    ext.pipeline.nodes[0].component.external = true;

    let verdict = |bundle: &ExperimentBundle, hashes: &[ContentHash]| ex.verify_reproduction(bundle, hashes).unwrap().0;
    let pass = verdict(&b, &recorded);
    let fail = verdict(&b, &other_hashes);
    let scoped = verdict(&ext, &recorded);
    ensure!(pass == Reproduction::Pass, "pinned fixture gave {pass:?}");
    ensure!(matches!(fail, Reproduction::Fail { .. }), "different seed gave {fail:?}");
    ensure!(scoped == Reproduction::ScopeLimited, "external component gave {scoped:?}");
    Ok("PASS, FAIL, SCOPE_LIMITED observed".into())
}

// ---------------------------------------------------------------------------

/// Direct evaluation of the Okapi formula, independent of the index.
fn brute_force(docs: &[Document], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
    let toks = |s: &str| -> Vec<String> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    };
    let texts: Vec<Vec<String>> = docs.iter().map(|d| toks(&format!("{} {}", d.title, d.body))).collect();
    let n = docs.len() as f64;
    let avgdl = texts.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut terms: Vec<String> = Vec::new();
    for t in toks(query) {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    let mut out: Vec<(String, f64)> = docs
        .iter()
        .zip(&texts)
        .filter(|(_, text)| terms.iter().any(|t| text.contains(t)))
        .map(|(d, text)| {
            let dl = text.len() as f64;
            let score = terms
                .iter()
                .map(|t| {
                    let df = texts.iter().filter(|x| x.contains(t)).count() as f64;
                    let tf = text.iter().filter(|x| *x == t).count() as f64;
                    ((n - df + 0.5) / (df + 0.5) + 1.0).ln() * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
                })
                .sum();
            (d.doc_id.clone(), score)
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

const WORDS: [&str; 12] = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa", "lambda", "mu"];

fn words(rng: &mut SplitMix64, max: u64) -> String {
    let n = rng.next_u64() % (max + 1);
    (0..n)
        .map(|_| WORDS[(rng.next_u64() % WORDS.len() as u64) as usize])
        .collect::<Vec<_>>()
        .join(" ")
}

fn bm25_oracle() -> Check {
    let mut rng = SplitMix64::new(2024);
    let params = Bm25Params::default();
    let mut worst = 0.0f64;
    let mut compared = 0;
    for c in 0..20 {
        let n = 1 + rng.next_u64() % 100;
        let docs: Vec<Document> = (0..n)
            .map(|i| Document {
                doc_id: format!("c{c}d{i:03}"),
                title: words(&mut rng, 4),
                body: words(&mut rng, 30),
            })
            .collect();
        let index = Index::build(docs.clone()).map_err(|e| e.to_string())?;
        for q in 0..10 {
            let query = format!("{} {}", WORDS[(rng.next_u64() % 12) as usize], words(&mut rng, 2));
            let got = index.search(&query, &Bm25Params { serp_depth: 1000, ..params });
            let want = brute_force(&docs, &query, params.k1, params.b);
            let got_ids: Vec<&str> = got.entries.iter().map(|e| e.doc_id.as_str()).collect();
            let want_ids: Vec<&str> = want.iter().map(|(d, _)| d.as_str()).collect();
            ensure!(got_ids == want_ids, "corpus {c} query {q} {query:?}: order {got_ids:?} vs {want_ids:?}");
            for (e, (_, s)) in got.entries.iter().zip(&want) {
                worst = worst.max((e.score - s).abs());
                compared += 1;
            }
        }
    }
    ensure!(worst <= 1e-9, "max score difference {worst:e}");

    let doc = |id: &str, body: &str| Document {
        doc_id: id.into(),
        title: String::new(),
        body: body.into(),
    };
    let small = Index::build(vec![doc("d1", "a b"), doc("d2", "a"), doc("d3", "c")]).map_err(|e| e.to_string())?;
    let ids: Vec<String> = small.search("a", &params).entries.into_iter().map(|e| e.doc_id).collect();
    ensure!(ids == ["d2", "d1"], "hand fixture ranked {ids:?}");
    Ok(format!("200 queries, {compared} scores, max |diff| {worst:e}; fixture ranks [d2, d1]"))
}

fn click_model() -> Check {
    let (_d, ws) = workspace();
    let mut b = bundle("minimal.bundle.canon.json");
    set_node(&mut b, ComponentRole::QueryGenerator, "fixed_queries", &[("queries", Value::Str("q1".into()))]);
    set_node(&mut b, ComponentRole::SnippetClassifier, "rank_biased", &[("gamma", Value::Float(0.5))]);
    set_node(&mut b, ComponentRole::StoppingStrategy, "fixed_depth", &[("k", Value::Int(5))]);
    let env = ws
        .templates
        .resolve_environment(&b.template_ref)
        .and_then(|e| e.load())
        .map_err(|e| e.to_string())?;
    let sim = Simulation {
        pipeline: &b.pipeline,
        env: &env,
        master_seed: 7,
        session: &b.session,
    };
    const SESSIONS: u32 = 10_000;
    let t0 = Instant::now();
    let mut clicks = [0u32; 5];
    for user in 0..SESSIONS {
        let o = sim.run_user(user, &BuiltinOnly, SessionLimits::default()).map_err(|e| e.to_string())?;
        for e in o.trace.events.iter().filter(|e| e.action == EventKind::DocClicked) {
            let rank = e.payload["rank"].as_i64().unwrap_or(0);
            ensure!((1..=5).contains(&rank), "click at rank {rank}");
            clicks[rank as usize - 1] += 1;
        }
    }
    let elapsed = t0.elapsed();
    let rates: Vec<f64> = clicks.iter().map(|&c| c as f64 / SESSIONS as f64).collect();
    for (i, r) in rates.iter().enumerate() {
        let expected = 0.5f64.powi(i as i32);
        ensure!((r - expected).abs() <= 0.02, "rank {} click rate {r:.4}, expected {expected}", i + 1);
    }
    ensure!(elapsed < Duration::from_secs(30), "10,000 sessions took {elapsed:?}");
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.4}")).collect();
    Ok(format!("rates [{}] in {:.2}s", shown.join(", "), elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------

fn random_value(rng: &mut SplitMix64, depth: u32) -> Value {
    const CHARS: [char; 14] = ['a', 'Z', '0', ' ', '"', '\\', '\n', '\t', '\r', '\u{1}', '\u{1f}', '\u{7f}', 'é', '🦀'];
    let string = |rng: &mut SplitMix64| -> String {
        (0..rng.next_u64() % 8)
            .map(|_| CHARS[(rng.next_u64() % CHARS.len() as u64) as usize])
            .collect()
    };
    let pick = if depth >= 3 { rng.next_u64() % 5 } else { rng.next_u64() % 7 };
    match pick {
        0 => Value::Null,
        1 => Value::Bool(rng.next_u64().is_multiple_of(2)),
        2 => Value::Int(rng.next_u64() as i64),
        3 => loop {
            let f = match rng.next_u64() % 3 {
                0 => f64::from_bits(rng.next_u64()),
                1 => (rng.next_u64() % 100_000) as f64 / 1000.0,
                _ => rng.next_f64() * 1e-7,
            };
            if f.is_finite() {
                break Value::Float(f);
            }
        },
        4 => Value::Str(string(rng)),
        5 => Value::List((0..rng.next_u64() % 5).map(|_| random_value(rng, depth + 1)).collect()),
        _ => Value::Map(
            (0..rng.next_u64() % 5)
                .map(|_| (string(rng), random_value(rng, depth + 1)))
                .collect(),
        ),
    }
}

const GOLDEN: &str = "1484d30c3bd117302074b1676eabd6ed6754003ffe23ee07bb35d036f54f175a";

fn canonical_laws() -> Check {
    let mut rng = SplitMix64::new(99);
    for i in 0..10_000 {
        let v = random_value(&mut rng, 0);
        let bytes = canonicalize(&v).map_err(|e| format!("value {i}: {e}"))?;
        let back = parse_canonical(&bytes).map_err(|e| format!("value {i}: {e}"))?;
        ensure!(back == v, "value {i} did not round-trip: {}", String::from_utf8_lossy(&bytes));
    }
    let empty = content_hash(&Value::Map(BTreeMap::new())).map_err(|e| e.to_string())?;
    ensure!(
        empty.as_str() == "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a",
        "SHA-256 of {{}} is {empty}"
    );
    // The constant was computed independently with Python's hashlib; the
    // release binary is a second build of the same code path.
    let lib = bundle_hash(&bundle("minimal.bundle.canon.json")).map_err(|e| e.to_string())?;
    ensure!(lib.as_str() == GOLDEN, "library golden hash {lib}");
    let store = TempDir::new().unwrap();
    cli(store.path(), &["template", "publish", fixture_str("templates/mock10/template.canon.json").as_str()])?;
    let out = cli(store.path(), &["--porcelain", "validate", fixture_str("minimal.bundle.canon.json").as_str()])?;
    let v = parse_canonical(&out.stdout).map_err(|e| e.to_string())?;
    ensure!(v["bundle_hash"].as_str() == Some(GOLDEN), "CLI golden hash {:?}", v["bundle_hash"]);
    Ok("10,000 round-trips, SHA-256({}) vector, golden hash from library and CLI".into())
}

fn template_policy() -> Check {
    let (dir, ws) = workspace();
    let ex = executor(&ws);
    let v1 = ws.templates.get("mock10", VersionSelector::Exact(1)).map_err(|e| e.to_string())?.bytes;
    let b = bundle("minimal.bundle.canon.json");
    let before = ex.execute(&b).map_err(|e| e.to_string())?;

    let src = fixtures().join("templates/mock10");
    let staging = dir.path().join("mock10_v2");
    fs::create_dir_all(&staging).unwrap();
    for f in ["corpus.jsonl", "topics.jsonl"] {
        fs::copy(src.join(f), staging.join(f)).unwrap();
    }
    let mut draft: TemplateDraft =
        simworks_core::canonical::decode(&fs::read(src.join("template.canon.json")).unwrap()).map_err(|e| e.to_string())?;
    let reversed: Vec<Value> = (1..=10).rev().map(|i| Value::Str(format!("m{i}"))).collect();
    draft.backend.params.insert("ranking".into(), Value::List(reversed));
    let r = ws.templates.publish(&draft, &staging).map_err(|e| e.to_string())?;
    ensure!(r.version == 2, "second publish got version {}", r.version);
    let active = ws.templates.get("mock10", VersionSelector::Active).map_err(|e| e.to_string())?;
    ensure!(active.template.version == 2, "active is v{}", active.template.version);

    let again = ws.templates.get("mock10", VersionSelector::Exact(1)).map_err(|e| e.to_string())?.bytes;
    ensure!(again == v1, "v1 bytes changed after publishing v2");
    let after = ex.execute(&b).map_err(|e| e.to_string())?;
    ensure!(before.trace_hashes() == after.trace_hashes(), "v1-pinned run changed after v2 became active");
    let events = SessionTrace::parse(&u0_bytes(&ex, &after.run_id)).map_err(|e| e.to_string())?;
    ensure!(events[1].payload["doc_id"].as_str() == Some("m1"), "v1 run saw {:?}", events[1].payload["doc_id"]);
    Ok("v1 byte-identical after v2; pinned run unchanged and still ranks m1 first".into())
}

fn registry_determinism() -> Check {
    let manifest = "{\"category\":\"stopping_strategy\",\"entrypoint\":[\"sh\",\"a.sh\"],\"external\":false,\"name\":\"c\"}";
    let mut rng = SplitMix64::new(5);
    for case in 0..25 {
        let mut files: Vec<(String, Vec<u8>)> = vec![
            ("component.canon.json".into(), manifest.as_bytes().to_vec()),
            ("a.sh".into(), b"cat\n".to_vec()),
        ];
        for i in 0..rng.next_u64() % 6 {
            let dir = if rng.next_u64().is_multiple_of(2) { "sub/" } else { "" };
            let bytes: Vec<u8> = (0..rng.next_u64() % 40).map(|_| rng.next_u64() as u8).collect();
            files.push((format!("{dir}f{i}.bin"), bytes));
        }
        let build = |items: &[(String, Vec<u8>)]| items.iter().fold(ComponentTree::new(), |t, (p, b)| t.with_file(p, b.clone()));
        let forward = build(&files);
        let mut shuffled = files.clone();
        shuffled.reverse();
        shuffled.rotate_left((rng.next_u64() % files.len() as u64) as usize);
        let backward = build(&shuffled);

        let (d1, d2) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let r1 = Registry::open(d1.path()).map_err(|e| e.to_string())?;
        let r2 = Registry::open(d2.path()).map_err(|e| e.to_string())?;
        let c1 = r1.commit_component("ns", "c", &forward, "ann", "msg").map_err(|e| e.to_string())?;
        let c2 = r2.commit_component("ns", "c", &backward, "ann", "msg").map_err(|e| e.to_string())?;
        ensure!(c1.commit_id == c2.commit_id, "case {case}: commit ids differ across insertion orders");
        let expected = compute_commit_id(&None, &forward.tree_hash(), "ann", "msg", c1.category);
        ensure!(c1.commit_id == expected, "case {case}: commit id is not a function of its identity fields");
        let out = d1.path().join("checkout");
        r1.checkout(c1.commit_id.as_str(), &out).map_err(|e| e.to_string())?;
        let rehash = ComponentTree::from_dir(&out).map_err(|e| e.to_string())?.tree_hash();
        ensure!(rehash == c1.tree_hash, "case {case}: checkout re-hash differs");
    }
    Ok("25 trees: equal commit ids across insertion orders, checkout re-hash matches".into())
}

fn runtime_injection() -> Check {
    let store = TempDir::new().unwrap();
    let s = store.path();
    cli(s, &["template", "publish", fixture_str("templates/mock10/template.canon.json").as_str()])?;
    let out = cli(
        s,
        &[
            "--porcelain",
            "component",
            "commit",
            fixture_str("components/stop_first").as_str(),
            "--namespace",
            "acceptance",
            "--author",
            "tester",
            "--message",
            "stop after first snippet",
        ],
    )?;
    let commit = parse_canonical(&out.stdout).map_err(|e| e.to_string())?["commit_id"]
        .as_str()
        .ok_or("no commit_id")?
        .to_owned();

    let mut b = bundle("minimal.bundle.canon.json");
    let node = b
        .pipeline
        .nodes
        .iter_mut()
        .find(|n| n.component.role == ComponentRole::StoppingStrategy)
        .unwrap();
    node.component.name = Ident::new("stop_first").unwrap();
    node.component.params.clear();
    node.component.source = ComponentSource::Registry {
        commit_id: commit,
        path: "stop.sh".into(),
    };
    let path = s.join("injected.canon.json");
    fs::write(&path, b.to_bytes().unwrap()).unwrap();
    let dest = s.join("out");
    cli(s, &["run", path.to_str().unwrap(), "--out", dest.to_str().unwrap()])?;
    let events = SessionTrace::parse(&fs::read(dest.join("outputs/trace.u0.jsonl")).unwrap()).map_err(|e| e.to_string())?;
    let actions: Vec<EventKind> = events.iter().map(|e| e.action).collect();
    ensure!(
        actions == [EventKind::QueryIssued, EventKind::SnippetExamined, EventKind::SessionEnd],
        "trace {actions:?}"
    );
    ensure!(events[2].payload["reason"].as_str() == Some("STOPPED"), "end reason {:?}", events[2].payload["reason"]);
    Ok("committed component ran via the prebuilt CLI: QUERY_ISSUED, SNIPPET_EXAMINED, SESSION_END(STOPPED)".into())
}

fn batch_isolation() -> Check {
    let (_d, ws) = workspace();
    let ex = executor(&ws);
    let good = bundle("minimal.bundle.canon.json");
    let bad = bundle("invalid/missing_role.canon.json");
    let recs = ex.execute_batch(&[good.clone(), bad, good], 2).map_err(|e| e.to_string())?;
    let statuses: Vec<RunStatus> = recs.iter().map(|r| r.status).collect();
    ensure!(
        statuses == [RunStatus::Completed, RunStatus::Failed, RunStatus::Completed],
        "statuses {statuses:?}"
    );

    let eight: Vec<ExperimentBundle> = (0..8)
        .map(|s| {
            let mut b = bundle("stochastic.bundle.canon.json");
            b.seeds.master = 100 + s;
            b
        })
        .collect();
    let hashes = |parallelism| -> Result<Vec<Vec<ContentHash>>, String> {
        let recs = ex.execute_batch(&eight, parallelism).map_err(|e| e.to_string())?;
        Ok(recs.iter().map(|r| r.trace_hashes().to_vec()).collect())
    };
    let parallel = hashes(4)?;
    let serial = hashes(1)?;
    ensure!(parallel.iter().all(|h| h.len() == 3), "incomplete parallel runs");
    ensure!(parallel == serial, "parallel and serial trace hashes differ");
    Ok("[COMPLETED, FAILED, COMPLETED]; 8 bundles identical at parallelism 4 and 1".into())
}

fn cli_exit_codes() -> Check {
    let store = TempDir::new().unwrap();
    let s = store.path();
    for t in ["demo", "mock10"] {
        cli(s, &["template", "publish", fixture_str(&format!("templates/{t}/template.canon.json")).as_str()])?;
    }
    let mut names: Vec<String> = fs::read_dir(fixtures().join("invalid"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    ensure!(names.len() == 10, "expected 10 invalid fixtures, found {}", names.len());
    for name in &names {
        let code = name.trim_end_matches(".canon.json").to_uppercase();
        let out = simworks(s, &["validate", fixture_str(&format!("invalid/{name}")).as_str()]);
        let stderr = String::from_utf8_lossy(&out.stderr);
        ensure!(out.status.code() == Some(2), "{name}: exit {:?}", out.status.code());
        ensure!(stderr.contains(&format!(": {code}:")), "{name}: {code} not reported: {stderr}");
    }
    let out = simworks(s, &["validate", fixture_str("minimal.bundle.canon.json").as_str()]);
    ensure!(out.status.code() == Some(0), "valid fixture exit {:?}", out.status.code());
    Ok("10 invalid bundles exit 2 with their codes; valid fixture exits 0".into())
}

// ---------------------------------------------------------------------------

fn fixture_str(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

fn simworks(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simworks"))
        .arg("--store")
        .arg(store)
        .args(args)
        .output()
        .expect("spawn simworks")
}

/// Successful CLI invocation or an error quoting its stderr.
fn cli(store: &Path, args: &[&str]) -> Result<Output, String> {
    let out = simworks(store, args);
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!("simworks {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("determinism", determinism),
        ("seed sensitivity", seed_sensitivity),
        ("reproducibility scope", reproducibility_scope),
        ("BM25 oracle equivalence", bm25_oracle),
        ("click-model statistics", click_model),
        ("canonical-form laws", canonical_laws),
        ("template policy", template_policy),
        ("registry determinism", registry_determinism),
        ("runtime injection", runtime_injection),
        ("batch isolation", batch_isolation),
        ("CLI exit codes", cli_exit_codes),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
