use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_memkeeper"));
    for (k, _) in std::env::vars() {
        if k.starts_with("MEMKEEPER_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn memkeeper")
}

fn run_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PAIRS: &str = r#"{"m": "Couldn't sleep well", "s": "Sleeping well after taking sleeping tablets", "gold": "REPLACE", "split": "train"}
{"m": "Haven't got COVID tested yet", "s": "Just got positive results from COVID test", "gold": "REPLACE", "split": "test"}
{"m": "Has a dog", "s": "Has a dog named Max", "gold": "REPLACE", "split": "test"}
{"m": "Likes tea", "s": "Goes to the gym", "gold": "APPEND", "split": "test"}
{"m": "having a cold and taking medicine", "s": "cold is all better now", "gold": "DELETE", "split": "test"}
{"m": "Lives alone", "s": "Lives by myself", "gold": "PASS", "split": "test"}
{"m": "Has two cats", "s": "Has a cat", "gold": "FUSION", "split": "test"}
"#;

#[test]
fn classify_identical_is_pass() {
    let o = run(&["classify", "I have a dog", "I have a dog"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "PASS\theuristic");
}

#[test]
fn classify_with_table() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write(dir.path(), "pairs.jsonl", PAIRS);
    let spec = format!("table:{}", s(&pairs));
    let o = run(&[
        "classify",
        "--classifier",
        &spec,
        "Couldn't sleep well",
        "Sleeping well after taking sleeping tablets",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("REPLACE\t"), "{}", stdout(&o));
}

#[test]
fn unreachable_remote_exits_2() {
    let o = run(&[
        "classify",
        "--classifier",
        "remote:http://127.0.0.1:9/classify",
        "--retries",
        "0",
        "--timeout-ms",
        "300",
        "a",
        "b",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn usage_and_schema_errors_exit_1() {
    assert_eq!(run(&["classify"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--k", "0", "classify", "a", "b"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.jsonl", "{\"episode_id\": 3}\n");
    let o = run(&["stats", s(&bad)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(run(&["stats", s(&missing)]).status.code(), Some(1));
}

#[test]
fn update_shows_replace_and_writes_memory() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write(dir.path(), "pairs.jsonl", PAIRS);
    let m = write(dir.path(), "m.json", r#"["Haven't got COVID tested yet", "Likes tea"]"#);
    let summary = write(dir.path(), "s.txt", "Just got positive results from COVID test\n");
    let out = dir.path().join("m2.json");
    let spec = format!("table:{}", s(&pairs));
    let o = run(&[
        "update",
        "--classifier",
        &spec,
        "--memory",
        s(&m),
        "--summary",
        s(&summary),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("replaced") && err.contains("(REPLACE)"), "{err}");
    let written = std::fs::read_to_string(&out).unwrap();
    assert!(written.contains("Just got positive results from COVID test"));
    assert!(!written.contains("Haven't got COVID"));
    assert!(written.contains("Likes tea"));
}

#[test]
fn empty_summary_leaves_memory_alone() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.txt", "Has a dog\nLikes tea\n");
    let summary = write(dir.path(), "s.json", "[]");
    let o = run(&["update", "--memory", s(&m), "--summary", s(&summary)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("no changes"));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let texts: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["text"].as_str().unwrap())
        .collect();
    assert_eq!(texts, ["Has a dog", "Likes tea"]);
}

#[test]
fn large_update_reports_timing() {
    let dir = tempfile::tempdir().unwrap();
    let m: Vec<String> = (0..50).map(|i| format!("Memory fact number {i} about topic {}", i * 7)).collect();
    let sm: Vec<String> = (0..50).map(|i| format!("Summary fact {i} on subject {}", i * 3)).collect();
    let m = write(dir.path(), "m.txt", &m.join("\n"));
    let sm = write(dir.path(), "s.txt", &sm.join("\n"));
    let o = run(&["update", "--memory", s(&m), "--summary", s(&sm)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("updated 50x50 in"), "{}", stderr(&o));
    assert!(stderr(&o).contains("2500 classifier calls"), "{}", stderr(&o));
}

#[test]
fn synth_is_deterministic_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = run(&["synth", "--seed", "7", "--episodes", "12", "--out", s(p)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = run(&["replay", s(&a), "--classifier", "gold", "--workers", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.trim_start().starts_with("all") && l.ends_with("1.0000")), "{}", stdout(&o));

    let report = dir.path().join("acc.json");
    let o = run(&["replay", s(&a), "--policy", "MEMORY_ACCUMULATE", "--out", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["mean_f1"].as_f64().unwrap() < 1.0, "{v}");

    let o = run(&["stats", s(&a), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["episodes"], 12);
}

#[test]
fn eval_prints_confusion_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write(dir.path(), "pairs.jsonl", PAIRS);
    let spec = format!("table:{}", s(&pairs));
    let o = run(&["eval", s(&pairs), "--classifier", &spec]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("pairs 6"), "{out}");
    assert!(out.contains("accuracy 1.0000"), "{out}");
    assert!(out.contains("gold \\ pred"), "{out}");

    let o = run(&["pairs", s(&pairs), "--split", "test"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("FUSION excluded: 1"), "{}", stdout(&o));
}

#[test]
fn metrics_and_retrieve() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.txt", "the cat sat on the mat\nhello there\n");
    let r = write(dir.path(), "r.txt", "the cat sat on the mat\nhello there\n");
    let o = run(&["metrics", "--candidates", s(&c), "--references", s(&r)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["bleu1"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{v}");

    let m = write(dir.path(), "m.txt", "");
    let o = run(&["retrieve", "--memory", s(&m), "--turn", "How is your knee?"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(empty)"));

    let m = write(dir.path(), "m2.txt", "Knee hurts after running\nHas a dog\n");
    let o = run(&["retrieve", "--memory", s(&m), "--k", "1", "--turn", "How is your knee pain?"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.contains("Knee hurts"), "{out}");
}

#[test]
fn session_loop_over_three_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("episodes");
    let script = "\
:mem
I just adopted a dog
I am training for a marathon
:end
:mem
My dog learned to sit
:end
We moved to a new flat
:end
:quit
";
    let o = run_stdin(&["session", "--store", s(&store)], script);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("retrieved memory:\n  (empty)"), "{out}");
    assert!(out.contains("session 1 closed"), "{out}");
    assert!(out.contains("summary:\n  - I just adopted a dog"), "{out}");
    assert!(out.contains("memory:\n  - I just adopted a dog"), "{out}");
    assert!(out.contains("session 4 open"), "{out}");
    assert!(out.contains("bot: "), "{out}");

    let ep = std::fs::read_dir(&store).unwrap().next().unwrap().unwrap().path();
    let log = ep.join("episode.jsonl");
    let records = memkeeper::dataset::load_episodes(&log).expect("stored episode validates");
    assert_eq!(records.len(), 1);
    assert!(records[0].sessions.len() >= 3);

    let id = ep.file_name().unwrap().to_str().unwrap().to_owned();
    let o = run_stdin(&["session", "--store", s(&store), "--resume", &id], ":mem\n:close\n");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("marathon"), "{}", stdout(&o));
    assert!(stdout(&o).contains("closed"), "{}", stdout(&o));
}

#[test]
fn session_reports_pending_text_inline() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("episodes");
    let o = run_stdin(
        &["session", "--store", s(&store), "--generator-url", "http://127.0.0.1:9/gen", "--retries", "0"],
        "hello\n:retry\n:quit\n",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("error:"), "{}", stdout(&o));
}
