use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 3

[model]
hidden_dim = 16
classifier_dim = 8

[training]
epochs = 2

[corruption]
roots_per_epoch = 20

[selection]
budget = 30

[synth]
entities = 120
chunks = 30
planted = 20
synonym_edges = 5
"#;

fn kgmend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgmend"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kgmend(args);
    assert!(
        out.status.success(),
        "kgmend {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    kgmend(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
    config: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let config = dir.path().join("kgmend.toml");
        fs::write(&config, SMALL).unwrap();
        Workspace { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> String {
        let mut full = vec!["--config", p(&self.config)];
        full.extend_from_slice(args);
        ok(&full)
    }

    fn trained(&self) -> (PathBuf, PathBuf) {
        let fixture = self.path("fx");
        self.run(&["synth", "--out-dir", p(&fixture)]);
        let ckpt = self.path("model.ckpt");
        self.run(&["train", "--graph", p(&fixture.join("graph.jsonl")), "--checkpoint", p(&ckpt)]);
        (fixture, ckpt)
    }
}

fn json(text: &str) -> Value {
    serde_json::from_str(text.trim()).unwrap()
}

#[test]
fn synth_train_augment_eval() {
    let ws = Workspace::new();
    let fixture = ws.path("fx");
    ws.run(&["synth", "--out-dir", p(&fixture)]);
    let graph = fixture.join("graph.jsonl");
    for f in ["graph.jsonl", "truth.jsonl", "mock.txt"] {
        assert!(fixture.join(f).is_file(), "{f} missing");
    }
    let before = json(&ws.run(&["stats", "--graph", p(&graph), "--json"]));
    assert!(before["triples"].as_u64().unwrap() > 0);

    let ckpt = ws.path("model.ckpt");
    let losses = ws.path("loss.jsonl");
    ws.run(&["train", "--graph", p(&graph), "--checkpoint", p(&ckpt), "--loss-out", p(&losses)]);
    let curve: Vec<Value> = fs::read_to_string(&losses).unwrap().lines().map(json).collect();
    assert_eq!(curve.len(), 2);
    assert!(curve.iter().all(|r| r["mean_loss"].as_f64().unwrap().is_finite()));

    let out = ws.path("augmented.jsonl");
    let log = ws.path("stages.jsonl");
    let merge = json(&ws.run(&[
        "--log",
        p(&log),
        "augment",
        "--graph",
        p(&graph),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&out),
        "--threshold",
        "0",
        "--mock-table",
        p(&fixture.join("mock.txt")),
    ]));
    let after = json(&ws.run(&["stats", "--graph", p(&out), "--json"]));
    let added = merge["triples_added"].as_u64().unwrap();
    assert!(added > 0);
    assert_eq!(after["triples"].as_u64().unwrap(), before["triples"].as_u64().unwrap() + added);

    let manifest = json(&fs::read_to_string(ws.path("augmented.jsonl.manifest.json")).unwrap());
    assert_eq!(manifest["command"], "augment");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    let graph_digest: String = Sha256::digest(fs::read(&graph).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    assert_eq!(manifest["inputs"][0]["sha256"], graph_digest.as_str());
    assert_eq!(manifest["merge"], merge);

    let stages: Vec<Value> = fs::read_to_string(&log).unwrap().lines().map(json).collect();
    let names: Vec<&str> = stages.iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(names, ["load", "sample", "score", "select", "complete", "write"]);
    assert!(stages.iter().all(|s| s["elapsed_ms"].is_u64()));

    let m = json(&ws.run(&[
        "eval",
        "--graph",
        p(&out),
        "--truth",
        p(&fixture.join("truth.jsonl")),
        "--json",
    ]));
    assert!(m["recovered"].as_u64().unwrap() > 0);
    assert_eq!(m["precision"].as_f64().unwrap(), 1.0);
    let text = ws.run(&["eval", "--graph", p(&out), "--truth", p(&fixture.join("truth.jsonl"))]);
    assert!(text.contains("hidden recall"));
}

#[test]
fn augment_is_deterministic() {
    let ws = Workspace::new();
    let (fixture, ckpt) = ws.trained();
    let run = |name: &str| {
        let out = ws.path(name);
        ws.run(&[
            "augment",
            "--graph",
            p(&fixture.join("graph.jsonl")),
            "--checkpoint",
            p(&ckpt),
            "--out",
            p(&out),
            "--mock-table",
            p(&fixture.join("mock.txt")),
        ]);
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.jsonl"), run("b.jsonl"));
}

#[test]
fn ingest_computes_missing_features() {
    let ws = Workspace::new();
    let graph = ws.path("bare.jsonl");
    fs::write(
        &graph,
        concat!(
            r#"{"kind":"chunk","id":"c1","text":"Ada met Bo."}"#,
            "\n",
            r#"{"kind":"node","id":"a","type":"entity","label":"Ada"}"#,
            "\n",
            r#"{"kind":"node","id":"b","type":"entity","label":"Bo"}"#,
            "\n",
            r#"{"kind":"edge","id":"f1","u":"a","v":"b","type":"fact","relation":"met","provenance":["c1"]}"#,
            "\n",
        ),
    )
    .unwrap();
    let out = ws.path("ingested.jsonl");
    ws.run(&["ingest", "--graph", p(&graph), "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let node = text
        .lines()
        .map(json)
        .find(|r| r["id"] == "a")
        .unwrap();
    assert_eq!(node["feature"].as_array().unwrap().len(), 64);
}

#[test]
fn exit_codes_follow_error_kind() {
    let ws = Workspace::new();

    let bad_config = ws.path("bad.toml");
    fs::write(&bad_config, "[selection]\nthreshhold = 0.5\n").unwrap();
    assert_eq!(code(&["--config", p(&bad_config), "stats", "--graph", "x"]), 2);

    let broken = ws.path("broken.jsonl");
    fs::write(&broken, "{\"kind\":\"node\",\"id\":\"a\"\n").unwrap();
    assert_eq!(code(&["stats", "--graph", p(&broken)]), 3);

    let dangling = ws.path("dangling.jsonl");
    fs::write(
        &dangling,
        "{\"kind\":\"edge\",\"id\":\"f\",\"u\":\"a\",\"v\":\"b\",\"type\":\"fact\",\"relation\":\"r\",\"provenance\":[\"c\"]}\n",
    )
    .unwrap();
    assert_eq!(code(&["stats", "--graph", p(&dangling)]), 3);

    assert_eq!(code(&["stats", "--graph", p(&ws.path("missing.jsonl"))]), 4);
    assert_eq!(code(&["augment", "--graph", "g", "--checkpoint", "c", "--out", "o", "--budget", "0"]), 2);
}

#[test]
fn checkpoint_must_match_graph_dimension() {
    let ws = Workspace::new();
    let (_, ckpt) = ws.trained();
    let other = ws.path("other");
    let cfg = ws.path("dim8.toml");
    fs::write(&cfg, format!("{SMALL}feature_dim = 8\n[embedding]\ndim = 8\n")).unwrap();
    ok(&["--config", p(&cfg), "synth", "--out-dir", p(&other)]);
    let status = code(&[
        "augment",
        "--graph",
        p(&other.join("graph.jsonl")),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&ws.path("o.jsonl")),
        "--mock-table",
        p(&other.join("mock.txt")),
    ]);
    assert_eq!(status, 2);
}

#[test]
fn missing_token_is_a_config_error() {
    let ws = Workspace::new();
    let (fixture, ckpt) = ws.trained();
    let cfg = ws.path("http.toml");
    fs::write(
        &cfg,
        format!("{SMALL}\n[backend]\nkind = \"http\"\n[backend.http]\napi_key_env = \"KGMEND_CLI_TEST_NO_SUCH_TOKEN\"\n"),
    )
    .unwrap();
    let status = code(&[
        "--config",
        p(&cfg),
        "augment",
        "--graph",
        p(&fixture.join("graph.jsonl")),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&ws.path("o.jsonl")),
    ]);
    assert_eq!(status, 2);
}
