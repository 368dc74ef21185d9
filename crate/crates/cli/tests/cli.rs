use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;
use std::time::Duration;

const BIN: &str = env!("CARGO_BIN_EXE_transent");

fn transent(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = transent(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

struct Data {
    dir: PathBuf,
}

impl Data {
    fn new(root: &Path, vocab: &str, sentences: &str) -> Self {
        let dir = root.join("data");
        ok(&["synth", "--out", dir.to_str().unwrap(), "--vocab-size", vocab, "--sentences", sentences, "--seed", "3"]);
        Data { dir }
    }

    fn file(&self, name: &str) -> String {
        self.dir.join(name).to_str().unwrap().to_string()
    }

    /// Corpus, backend and a small pivot budget.
    fn args(&self, out: &Path) -> Vec<String> {
        [
            "--source", &self.file("source.txt"),
            "--target", &self.file("target.txt"),
            "--source-vocab", &self.file("source.vocab"),
            "--target-vocab", &self.file("target.vocab"),
            "--synth-spec", &self.file("spec.json"),
            "--min-freq", "30",
            "--max-freq", "100000",
            "--pivot-count", "10",
            "--k", "8",
            "--out", out.to_str().unwrap(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }
}

fn with<'a>(cmd: &'a str, args: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(args.iter().map(String::as_str));
    v.extend_from_slice(extra);
    v
}

#[test]
fn run_then_rank() {
    let root = tempfile::tempdir().unwrap();
    let data = Data::new(root.path(), "150", "1500");
    let run = root.path().join("run");
    let args = data.args(&run);
    let summary = ok(&with("run", &args, &[]));
    assert_eq!(summary["tokens"], 10);
    assert!(summary["S^K"].as_f64().unwrap() <= summary["S"].as_f64().unwrap());
    for f in ["pivots.jsonl", "sweeps.jsonl", "report.json", "tables.csv", "histogram.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }

    let bleu = ok(&with("bleu", &args, &["--max-sentences", "100"]));
    assert_eq!(bleu["bleu"], 100.0);

    let pairs = ok(&with("pair", &args, &["--sentence", "0", "1", "--positions", "0,1"]));
    assert_eq!(pairs.as_array().unwrap().len(), 2);

    // beta-c only touches the entropy stage
    let strict = ok(&with("entropy", &args, &["--beta-c", "9"]));
    assert!(strict["S"].as_f64().unwrap() <= summary["S"].as_f64().unwrap());

    let rank_dir = root.path().join("rank");
    let rows = ok(&["rank", run.to_str().unwrap(), "--out", rank_dir.to_str().unwrap()]);
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert!(rank_dir.join("ranking.csv").exists() && rank_dir.join("table.csv").exists());
}

#[test]
fn errors_are_json_on_stderr() {
    let out = transent(&["entropy", "--out", "/nonexistent"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "invalid_argument");

    let root = tempfile::tempdir().unwrap();
    let data = Data::new(root.path(), "100", "300");
    let args = data.args(&root.path().join("run"));
    // sweeping before selecting
    let out = transent(&with("sweep", &args, &[]));
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "io");

    let out = transent(&with("select", &args, &["--keep", "31"]));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "invalid_argument");

    let out = transent(&["sweep", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "usage");
    assert!(transent(&["--help"]).status.success());
}

#[test]
fn interrupted_sweeps_resume_to_identical_output() {
    let root = tempfile::tempdir().unwrap();
    let data = Data::new(root.path(), "400", "3000");

    let straight = root.path().join("straight");
    let args = data.args(&straight);
    ok(&with("select", &args, &[]));
    ok(&with("sweep", &args, &[]));

    let stepped = root.path().join("stepped");
    let args = data.args(&stepped);
    ok(&with("select", &args, &[]));
    let first = ok(&with("sweep", &args, &["--stop-after", "40", "--concurrency", "2"]));
    assert_eq!(first["complete"], false);
    assert_eq!(first["done_units"], 40);
    let second = ok(&with("sweep", &args, &["--concurrency", "5"]));
    assert_eq!(second["complete"], true);
    assert_eq!(second["swept_now"], 260);

    // a hard kill at an arbitrary point
    let killed = root.path().join("killed");
    let args = data.args(&killed);
    ok(&with("select", &args, &[]));
    let mut child = Command::new(BIN)
        .args(with("sweep", &args, &["--concurrency", "1", "--batch-size", "16"]))
        .spawn()
        .unwrap();
    thread::sleep(Duration::from_millis(150));
    let _ = child.kill();
    let _ = child.wait();
    ok(&with("sweep", &args, &[]));

    let expected = fs::read(straight.join("sweeps.jsonl")).unwrap();
    assert_eq!(fs::read(stepped.join("sweeps.jsonl")).unwrap(), expected);
    assert_eq!(fs::read(killed.join("sweeps.jsonl")).unwrap(), expected);

    // resuming under different measurement settings is refused
    let refused = root.path().join("refused");
    let args = data.args(&refused);
    ok(&with("select", &args, &[]));
    ok(&with("sweep", &args, &["--stop-after", "5"]));
    let out = transent(&with("sweep", &args, &["--max-output-len", "4"]));
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "resume_refused");
}

#[test]
fn config_file_and_cache() {
    let root = tempfile::tempdir().unwrap();
    let data = Data::new(root.path(), "120", "1000");
    let plain = root.path().join("plain");
    ok(&with("run", &data.args(&plain), &[]));

    // same settings from a config file, with a cache, written elsewhere
    let cfg = serde_json::json!({
        "corpus": {
            "source": data.file("source.txt"),
            "target": data.file("target.txt"),
            "source_vocab": data.file("source.vocab"),
            "target_vocab": data.file("target.vocab"),
        },
        "direction": "src-tgt",
        "max_len": 128,
        "backend": {"synthetic": {"spec": data.file("spec.json")}},
        "decode": {"strategy": "greedy", "max_output_len": 128, "model_id": "model"},
        "pivots": {"min_freq": 30, "max_freq": 100000, "count": 10, "sentences_per_token": 30},
        "keep": 24, "beta_c": 5.0, "k": 8, "seed": 0,
        "histogram_bin_width": 1.0,
        "concurrency": 3, "batch_size": 200,
        "cache": root.path().join("cache.log"),
        "out_dir": root.path().join("cached"),
    });
    let cfg_path = root.path().join("run.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    ok(&["run", "--config", cfg_path.to_str().unwrap()]);
    for f in ["pivots.jsonl", "sweeps.jsonl", "report.json", "tables.csv", "histogram.csv"] {
        assert_eq!(
            fs::read(plain.join(f)).unwrap(),
            fs::read(root.path().join("cached").join(f)).unwrap(),
            "{f}"
        );
    }
}
