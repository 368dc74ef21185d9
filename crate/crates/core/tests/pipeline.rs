mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::{oracle_entropy, oracle_token, Oracle};
use transent::corpus::{load_parallel_corpus, SentencePair};
use transent::pipeline::artifacts::read_jsonl;
use transent::pipeline::PivotRecord;

use transent::pipeline::demo::{generate_demo, DemoFiles, DemoParams};
use transent::pipeline::{self, Backend, PairRequest, RunConfig};
use transent::translator::{RandomSpecParams, SynthSpec};
use transent::Error;

fn demo(root: &Path, seed: u64) -> DemoFiles {
    let params = DemoParams {
        spec: RandomSpecParams { source_vocab_size: 150, target_vocab_size: 150, ..Default::default() },
        sentences: 1200,
        min_len: 6,
        max_len: 16,
        zipf_exponent: 0.3,
        seed,
    };
    generate_demo(&root.join(format!("data{seed}")), &params).unwrap()
}

fn config(files: &DemoFiles, out: PathBuf) -> RunConfig {
    let mut cfg = RunConfig::new(
        files.corpus.clone(),
        Backend::Synthetic { spec: files.spec.clone() },
        "demo",
        out,
    );
    cfg.pivots.min_freq = 30;
    cfg.pivots.max_freq = 5000;
    cfg.pivots.count = 12;
    cfg.k = 10;
    cfg.batch_size = 100;
    cfg
}

#[test]
fn selection_is_seeded() {
    let root = tempfile::tempdir().unwrap();
    let files = demo(root.path(), 1);
    let read = |dir: &str, seed: u64| {
        let mut cfg = config(&files, root.path().join(dir));
        cfg.seed = seed;
        pipeline::cmd_select_pivots(&cfg).unwrap();
        fs::read(root.path().join(dir).join(pipeline::PIVOTS_FILE)).unwrap()
    };
    assert_eq!(read("a", 5), read("b", 5));
    assert_ne!(read("a", 5), read("c", 6));
}

#[test]
fn stages_check_upstream_digests() {
    let root = tempfile::tempdir().unwrap();
    let files = demo(root.path(), 2);
    let mut cfg = config(&files, root.path().join("run"));
    pipeline::cmd_run(&cfg).unwrap();

    // threshold settings only affect the entropy stage: no re-sweep needed
    cfg.beta_c = 0.0;
    let raw = pipeline::cmd_entropy(&cfg).unwrap();
    cfg.beta_c = 9.0;
    let strict = pipeline::cmd_entropy(&cfg).unwrap();
    assert!(strict.s <= raw.s);

    // a sweep setting changed without re-sweeping
    cfg.decode.max_output_len = 3;
    assert!(matches!(pipeline::cmd_entropy(&cfg), Err(Error::DigestMismatch { .. })));

    // pivots selected under another seed
    let mut other = config(&files, root.path().join("run"));
    other.seed = 99;
    assert!(matches!(pipeline::cmd_sweep(&other, None), Err(Error::DigestMismatch { .. })));
}

#[test]
fn report_files_have_expected_layout() {
    let root = tempfile::tempdir().unwrap();
    let files = demo(root.path(), 3);
    let cfg = config(&files, root.path().join("run"));
    let report = pipeline::cmd_run(&cfg).unwrap();
    assert_eq!(report.records.len(), 12);

    let tables = fs::read_to_string(cfg.out(pipeline::TABLES_FILE)).unwrap();
    let lines: Vec<&str> = tables.lines().collect();
    assert!(lines[0].starts_with("# transent "));
    assert!(lines[0].contains(&report.provenance.config_digest));
    assert_eq!(lines[1], "K lowest S(T),src-tgt");
    assert_eq!(lines[2], format!("12,{}", report.s));
    assert_eq!(lines[3], format!("10,{}", report.s_k));

    let hist = fs::read_to_string(cfg.out(pipeline::HISTOGRAM_FILE)).unwrap();
    let total: usize = hist
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 12);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.out(pipeline::REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(json["provenance"]["stage"], "entropy");
    assert_eq!(json["records"].as_array().unwrap().len(), 12);
}

#[test]
fn backend_vocabulary_must_match_corpus() {
    let root = tempfile::tempdir().unwrap();
    let files = demo(root.path(), 4);
    let other = root.path().join("other.json");
    SynthSpec::identity(151).save(&other).unwrap();
    let mut cfg = config(&files, root.path().join("run"));
    pipeline::cmd_select_pivots(&cfg).unwrap();
    cfg.backend = Backend::Synthetic { spec: other };
    assert!(matches!(pipeline::cmd_sweep(&cfg, None), Err(Error::Vocab(_))));
}

#[test]
fn pair_and_bleu_stages() {
    let root = tempfile::tempdir().unwrap();
    let files = demo(root.path(), 5);
    let cfg = config(&files, root.path().join("run"));
    let records = pipeline::cmd_pair(
        &cfg,
        &[
            PairRequest { sentence_id: 0, positions: None },
            PairRequest { sentence_id: 1, positions: Some((0, 2)) },
        ],
    )
    .unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1].pair.positions, (0, 2));
    for r in &records {
        assert!(r.pair.pair_count <= r.pair.product());
    }
    assert!(cfg.out(pipeline::PAIRS_FILE).exists());
    assert!(pipeline::cmd_pair(&cfg, &[PairRequest { sentence_id: 10_000, positions: None }]).is_err());

    // the demo targets are the synthetic translations themselves
    let bleu = pipeline::cmd_bleu(&cfg, Some(200)).unwrap();
    assert_eq!(bleu.sentences, 200);
    assert_eq!(bleu.bleu.score, 100.0);
}

#[test]
fn ranking_combines_runs() {
    let root = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (seed, dir) in [(6, "fwd"), (7, "rev")] {
        let files = demo(root.path(), seed);
        let mut cfg = config(&files, root.path().join(dir));
        cfg.direction = dir.into();
        pipeline::cmd_run(&cfg).unwrap();
        pipeline::cmd_bleu(&cfg, Some(50)).unwrap();
        runs.push(cfg.out_dir.clone());
    }
    let out = root.path().join("rank");
    let rows = pipeline::cmd_rank(&runs, &out).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].s_k <= rows[1].s_k);
    assert!(rows.iter().all(|r| r.bleu == Some(100.0)));

    let ranking = fs::read_to_string(out.join(pipeline::RANKING_FILE)).unwrap();
    let lines: Vec<&str> = ranking.lines().collect();
    assert_eq!(lines[1], "model,direction,beta_c,K,S,S^K,BLEU");
    assert_eq!(lines.len(), 4);
    let table = fs::read_to_string(out.join(pipeline::TABLE_FILE)).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[1], "K lowest S(T),fwd,rev");
    assert!(lines[2].starts_with("12,") && lines[3].starts_with("10,"));
}

#[test]
fn end_to_end_report_matches_oracle() {
    let root = tempfile::tempdir().unwrap();
    let params = DemoParams {
        spec: RandomSpecParams { source_vocab_size: 1000, target_vocab_size: 1000, ..Default::default() },
        sentences: 6000,
        min_len: 8,
        max_len: 20,
        zipf_exponent: 0.2,
        seed: 8,
    };
    let files = generate_demo(&root.path().join("data"), &params).unwrap();
    let mut cfg = config(&files, root.path().join("run"));
    cfg.pivots.count = 20;
    cfg.k = 19;
    let report = pipeline::cmd_run(&cfg).unwrap();

    let spec = SynthSpec::load(&files.spec).unwrap();
    let oracle = Oracle::new(&spec);
    let corpus = load_parallel_corpus(&files.corpus, "s-t", 128).unwrap();
    let (_, pivots): (_, Vec<PivotRecord>) = read_jsonl(&cfg.out(pipeline::PIVOTS_FILE)).unwrap();
    assert_eq!(pivots.len(), 20);
    for p in &pivots {
        let sentences: Vec<(SentencePair, usize)> = p
            .sentences
            .iter()
            .map(|o| (corpus.pair(o.sentence_id).unwrap().clone(), o.position as usize))
            .collect();
        let want = oracle_token(&oracle, &sentences, 24);
        let got = report.records.iter().find(|r| r.pivot == p.token).unwrap();
        let total: usize = want.subgroups.iter().map(|(_, m)| m.len()).sum();
        assert_eq!(got.n_av, want.n_av);
        assert_eq!(got.avg_subgroup_size, total as f64 / 30.0);
        let raw = oracle_entropy(want.counts.values().copied(), 24, 0.0);
        let thresholded = oracle_entropy(want.counts.values().copied(), 24, 5.0);
        assert!((got.entropy_raw - raw).abs() <= 1e-12);
        assert!((got.entropy_thresholded - thresholded).abs() <= 1e-12);
    }
}
