use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use transent::corpus::CorpusPaths;
use transent::pipeline::demo::{generate_demo, DemoParams};
use transent::pipeline::{self, Backend, PairRequest, RunConfig};
use transent::translator::RandomSpecParams;

/// Translation-entropy measurement for sequence-to-sequence models.
#[derive(Parser)]
#[command(name = "transent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose pivot tokens and their sentences; writes pivots.jsonl.
    Select(RunArgs),
    /// Run substitution sweeps for the selected pivots; writes sweeps.jsonl.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Stop after this many units (testing aid).
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Compute per-token and model entropies from sweeps.jsonl.
    Entropy(RunArgs),
    /// select + sweep + entropy.
    Run(RunArgs),
    /// Pair-degeneracy sweeps on chosen sentences; writes pairs.jsonl.
    Pair {
        #[command(flatten)]
        run: RunArgs,
        /// Sentence ids to analyse.
        #[arg(long = "sentence", required = true, num_args = 1..)]
        sentences: Vec<u64>,
        /// Explicit positions `A,B`, applied to every sentence.
        #[arg(long, value_parser = parse_positions)]
        positions: Option<(usize, usize)>,
    },
    /// Corpus BLEU of the backend on the corpus; writes bleu.json.
    Bleu {
        #[command(flatten)]
        run: RunArgs,
        /// Score only the first N sentences.
        #[arg(long)]
        max_sentences: Option<usize>,
    },
    /// Rank finished runs by S^K next to BLEU; writes ranking.csv, table.csv.
    Rank {
        /// Run directories holding report.json (and optionally bleu.json).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic translator spec and a matching corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        vocab_size: u32,
        #[arg(long, default_value_t = 20_000)]
        sentences: usize,
        #[arg(long, default_value_t = 4)]
        max_group_size: u32,
        #[arg(long, default_value_t = 0.01)]
        drop_fraction: f64,
        #[arg(long, default_value_t = 200)]
        context_rules: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    source_vocab: Option<PathBuf>,
    #[arg(long)]
    target_vocab: Option<PathBuf>,
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    max_output_len: Option<usize>,
    /// Model server base URL.
    #[arg(long, conflicts_with = "synth_spec")]
    translator_url: Option<String>,
    /// Synthetic translator spec (JSON).
    #[arg(long)]
    synth_spec: Option<PathBuf>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    max_freq: Option<u64>,
    #[arg(long)]
    pivot_count: Option<usize>,
    #[arg(long)]
    sentences_per_token: Option<usize>,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    beta_c: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    histogram_bin_width: Option<f64>,
    /// Persistent translation cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_positions(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

impl RunArgs {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let need = |v: &Option<PathBuf>, flag: &str| {
                    v.clone()
                        .ok_or_else(|| anyhow::anyhow!("--{flag} is required without --config"))
                };
                let corpus = CorpusPaths {
                    source: need(&self.source, "source")?,
                    target: need(&self.target, "target")?,
                    source_vocab: need(&self.source_vocab, "source-vocab")?,
                    target_vocab: need(&self.target_vocab, "target-vocab")?,
                };
                let backend = match (&self.translator_url, &self.synth_spec) {
                    (Some(url), _) => Backend::Remote { url: url.clone() },
                    (None, Some(spec)) => Backend::Synthetic { spec: spec.clone() },
                    (None, None) => {
                        anyhow::bail!("one of --translator-url or --synth-spec is required")
                    }
                };
                let out = need(&self.out, "out")?;
                let model_id = self.model_id.clone().unwrap_or_else(|| "model".into());
                RunConfig::new(corpus, backend, &model_id, out)
            }
        };
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        if self.config.is_some() {
            set!(cfg.corpus.source, self.source);
            set!(cfg.corpus.target, self.target);
            set!(cfg.corpus.source_vocab, self.source_vocab);
            set!(cfg.corpus.target_vocab, self.target_vocab);
            set!(cfg.out_dir, self.out);
            set!(cfg.decode.model_id, self.model_id);
            if let Some(url) = self.translator_url {
                cfg.backend = Backend::Remote { url };
            } else if let Some(spec) = self.synth_spec {
                cfg.backend = Backend::Synthetic { spec };
            }
        }
        set!(cfg.direction, self.direction);
        set!(cfg.max_len, self.max_len);
        set!(cfg.decode.max_output_len, self.max_output_len);
        set!(cfg.pivots.min_freq, self.min_freq);
        set!(cfg.pivots.max_freq, self.max_freq);
        set!(cfg.pivots.count, self.pivot_count);
        set!(cfg.pivots.sentences_per_token, self.sentences_per_token);
        set!(cfg.keep, self.keep);
        set!(cfg.beta_c, self.beta_c);
        set!(cfg.k, self.k);
        set!(cfg.seed, self.seed);
        set!(cfg.histogram_bin_width, self.histogram_bin_width);
        set!(cfg.concurrency, self.concurrency);
        set!(cfg.batch_size, self.batch_size);
        if self.cache.is_some() {
            cfg.cache = self.cache;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn report_summary(r: &transent::EntropyReport) -> serde_json::Value {
    json!({
        "model_id": r.model_id,
        "direction": r.direction,
        "tokens": r.records.len(),
        "beta_c": r.beta_c,
        "k": r.k,
        "S": r.s,
        "S^K": r.s_k,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Select(args) => {
            let records = pipeline::cmd_select_pivots(&args.into_config()?)?;
            print(&json!({ "pivots": records.len() }))
        }
        Command::Sweep { run, stop_after } => {
            print(&pipeline::cmd_sweep(&run.into_config()?, stop_after)?)
        }
        Command::Entropy(args) => {
            print(&report_summary(&pipeline::cmd_entropy(&args.into_config()?)?))
        }
        Command::Run(args) => print(&report_summary(&pipeline::cmd_run(&args.into_config()?)?)),
        Command::Pair { run, sentences, positions } => {
            let requests: Vec<PairRequest> = sentences
                .into_iter()
                .map(|sentence_id| PairRequest { sentence_id, positions })
                .collect();
            let records = pipeline::cmd_pair(&run.into_config()?, &requests)?;
            let pairs: Vec<_> = records.iter().map(|r| &r.pair).collect();
            print(&pairs)
        }
        Command::Bleu { run, max_sentences } => {
            let report = pipeline::cmd_bleu(&run.into_config()?, max_sentences)?;
            print(&json!({ "sentences": report.sentences, "bleu": report.bleu.score }))
        }
        Command::Rank { runs, out } => print(&pipeline::cmd_rank(&runs, &out)?),
        Command::Synth {
            out,
            vocab_size,
            sentences,
            max_group_size,
            drop_fraction,
            context_rules,
            seed,
        } => {
            let params = DemoParams {
                spec: RandomSpecParams {
                    source_vocab_size: vocab_size,
                    target_vocab_size: vocab_size,
                    max_group_size,
                    drop_fraction,
                    context_rules,
                },
                sentences,
                seed,
                ..Default::default()
            };
            print(&generate_demo(&out, &params)?)
        }
    }
}

fn error_code(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<transent::Error>() {
        Some(e) => e.code(),
        None => "invalid_argument",
    }
}

fn fail(code: &str, message: &str, status: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "code": code, "message": message } }));
    ExitCode::from(status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return fail("usage", message.trim(), 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(error_code(&err), &format!("{err:#}"), 1),
    }
}
