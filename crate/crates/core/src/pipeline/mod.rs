//! End-to-end measurement: in-memory helpers plus the file-based stages
//! behind the command-line tool.
//!
//! Stages hand off through files in the output directory:
//!
//! | stage    | reads                      | writes                                   |
//! |----------|----------------------------|------------------------------------------|
//! | select   | corpus                     | `pivots.jsonl`                           |
//! | sweep    | corpus, `pivots.jsonl`     | `sweeps.jsonl` (+ checkpoint, partial)   |
//! | entropy  | `sweeps.jsonl`             | `report.json`, `tables.csv`, `histogram.csv` |
//! | pair     | corpus                     | `pairs.jsonl`                            |
//! | bleu     | corpus                     | `bleu.json`                              |
//! | rank     | run directories            | `ranking.csv`, `table.csv`               |
//!
//! Each artifact carries the digest of the settings it depends on, and each
//! stage refuses inputs whose digest does not match the current settings.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bleu::{bleu_corpus, BleuScore};
use crate::corpus::{
    build_frequency_index, derive_seed, load_parallel_corpus, sample_pivot_sentences,
    select_pivot_tokens, FrequencyIndex, Occurrence, ParallelCorpus, PivotCriteria,
    PivotSentence, SentencePair, TokenId, Vocab,
};
use crate::degeneracy::{
    pair_sweep_batched, sweep_position, Subgroup, SubgroupEnsemble, DEFAULT_SWEEP_BATCH,
};
use crate::entropy::{
    histogram, replacement_distribution, select_smallest, token_record, ModelEntropyReport,
    ReplacementDistribution, TokenEntropyRecord,
};
use crate::error::{Error, Result};
use crate::provenance::{digest_json, Provenance, VERSION};
use crate::scalar::Scalar;
use crate::translator::{DecodeParams, Side, Translator};

pub mod artifacts;
mod config;
pub mod demo;

pub use artifacts::{PairRecord, PivotRecord};
pub use config::{Backend, RunConfig};

pub const PIVOTS_FILE: &str = "pivots.jsonl";
pub const SWEEPS_FILE: &str = "sweeps.jsonl";
pub const SWEEPS_PARTIAL_FILE: &str = "sweeps.partial.jsonl";
pub const CHECKPOINT_FILE: &str = "sweeps.checkpoint.json";
pub const REPORT_FILE: &str = "report.json";
pub const TABLES_FILE: &str = "tables.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const BLEU_FILE: &str = "bleu.json";
pub const RANKING_FILE: &str = "ranking.csv";
pub const TABLE_FILE: &str = "table.csv";

/// A pivot token with its sampled pivot sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotSelection {
    pub pivot: TokenId,
    pub sentences: Vec<PivotSentence>,
}

/// Selects pivot tokens, then samples each token's sentences with a seed
/// derived from `seed` and the token id.
pub fn select_pivots(
    corpus: &ParallelCorpus,
    index: &FrequencyIndex,
    criteria: &PivotCriteria,
    seed: u64,
) -> Result<Vec<PivotSelection>> {
    select_pivot_tokens(index, corpus.source_vocab(), criteria, seed)?
        .into_iter()
        .map(|pivot| {
            let sentences = sample_pivot_sentences(
                corpus,
                index,
                pivot,
                criteria.sentences_per_token,
                derive_seed(seed, u64::from(pivot.0)),
            )?;
            Ok(PivotSelection { pivot, sentences })
        })
        .collect()
}

/// Everything measured for one pivot token.
#[derive(Debug, Clone)]
pub struct TokenMeasurement<S> {
    pub selection: PivotSelection,
    pub ensemble: SubgroupEnsemble,
    pub distribution: ReplacementDistribution,
    pub record: TokenEntropyRecord<S>,
}

/// Sweeps and scores every selection in memory, in parallel across tokens.
pub fn measure<S, T>(
    selections: &[PivotSelection],
    vocab: &Vocab,
    translator: &T,
    params: &DecodeParams,
    keep: usize,
    beta_c: S,
) -> Result<Vec<TokenMeasurement<S>>>
where
    S: Scalar,
    T: Translator + ?Sized,
{
    selections
        .par_iter()
        .map(|sel| {
            let subgroups = sel
                .sentences
                .iter()
                .map(|ps| {
                    sweep_position(
                        &ps.sentence,
                        ps.position,
                        vocab,
                        translator,
                        params,
                        DEFAULT_SWEEP_BATCH,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let ensemble = SubgroupEnsemble::new(sel.pivot, subgroups)?;
            let distribution = replacement_distribution(&select_smallest(&ensemble, keep)?)?;
            let record = token_record(&ensemble, keep, beta_c)?;
            Ok(TokenMeasurement {
                selection: sel.clone(),
                ensemble,
                distribution,
                record,
            })
        })
        .collect()
}

fn load_corpus(config: &RunConfig) -> Result<ParallelCorpus> {
    load_parallel_corpus(&config.corpus, &config.direction, config.max_len)
}

fn ensure_out_dir(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))
}

/// Fails unless the backend's source vocabulary is the corpus vocabulary.
fn backend_vocab(translator: &dyn Translator, corpus: &ParallelCorpus) -> Result<Vocab> {
    let vocab = translator.vocabulary(Side::Source)?;
    if &vocab != corpus.source_vocab() {
        return Err(Error::Vocab(format!(
            "backend source vocabulary ({} entries, {} special) differs from the corpus vocabulary ({} entries, {} special)",
            vocab.len(),
            vocab.special_count(),
            corpus.source_vocab().len(),
            corpus.source_vocab().special_count()
        )));
    }
    Ok(vocab)
}

/// Writes `pivots.jsonl`.
pub fn cmd_select_pivots(config: &RunConfig) -> Result<Vec<PivotRecord>> {
    config.validate()?;
    ensure_out_dir(config)?;
    let corpus = load_corpus(config)?;
    let index = build_frequency_index(&corpus);
    let selections = select_pivots(&corpus, &index, &config.pivots, config.seed)?;
    let records: Vec<PivotRecord> = selections
        .iter()
        .map(|sel| PivotRecord {
            token: sel.pivot,
            surface: corpus
                .source_vocab()
                .surface(sel.pivot)
                .unwrap_or_default()
                .to_string(),
            frequency: index.count(sel.pivot),
            sentences: sel
                .sentences
                .iter()
                .map(|ps| Occurrence {
                    sentence_id: ps.sentence.id,
                    position: ps.position as u32,
                })
                .collect(),
        })
        .collect();
    artifacts::write_jsonl(
        &config.out(PIVOTS_FILE),
        &config.selection_provenance()?,
        &records,
    )?;
    log::info!("selected {} pivot tokens", records.len());
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Checkpoint {
    config_digest: String,
    completed_tokens: Vec<TokenId>,
    completed_units: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SweepProgress {
    pub total_units: usize,
    pub done_units: usize,
    /// Units swept by this invocation.
    pub swept_now: usize,
    pub complete: bool,
}

/// Reads the partial log, keeping complete lines for units in `completed`.
fn read_partial(path: &Path, completed: &HashSet<(TokenId, u64)>) -> Result<Vec<Subgroup>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    // the final line may be torn if the process died mid-write
    for line in text.split_inclusive('\n').filter(|l| l.ends_with('\n')) {
        if let Ok(sg) = serde_json::from_str::<Subgroup>(line) {
            let unit = (sg.pivot, sg.sentence_id);
            if completed.contains(&unit) && seen.insert(unit) {
                out.push(sg);
            }
        }
    }
    Ok(out)
}

/// Sweeps every (pivot, sentence) unit of `pivots.jsonl`, resumable.
///
/// Finished units are appended to `sweeps.partial.jsonl` and recorded in
/// `sweeps.checkpoint.json` after every round of the worker pool. A rerun
/// with the same settings picks up where the last one stopped; a rerun with
/// different sweep settings is refused. `stop_after` bounds the units swept
/// by this invocation. Once every unit is done, `sweeps.jsonl` is written in
/// canonical order, so it does not depend on interruptions or scheduling.
pub fn cmd_sweep(config: &RunConfig, stop_after: Option<usize>) -> Result<SweepProgress> {
    config.validate()?;
    ensure_out_dir(config)?;
    let pivots_path = config.out(PIVOTS_FILE);
    let (sel_prov, pivots): (Provenance, Vec<PivotRecord>) = artifacts::read_jsonl(&pivots_path)?;
    artifacts::expect_digest(
        &pivots_path,
        &sel_prov,
        &config.selection_provenance()?.config_digest,
    )?;
    let provenance = config.sweep_provenance()?;

    let units: Vec<(TokenId, Occurrence)> = pivots
        .iter()
        .flat_map(|p| p.sentences.iter().map(move |occ| (p.token, *occ)))
        .collect();
    let final_path = config.out(SWEEPS_FILE);
    if let Ok((prov, _)) = artifacts::read_jsonl::<Subgroup>(&final_path) {
        if prov.config_digest == provenance.config_digest {
            log::info!("{} is already complete", final_path.display());
            return Ok(SweepProgress {
                total_units: units.len(),
                done_units: units.len(),
                swept_now: 0,
                complete: true,
            });
        }
    }

    let corpus = load_corpus(config)?;
    let translator = config.translator()?;
    let vocab = backend_vocab(translator.as_ref(), &corpus)?;

    let checkpoint_path = config.out(CHECKPOINT_FILE);
    let partial_path = config.out(SWEEPS_PARTIAL_FILE);
    let mut completed: HashSet<(TokenId, u64)> = HashSet::new();
    match fs::read_to_string(&checkpoint_path) {
        Ok(text) => {
            let cp: Checkpoint = serde_json::from_str(&text)?;
            if cp.config_digest != provenance.config_digest {
                return Err(Error::ResumeRefused(format!(
                    "{} was written with config digest {}, current settings give {}; \
                     remove it (and {}) to start over",
                    checkpoint_path.display(),
                    cp.config_digest,
                    provenance.config_digest,
                    SWEEPS_PARTIAL_FILE
                )));
            }
            completed.extend(cp.completed_units);
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(Error::io(&checkpoint_path, e)),
    }
    let mut done: Vec<Subgroup> = read_partial(&partial_path, &completed)?;
    completed = done.iter().map(|sg| (sg.pivot, sg.sentence_id)).collect();
    let mut partial_text = String::new();
    for sg in &done {
        partial_text.push_str(&artifacts::jsonl_line(sg)?);
    }
    artifacts::write_atomic(&partial_path, partial_text.as_bytes())?;
    if !completed.is_empty() {
        log::info!("resuming with {}/{} units done", completed.len(), units.len());
    }

    let remaining: Vec<&(TokenId, Occurrence)> = units
        .iter()
        .filter(|(t, occ)| !completed.contains(&(*t, occ.sentence_id)))
        .collect();
    let budget = stop_after.unwrap_or(usize::MAX).min(remaining.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let round = config.concurrency.max(1);
    let mut partial = OpenOptions::new()
        .append(true)
        .open(&partial_path)
        .map_err(|e| Error::io(&partial_path, e))?;

    let mut swept_now = 0;
    for chunk in remaining[..budget].chunks(round) {
        let results: Vec<Subgroup> = pool.install(|| {
            chunk
                .par_iter()
                .map(|(token, occ)| {
                    let pair = corpus.pair(occ.sentence_id).ok_or_else(|| {
                        Error::Corpus(format!("sentence {} not in corpus", occ.sentence_id))
                    })?;
                    let ps = PivotSentence::new(pair.clone(), occ.position as usize, *token)?;
                    sweep_position(
                        &ps.sentence,
                        ps.position,
                        &vocab,
                        translator.as_ref(),
                        &config.decode,
                        config.batch_size,
                    )
                })
                .collect::<Result<_>>()
        })?;
        let mut lines = String::new();
        for sg in &results {
            lines.push_str(&artifacts::jsonl_line(sg)?);
        }
        partial
            .write_all(lines.as_bytes())
            .and_then(|_| partial.flush())
            .map_err(|e| Error::io(&partial_path, e))?;
        for sg in results {
            completed.insert((sg.pivot, sg.sentence_id));
            done.push(sg);
        }
        swept_now += chunk.len();
        write_checkpoint(&checkpoint_path, &provenance, &pivots, &completed)?;
    }

    let progress = SweepProgress {
        total_units: units.len(),
        done_units: completed.len(),
        swept_now,
        complete: completed.len() == units.len(),
    };
    if !progress.complete {
        log::info!(
            "stopped with {}/{} units done",
            progress.done_units,
            progress.total_units
        );
        return Ok(progress);
    }

    let mut by_unit: BTreeMap<(TokenId, u64), Subgroup> = done
        .into_iter()
        .map(|sg| ((sg.pivot, sg.sentence_id), sg))
        .collect();
    let ordered: Vec<Subgroup> = units
        .iter()
        .map(|(t, occ)| {
            by_unit
                .remove(&(*t, occ.sentence_id))
                .expect("every unit completed")
        })
        .collect();
    artifacts::write_jsonl(&final_path, &provenance, &ordered)?;
    for path in [&partial_path, &checkpoint_path] {
        fs::remove_file(path).map_err(|e| Error::io(path, e))?;
    }
    Ok(progress)
}

fn write_checkpoint(
    path: &Path,
    provenance: &Provenance,
    pivots: &[PivotRecord],
    completed: &HashSet<(TokenId, u64)>,
) -> Result<()> {
    let mut completed_units: Vec<(TokenId, u64)> = completed.iter().copied().collect();
    completed_units.sort_unstable();
    let completed_tokens = pivots
        .iter()
        .filter(|p| {
            p.sentences
                .iter()
                .all(|occ| completed.contains(&(p.token, occ.sentence_id)))
        })
        .map(|p| p.token)
        .collect();
    let cp = Checkpoint {
        config_digest: provenance.config_digest.clone(),
        completed_tokens,
        completed_units,
    };
    artifacts::write_atomic(path, serde_json::to_string(&cp)?.as_bytes())
}

/// Side-by-side entropy CSV: one column per run, rows for all records and the
/// K lowest.
fn entropy_table(columns: &[(String, &ModelEntropyReport<f64>)]) -> String {
    let label_all = match columns.first() {
        Some((_, r)) if columns.iter().all(|(_, c)| c.records.len() == r.records.len()) => {
            r.records.len().to_string()
        }
        _ => "all".into(),
    };
    let label_k = match columns.first() {
        Some((_, r)) if columns.iter().all(|(_, c)| c.k == r.k) => r.k.to_string(),
        _ => "K".into(),
    };
    let mut out = String::from("K lowest S(T)");
    for (name, _) in columns {
        out.push(',');
        out.push_str(&csv_field(name));
    }
    out.push('\n');
    for (label, value) in [
        (label_all, (|r: &ModelEntropyReport<f64>| r.s) as fn(&_) -> f64),
        (label_k, |r| r.s_k),
    ] {
        out.push_str(&label);
        for (_, r) in columns {
            out.push_str(&format!(",{}", value(r)));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `report.json`, `tables.csv` and `histogram.csv` from `sweeps.jsonl`.
pub fn cmd_entropy(config: &RunConfig) -> Result<ModelEntropyReport<f64>> {
    config.validate()?;
    let sweeps_path = config.out(SWEEPS_FILE);
    let (prov, subgroups): (Provenance, Vec<Subgroup>) = artifacts::read_jsonl(&sweeps_path)?;
    artifacts::expect_digest(&sweeps_path, &prov, &config.sweep_provenance()?.config_digest)?;

    let mut grouped: BTreeMap<TokenId, Vec<Subgroup>> = BTreeMap::new();
    for sg in subgroups {
        grouped.entry(sg.pivot).or_default().push(sg);
    }
    let records = grouped
        .into_iter()
        .map(|(pivot, sgs)| {
            let ensemble = SubgroupEnsemble::new(pivot, sgs)?;
            token_record(&ensemble, config.keep, config.beta_c)
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = config.entropy_provenance()?;
    let report = ModelEntropyReport::build(
        config.decode.model_id.clone(),
        config.direction.clone(),
        records,
        config.keep,
        config.beta_c,
        config.k,
        provenance.clone(),
    )?;

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    artifacts::write_atomic(&config.out(REPORT_FILE), json.as_bytes())?;

    let table = provenance.csv_comment() + &entropy_table(&[(config.direction.clone(), &report)]);
    artifacts::write_atomic(&config.out(TABLES_FILE), table.as_bytes())?;

    let hist = histogram(&report.records, config.histogram_bin_width)?;
    let hist_csv = provenance.csv_comment() + &hist.to_csv();
    artifacts::write_atomic(&config.out(HISTOGRAM_FILE), hist_csv.as_bytes())?;
    Ok(report)
}

/// Select, sweep and score in one go.
pub fn cmd_run(config: &RunConfig) -> Result<ModelEntropyReport<f64>> {
    cmd_select_pivots(config)?;
    let progress = cmd_sweep(config, None)?;
    debug_assert!(progress.complete);
    cmd_entropy(config)
}

/// One sentence to run the pair sweep on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRequest {
    pub sentence_id: u64,
    /// Explicit positions; by default the two least frequent non-special
    /// tokens of the sentence are used.
    pub positions: Option<(usize, usize)>,
}

/// Positions of the two least frequent non-special source tokens, ties
/// broken by position, returned in ascending position order.
pub fn default_pair_positions(
    sentence: &SentencePair,
    index: &FrequencyIndex,
    vocab: &Vocab,
) -> Option<(usize, usize)> {
    let mut candidates: Vec<(u64, usize)> = sentence
        .source
        .iter()
        .enumerate()
        .filter(|(_, t)| !vocab.is_special(**t))
        .map(|(j, t)| (index.count(*t), j))
        .collect();
    candidates.sort_unstable();
    match candidates.as_slice() {
        [(_, a), (_, b), ..] => Some(((*a).min(*b), (*a).max(*b))),
        _ => None,
    }
}

/// Writes `pairs.jsonl`.
pub fn cmd_pair(config: &RunConfig, requests: &[PairRequest]) -> Result<Vec<PairRecord>> {
    ensure_out_dir(config)?;
    let corpus = load_corpus(config)?;
    let index = build_frequency_index(&corpus);
    let translator = config.translator()?;
    let vocab = backend_vocab(translator.as_ref(), &corpus)?;

    let mut resolved = Vec::with_capacity(requests.len());
    let mut records = Vec::with_capacity(requests.len());
    for req in requests {
        let sentence = corpus.pair(req.sentence_id).ok_or_else(|| {
            Error::InvalidArgument(format!("sentence {} not in corpus", req.sentence_id))
        })?;
        let (a, b) = match req.positions {
            Some(p) => p,
            None => default_pair_positions(sentence, &index, &vocab).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "sentence {} has fewer than two substitutable tokens",
                    sentence.id
                ))
            })?,
        };
        let sweep = |j| {
            sweep_position(
                sentence,
                j,
                &vocab,
                translator.as_ref(),
                &config.decode,
                config.batch_size,
            )
        };
        let (sg_a, sg_b) = (sweep(a)?, sweep(b)?);
        let pair = pair_sweep_batched(
            sentence,
            &sg_a,
            &sg_b,
            translator.as_ref(),
            &config.decode,
            config.batch_size,
        )?;
        log::info!(
            "sentence {}: {} x {} -> {} preserved",
            sentence.id,
            pair.sg_a,
            pair.sg_b,
            pair.pair_count
        );
        resolved.push(PairRequest {
            sentence_id: req.sentence_id,
            positions: Some((a, b)),
        });
        records.push(PairRecord {
            tokens: (sg_a.pivot, sg_b.pivot),
            pair,
        });
    }
    let provenance = config.translation_provenance("pair", json!({ "requests": resolved }))?;
    artifacts::write_jsonl(&config.out(PAIRS_FILE), &provenance, &records)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub model_id: String,
    pub direction: String,
    pub sentences: usize,
    pub bleu: BleuScore<f64>,
    pub provenance: Provenance,
}

/// Translates the first `max_sentences` corpus sources (all by default) and
/// scores them against the corpus targets. Writes `bleu.json`.
pub fn cmd_bleu(config: &RunConfig, max_sentences: Option<usize>) -> Result<BleuReport> {
    ensure_out_dir(config)?;
    let corpus = load_corpus(config)?;
    let translator = config.translator()?;
    let n = max_sentences.unwrap_or(usize::MAX).min(corpus.len());
    let pairs = &corpus.pairs()[..n];
    let mut hypotheses = Vec::with_capacity(n);
    for chunk in pairs.chunks(config.batch_size.max(1)) {
        let inputs: Vec<Vec<TokenId>> = chunk.iter().map(|p| p.source.clone()).collect();
        let outputs = translator.translate_batch(&inputs, &config.decode)?;
        hypotheses.extend(outputs.into_iter().map(|t| t.0));
    }
    let references: Vec<Vec<TokenId>> = pairs.iter().map(|p| p.target.clone()).collect();
    let bleu = bleu_corpus(&hypotheses, &references)?;
    let report = BleuReport {
        model_id: config.decode.model_id.clone(),
        direction: config.direction.clone(),
        sentences: n,
        bleu,
        provenance: config.translation_provenance("bleu", json!({ "sentences": n }))?,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    artifacts::write_atomic(&config.out(BLEU_FILE), text.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub model: String,
    pub direction: String,
    pub beta_c: f64,
    pub k: usize,
    pub s: f64,
    pub s_k: f64,
    pub bleu: Option<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Combines the reports of several run directories (each holding
/// `report.json` and optionally `bleu.json`) into `ranking.csv`, ordered by
/// ascending `S^K`, and the side-by-side entropy table `table.csv`.
pub fn cmd_rank(runs: &[PathBuf], out_dir: &Path) -> Result<Vec<RankRow>> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no run directories given".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::with_capacity(runs.len());
    for dir in runs {
        let report: ModelEntropyReport<f64> = read_json(&dir.join(REPORT_FILE))?;
        let bleu_path = dir.join(BLEU_FILE);
        let bleu = if bleu_path.exists() {
            Some(read_json::<BleuReport>(&bleu_path)?)
        } else {
            None
        };
        entries.push((report, bleu));
    }

    let mut rows: Vec<RankRow> = entries
        .iter()
        .map(|(r, b)| RankRow {
            model: r.model_id.clone(),
            direction: r.direction.clone(),
            beta_c: r.beta_c,
            k: r.k,
            s: r.s,
            s_k: r.s_k,
            bleu: b.as_ref().map(|b| b.bleu.score),
        })
        .collect();
    rows.sort_by(|a, b| {
        a.s_k
            .total_cmp(&b.s_k)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.direction.cmp(&b.direction))
    });

    let digests: Vec<&str> = entries
        .iter()
        .map(|(r, _)| r.provenance.config_digest.as_str())
        .collect();
    let comment = format!(
        "# transent {VERSION} stage=rank inputs={} digest={}\n",
        digests.join(";"),
        digest_json(&json!(digests))
    );

    let mut ranking = comment.clone() + "model,direction,beta_c,K,S,S^K,BLEU\n";
    for row in &rows {
        ranking.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_field(&row.model),
            csv_field(&row.direction),
            row.beta_c,
            row.k,
            row.s,
            row.s_k,
            row.bleu.map(|b| b.to_string()).unwrap_or_default()
        ));
    }
    artifacts::write_atomic(&out_dir.join(RANKING_FILE), ranking.as_bytes())?;

    let same_model = entries.iter().all(|(r, _)| r.model_id == entries[0].0.model_id);
    let same_direction = entries
        .iter()
        .all(|(r, _)| r.direction == entries[0].0.direction);
    let columns: Vec<(String, &ModelEntropyReport<f64>)> = entries
        .iter()
        .map(|(r, _)| {
            let name = if same_model {
                r.direction.clone()
            } else if same_direction {
                r.model_id.clone()
            } else {
                format!("{}:{}", r.model_id, r.direction)
            };
            (name, r)
        })
        .collect();
    let table = comment + &entropy_table(&columns);
    artifacts::write_atomic(&out_dir.join(TABLE_FILE), table.as_bytes())?;
    Ok(rows)
}
