//! Parallel corpus ingestion, source-token frequency index, and pivot
//! token / pivot sentence sampling.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for TokenId {
    fn from(id: u32) -> Self {
        TokenId(id)
    }
}

/// Converts raw ids into a token sequence.
pub fn tokens(ids: &[u32]) -> Vec<TokenId> {
    ids.iter().copied().map(TokenId).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: TokenId,
    pub surface: String,
    pub special: bool,
}

const UNKNOWN_SURFACES: [&str; 3] = ["<unk>", "<UNK>", "[UNK]"];

/// A dense vocabulary `0..len` with unique surface strings.
///
/// Special entries (padding, delimiters, unknown) are never substituted
/// during sweeps and are never selected as pivots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VocabEntry>", into = "Vec<VocabEntry>")]
pub struct Vocab {
    entries: Vec<VocabEntry>,
    by_surface: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary, accepting entries in any order as long as the ids
    /// are exactly `0..entries.len()`.
    pub fn from_entries(mut entries: Vec<VocabEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.id);
        let mut by_surface = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if entry.id.index() != i {
                return Err(Error::Vocab(format!(
                    "ids are not dense: expected {i}, found {}",
                    entry.id
                )));
            }
            if by_surface.insert(entry.surface.clone(), entry.id).is_some() {
                return Err(Error::Vocab(format!(
                    "duplicate surface {:?}",
                    entry.surface
                )));
            }
        }
        Ok(Vocab {
            entries,
            by_surface,
        })
    }

    /// `size` non-special entries with surfaces `{prefix}{id}`.
    pub fn synthetic(size: u32, prefix: &str) -> Self {
        Self::synthetic_with_specials(size, prefix, &[])
    }

    pub fn synthetic_with_specials(size: u32, prefix: &str, specials: &[TokenId]) -> Self {
        let entries = (0..size)
            .map(|id| VocabEntry {
                id: TokenId(id),
                surface: format!("{prefix}{id}"),
                special: specials.contains(&TokenId(id)),
            })
            .collect();
        Self::from_entries(entries).expect("synthetic vocab is dense and unique")
    }

    /// Reads `id<TAB>surface<TAB>special_flag` lines. The flag accepts
    /// `0`/`1`/`true`/`false`; blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let id: u32 = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad id {:?}", fields[0])))?;
            let special = match fields[2].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(parse_err(format!("bad special flag {other:?}"))),
            };
            entries.push(VocabEntry {
                id: TokenId(id),
                surface: fields[1].to_string(),
                special,
            });
        }
        Self::from_entries(entries)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.id,
                e.surface,
                if e.special { 1 } else { 0 }
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.entries.len()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.entries.get(id.index()).map(|e| e.surface.as_str())
    }

    pub fn id_of(&self, surface: &str) -> Option<TokenId> {
        self.by_surface.get(surface).copied()
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.entries.get(id.index()).is_some_and(|e| e.special)
    }

    pub fn special_count(&self) -> usize {
        self.entries.iter().filter(|e| e.special).count()
    }

    /// The special entry that unknown surface forms map to, if any.
    pub fn unknown_token(&self) -> Option<TokenId> {
        UNKNOWN_SURFACES
            .iter()
            .filter_map(|s| self.id_of(s))
            .find(|&id| self.is_special(id))
    }

    /// Every non-special token, ascending. This is the replacement universe
    /// of a substitution sweep (before removing the pivot itself).
    pub fn substitutable(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.entries.iter().filter(|e| !e.special).map(|e| e.id)
    }

    pub fn substitutable_count(&self) -> usize {
        self.len() - self.special_count()
    }
}

impl TryFrom<Vec<VocabEntry>> for Vocab {
    type Error = Error;

    fn try_from(entries: Vec<VocabEntry>) -> Result<Self> {
        Vocab::from_entries(entries)
    }
}

impl From<Vocab> for Vec<VocabEntry> {
    fn from(vocab: Vocab) -> Self {
        vocab.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    /// Zero-based line number in the input files.
    pub id: u64,
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

pub const DEFAULT_MAX_LEN: usize = 128;

/// Paths of the four files making up a plain-text parallel corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub source: PathBuf,
    pub target: PathBuf,
    pub source_vocab: PathBuf,
    pub target_vocab: PathBuf,
}

/// What ingestion filtered or repaired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub lines: usize,
    pub dropped_too_long: usize,
    pub dropped_empty: usize,
    /// Surface forms not found in the vocabulary, mapped to the unknown token.
    pub unknown_tokens: usize,
}

#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    source_vocab: Vocab,
    target_vocab: Vocab,
    direction: String,
    stats: LoadStats,
}

impl ParallelCorpus {
    /// Assembles a corpus from already-tokenized pairs. Pairs must have
    /// strictly increasing ids and valid, non-empty token sequences.
    pub fn new(
        pairs: Vec<SentencePair>,
        source_vocab: Vocab,
        target_vocab: Vocab,
        direction: impl Into<String>,
        max_len: usize,
    ) -> Result<Self> {
        let mut last: Option<u64> = None;
        for pair in &pairs {
            if last.is_some_and(|l| l >= pair.id) {
                return Err(Error::Corpus(format!(
                    "sentence ids must be strictly increasing (at {})",
                    pair.id
                )));
            }
            last = Some(pair.id);
            if pair.source.is_empty() || pair.target.is_empty() {
                return Err(Error::Corpus(format!("sentence {} is empty", pair.id)));
            }
            if pair.source.len() > max_len {
                return Err(Error::Corpus(format!(
                    "sentence {} has {} source tokens, max {max_len}",
                    pair.id,
                    pair.source.len()
                )));
            }
            if let Some(bad) = pair.source.iter().find(|t| !source_vocab.contains(**t)) {
                return Err(Error::Corpus(format!(
                    "sentence {}: source token {bad} outside vocabulary of {}",
                    pair.id,
                    source_vocab.len()
                )));
            }
            if let Some(bad) = pair.target.iter().find(|t| !target_vocab.contains(**t)) {
                return Err(Error::Corpus(format!(
                    "sentence {}: target token {bad} outside vocabulary of {}",
                    pair.id,
                    target_vocab.len()
                )));
            }
        }
        let stats = LoadStats {
            lines: pairs.len(),
            ..LoadStats::default()
        };
        Ok(ParallelCorpus {
            pairs,
            source_vocab,
            target_vocab,
            direction: direction.into(),
            stats,
        })
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, id: u64) -> Option<&SentencePair> {
        self.pairs
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.pairs[i])
    }

    pub fn source_vocab(&self) -> &Vocab {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &Vocab {
        &self.target_vocab
    }

    pub fn direction(&self) -> &str {
        &self.direction
    }

    pub fn stats(&self) -> &LoadStats {
        &self.stats
    }

    /// Writes the corpus back out in the on-disk format `load_parallel_corpus`
    /// reads. Dropped lines are not reproduced, so ids are renumbered on reload.
    pub fn write(&self, paths: &CorpusPaths) -> Result<()> {
        let render = |seq: &[TokenId], vocab: &Vocab| {
            seq.iter()
                .map(|t| vocab.surface(*t).unwrap_or("<?>"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut src = String::new();
        let mut tgt = String::new();
        for p in &self.pairs {
            src.push_str(&render(&p.source, &self.source_vocab));
            src.push('\n');
            tgt.push_str(&render(&p.target, &self.target_vocab));
            tgt.push('\n');
        }
        fs::write(&paths.source, src).map_err(|e| Error::io(&paths.source, e))?;
        fs::write(&paths.target, tgt).map_err(|e| Error::io(&paths.target, e))?;
        self.source_vocab.write(&paths.source_vocab)?;
        self.target_vocab.write(&paths.target_vocab)
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn tokenize(line: &str, vocab: &Vocab, unknown: &mut usize) -> Result<Vec<TokenId>> {
    line.split_whitespace()
        .map(|surface| match vocab.id_of(surface) {
            Some(id) => Ok(id),
            None => {
                *unknown += 1;
                vocab.unknown_token().ok_or_else(|| {
                    Error::Vocab(format!(
                        "surface {surface:?} is not in the vocabulary and no unknown token is defined"
                    ))
                })
            }
        })
        .collect()
}

/// Loads whitespace-tokenized parallel files, one sentence per line.
///
/// Pair ids are the zero-based line numbers. Pairs whose source exceeds
/// `max_len` tokens, or whose either side is empty, are dropped and counted.
pub fn load_parallel_corpus(
    paths: &CorpusPaths,
    direction: &str,
    max_len: usize,
) -> Result<ParallelCorpus> {
    let source_vocab = Vocab::load(&paths.source_vocab)?;
    let target_vocab = Vocab::load(&paths.target_vocab)?;
    let source_lines = read_lines(&paths.source)?;
    let target_lines = read_lines(&paths.target)?;
    if source_lines.len() != target_lines.len() {
        return Err(Error::LineCountMismatch {
            source_lines: source_lines.len(),
            target_lines: target_lines.len(),
        });
    }

    let mut stats = LoadStats {
        lines: source_lines.len(),
        ..LoadStats::default()
    };
    let mut pairs = Vec::with_capacity(source_lines.len());
    for (lineno, (src, tgt)) in source_lines.iter().zip(&target_lines).enumerate() {
        let source = tokenize(src, &source_vocab, &mut stats.unknown_tokens)?;
        let target = tokenize(tgt, &target_vocab, &mut stats.unknown_tokens)?;
        if source.is_empty() || target.is_empty() {
            stats.dropped_empty += 1;
            continue;
        }
        if source.len() > max_len {
            stats.dropped_too_long += 1;
            continue;
        }
        pairs.push(SentencePair {
            id: lineno as u64,
            source,
            target,
        });
    }
    if stats.unknown_tokens > 0 {
        log::warn!(
            "{} surface forms mapped to the unknown token",
            stats.unknown_tokens
        );
    }
    if stats.dropped_too_long + stats.dropped_empty > 0 {
        log::info!(
            "dropped {} over-length and {} empty pairs",
            stats.dropped_too_long,
            stats.dropped_empty
        );
    }
    let mut corpus = ParallelCorpus::new(pairs, source_vocab, target_vocab, direction, max_len)?;
    corpus.stats = stats;
    Ok(corpus)
}

/// One occurrence of a token on the source side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub sentence_id: u64,
    pub position: u32,
}

/// Exact source-side occurrence counts and postings.
#[derive(Debug, Clone, Default)]
pub struct FrequencyIndex {
    counts: Vec<u64>,
    postings: Vec<Vec<Occurrence>>,
}

impl FrequencyIndex {
    pub fn count(&self, token: TokenId) -> u64 {
        self.counts.get(token.index()).copied().unwrap_or(0)
    }

    /// Occurrences ordered by (sentence id, position).
    pub fn postings(&self, token: TokenId) -> &[Occurrence] {
        self.postings
            .get(token.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn vocab_len(&self) -> usize {
        self.counts.len()
    }

    /// Occurrences in sentences that contain `token` exactly once.
    pub fn single_occurrences(&self, token: TokenId) -> Vec<Occurrence> {
        let posts = self.postings(token);
        let mut out = Vec::new();
        let mut i = 0;
        while i < posts.len() {
            let mut j = i + 1;
            while j < posts.len() && posts[j].sentence_id == posts[i].sentence_id {
                j += 1;
            }
            if j - i == 1 {
                out.push(posts[i]);
            }
            i = j;
        }
        out
    }
}

pub fn build_frequency_index(corpus: &ParallelCorpus) -> FrequencyIndex {
    let n = corpus.source_vocab().len();
    let mut counts = vec![0u64; n];
    let mut postings = vec![Vec::new(); n];
    for pair in corpus.pairs() {
        for (position, token) in pair.source.iter().enumerate() {
            counts[token.index()] += 1;
            postings[token.index()].push(Occurrence {
                sentence_id: pair.id,
                position: position as u32,
            });
        }
    }
    FrequencyIndex { counts, postings }
}

/// Eligibility rules for pivot tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotCriteria {
    pub min_freq: u64,
    pub max_freq: u64,
    pub count: usize,
    pub sentences_per_token: usize,
}

impl Default for PivotCriteria {
    fn default() -> Self {
        PivotCriteria {
            min_freq: 500,
            max_freq: 1500,
            count: 100,
            sentences_per_token: 30,
        }
    }
}

/// Non-special tokens inside the frequency window that also have enough
/// single-occurrence sentences to be sampled later. Ascending.
pub fn eligible_pivots(
    index: &FrequencyIndex,
    vocab: &Vocab,
    criteria: &PivotCriteria,
) -> Vec<TokenId> {
    vocab
        .substitutable()
        .filter(|&t| {
            let c = index.count(t);
            c >= criteria.min_freq
                && c <= criteria.max_freq
                && index.single_occurrences(t).len() >= criteria.sentences_per_token
        })
        .collect()
}

/// Seeded uniform sample without replacement over the eligible tokens,
/// returned sorted by id.
pub fn select_pivot_tokens(
    index: &FrequencyIndex,
    vocab: &Vocab,
    criteria: &PivotCriteria,
    seed: u64,
) -> Result<Vec<TokenId>> {
    if criteria.count == 0 {
        return Err(Error::InvalidArgument("pivot count must be >= 1".into()));
    }
    if criteria.min_freq > criteria.max_freq {
        return Err(Error::InvalidArgument(format!(
            "min_freq {} exceeds max_freq {}",
            criteria.min_freq, criteria.max_freq
        )));
    }
    let eligible = eligible_pivots(index, vocab, criteria);
    if eligible.len() < criteria.count {
        return Err(Error::InsufficientPivots {
            eligible: eligible.len(),
            requested: criteria.count,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<TokenId> = index::sample(&mut rng, eligible.len(), criteria.count)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// A corpus sentence containing the pivot exactly once, at `position`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotSentence {
    pub sentence: SentencePair,
    pub position: usize,
    pub pivot: TokenId,
}

impl PivotSentence {
    pub fn new(sentence: SentencePair, position: usize, pivot: TokenId) -> Result<Self> {
        if sentence.source.get(position) != Some(&pivot) {
            return Err(Error::Corpus(format!(
                "sentence {} does not hold pivot {pivot} at position {position}",
                sentence.id
            )));
        }
        if sentence.source.iter().filter(|&&t| t == pivot).count() != 1 {
            return Err(Error::Corpus(format!(
                "pivot {pivot} occurs more than once in sentence {}",
                sentence.id
            )));
        }
        Ok(PivotSentence {
            sentence,
            position,
            pivot,
        })
    }
}

/// Seeded uniform sample of sentences containing `pivot` exactly once,
/// returned sorted by sentence id.
pub fn sample_pivot_sentences(
    corpus: &ParallelCorpus,
    index: &FrequencyIndex,
    pivot: TokenId,
    count: usize,
    seed: u64,
) -> Result<Vec<PivotSentence>> {
    let pool = index.single_occurrences(pivot);
    if pool.len() < count {
        return Err(Error::InsufficientSentences {
            pivot,
            available: pool.len(),
            requested: count,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<Occurrence> = index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|occ| {
            let sentence = corpus.pair(occ.sentence_id).ok_or_else(|| {
                Error::Corpus(format!(
                    "index refers to sentence {} missing from corpus",
                    occ.sentence_id
                ))
            })?;
            PivotSentence::new(sentence.clone(), occ.position as usize, pivot)
        })
        .collect()
}

/// Derives an independent seed for sub-stream `stream` (splitmix64 mixing).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(base ^ splitmix(stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_from(lines: &[&[u32]], vocab_size: u32) -> ParallelCorpus {
        let pairs = lines
            .iter()
            .enumerate()
            .map(|(i, ids)| SentencePair {
                id: i as u64,
                source: tokens(ids),
                target: vec![TokenId(0)],
            })
            .collect();
        ParallelCorpus::new(
            pairs,
            Vocab::synthetic(vocab_size, "s"),
            Vocab::synthetic(1, "t"),
            "src-tgt",
            DEFAULT_MAX_LEN,
        )
        .unwrap()
    }

    #[test]
    fn frequency_hand_count() {
        // "a b a", "b c" with a=0, b=1, c=2
        let corpus = corpus_from(&[&[0, 1, 0], &[1, 2]], 3);
        let index = build_frequency_index(&corpus);
        assert_eq!(index.count(TokenId(0)), 2);
        assert_eq!(index.count(TokenId(1)), 2);
        assert_eq!(index.count(TokenId(2)), 1);
        assert_eq!(index.total(), 5);
        assert_eq!(
            index.postings(TokenId(0)),
            &[
                Occurrence { sentence_id: 0, position: 0 },
                Occurrence { sentence_id: 0, position: 2 }
            ]
        );
        // a occurs twice in sentence 0, so it has no single-occurrence sentence
        assert!(index.single_occurrences(TokenId(0)).is_empty());
        assert_eq!(index.single_occurrences(TokenId(1)).len(), 2);
    }

    #[test]
    fn empty_corpus_has_empty_index() {
        let corpus = corpus_from(&[], 4);
        let index = build_frequency_index(&corpus);
        assert_eq!(index.total(), 0);
        assert!((0..4).all(|t| index.count(TokenId(t)) == 0));
    }

    #[test]
    fn zero_eligible_is_an_error() {
        let corpus = corpus_from(&[&[0, 1]], 2);
        let index = build_frequency_index(&corpus);
        let err = select_pivot_tokens(
            &index,
            corpus.source_vocab(),
            &PivotCriteria::default(),
            1,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientPivots { eligible: 0, requested: 100 }
        ));
    }

    #[test]
    fn forced_selection_returns_everything() {
        // every token appears once in each of 3 sentences
        let lines: Vec<Vec<u32>> = (0..3).map(|_| (0..10).collect()).collect();
        let refs: Vec<&[u32]> = lines.iter().map(Vec::as_slice).collect();
        let corpus = corpus_from(&refs, 10);
        let index = build_frequency_index(&corpus);
        let criteria = PivotCriteria {
            min_freq: 1,
            max_freq: 3,
            count: 10,
            sentences_per_token: 3,
        };
        for seed in [0, 1, 99] {
            let picked =
                select_pivot_tokens(&index, corpus.source_vocab(), &criteria, seed).unwrap();
            assert_eq!(picked, tokens(&(0..10).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn specials_are_never_pivots() {
        let lines: Vec<Vec<u32>> = (0..3).map(|_| (0..4).collect()).collect();
        let refs: Vec<&[u32]> = lines.iter().map(Vec::as_slice).collect();
        let mut corpus = corpus_from(&refs, 4);
        corpus.source_vocab = Vocab::synthetic_with_specials(4, "s", &[TokenId(0), TokenId(3)]);
        let index = build_frequency_index(&corpus);
        let criteria = PivotCriteria {
            min_freq: 1,
            max_freq: 10,
            count: 2,
            sentences_per_token: 1,
        };
        assert_eq!(
            eligible_pivots(&index, corpus.source_vocab(), &criteria),
            tokens(&[1, 2])
        );
    }

    #[test]
    fn multi_occurrence_sentences_are_excluded() {
        let corpus = corpus_from(&[&[5, 1, 5], &[5, 2], &[3, 5], &[5]], 6);
        let index = build_frequency_index(&corpus);
        let picked = sample_pivot_sentences(&corpus, &index, TokenId(5), 3, 4).unwrap();
        let ids: Vec<u64> = picked.iter().map(|p| p.sentence.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(
            picked.iter().map(|p| p.position).collect::<Vec<_>>(),
            vec![0, 1, 0]
        );
        let err = sample_pivot_sentences(&corpus, &index, TokenId(5), 4, 4).unwrap_err();
        assert!(matches!(err, Error::InsufficientSentences { available: 3, .. }));
    }

    #[test]
    fn pivot_sentence_checks_uniqueness() {
        let s = SentencePair {
            id: 0,
            source: tokens(&[1, 2, 1]),
            target: tokens(&[0]),
        };
        assert!(PivotSentence::new(s.clone(), 0, TokenId(1)).is_err());
        assert!(PivotSentence::new(s.clone(), 1, TokenId(1)).is_err());
        assert!(PivotSentence::new(s, 1, TokenId(2)).is_ok());
    }

    #[test]
    fn vocab_rejects_gaps_and_duplicates() {
        let e = |id, s: &str| VocabEntry {
            id: TokenId(id),
            surface: s.into(),
            special: false,
        };
        assert!(Vocab::from_entries(vec![e(0, "a"), e(2, "b")]).is_err());
        assert!(Vocab::from_entries(vec![e(0, "a"), e(1, "a")]).is_err());
        let v = Vocab::from_entries(vec![e(1, "b"), e(0, "a")]).unwrap();
        assert_eq!(v.id_of("b"), Some(TokenId(1)));
    }

    #[test]
    fn specials_shrink_the_substitution_universe() {
        let v = Vocab::synthetic_with_specials(
            10,
            "w",
            &tokens(&[0, 1, 2, 3]),
        );
        assert_eq!(v.special_count(), 4);
        assert_eq!(v.substitutable_count(), 6);
        assert_eq!(v.substitutable().count(), 6);
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    }
}
