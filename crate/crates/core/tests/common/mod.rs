//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's translator, sweep or entropy code.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transent::corpus::{ParallelCorpus, SentencePair, TokenId, Vocab};
use transent::translator::SynthSpec;

/// Direct reading of the synthetic translator rules: dropped tokens vanish,
/// the first context rule whose token and left neighbor match picks the
/// group, otherwise the token's own group does.
pub fn oracle_translate(spec: &SynthSpec, input: &[TokenId]) -> Vec<TokenId> {
    let mut out = Vec::new();
    for i in 0..input.len() {
        let t = input[i];
        if spec.drop.contains(&t) {
            continue;
        }
        let mut group = spec.groups[t.0 as usize];
        if i > 0 {
            for rule in &spec.context_rules {
                if rule.token == t && rule.neighbor == input[i - 1] {
                    group = rule.group;
                    break;
                }
            }
        }
        out.push(spec.emissions[group as usize]);
    }
    out
}

/// Like `oracle_translate` but with the drop list hashed and the rules
/// bucketed by token (listing order kept), for the larger enumerations.
pub struct Oracle<'a> {
    spec: &'a SynthSpec,
    dropped: HashSet<TokenId>,
    specials: HashSet<TokenId>,
    rules: HashMap<TokenId, Vec<(TokenId, u32)>>,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a SynthSpec) -> Self {
        Oracle {
            spec,
            dropped: spec.drop.iter().copied().collect(),
            specials: spec.specials.iter().copied().collect(),
            rules: spec.context_rules.iter().fold(HashMap::new(), |mut m, r| {
                m.entry(r.token).or_insert_with(Vec::new).push((r.neighbor, r.group));
                m
            }),
        }
    }

    pub fn translate(&self, input: &[TokenId]) -> Vec<TokenId> {
        let mut out = Vec::new();
        for i in 0..input.len() {
            let t = input[i];
            if self.dropped.contains(&t) {
                continue;
            }
            let mut group = self.spec.groups[t.0 as usize];
            if i > 0 {
                if let Some(&(_, g)) = self
                    .rules
                    .get(&t)
                    .and_then(|rs| rs.iter().find(|(n, _)| *n == input[i - 1]))
                {
                    group = g;
                }
            }
            out.push(self.spec.emissions[group as usize]);
        }
        out
    }

    /// Every replacement at `j` that leaves the translation unchanged.
    pub fn subgroup(&self, source: &[TokenId], j: usize) -> Vec<TokenId> {
        let reference = self.translate(source);
        let pivot = source[j];
        let mut work = source.to_vec();
        let mut members = Vec::new();
        for r in 0..self.spec.source_vocab_size {
            let r = TokenId(r);
            if r == pivot || self.specials.contains(&r) {
                continue;
            }
            work[j] = r;
            if self.translate(&work) == reference {
                members.push(r);
            }
        }
        members
    }

    /// Number of `(r_a, r_b)` in `sg_a x sg_b` preserving the translation
    /// when substituted together.
    pub fn pair_count(&self, source: &[TokenId], (a, b): (usize, usize)) -> (usize, usize, u64) {
        let reference = self.translate(source);
        let sg_a = self.subgroup(source, a);
        let sg_b = self.subgroup(source, b);
        let mut work = source.to_vec();
        let mut n = 0;
        for &ra in &sg_a {
            for &rb in &sg_b {
                work[a] = ra;
                work[b] = rb;
                if self.translate(&work) == reference {
                    n += 1;
                }
            }
        }
        (sg_a.len(), sg_b.len(), n)
    }
}

/// Per-token quantities computed the long way.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleToken {
    /// `(sentence_id, members)` for every pivot sentence, in input order.
    pub subgroups: Vec<(u64, Vec<TokenId>)>,
    /// Sentence ids of the kept subgroups.
    pub kept: Vec<u64>,
    pub counts: BTreeMap<TokenId, u32>,
    pub n_av: u64,
}

pub fn oracle_token(
    oracle: &Oracle,
    sentences: &[(SentencePair, usize)],
    keep: usize,
) -> OracleToken {
    let subgroups: Vec<(u64, Vec<TokenId>)> = sentences
        .iter()
        .map(|(s, j)| (s.id, oracle.subgroup(&s.source, *j)))
        .collect();
    // insertion sort on (size, sentence id), deliberately naive
    let mut order: Vec<usize> = Vec::new();
    for i in 0..subgroups.len() {
        let key = (subgroups[i].1.len(), subgroups[i].0);
        let at = order
            .iter()
            .position(|&o| (subgroups[o].1.len(), subgroups[o].0) > key)
            .unwrap_or(order.len());
        order.insert(at, i);
    }
    order.truncate(keep);
    let mut counts = BTreeMap::new();
    for &i in &order {
        for &m in &subgroups[i].1 {
            *counts.entry(m).or_insert(0u32) += 1;
        }
    }
    let n_av = counts.values().map(|&c| c as u64).sum();
    OracleToken {
        kept: order.iter().map(|&i| subgroups[i].0).collect(),
        subgroups,
        counts,
        n_av,
    }
}

/// `-sum P log2 P` over counts with `c / kept > beta_c / kept`, summed in
/// plain left-to-right order.
pub fn oracle_entropy(counts: impl IntoIterator<Item = u32>, kept: u32, beta_c: f64) -> f64 {
    let mut s = 0.0f64;
    for c in counts {
        let p = c as f64 / kept as f64;
        if p > beta_c / kept as f64 && p > 0.0 {
            s -= p * p.log2();
        }
    }
    s
}

/// Uniform random sources over the non-special tokens of `spec`, with the
/// oracle translation as target (a single token 0 when it is empty).
pub fn random_corpus(
    spec: &SynthSpec,
    sentences: usize,
    len: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> ParallelCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ordinary: Vec<TokenId> = (0..spec.source_vocab_size)
        .map(TokenId)
        .filter(|t| !spec.specials.contains(t))
        .collect();
    let pairs = (0..sentences as u64)
        .map(|id| {
            let n = rng.gen_range(len.clone());
            let source: Vec<TokenId> =
                (0..n).map(|_| ordinary[rng.gen_range(0..ordinary.len())]).collect();
            let mut target = oracle_translate(spec, &source);
            if target.is_empty() {
                target.push(TokenId(0));
            }
            SentencePair { id, source, target }
        })
        .collect();
    ParallelCorpus::new(
        pairs,
        Vocab::synthetic_with_specials(spec.source_vocab_size, "s", &spec.specials),
        Vocab::synthetic(spec.target_vocab_size, "t"),
        "s-t",
        *len.end(),
    )
    .expect("valid corpus")
}
