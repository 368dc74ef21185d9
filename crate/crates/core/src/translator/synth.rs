//! Synthetic token-wise translator with analytically known degeneracy.
//!
//! Every source token belongs to exactly one synonym group and every group
//! emits one target token. Tokens in the drop set emit nothing. A context
//! rule `(token, neighbor, group)` reassigns `token` to `group` whenever its
//! left neighbor in the input is `neighbor`; the first matching rule wins.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DecodeParams, Side, Translation, Translator};
use crate::corpus::{TokenId, Vocab};
use crate::error::{Error, Result, TranslateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextRule {
    pub token: TokenId,
    pub neighbor: TokenId,
    pub group: u32,
}

/// JSON-serializable definition of a synthetic translator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub source_vocab_size: u32,
    pub target_vocab_size: u32,
    /// Group id of each source token, indexed by token id.
    pub groups: Vec<u32>,
    /// Target token emitted by each group, indexed by group id.
    pub emissions: Vec<TokenId>,
    #[serde(default)]
    pub drop: Vec<TokenId>,
    #[serde(default)]
    pub context_rules: Vec<ContextRule>,
    /// Source tokens flagged special in the exported vocabulary.
    #[serde(default)]
    pub specials: Vec<TokenId>,
}

impl SynthSpec {
    /// Every token in its own group, token `i` emitting target token `i`.
    pub fn identity(vocab_size: u32) -> Self {
        SynthSpec {
            source_vocab_size: vocab_size,
            target_vocab_size: vocab_size,
            groups: (0..vocab_size).collect(),
            emissions: (0..vocab_size).map(TokenId).collect(),
            drop: Vec::new(),
            context_rules: Vec::new(),
            specials: Vec::new(),
        }
    }

    /// Builds a spec from explicit synonym groups over `0..source_vocab_size`;
    /// tokens not listed get singleton groups. Group `g` (in listing order,
    /// then singletons by token id) emits target token `g`.
    pub fn from_groups(source_vocab_size: u32, groups: &[Vec<u32>]) -> Result<Self> {
        let mut assignment = vec![u32::MAX; source_vocab_size as usize];
        let mut next = 0u32;
        for members in groups {
            for &t in members {
                let slot = assignment.get_mut(t as usize).ok_or_else(|| {
                    Error::SynthSpec(format!("token {t} outside vocabulary"))
                })?;
                if *slot != u32::MAX {
                    return Err(Error::SynthSpec(format!("token {t} listed twice")));
                }
                *slot = next;
            }
            next += 1;
        }
        for slot in assignment.iter_mut().filter(|s| **s == u32::MAX) {
            *slot = next;
            next += 1;
        }
        let spec = SynthSpec {
            source_vocab_size,
            target_vocab_size: next,
            groups: assignment,
            emissions: (0..next).map(TokenId).collect(),
            drop: Vec::new(),
            context_rules: Vec::new(),
            specials: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn group_count(&self) -> u32 {
        self.emissions.len() as u32
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SynthSpec(m));
        if self.source_vocab_size == 0 || self.target_vocab_size == 0 {
            return bad("vocabulary sizes must be positive".into());
        }
        if self.groups.len() != self.source_vocab_size as usize {
            return bad(format!(
                "{} group assignments for {} source tokens",
                self.groups.len(),
                self.source_vocab_size
            ));
        }
        if let Some(g) = self.groups.iter().find(|&&g| g >= self.group_count()) {
            return bad(format!("group {g} has no emission"));
        }
        if let Some(t) = self
            .emissions
            .iter()
            .find(|t| t.0 >= self.target_vocab_size)
        {
            return bad(format!("emission {t} outside target vocabulary"));
        }
        let src_ok = |t: &TokenId| t.0 < self.source_vocab_size;
        if let Some(t) = self.drop.iter().find(|t| !src_ok(t)) {
            return bad(format!("drop token {t} outside source vocabulary"));
        }
        if let Some(t) = self.specials.iter().find(|t| !src_ok(t)) {
            return bad(format!("special token {t} outside source vocabulary"));
        }
        for rule in &self.context_rules {
            if !src_ok(&rule.token) || !src_ok(&rule.neighbor) || rule.group >= self.group_count() {
                return bad(format!("context rule {rule:?} references invalid ids"));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SynthSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Samples a random spec. See [`RandomSpecParams`].
    pub fn random(params: &RandomSpecParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.source_vocab_size;
        let mut order: Vec<u32> = (0..n).collect();
        order.shuffle(&mut rng);

        let mut groups = vec![0u32; n as usize];
        let mut group_count = 0u32;
        let mut i = 0usize;
        while i < order.len() {
            let size = rng.gen_range(1..=params.max_group_size.max(1)) as usize;
            for &t in order.iter().skip(i).take(size) {
                groups[t as usize] = group_count;
            }
            group_count += 1;
            i += size;
        }

        let target = params.target_vocab_size.max(1);
        let emissions: Vec<TokenId> = if target >= group_count {
            let mut ids: Vec<u32> = (0..target).collect();
            ids.shuffle(&mut rng);
            ids.into_iter().take(group_count as usize).map(TokenId).collect()
        } else {
            (0..group_count)
                .map(|_| TokenId(rng.gen_range(0..target)))
                .collect()
        };

        let mut drop: Vec<TokenId> = (0..n)
            .filter(|_| rng.gen_bool(params.drop_fraction.clamp(0.0, 1.0)))
            .map(TokenId)
            .collect();
        drop.sort_unstable();

        let context_rules = (0..params.context_rules)
            .map(|_| ContextRule {
                token: TokenId(rng.gen_range(0..n)),
                neighbor: TokenId(rng.gen_range(0..n)),
                group: rng.gen_range(0..group_count),
            })
            .collect();

        SynthSpec {
            source_vocab_size: n,
            target_vocab_size: target,
            groups,
            emissions,
            drop,
            context_rules,
            specials: Vec::new(),
        }
    }
}

/// Knobs for [`SynthSpec::random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpecParams {
    pub source_vocab_size: u32,
    pub target_vocab_size: u32,
    /// Group sizes are uniform in `1..=max_group_size`.
    pub max_group_size: u32,
    /// Probability that a source token is in the drop set.
    pub drop_fraction: f64,
    pub context_rules: usize,
}

impl Default for RandomSpecParams {
    fn default() -> Self {
        RandomSpecParams {
            source_vocab_size: 1000,
            target_vocab_size: 1000,
            max_group_size: 4,
            drop_fraction: 0.01,
            context_rules: 200,
        }
    }
}

/// A validated [`SynthSpec`] with lookup tables, usable as a backend.
#[derive(Debug, Clone)]
pub struct SynthTranslator {
    spec: SynthSpec,
    dropped: Vec<bool>,
    rules: HashMap<(TokenId, TokenId), u32>,
}

impl SynthTranslator {
    pub fn new(spec: SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut dropped = vec![false; spec.source_vocab_size as usize];
        for t in &spec.drop {
            dropped[t.index()] = true;
        }
        let mut rules = HashMap::with_capacity(spec.context_rules.len());
        for rule in &spec.context_rules {
            rules.entry((rule.token, rule.neighbor)).or_insert(rule.group);
        }
        Ok(SynthTranslator {
            spec,
            dropped,
            rules,
        })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    fn check_input(&self, input: &[TokenId]) -> Result<(), TranslateError> {
        if input.is_empty() {
            return Err(TranslateError::InvalidInput("empty input".into()));
        }
        if let Some(t) = input.iter().find(|t| t.0 >= self.spec.source_vocab_size) {
            return Err(TranslateError::InvalidInput(format!(
                "token {t} outside source vocabulary of {}",
                self.spec.source_vocab_size
            )));
        }
        Ok(())
    }

    /// Evaluates the spec on one valid input, without truncation.
    pub fn translate_tokens(&self, input: &[TokenId]) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(input.len());
        for (i, &token) in input.iter().enumerate() {
            if self.dropped[token.index()] {
                continue;
            }
            let group = i
                .checked_sub(1)
                .and_then(|left| self.rules.get(&(token, input[left])).copied())
                .unwrap_or(self.spec.groups[token.index()]);
            out.push(self.spec.emissions[group as usize]);
        }
        out
    }
}

/// Evaluates `spec` on one input.
pub fn synth_translate(spec: &SynthSpec, input: &[TokenId]) -> Result<Translation> {
    let translator = SynthTranslator::new(spec.clone())?;
    translator.check_input(input)?;
    Ok(Translation(translator.translate_tokens(input)))
}

impl Translator for SynthTranslator {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        inputs
            .iter()
            .map(|input| {
                self.check_input(input)?;
                let mut out = self.translate_tokens(input);
                out.truncate(params.max_output_len);
                Ok(Translation(out))
            })
            .collect()
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        Ok(match side {
            Side::Source => {
                Vocab::synthetic_with_specials(self.spec.source_vocab_size, "s", &self.spec.specials)
            }
            Side::Target => Vocab::synthetic(self.spec.target_vocab_size, "t"),
        })
    }
}
