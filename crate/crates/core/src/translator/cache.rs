//! Persistent, deduplicating translation cache.
//!
//! Entries live in an append-only record log; an in-memory index is rebuilt
//! when the log is opened. Each record is
//!
//! ```text
//! key digest (32 bytes) | payload length (u32 LE) | payload
//! payload = output length (u32 LE) | output ids (u32 LE each) | check (32 bytes)
//! ```
//!
//! where the key digest is SHA-256 over `(model_id, decode params, input)`
//! and `check` is SHA-256 over `key || output ids`. Records that fail the
//! check are evicted at open and recomputed on demand. A torn trailing
//! record is truncated away.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{check_alignment, DecodeParams, Side, Translation, Translator};
use crate::corpus::{TokenId, Vocab};
use crate::error::{Error, Result, TranslateError};

const MAGIC: &[u8; 8] = b"TECACHE1";
const KEY_LEN: usize = 32;
const CHECK_LEN: usize = 32;

pub type CacheKey = [u8; KEY_LEN];

/// Digest of everything that determines a translation.
pub fn cache_key(params: &DecodeParams, input: &[TokenId]) -> CacheKey {
    let mut h = Sha256::new();
    h.update(b"transent-cache-v1\0");
    h.update((params.model_id.len() as u64).to_le_bytes());
    h.update(params.model_id.as_bytes());
    h.update(params.strategy.as_str().as_bytes());
    h.update([0u8]);
    h.update((params.max_output_len as u64).to_le_bytes());
    h.update((input.len() as u64).to_le_bytes());
    for t in input {
        h.update(t.0.to_le_bytes());
    }
    h.finalize().into()
}

fn record_check(key: &CacheKey, output: &[TokenId]) -> [u8; CHECK_LEN] {
    let mut h = Sha256::new();
    h.update(key);
    for t in output {
        h.update(t.0.to_le_bytes());
    }
    h.finalize().into()
}

fn encode_record(key: &CacheKey, output: &Translation) -> Vec<u8> {
    let payload_len = 4 + 4 * output.len() + CHECK_LEN;
    let mut buf = Vec::with_capacity(KEY_LEN + 4 + payload_len);
    buf.extend_from_slice(key);
    buf.extend_from_slice(&(payload_len as u32).to_le_bytes());
    buf.extend_from_slice(&(output.len() as u32).to_le_bytes());
    for t in output.tokens() {
        buf.extend_from_slice(&t.0.to_le_bytes());
    }
    buf.extend_from_slice(&record_check(key, output.tokens()));
    buf
}

enum Decoded {
    Entry(CacheKey, Translation),
    Corrupt,
}

/// Parses one record at the start of `bytes`. `None` means the record is
/// incomplete (torn write).
fn decode_record(bytes: &[u8]) -> Option<(Decoded, usize)> {
    if bytes.len() < KEY_LEN + 4 {
        return None;
    }
    let key: CacheKey = bytes[..KEY_LEN].try_into().expect("32 bytes");
    let payload_len =
        u32::from_le_bytes(bytes[KEY_LEN..KEY_LEN + 4].try_into().expect("4 bytes")) as usize;
    let total = KEY_LEN + 4 + payload_len;
    if bytes.len() < total {
        return None;
    }
    let payload = &bytes[KEY_LEN + 4..total];
    let decoded = (|| {
        if payload.len() < 4 + CHECK_LEN {
            return None;
        }
        let n = u32::from_le_bytes(payload[..4].try_into().ok()?) as usize;
        if payload.len() != 4 + 4 * n + CHECK_LEN {
            return None;
        }
        let output: Vec<TokenId> = payload[4..4 + 4 * n]
            .chunks_exact(4)
            .map(|c| TokenId(u32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        let check = &payload[4 + 4 * n..];
        (check == record_check(&key, &output)).then_some(Translation(output))
    })();
    Some((
        match decoded {
            Some(t) => Decoded::Entry(key, t),
            None => Decoded::Corrupt,
        },
        total,
    ))
}

/// Counters describing cache behaviour since open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    /// Entries loaded from the log at open.
    pub loaded: u64,
    /// Corrupt records skipped at open.
    pub evicted: u64,
    /// Torn bytes truncated from the log tail at open.
    pub truncated_bytes: u64,
    pub hits: u64,
    pub misses: u64,
    /// Inputs forwarded to the inner translator.
    pub inner_inputs: u64,
    pub inner_calls: u64,
}

#[derive(Default)]
struct Counters {
    hits: AtomicU64,
    misses: AtomicU64,
    inner_inputs: AtomicU64,
    inner_calls: AtomicU64,
}

#[derive(Default)]
struct Pending {
    done: Mutex<Option<bool>>,
    cv: Condvar,
}

impl Pending {
    fn finish(&self, ok: bool) {
        *self.done.lock().expect("pending lock") = Some(ok);
        self.cv.notify_all();
    }

    fn wait(&self) -> bool {
        let mut done = self.done.lock().expect("pending lock");
        while done.is_none() {
            done = self.cv.wait(done).expect("pending lock");
        }
        done.expect("set")
    }
}

/// Shared translation store: concurrent readers, serialized writes, and
/// at most one in-flight computation per key.
pub struct TranslationCache {
    index: RwLock<HashMap<CacheKey, Translation>>,
    log: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
    inflight: Mutex<HashMap<CacheKey, Arc<Pending>>>,
    open_stats: CacheStats,
    counters: Counters,
}

impl std::fmt::Debug for TranslationCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TranslationCache")
            .field("path", &self.path)
            .field("entries", &self.len())
            .finish()
    }
}

impl TranslationCache {
    /// A cache that only lives for this process.
    pub fn in_memory() -> Self {
        TranslationCache {
            index: RwLock::new(HashMap::new()),
            log: None,
            path: None,
            inflight: Mutex::new(HashMap::new()),
            open_stats: CacheStats::default(),
            counters: Counters::default(),
        }
    }

    /// Opens (or creates) a record log and rebuilds the index from it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .map_err(io)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io)?;

        let mut stats = CacheStats::default();
        let mut index = HashMap::new();
        if bytes.is_empty() {
            file.write_all(MAGIC).map_err(io)?;
        } else {
            if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
                return Err(Error::Cache(format!(
                    "{} is not a translation cache log",
                    path.display()
                )));
            }
            let mut offset = MAGIC.len();
            while offset < bytes.len() {
                match decode_record(&bytes[offset..]) {
                    Some((Decoded::Entry(key, t), used)) => {
                        index.insert(key, t);
                        offset += used;
                    }
                    Some((Decoded::Corrupt, used)) => {
                        stats.evicted += 1;
                        offset += used;
                    }
                    None => break,
                }
            }
            if offset < bytes.len() {
                stats.truncated_bytes = (bytes.len() - offset) as u64;
                log::warn!(
                    "cache {}: truncating {} torn bytes",
                    path.display(),
                    stats.truncated_bytes
                );
                file.set_len(offset as u64).map_err(io)?;
            }
            if stats.evicted > 0 {
                log::warn!(
                    "cache {}: evicted {} corrupt records",
                    path.display(),
                    stats.evicted
                );
            }
        }
        file.seek(SeekFrom::End(0)).map_err(io)?;
        stats.loaded = index.len() as u64;
        Ok(TranslationCache {
            index: RwLock::new(index),
            log: Some(Mutex::new(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
            inflight: Mutex::new(HashMap::new()),
            open_stats: stats,
            counters: Counters::default(),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<Translation> {
        self.index.read().expect("index lock").get(key).cloned()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.counters.hits.load(Ordering::Relaxed),
            misses: self.counters.misses.load(Ordering::Relaxed),
            inner_inputs: self.counters.inner_inputs.load(Ordering::Relaxed),
            inner_calls: self.counters.inner_calls.load(Ordering::Relaxed),
            ..self.open_stats
        }
    }

    fn store(&self, entries: &[(CacheKey, Translation)]) -> Result<(), TranslateError> {
        if let Some(log) = &self.log {
            let mut w = log.lock().expect("log lock");
            let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
                for (key, t) in entries {
                    w.write_all(&encode_record(key, t))?;
                }
                w.flush()
            };
            write(&mut w).map_err(|e| TranslateError::Transport {
                message: format!("cache write failed: {e}"),
                retryable: false,
            })?;
        }
        let mut index = self.index.write().expect("index lock");
        for (key, t) in entries {
            index.insert(*key, t.clone());
        }
        Ok(())
    }

    /// Resolves every input through the cache, dispatching each distinct
    /// missing input to `inner` exactly once.
    pub fn translate<T: Translator + ?Sized>(
        &self,
        inner: &T,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        let keys: Vec<CacheKey> = inputs.iter().map(|i| cache_key(params, i)).collect();
        // first input index for every distinct key
        let mut first: HashMap<CacheKey, usize> = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            first.entry(*k).or_insert(i);
        }
        let mut resolved: HashMap<CacheKey, Translation> = HashMap::with_capacity(first.len());
        let mut unresolved: Vec<CacheKey> = {
            let mut v: Vec<(usize, CacheKey)> = first.iter().map(|(k, &i)| (i, *k)).collect();
            v.sort_unstable();
            v.into_iter().map(|(_, k)| k).collect()
        };
        let mut first_pass = true;

        while !unresolved.is_empty() {
            let mut owned: Vec<(CacheKey, Arc<Pending>)> = Vec::new();
            let mut waiting: Vec<(CacheKey, Arc<Pending>)> = Vec::new();
            {
                let mut inflight = self.inflight.lock().expect("inflight lock");
                let index = self.index.read().expect("index lock");
                for key in unresolved.drain(..) {
                    if let Some(t) = index.get(&key) {
                        if first_pass {
                            self.counters.hits.fetch_add(1, Ordering::Relaxed);
                        }
                        resolved.insert(key, t.clone());
                    } else if let Some(p) = inflight.get(&key) {
                        waiting.push((key, p.clone()));
                    } else {
                        if first_pass {
                            self.counters.misses.fetch_add(1, Ordering::Relaxed);
                        }
                        let p = Arc::new(Pending::default());
                        inflight.insert(key, p.clone());
                        owned.push((key, p));
                    }
                }
            }
            first_pass = false;

            if !owned.is_empty() {
                let batch: Vec<Vec<TokenId>> =
                    owned.iter().map(|(k, _)| inputs[first[k]].clone()).collect();
                self.counters.inner_calls.fetch_add(1, Ordering::Relaxed);
                self.counters
                    .inner_inputs
                    .fetch_add(batch.len() as u64, Ordering::Relaxed);
                let outcome = inner
                    .translate_batch(&batch, params)
                    .and_then(|outs| check_alignment(batch.len(), outs.len()).map(|_| outs))
                    .and_then(|outs| {
                        let entries: Vec<(CacheKey, Translation)> =
                            owned.iter().map(|(k, _)| *k).zip(outs).collect();
                        self.store(&entries)?;
                        Ok(entries)
                    });
                let ok = outcome.is_ok();
                {
                    let mut inflight = self.inflight.lock().expect("inflight lock");
                    for (key, p) in &owned {
                        inflight.remove(key);
                        p.finish(ok);
                    }
                }
                for (key, t) in outcome? {
                    resolved.insert(key, t);
                }
            }

            for (key, p) in waiting {
                // a failed owner leaves the key unresolved; retry it ourselves
                p.wait();
                match self.get(&key) {
                    Some(t) => {
                        resolved.insert(key, t);
                    }
                    None => unresolved.push(key),
                }
            }
        }

        Ok(keys.iter().map(|k| resolved[k].clone()).collect())
    }
}

/// Resolves `inputs` through `cache`, deduplicating before dispatch.
pub fn cached_translate<T: Translator + ?Sized>(
    cache: &TranslationCache,
    inner: &T,
    inputs: &[Vec<TokenId>],
    params: &DecodeParams,
) -> Result<Vec<Translation>, TranslateError> {
    cache.translate(inner, inputs, params)
}

/// A [`Translator`] that consults a [`TranslationCache`] before its inner
/// backend.
#[derive(Debug)]
pub struct CachedTranslator<T> {
    inner: T,
    cache: Arc<TranslationCache>,
}

impl<T: Translator> CachedTranslator<T> {
    pub fn new(inner: T, cache: Arc<TranslationCache>) -> Self {
        CachedTranslator { inner, cache }
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: Translator> Translator for CachedTranslator<T> {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        self.cache.translate(&self.inner, inputs, params)
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        self.inner.vocabulary(side)
    }
}
