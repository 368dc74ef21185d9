//! HTTP client for a model server speaking the wire protocol in
//! [`super::protocol`].

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use ureq::Agent;

use super::protocol::{
    ErrorResponse, TranslateRequest, TranslateResponse, VocabResponse, TRANSLATE_PATH, VOCAB_PATH,
};
use super::{check_alignment, DecodeParams, Side, Translation, Translator};
use crate::corpus::{TokenId, Vocab};
use crate::error::TranslateError;

const BODY_LIMIT: u64 = 1 << 30;

/// Exponential backoff for retryable failures (transport errors, 5xx).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 6,
            initial_backoff: Duration::from_millis(200),
            max_backoff: Duration::from_secs(10),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(16)).unwrap_or(u32::MAX);
        self.initial_backoff
            .saturating_mul(factor)
            .min(self.max_backoff)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            available: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("limiter lock");
        while *n == 0 {
            n = self.cv.wait(n).expect("limiter lock");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("limiter lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct RemoteTranslator {
    base_url: String,
    agent: Agent,
    retry: RetryPolicy,
    limiter: Limiter,
    max_batch: usize,
}

impl RemoteTranslator {
    /// `base_url` like `http://127.0.0.1:8080`; `max_in_flight` bounds
    /// concurrent requests from this client.
    pub fn new(base_url: impl Into<String>, max_in_flight: usize) -> Self {
        let config = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(600)))
            .build();
        RemoteTranslator {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: config.into(),
            retry: RetryPolicy::default(),
            limiter: Limiter::new(max_in_flight),
            max_batch: 512,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Largest number of inputs sent in one request; bigger batches are split.
    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn with_retries<R>(
        &self,
        mut attempt_fn: impl FnMut() -> Result<R, TranslateError>,
    ) -> Result<R, TranslateError> {
        let mut attempt = 0;
        loop {
            match attempt_fn() {
                Err(e) if e.is_retryable() && attempt + 1 < self.retry.max_attempts => {
                    let wait = self.retry.backoff(attempt);
                    log::warn!("{e}; retrying in {wait:?}");
                    thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_chunk(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        let url = format!("{}{TRANSLATE_PATH}", self.base_url);
        let body = serde_json::to_vec(&TranslateRequest::new(inputs, params))
            .map_err(|e| TranslateError::InvalidInput(e.to_string()))?;
        let outputs = self.with_retries(|| {
            let _permit = self.limiter.acquire();
            let resp = self
                .agent
                .post(&url)
                .header("content-type", "application/json")
                .send(&body[..])
                .map_err(transport)?;
            let text = read_body(resp)?;
            let parsed: TranslateResponse = serde_json::from_str(&text).map_err(|e| {
                TranslateError::Protocol(format!("malformed translate response: {e}"))
            })?;
            Ok(parsed)
        })?;
        let outputs = outputs.into_translations();
        check_alignment(inputs.len(), outputs.len())?;
        Ok(outputs)
    }
}

fn transport(e: ureq::Error) -> TranslateError {
    TranslateError::Transport {
        message: e.to_string(),
        retryable: true,
    }
}

/// Returns the body of a 2xx response, or the matching error.
fn read_body(resp: ureq::http::Response<ureq::Body>) -> Result<String, TranslateError> {
    let status = resp.status().as_u16();
    let text = resp
        .into_body()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_string()
        .map_err(transport)?;
    match status {
        200..=299 => Ok(text),
        400..=499 => {
            let message = serde_json::from_str::<ErrorResponse>(&text)
                .map(|e| e.error)
                .unwrap_or(text);
            Err(TranslateError::Rejected { status, message })
        }
        _ => Err(TranslateError::Transport {
            message: format!("server answered {status}"),
            retryable: true,
        }),
    }
}

impl Translator for RemoteTranslator {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(self.max_batch) {
            out.extend(self.post_chunk(chunk, params)?);
        }
        Ok(out)
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        let url = format!("{}{VOCAB_PATH}", self.base_url);
        let resp = self
            .with_retries(|| {
                let _permit = self.limiter.acquire();
                let resp = self
                    .agent
                    .get(&url)
                    .query("side", side.as_str())
                    .call()
                    .map_err(transport)?;
                read_body(resp)
            })
            .map_err(|e| TranslateError::VocabUnavailable(e.to_string()))?;
        let parsed: VocabResponse = serde_json::from_str(&resp)
            .map_err(|e| TranslateError::VocabUnavailable(format!("malformed vocab: {e}")))?;
        parsed
            .into_vocab()
            .map_err(|e| TranslateError::VocabUnavailable(e.to_string()))
    }
}
