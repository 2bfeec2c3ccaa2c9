//! HTTP client for model servers speaking the JSON wire protocol.
//!
//! `POST /step`, `/entail` and `/pair_score`. Scoring calls are memoized per
//! input and retried with exponential backoff when the server is
//! unreachable; sampling calls are never retried, since a silent retry would
//! change the sample stream.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use deduce_core::{BackendError, EntailmentBackend, Goal, PairScoreBackend, Statement, StepBackend};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub inputs: [String; 2],
    pub top_p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepResponse {
    pub conclusion: String,
    pub repeat_logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailResponse {
    pub prob_entail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairScoreRequest {
    pub inputs: [String; 2],
    /// Serialized as `null` when absent; the field itself is always present.
    pub goal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairScoreResponse {
    pub score: f64,
}

impl StepResponse {
    fn check(self) -> Result<Self, BackendError> {
        if !self.repeat_logprob.is_finite() || self.repeat_logprob > 0.0 {
            return Err(BackendError::Protocol(format!("repeat_logprob {} is not a finite value ≤ 0", self.repeat_logprob)));
        }
        Ok(self)
    }
}

/// Counting semaphore bounding requests in flight.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct RemoteOptions {
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(120), retries: 2, backoff: Duration::from_millis(200), max_in_flight: 8 }
    }
}

type PairKey = (String, String);
type PairScoreKey = (String, String, Option<String>);

pub struct RemoteBackend {
    base: String,
    agent: ureq::Agent,
    options: RemoteOptions,
    slots: Slots,
    repeat_memo: Mutex<HashMap<PairKey, f64>>,
    entail_memo: Mutex<HashMap<PairKey, f64>>,
    pair_memo: Mutex<HashMap<PairScoreKey, f64>>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("base", &self.base).field("options", &self.options).finish()
    }
}

fn memo_get<K: std::hash::Hash + Eq>(memo: &Mutex<HashMap<K, f64>>, key: &K) -> Option<f64> {
    memo.lock().unwrap().get(key).copied()
}

impl RemoteBackend {
    pub fn new(base_url: &str, options: RemoteOptions) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            slots: Slots::new(options.max_in_flight),
            options,
            repeat_memo: Mutex::default(),
            entail_memo: Mutex::default(),
            pair_memo: Mutex::default(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn post_once<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, BackendError> {
        let payload = serde_json::to_string(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let url = format!("{}{path}", self.base);
        let _slot = self.slots.acquire();
        let mut resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(payload.as_str())
            .map_err(|e| BackendError::Unavailable(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Unavailable(format!("POST {url}: reading body: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| BackendError::Protocol(format!("POST {url}: {e}: {text}"))),
            500..=599 => Err(BackendError::Unavailable(format!("POST {url}: HTTP {status}: {text}"))),
            _ => Err(BackendError::Protocol(format!("POST {url}: HTTP {status}: {text}"))),
        }
    }

    /// Idempotent scoring call: retried only while the server is unavailable.
    fn post_retrying<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, BackendError> {
        let mut attempt = 0;
        loop {
            match self.post_once(path, body) {
                Err(BackendError::Unavailable(msg)) if attempt < self.options.retries => {
                    let wait = self.options.backoff * 2u32.pow(attempt);
                    log::warn!("{msg}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn step(&self, x1: &str, x2: &str, top_p: f64, seed: u64, retry: bool) -> Result<StepResponse, BackendError> {
        let req = StepRequest { inputs: [x1.to_string(), x2.to_string()], top_p, seed };
        let resp: StepResponse = if retry { self.post_retrying("/step", &req)? } else { self.post_once("/step", &req)? };
        let resp = resp.check()?;
        self.repeat_memo.lock().unwrap().insert((x1.to_string(), x2.to_string()), resp.repeat_logprob);
        Ok(resp)
    }
}

/// Nucleus mass and seed used when `/step` is called only for its likelihood.
const SCORING_TOP_P: f64 = 0.9;
const SCORING_SEED: u64 = 0;

impl StepBackend for RemoteBackend {
    fn sample_conclusion(&self, x1: &Statement, x2: &Statement, top_p: f64, seed: u64) -> Result<String, BackendError> {
        Ok(self.step(&x1.text, &x2.text, top_p, seed, false)?.conclusion)
    }

    fn repeat_logprob(&self, x1: &Statement, x2: &Statement) -> Result<f64, BackendError> {
        let key = (x1.text.clone(), x2.text.clone());
        if let Some(v) = memo_get(&self.repeat_memo, &key) {
            return Ok(v);
        }
        Ok(self.step(&x1.text, &x2.text, SCORING_TOP_P, SCORING_SEED, true)?.repeat_logprob)
    }
}

impl EntailmentBackend for RemoteBackend {
    fn entail_prob(&self, premise: &Statement, hypothesis: &str) -> Result<f64, BackendError> {
        let key = (premise.text.clone(), hypothesis.to_string());
        if let Some(v) = memo_get(&self.entail_memo, &key) {
            return Ok(v);
        }
        let req = EntailRequest { premise: key.0.clone(), hypothesis: key.1.clone() };
        let resp: EntailResponse = self.post_retrying("/entail", &req)?;
        let p = resp.prob_entail;
        if !(0.0..=1.0).contains(&p) {
            return Err(BackendError::Protocol(format!("prob_entail {p} outside [0, 1]")));
        }
        self.entail_memo.lock().unwrap().insert(key, p);
        Ok(p)
    }
}

impl PairScoreBackend for RemoteBackend {
    fn pair_score(&self, x1: &Statement, x2: &Statement, goal: Option<&Goal>) -> Result<f64, BackendError> {
        let key = (x1.text.clone(), x2.text.clone(), goal.map(|g| g.as_str().to_string()));
        if let Some(v) = memo_get(&self.pair_memo, &key) {
            return Ok(v);
        }
        let req = PairScoreRequest { inputs: [key.0.clone(), key.1.clone()], goal: key.2.clone() };
        let resp: PairScoreResponse = self.post_retrying("/pair_score", &req)?;
        if !resp.score.is_finite() {
            return Err(BackendError::Protocol(format!("non-finite pair score {}", resp.score)));
        }
        self.pair_memo.lock().unwrap().insert(key, resp.score);
        Ok(resp.score)
    }
}
