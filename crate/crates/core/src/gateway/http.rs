//! Client side of the inference sidecar protocol.
//!
//! | endpoint            | request                              | response |
//! |---------------------|--------------------------------------|----------|
//! | `POST /v1/embed`    | `{texts}`                            | `{vectors, model, truncated}` |
//! | `POST /v1/nli`      | `{pairs: [{premise, hypothesis}]}`   | `{judgments: [{contradicts, neutral, entails}], model}` |
//! | `POST /v1/fill_mask`| `{prompt, k}`                        | `{candidates: [{token, score}]}` |
//! | `GET /v1/health`    |                                      | `{status, models, versions}` |
//!
//! Large inputs are split into batches. A batch is retried with exponential
//! backoff on transport errors and 5xx answers; if any batch of a call fails
//! the whole call fails.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    check_mask, normalize, top_k, Candidate, Embedding, FillMaskProvider, GatewayError, NliPair, NliProvider,
    RelationJudgment, SimilarityProvider,
};

pub const SIDECAR_URL_ENV: &str = "TAXOMETER_SIDECAR_URL";
pub const DEFAULT_SIDECAR_URL: &str = "http://127.0.0.1:8765";

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Embedding>,
    #[serde(default)]
    truncated: usize,
}

#[derive(Debug, Serialize)]
struct NliRequest<'a> {
    pairs: &'a [NliPair],
}

#[derive(Debug, Deserialize)]
struct NliResponse {
    judgments: Vec<RelationJudgment>,
}

#[derive(Debug, Serialize)]
struct FillMaskRequest<'a> {
    prompt: &'a str,
    k: usize,
}

#[derive(Debug, Deserialize)]
struct FillMaskResponse {
    candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub models: serde_json::Value,
    #[serde(default)]
    pub versions: serde_json::Value,
}

struct Permits {
    free: Mutex<usize>,
    released: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard { permits: self }
    }
}

struct PermitGuard<'a> {
    permits: &'a Permits,
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.permits.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.permits.released.notify_one();
    }
}

pub struct SidecarClient {
    base: String,
    client: reqwest::blocking::Client,
    retries: u32,
    backoff: Duration,
    embed_batch: usize,
    nli_batch: usize,
    permits: Permits,
    health: OnceLock<Health>,
    truncated: AtomicUsize,
}

impl SidecarClient {
    pub fn new(base: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .expect("http client builds");
        SidecarClient {
            base: base.into().trim_end_matches('/').to_string(),
            client,
            retries: 3,
            backoff: Duration::from_millis(200),
            embed_batch: 64,
            nli_batch: 32,
            permits: Permits {
                free: Mutex::new(4),
                released: Condvar::new(),
            },
            health: OnceLock::new(),
            truncated: AtomicUsize::new(0),
        }
    }

    /// Uses `TAXOMETER_SIDECAR_URL`, falling back to a local default.
    pub fn from_env() -> Self {
        SidecarClient::new(std::env::var(SIDECAR_URL_ENV).unwrap_or_else(|_| DEFAULT_SIDECAR_URL.to_string()))
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn with_batch_sizes(mut self, embed: usize, nli: usize) -> Self {
        self.embed_batch = embed.max(1);
        self.nli_batch = nli.max(1);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.permits = Permits {
            free: Mutex::new(n.max(1)),
            released: Condvar::new(),
        };
        self
    }

    /// Texts the sidecar reported as truncated to the model's input length.
    pub fn truncated(&self) -> usize {
        self.truncated.load(Ordering::Relaxed)
    }

    pub fn health(&self) -> Result<Health, GatewayError> {
        if let Some(h) = self.health.get() {
            return Ok(h.clone());
        }
        let url = format!("{}/v1/health", self.base);
        let response = self
            .client
            .get(&url)
            .send()
            .map_err(|e| GatewayError::BackendUnavailable(format!("{url}: {e}")))?;
        let health: Health = response
            .json()
            .map_err(|e| GatewayError::MalformedResponse(format!("{url}: {e}")))?;
        if health.status == "ok" || health.status == "ready" {
            let _ = self.health.set(health.clone());
        }
        Ok(health)
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, GatewayError> {
        let url = format!("{}{path}", self.base);
        let _permit = self.permits.acquire();
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            let response = match self.client.post(&url).json(body).send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    tracing::debug!(%url, attempt, error = %e, "sidecar request failed");
                    continue;
                }
            };
            let status = response.status();
            if status.is_server_error() {
                last = format!("status {status}");
                continue;
            }
            if !status.is_success() {
                let text = response.text().unwrap_or_default();
                return Err(GatewayError::BackendUnavailable(format!(
                    "{url} rejected request ({status}): {text}"
                )));
            }
            return response
                .json()
                .map_err(|e| GatewayError::MalformedResponse(format!("{url}: {e}")));
        }
        Err(GatewayError::BackendUnavailable(format!(
            "{url}: giving up after {} attempts: {last}",
            self.retries + 1
        )))
    }
}

impl SimilarityProvider for SidecarClient {
    fn fingerprint(&self) -> String {
        match self.health() {
            Ok(h) => format!("http:{}:{}:{}", self.base, h.models, h.versions),
            Err(_) => format!("http:{}", self.base),
        }
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.embed_batch) {
            let response: EmbedResponse = self.post("/v1/embed", &EmbedRequest { texts: chunk })?;
            if response.vectors.len() != chunk.len() {
                return Err(GatewayError::MalformedResponse(format!(
                    "{} vectors for {} texts",
                    response.vectors.len(),
                    chunk.len()
                )));
            }
            if let Some(dim) = out.first().map(Vec::len).or(response.vectors.first().map(Vec::len)) {
                if response.vectors.iter().any(|v| v.len() != dim) {
                    return Err(GatewayError::MalformedResponse("ragged embedding dimensions".into()));
                }
            }
            if response.truncated > 0 {
                self.truncated.fetch_add(response.truncated, Ordering::Relaxed);
                tracing::info!(count = response.truncated, "sidecar truncated texts");
            }
            for mut v in response.vectors {
                normalize(&mut v);
                out.push(v);
            }
        }
        Ok(out)
    }
}

impl NliProvider for SidecarClient {
    fn fingerprint(&self) -> String {
        SimilarityProvider::fingerprint(self)
    }

    fn judge(&self, pairs: &[NliPair]) -> Result<Vec<RelationJudgment>, GatewayError> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.nli_batch) {
            let response: NliResponse = self.post("/v1/nli", &NliRequest { pairs: chunk })?;
            if response.judgments.len() != chunk.len() {
                return Err(GatewayError::MalformedResponse(format!(
                    "{} judgments for {} pairs",
                    response.judgments.len(),
                    chunk.len()
                )));
            }
            if let Some(bad) = response.judgments.iter().find(|j| !j.is_valid()) {
                return Err(GatewayError::MalformedResponse(format!("invalid judgment {bad:?}")));
            }
            out.extend(response.judgments);
        }
        Ok(out)
    }
}

impl FillMaskProvider for SidecarClient {
    fn fingerprint(&self) -> String {
        SimilarityProvider::fingerprint(self)
    }

    fn fill_mask(&self, prompt: &str, k: usize) -> Result<Vec<Candidate>, GatewayError> {
        check_mask(prompt)?;
        let response: FillMaskResponse = self.post("/v1/fill_mask", &FillMaskRequest { prompt, k })?;
        Ok(top_k(response.candidates, k))
    }
}
