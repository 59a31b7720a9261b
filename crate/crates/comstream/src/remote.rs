//! Client for an HTTP embedding service.
//!
//! Protocol: `POST /embed` with `{"texts": [...]}` answers
//! `{"dim": D, "vectors": [[...], ...]}`, one unit vector per text in request
//! order. `GET /healthz` answers 200 once the model is ready.

use std::thread;
use std::time::Duration;

use comstream_core::embedding::{l2_norm, EmbedError, Embedder, EmbeddingVector};
use comstream_core::preprocess::{strip_urls, TokenList};
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

pub const BATCH_SIZE: usize = 32;
pub const RETRIES: u32 = 3;

/// Server-side normalization is trusted up to this tolerance.
const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    base: String,
    client: Client,
    dim: usize,
    backoff: Duration,
}

impl RemoteEmbedder {
    /// Checks `/healthz` and learns the vector dimension from a probe
    /// request.
    pub fn connect(url: &str) -> Result<Self, EmbedError> {
        Self::connect_with(url, Duration::from_secs(30), Duration::from_millis(200))
    }

    pub fn connect_with(url: &str, timeout: Duration, backoff: Duration) -> Result<Self, EmbedError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        let mut embedder = RemoteEmbedder {
            base: url.trim_end_matches('/').to_string(),
            client,
            dim: 0,
            backoff,
        };
        embedder.healthz()?;
        let probe = embedder.request(&[String::from("probe")])?;
        embedder.dim = probe[0].len();
        if embedder.dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        Ok(embedder)
    }

    pub fn healthz(&self) -> Result<(), EmbedError> {
        let response = self
            .client
            .get(format!("{}/healthz", self.base))
            .send()
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        if response.status().is_success() {
            Ok(())
        } else {
            Err(EmbedError::Unavailable(format!(
                "healthz returned {}",
                response.status()
            )))
        }
    }

    fn request_once(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let response = self
            .client
            .post(format!("{}/embed", self.base))
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(EmbedError::Unavailable(format!("server returned {status}")));
        }
        if !status.is_success() {
            return Err(EmbedError::Malformed(format!("server returned {status}")));
        }
        let body: EmbedResponse = response.json().map_err(|e| EmbedError::Malformed(e.to_string()))?;
        self.validate(texts.len(), body)
    }

    fn validate(&self, expected: usize, body: EmbedResponse) -> Result<Vec<Vec<f64>>, EmbedError> {
        if body.vectors.len() != expected {
            return Err(EmbedError::Malformed(format!(
                "{} vectors for {} texts",
                body.vectors.len(),
                expected
            )));
        }
        if self.dim != 0 && body.dim != self.dim {
            return Err(EmbedError::Malformed(format!(
                "dimension changed from {} to {}",
                self.dim, body.dim
            )));
        }
        for v in &body.vectors {
            if v.len() != body.dim {
                return Err(EmbedError::Malformed(format!(
                    "vector of length {} but dim is {}",
                    v.len(),
                    body.dim
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::Malformed("non-finite vector entry".into()));
            }
            let norm = l2_norm(v);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(EmbedError::Malformed(format!("vector norm {norm} is not 1")));
            }
        }
        Ok(body.vectors)
    }

    /// One request with up to [`RETRIES`] retries on transient failures,
    /// doubling the pause each time.
    fn request(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut pause = self.backoff;
        let mut attempt = 0;
        loop {
            match self.request_once(texts) {
                Err(e) if e.is_retriable() && attempt < RETRIES => {
                    log::warn!("embedding request failed ({e}); retrying in {pause:?}");
                    thread::sleep(pause);
                    pause *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenList, raw_text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.embed_batch(&[(tokens, raw_text)]).map(|mut v| v.remove(0))
    }

    /// Texts whose token list is empty get the empty vector without a
    /// request; the rest go out in batches of [`BATCH_SIZE`].
    fn embed_batch(&self, items: &[(&TokenList, &str)]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out: Vec<EmbeddingVector> = items.iter().map(|_| EmbeddingVector::empty(self.dim)).collect();
        let pending: Vec<(usize, String)> = items
            .iter()
            .enumerate()
            .filter(|(_, (tokens, _))| !tokens.is_empty())
            .map(|(i, (_, text))| (i, strip_urls(text)))
            .collect();
        for chunk in pending.chunks(BATCH_SIZE) {
            let texts: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
            let vectors = self.request(&texts)?;
            for ((index, _), values) in chunk.iter().zip(vectors) {
                out[*index] = EmbeddingVector::normalized(values);
            }
        }
        Ok(out)
    }
}
