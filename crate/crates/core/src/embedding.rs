//! Text embeddings and cosine similarity.
//!
//! Two embedders stand behind one trait: an HTTP client for an external
//! embeddings endpoint, and a pure deterministic embedder that feature-hashes
//! token counts into a fixed 64-dim vector for offline runs and tests.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of the deterministic test embedder.
pub const HASHED_DIM: usize = 64;

/// A unit-normalized embedding. Construction rejects zero vectors, so
/// every value carries `‖v‖₂ = 1` within 1e-6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalize `values` to unit length. Zero vectors are rejected:
    /// cosine is undefined for them.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return Err(Error::ZeroVector);
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Re-check the unit-norm invariant, used when loading persisted vectors.
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::ZeroVector);
        }
        if (self.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::Embedding(format!(
                "stored vector has norm {}, expected 1",
                self.norm()
            )));
        }
        Ok(())
    }
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1] against
/// floating-point drift.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dimension() != v.dimension() {
        return Err(Error::DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Text-to-vector embedding. All vectors from one embedder share a
/// dimension; implementations must be safe for concurrent use.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
    fn kind(&self) -> &str;
}

/// Deterministic offline embedder: lowercased alphanumeric tokens are
/// counted into `HASHED_DIM` buckets by FNV-1a hash, then L2-normalized.
///
/// Same text always maps to the same vector. Texts whose token sets land
/// in disjoint buckets have cosine exactly 0; the documented bound for
/// disjoint-token texts is <= 0.1 (bucket collisions are possible but
/// rare at this vocabulary scale).
#[derive(Debug, Default, Clone, Copy)]
pub struct HashedEmbedder;

impl HashedEmbedder {
    pub fn new() -> Self {
        HashedEmbedder
    }

    fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for HashedEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let mut buckets = vec![0.0f64; HASHED_DIM];
        let mut any = false;
        for token in Self::tokens(text) {
            any = true;
            let bucket = (fnv1a(token.as_bytes()) % HASHED_DIM as u64) as usize;
            buckets[bucket] += 1.0;
        }
        if !any {
            return Err(Error::EmptyText);
        }
        EmbeddingVector::new(buckets)
    }

    fn kind(&self) -> &str {
        "deterministic-test"
    }
}

/// Fixture embedder mapping exact texts to caller-chosen vectors. Lets
/// tests pin precise similarity structure.
pub struct FixedEmbedder {
    table: HashMap<String, EmbeddingVector>,
}

impl FixedEmbedder {
    pub fn new(entries: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        let mut table = HashMap::new();
        for (text, values) in entries {
            table.insert(text.to_string(), EmbeddingVector::new(values)?);
        }
        Ok(FixedEmbedder { table })
    }
}

impl Embedder for FixedEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| Error::Embedding(format!("no fixture vector for {text:?}")))
    }

    fn kind(&self) -> &str {
        "fixed"
    }
}

/// Per-run memo over an inner embedder. Texts are embedded once; repeats
/// are served from memory.
pub struct MemoEmbedder {
    inner: Arc<dyn Embedder>,
    memo: Mutex<HashMap<String, EmbeddingVector>>,
}

impl MemoEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> Self {
        MemoEmbedder {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl Embedder for MemoEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if let Some(hit) = self.memo.lock().unwrap().get(text) {
            return Ok(hit.clone());
        }
        let vector = self.inner.embed(text)?;
        self.memo
            .lock()
            .unwrap()
            .insert(text.to_string(), vector.clone());
        Ok(vector)
    }

    fn kind(&self) -> &str {
        self.inner.kind()
    }
}

/// Client for an embeddings HTTP endpoint (`POST {base}/embeddings`). The
/// dimension is taken from the first response and enforced afterwards to
/// catch backend misconfiguration early.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    base_url: String,
    model: String,
    api_key_env: String,
    dimension: Mutex<Option<usize>>,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Embedding(format!("http client: {e}")))?;
        Ok(HttpEmbedder {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            dimension: Mutex::new(None),
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingsReply {
    data: Vec<EmbeddingRow>,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| Error::Embedding(format!("{} is not set", self.api_key_env)))?;
        let url = format!("{}/embeddings", self.base_url);
        let reply: EmbeddingsReply = self
            .client
            .post(&url)
            .bearer_auth(key)
            .json(&serde_json::json!({"model": self.model, "input": [text]}))
            .send()
            .map_err(|e| Error::Embedding(format!("{url}: {e}")))?
            .error_for_status()
            .map_err(|e| Error::Embedding(format!("{url}: {e}")))?
            .json()
            .map_err(|e| Error::Embedding(format!("{url}: bad reply: {e}")))?;
        let row = reply
            .data
            .into_iter()
            .next()
            .ok_or_else(|| Error::Embedding(format!("{url}: empty data")))?;
        let vector = EmbeddingVector::new(row.embedding)?;
        let mut dim = self.dimension.lock().unwrap();
        match *dim {
            None => *dim = Some(vector.dimension()),
            Some(expected) if expected != vector.dimension() => {
                return Err(Error::DimensionMismatch {
                    left: expected,
                    right: vector.dimension(),
                })
            }
            _ => {}
        }
        Ok(vector)
    }

    fn kind(&self) -> &str {
        "external-service"
    }
}
