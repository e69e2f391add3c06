//! Text embeddings and cosine similarity for skeleton retrieval.
//!
//! The encoder is a pluggable interface: the default [`HashEmbedder`] hashes
//! character trigrams into a fixed number of buckets, which is deterministic
//! and needs no network or model weights. A semantic encoder served over
//! HTTP can be dropped in behind the same trait.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("embedding contains a non-finite component")]
    NonFinite,
    #[error("encoder error: {0}")]
    Encoder(String),
}

/// Fixed-dimension real vector produced by an encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Cosine similarity between two embeddings, in [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.values.iter().zip(&b.values) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Maps text to a fixed-dimension vector. Implementations must be
/// deterministic for a given input so repositories are reproducible.
pub trait Embedder: Send + Sync {
    /// Stable identifier written into repository file headers.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

/// Feature-hashing embedder over character trigrams, L2-normalized.
///
/// Text is lowercased and runs of whitespace collapse to one space before
/// hashing, so trivial formatting differences do not move the vector.
pub struct HashEmbedder {
    dim: usize,
    id: String,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        HashEmbedder {
            dim,
            id: format!("hash-trigram-{dim}"),
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(256)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let normalized: String = text
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        let chars: Vec<char> = normalized.chars().collect();
        let mut acc = vec![0.0f32; self.dim];

        let mut bump = |gram: &str| {
            let h = fnv1a(gram.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        };

        if chars.len() < 3 {
            if !chars.is_empty() {
                bump(&normalized);
            }
        } else {
            for w in chars.windows(3) {
                bump(&w.iter().collect::<String>());
            }
        }

        let norm: f64 = acc.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Empty or fully cancelling input: fall back to a fixed basis
            // vector so downstream cosine scores stay defined.
            acc[0] = 1.0;
        } else {
            for v in &mut acc {
                *v = (*v as f64 / norm) as f32;
            }
        }
        EmbeddingVector::new(acc)
    }
}
