//! Embedding providers.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

use super::ImageBlock;
use crate::remote::{self, ProviderError};

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

pub trait ImageEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_image(&self, image: &ImageBlock) -> Result<Vec<f64>, ProviderError>;
}

/// Character-trigram feature hashing, L2-normalized. Deterministic and
/// dependency-free, so similarity tests are reproducible.
#[derive(Clone, Copy, Debug)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(crate::kgstore::DEFAULT_DIM)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = vec![0.0; self.dim];
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if normalized.is_empty() {
            return Ok(v);
        }
        let chars: Vec<char> = format!(" {normalized} ").chars().collect();
        let mut buf = [0u8; 12];
        for gram in chars.windows(3) {
            let mut len = 0;
            for c in gram {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let slot = (fnv1a(&buf[..len]) % self.dim as u64) as usize;
            v[slot] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Embeds an image through its caption with a text embedder. Stands in for
/// a vision encoder where none is configured.
pub struct CaptionImageEmbedder {
    text: Arc<dyn Embedder>,
}

impl CaptionImageEmbedder {
    pub fn new(text: Arc<dyn Embedder>) -> Self {
        CaptionImageEmbedder { text }
    }
}

impl ImageEmbedder for CaptionImageEmbedder {
    fn dim(&self) -> usize {
        self.text.dim()
    }

    fn embed_image(&self, image: &ImageBlock) -> Result<Vec<f64>, ProviderError> {
        self.text.embed(&format!("{} {}", image.caption, image.path))
    }
}

/// Looks image vectors up by path, as precomputed by an external encoder.
#[derive(Clone, Debug, Default)]
pub struct FixtureImageEmbedder {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FixtureImageEmbedder {
    pub fn new(dim: usize) -> Self {
        FixtureImageEmbedder {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, path: &str, vector: Vec<f64>) {
        self.vectors.insert(path.to_string(), vector);
    }

    /// Reads a JSON object mapping image path to vector.
    pub fn load(path: &Path, dim: usize) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        let vectors = serde_json::from_str(&text).map_err(|e| ProviderError::Fixture(e.to_string()))?;
        Ok(FixtureImageEmbedder { dim, vectors })
    }
}

impl ImageEmbedder for FixtureImageEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &ImageBlock) -> Result<Vec<f64>, ProviderError> {
        self.vectors
            .get(&image.path)
            .cloned()
            .ok_or_else(|| ProviderError::Fixture(format!("no vector for image `{}`", image.path)))
    }
}

/// Embeddings endpoint speaking the common `{model, input}` ->
/// `{data: [{embedding: [...]}]}` shape.
pub struct RemoteEmbedder {
    pub endpoint: String,
    pub model: String,
    pub token: Option<String>,
    pub dim: usize,
    pub timeout: Duration,
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let body = json!({ "model": self.model, "input": text });
        let resp = remote::post_json(&self.endpoint, self.token.as_deref(), &body, self.timeout)?;
        let vector: Vec<f64> = resp["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::Malformed("missing data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| ProviderError::Malformed("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if vector.len() != self.dim {
            return Err(ProviderError::Malformed(format!(
                "expected {} dimensions, got {}",
                self.dim,
                vector.len()
            )));
        }
        Ok(vector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgstore::cosine;

    #[test]
    fn hashing_embedder_is_normalized_and_deterministic() {
        let e = HashingEmbedder::new(64);
        let a = e.embed("Heat Exchanger").unwrap();
        let b = e.embed("heat   exchanger").unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(e.embed("   ").unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn similar_strings_score_higher() {
        let e = HashingEmbedder::new(64);
        let q = e.embed("carbon dioxide").unwrap();
        let near = e.embed("carbon dioxide gas").unwrap();
        let far = e.embed("zebra").unwrap();
        assert!(cosine(&q, &near) > cosine(&q, &far));
    }
}
