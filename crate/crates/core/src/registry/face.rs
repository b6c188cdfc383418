//! Face retrieval: byte-histogram embeddings and a cosine-similarity index.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::backend::Embedder;
use super::RegistryError;

pub const EMBEDDING_DIM: usize = 256;

/// Unit-norm, non-negative 256-component feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// L2-normalises a 256-component, non-negative, not-all-zero vector.
    pub fn new(components: Vec<f64>) -> Result<Self, RegistryError> {
        if components.len() != EMBEDDING_DIM {
            return Err(RegistryError::InvalidEmbedding(format!(
                "expected {EMBEDDING_DIM} components, got {}",
                components.len()
            )));
        }
        if components.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RegistryError::InvalidEmbedding(
                "components must be finite and non-negative".into(),
            ));
        }
        let norm = components.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(RegistryError::InvalidEmbedding("zero vector".into()));
        }
        Ok(Self(components.into_iter().map(|v| v / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cosine similarity. Both operands are unit vectors, so this is the dot
    /// product, clamped against rounding.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0)
    }
}

/// 256-bin histogram of raw byte values, L2-normalised.
pub fn embed(image: &[u8]) -> Result<Embedding, RegistryError> {
    if image.is_empty() {
        return Err(RegistryError::EmptyInput);
    }
    let mut counts = [0u64; EMBEDDING_DIM];
    for &b in image {
        counts[b as usize] += 1;
    }
    let norm = counts
        .iter()
        .map(|&c| (c as f64) * (c as f64))
        .sum::<f64>()
        .sqrt();
    Ok(Embedding(counts.iter().map(|&c| c as f64 / norm).collect()))
}

/// [`Embedder`] backed by [`embed`]. The trait is infallible, so empty input
/// maps to the first basis vector; the registry rejects empty input first.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistogramEmbedder;

impl Embedder for HistogramEmbedder {
    fn embed(&self, input: &[u8]) -> Embedding {
        embed(input).unwrap_or_else(|_| {
            let mut v = vec![0.0; EMBEDDING_DIM];
            v[0] = 1.0;
            Embedding(v)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceMatch {
    pub person_id: String,
    pub similarity: f64,
}

/// Gallery of enrolled embeddings; single writer, many readers.
#[derive(Clone)]
pub struct FaceIndex {
    embedder: Arc<dyn Embedder>,
    gallery: Arc<RwLock<HashMap<String, Embedding>>>,
}

impl Default for FaceIndex {
    fn default() -> Self {
        Self::new(Arc::new(HistogramEmbedder))
    }
}

impl FaceIndex {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            embedder,
            gallery: Arc::default(),
        }
    }

    /// Stores (or replaces) the embedding for `person_id`.
    pub fn enroll(&self, person_id: &str, image: &[u8]) -> Result<(), RegistryError> {
        if person_id.is_empty() || image.is_empty() {
            return Err(RegistryError::EmptyInput);
        }
        let embedding = self.embedder.embed(image);
        self.gallery.write().insert(person_id.to_string(), embedding);
        Ok(())
    }

    pub fn remove(&self, person_id: &str) -> bool {
        self.gallery.write().remove(person_id).is_some()
    }

    pub fn len(&self) -> usize {
        self.gallery.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.gallery.read().is_empty()
    }

    pub fn embedding_of(&self, person_id: &str) -> Option<Embedding> {
        self.gallery.read().get(person_id).cloned()
    }

    /// Top `k` enrolled identities by cosine similarity, descending, ties by
    /// person id. `k` larger than the gallery returns every entry.
    pub fn search(&self, image: &[u8], k: usize) -> Result<Vec<FaceMatch>, RegistryError> {
        if image.is_empty() {
            return Err(RegistryError::EmptyInput);
        }
        if k == 0 {
            return Err(RegistryError::InvalidTopK { k, available: self.len() });
        }
        let query = self.embedder.embed(image);
        let gallery = self.gallery.read();
        if gallery.is_empty() {
            return Err(RegistryError::EmptyIndex);
        }
        let mut matches: Vec<FaceMatch> = gallery
            .iter()
            .map(|(id, e)| FaceMatch {
                person_id: id.clone(),
                similarity: query.cosine(e),
            })
            .collect();
        drop(gallery);
        matches.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.person_id.cmp(&b.person_id))
        });
        matches.truncate(k);
        Ok(matches)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bin_histogram() {
        let e = embed(&[0u8; 100]).unwrap();
        assert_eq!(e.as_slice()[0], 1.0);
        assert!(e.as_slice()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_bins() {
        let e = embed(&[0x00, 0x01]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((e.as_slice()[0] - h).abs() < 1e-15);
        assert!((e.as_slice()[1] - h).abs() < 1e-15);
        assert!(e.as_slice()[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let img: Vec<u8> = (0..5000u32).map(|i| (i * 7919 % 251) as u8).collect();
        let a = embed(&img).unwrap();
        assert_eq!(a, embed(&img).unwrap());
        let norm: f64 = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(a.as_slice().iter().all(|&v| v >= 0.0));
        assert_eq!(embed(&[]), Err(RegistryError::EmptyInput));
    }

    #[test]
    fn enroll_search_replace() {
        let index = FaceIndex::default();
        assert_eq!(index.search(b"x", 1), Err(RegistryError::EmptyIndex));
        index.enroll("P1", b"aaaa").unwrap();
        let hits = index.search(b"aaaa", 1).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].person_id, "P1");
        assert!((hits[0].similarity - 1.0).abs() < 1e-12);

        index.enroll("P1", b"bbbb").unwrap();
        assert_eq!(index.len(), 1);
        assert!(index.search(b"aaaa", 1).unwrap()[0].similarity.abs() < 1e-12);
        assert_eq!(index.enroll("", b"x"), Err(RegistryError::EmptyInput));
    }

    #[test]
    fn oversized_k_and_ties() {
        let index = FaceIndex::default();
        index.enroll("b", b"same").unwrap();
        index.enroll("a", b"same").unwrap();
        index.enroll("c", b"zzzz").unwrap();
        let hits = index.search(b"same", 10).unwrap();
        let ids: Vec<&str> = hits.iter().map(|m| m.person_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }
}
