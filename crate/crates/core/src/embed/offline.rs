//! Deterministic bag-of-words embedder.
//!
//! Each distinct word maps to a fixed pseudo-random unit vector seeded by a
//! hash of the word; a text embeds as the normalized sum over its word set.
//! Texts that share vocabulary end up close in cosine distance while
//! disjoint vocabularies are nearly orthogonal.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider};

pub const MIN_DIMENSION: usize = 8;

/// Lowercased alphanumeric words of `text`, deduplicated and sorted.
pub fn word_set(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn word_seed(word: &str) -> u64 {
    let digest = Sha256::digest(word.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

/// Fixed unit vector for a single word.
pub fn word_vector(word: &str, dimension: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(word_seed(word));
    let mut v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

pub fn offline_embed(text: &str, dimension: usize) -> Result<Vec<f64>, EmbedError> {
    if dimension < MIN_DIMENSION {
        return Err(EmbedError::Config(format!(
            "offline embedding dimension must be at least {MIN_DIMENSION}, got {dimension}"
        )));
    }
    let words = word_set(text);
    if words.is_empty() {
        return Err(EmbedError::BlankText { index: 0 });
    }
    let mut sum = vec![0.0; dimension];
    for w in &words {
        for (s, x) in sum.iter_mut().zip(word_vector(w, dimension)) {
            *s += x;
        }
    }
    let n = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        // Only reachable if word vectors cancel exactly.
        return Err(EmbedError::Integrity("offline embedding collapsed to zero".into()));
    }
    sum.iter_mut().for_each(|x| *x /= n);
    Ok(sum)
}

#[derive(Debug, Clone)]
pub struct OfflineProvider {
    model: String,
    dimension: usize,
}

impl OfflineProvider {
    pub fn new(model: impl Into<String>, dimension: usize) -> Result<Self, EmbedError> {
        if dimension < MIN_DIMENSION {
            return Err(EmbedError::Config(format!(
                "offline embedding dimension must be at least {MIN_DIMENSION}, got {dimension}"
            )));
        }
        Ok(Self {
            model: model.into(),
            dimension,
        })
    }
}

impl EmbeddingProvider for OfflineProvider {
    fn name(&self) -> &str {
        "offline"
    }

    fn model_id(&self) -> String {
        format!("{}@{}", self.model, self.dimension)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                offline_embed(t, self.dimension).map_err(|e| match e {
                    EmbedError::BlankText { .. } => EmbedError::BlankText { index: i },
                    other => other,
                })
            })
            .collect()
    }
}
