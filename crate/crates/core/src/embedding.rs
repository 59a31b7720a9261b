//! Sentence vectors, cosine similarity, centroids and the embedding
//! provider abstraction.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::preprocess::TokenList;

/// Means with an L2 norm below this are treated as degenerate (no direction).
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operand is the empty-text vector")]
    EmptyOperand,
    #[error("centroid of an empty list")]
    NoVectors,
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    /// Transient backend failure (unreachable, timeout, 5xx). Safe to retry.
    #[error("embedding backend unavailable: {0}")]
    Unavailable(String),
    /// Backend answered with something that violates the protocol.
    #[error("malformed embedding reply: {0}")]
    Malformed(String),
}

impl EmbedError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, EmbedError::Unavailable(_))
    }
}

/// A unit-norm vector, or the all-zeros vector flagged as empty.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    empty: bool,
}

impl EmbeddingVector {
    /// The empty-text vector of the given dimension.
    pub fn empty(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dim],
            empty: true,
        }
    }

    /// Normalizes `values`; returns the empty vector when there is no
    /// direction to normalize.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = l2_norm(&values);
        if !norm.is_finite() || norm < DEGENERATE_NORM {
            return Self::empty(values.len());
        }
        for v in &mut values {
            *v /= norm;
        }
        EmbeddingVector { values, empty: false }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(EmbedError::EmptyOperand);
    }
    let denom = l2_norm(&a.values) * l2_norm(&b.values);
    Ok((dot(&a.values, &b.values) / denom).clamp(-1.0, 1.0))
}

/// `1 - cosine`, in `[0, 2]`.
pub fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    cosine(a, b).map(|c| 1.0 - c)
}

/// Direction of `sum / count`, or the empty vector when that mean is
/// (numerically) zero.
pub fn centroid_from_sum(sum: &[f64], count: usize) -> EmbeddingVector {
    if count == 0 {
        return EmbeddingVector::empty(sum.len());
    }
    let n = count as f64;
    EmbeddingVector::normalized(sum.iter().map(|s| s / n).collect())
}

/// Normalized component-wise mean.
pub fn centroid_of<'a, I>(vectors: I) -> Result<EmbeddingVector, EmbedError>
where
    I: IntoIterator<Item = &'a EmbeddingVector>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next().ok_or(EmbedError::NoVectors)?;
    if first.is_empty() {
        return Err(EmbedError::EmptyOperand);
    }
    let mut sum = first.values.clone();
    let mut count = 1;
    for v in iter {
        if v.dim() != sum.len() {
            return Err(EmbedError::DimensionMismatch {
                left: sum.len(),
                right: v.dim(),
            });
        }
        if v.is_empty() {
            return Err(EmbedError::EmptyOperand);
        }
        for (s, x) in sum.iter_mut().zip(&v.values) {
            *s += x;
        }
        count += 1;
    }
    Ok(centroid_from_sum(&sum, count))
}

/// Something that turns a document into a vector.
///
/// Implementations receive both the token list and the raw text and use
/// whichever they need. An empty token list always yields the empty vector.
pub trait Embedder {
    fn dim(&self) -> usize;

    fn embed(&self, tokens: &TokenList, raw_text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, items: &[(&TokenList, &str)]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        items.iter().map(|(tokens, text)| self.embed(tokens, text)).collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Feature-hashing embedder.
///
/// Each token contributes `±1` at index `fnv1a64(token) mod dim`, with the
/// sign taken from bit 63 of the hash (set means negative). The sum is then
/// L2-normalized. The output depends only on the token multiset and is
/// identical on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        Ok(HashedEmbedder { dim })
    }

    pub fn embed_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> EmbeddingVector {
        if tokens.is_empty() {
            return EmbeddingVector::empty(self.dim);
        }
        let mut acc = vec![0.0f64; self.dim];
        for token in tokens {
            let h = fnv1a64(token.as_ref().as_bytes());
            let index = (h % self.dim as u64) as usize;
            acc[index] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        EmbeddingVector::normalized(acc)
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        HashedEmbedder { dim: Self::DEFAULT_DIM }
    }
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenList, _raw_text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_tokens(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalized(values.to_vec())
    }

    #[test]
    fn fnv_reference_values() {
        // Reference values from an independent FNV-1a implementation.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"x"), 0xaf63f54c86021707);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"home"), 0x402d1bcc7e6f9d6e);
    }

    #[test]
    fn hashed_single_token() {
        // fnv1a64("x") mod 4 == 3, bit 63 set.
        let e = HashedEmbedder::new(4).unwrap();
        assert_eq!(e.embed_tokens(&["x"]).values(), &[0.0, 0.0, 0.0, -1.0]);
        // fnv1a64("home") mod 64 == 46, bit 63 clear.
        let e = HashedEmbedder::default();
        let home = e.embed_tokens(&["home"]);
        assert_eq!(home.values()[46], 1.0);
        assert_eq!(home.values().iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn hashed_empty_and_repeats() {
        let e = HashedEmbedder::default();
        let empty = e.embed_tokens::<&str>(&[]);
        assert!(empty.is_empty());
        assert!(empty.values().iter().all(|x| *x == 0.0));
        assert_eq!(e.embed_tokens(&["a"]), e.embed_tokens(&["a", "a"]));
        assert!(HashedEmbedder::new(0).is_err());
    }

    #[test]
    fn cosine_examples() {
        let a = v(&[0.6, 0.8]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&a, &v(&[0.8, 0.6])).unwrap();
        assert!((c - 0.96).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])),
            Err(EmbedError::DimensionMismatch { left: 2, right: 3 })
        ));
        assert_eq!(
            cosine(&v(&[1.0, 0.0]), &EmbeddingVector::empty(2)),
            Err(EmbedError::EmptyOperand)
        );
    }

    #[test]
    fn centroid_examples() {
        let x = v(&[3.0, 4.0]);
        assert_eq!(centroid_of([&x]).unwrap(), x);
        let c = centroid_of([&v(&[1.0, 0.0]), &v(&[0.0, 1.0])]).unwrap();
        let half = core::f64::consts::FRAC_1_SQRT_2;
        assert!((c.values()[0] - half).abs() < 1e-12);
        assert!((c.values()[1] - half).abs() < 1e-12);
        assert!(centroid_of([&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])]).unwrap().is_empty());
        assert_eq!(centroid_of(core::iter::empty()), Err(EmbedError::NoVectors));
    }
}
