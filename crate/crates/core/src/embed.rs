//! Document vectors from heading lists and their cosine similarity.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mesh::tokenize;

pub const DEFAULT_DIMENSION: usize = 64;

/// Maps a token to a fixed-length vector. Implementations must be
/// deterministic and callable from several threads at once.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_token(&self, token: &str) -> Vec<f64>;
}

/// Seeded pseudo-random unit vectors, one per distinct token.
#[derive(Debug, Clone)]
pub struct HashedProvider {
    dimension: usize,
    seed: u64,
}

impl HashedProvider {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension, seed }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_token(&self, token: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        let mut v: Vec<f64> = (0..self.dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum TokenTableError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Vectors read from a `D <dim>` headed text file. Unknown tokens map to
/// the zero vector and so contribute nothing to a sum.
#[derive(Debug, Clone)]
pub struct TokenTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl TokenTable {
    pub fn load(path: &Path) -> Result<Self, TokenTableError> {
        let file = std::fs::File::open(path).map_err(|source| TokenTableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, TokenTableError> {
        let mut dimension = None;
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|source| TokenTableError::Io {
                path: "<reader>".into(),
                source,
            })?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fmt = |message: String| TokenTableError::Format { line: lineno, message };
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default();
            let Some(dim) = dimension else {
                let d = match (token, fields.next(), fields.next()) {
                    ("D", Some(d), None) => d.parse::<usize>().ok().filter(|&d| d > 0),
                    _ => None,
                };
                dimension = Some(d.ok_or_else(|| fmt(format!("expected header `D <dimension>`, got {line:?}")))?);
                continue;
            };
            let values = fields
                .map(|f| f.parse::<f64>().map_err(|e| fmt(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != dim {
                return Err(fmt(format!("expected {dim} values, got {}", values.len())));
            }
            vectors.insert(token.to_string(), values);
        }
        let dimension = dimension.ok_or(TokenTableError::Format {
            line: 0,
            message: "missing header".into(),
        })?;
        Ok(Self { dimension, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for TokenTable {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_token(&self, token: &str) -> Vec<f64> {
        self.vectors
            .get(token)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.dimension])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentVector {
    pub doc_id: String,
    pub vector: Vec<f64>,
    pub n_terms: usize,
}

/// Words of a heading as fed to the provider: lower-cased tokens.
pub fn heading_words(heading: &str) -> Vec<String> {
    tokenize(heading).into_iter().map(|t| t.to_lowercase()).collect()
}

/// Sum of all word vectors of all headings; `None` for an empty list.
pub fn embed_document(doc_id: &str, headings: &[String], provider: &dyn EmbeddingProvider) -> Option<DocumentVector> {
    if headings.is_empty() {
        return None;
    }
    let mut vector = vec![0.0; provider.dimension()];
    for heading in headings {
        for word in heading_words(heading) {
            for (acc, x) in vector.iter_mut().zip(provider.embed_token(&word)) {
                *acc += x;
            }
        }
    }
    Some(DocumentVector {
        doc_id: doc_id.to_string(),
        vector,
        n_terms: headings.len(),
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Cosine of the angle between two vectors, negative values clamped to 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(SimilarityError::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let raw = dot / (na * nb);
    if raw < 0.0 {
        log::trace!("clamping negative cosine {raw}");
    }
    Ok(raw.clamp(0.0, 1.0))
}

pub fn cosine_similarity(a: &DocumentVector, b: &DocumentVector) -> Result<f64, SimilarityError> {
    cosine(&a.vector, &b.vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hashed_provider_is_deterministic_unit() {
        let p = HashedProvider::new(DEFAULT_DIMENSION, 7);
        let a = p.embed_token("insulin");
        assert_eq!(a, p.embed_token("insulin"));
        assert_ne!(a, p.embed_token("heart"));
        assert_ne!(a, HashedProvider::new(DEFAULT_DIMENSION, 8).embed_token("insulin"));
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn document_vector_is_word_sum() {
        let p = HashedProvider::new(8, 1);
        let headings = vec![
            "Diabetes Mellitus, Type 2".to_string(),
            "Heart".into(),
            "Insulin".into(),
        ];
        let doc = embed_document("d", &headings, &p).unwrap();
        assert_eq!(doc.n_terms, 3);
        let words = ["diabetes", "mellitus", "type", "2", "heart", "insulin"];
        for i in 0..8 {
            let expected: f64 = words.iter().map(|w| p.embed_token(w)[i]).sum();
            assert!((doc.vector[i] - expected).abs() < 1e-12);
        }
        assert!(embed_document("e", &[], &p).is_none());
    }

    #[test]
    fn cosine_closed_forms() {
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
        assert!((cosine(&[2.0, 3.0], &[2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(SimilarityError::ZeroNorm));
        assert_eq!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(SimilarityError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn token_table_round_trip() {
        let text = "D 3\ninsulin 1 0 0\nheart 0 1 0\n";
        let t = TokenTable::read(text.as_bytes()).unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.embed_token("heart"), vec![0.0, 1.0, 0.0]);
        assert_eq!(t.embed_token("unknown"), vec![0.0; 3]);
        let doc = embed_document("d", &["Heart".into(), "Insulin".into()], &t).unwrap();
        assert_eq!(doc.vector, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn token_table_errors() {
        assert!(TokenTable::read("insulin 1 0\n".as_bytes()).is_err());
        assert!(TokenTable::read("D 3\ninsulin 1 0\n".as_bytes()).is_err());
        assert!(TokenTable::read("D 2\ninsulin 1 x\n".as_bytes()).is_err());
        assert!(TokenTable::read("".as_bytes()).is_err());
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 5).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_symmetric_bounded_scale_invariant(a in vec_strategy(), b in vec_strategy(), lambda in 0.01f64..100.0) {
            let ab = cosine(&a, &b).unwrap();
            let ba = cosine(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            let scaled: Vec<f64> = a.iter().map(|x| x * lambda).collect();
            prop_assert!((cosine(&scaled, &b).unwrap() - ab).abs() < 1e-9);
        }

        #[test]
        fn embedding_is_permutation_invariant(mut headings in prop::collection::vec("[a-z]{1,8}( [a-z]{1,8})?", 1..8), seed in any::<u64>()) {
            let p = HashedProvider::new(16, seed);
            let a = embed_document("x", &headings, &p).unwrap();
            headings.reverse();
            let b = embed_document("x", &headings, &p).unwrap();
            for (x, y) in a.vector.iter().zip(&b.vector) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
