//! Static (context-free) token vectors and mean-pooled blob embeddings.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{hash_str, tokenize};

pub trait TokenVectors: Send + Sync {
    fn dim(&self) -> usize;
    /// Vector for a lowercased token, or `None` when out of vocabulary.
    fn vector(&self, token: &str) -> Option<Vec<f64>>;
}

/// Hash embedding: every token maps to a fixed pseudo-random vector derived
/// from its hash, so no token is ever out of vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashedVectors {
    pub dim: usize,
    pub seed: u64,
}

impl TokenVectors for HashedVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, token: &str) -> Option<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(hash_str(token, self.seed));
        Some((0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }
}

/// Vocabulary table read from a word-vector text file (`token v1 v2 ...` per
/// line; an optional `count dim` header line is skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorTable {
    pub fn new(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        if let Some((t, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::ModelAsset(format!(
                "vector for `{t}` has {} dimensions, expected {dim}",
                v.len()
            )));
        }
        Ok(VectorTable { dim, vectors })
    }

    pub fn from_text_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelAsset(format!("static vectors {}: {e}", path.display())))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (lineno, line) in raw.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| Error::ModelAsset(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            if lineno == 0 && values.len() == 1 {
                continue;
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::ModelAsset(format!(
                        "{}:{}: expected {d} values, found {}",
                        path.display(),
                        lineno + 1,
                        values.len()
                    )))
                }
                _ => {}
            }
            vectors.insert(token.to_lowercase(), values);
        }
        let dim = dim.ok_or_else(|| Error::ModelAsset(format!("{} holds no vectors", path.display())))?;
        VectorTable::new(dim, vectors)
    }
}

impl TokenVectors for VectorTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, token: &str) -> Option<Vec<f64>> {
        self.vectors.get(token).cloned()
    }
}

/// Which static vectors a model was built with; persisted in its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StaticVectorsSpec {
    Hashed { dim: usize, seed: u64 },
    Table { path: String },
}

impl Default for StaticVectorsSpec {
    fn default() -> Self {
        StaticVectorsSpec::Hashed { dim: 96, seed: 2023 }
    }
}

impl StaticVectorsSpec {
    pub fn load(&self) -> Result<Box<dyn TokenVectors>> {
        Ok(match self {
            StaticVectorsSpec::Hashed { dim, seed } => Box::new(HashedVectors { dim: *dim, seed: *seed }),
            StaticVectorsSpec::Table { path } => Box::new(VectorTable::from_text_file(Path::new(path))?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbedding {
    pub vector: Vec<f64>,
    /// Set when no token had a vector; `vector` is then all zeros.
    pub all_out_of_vocabulary: bool,
}

/// Mean of the static vectors of the blob's tokens.
pub fn embed_blob_static(vectors: &dyn TokenVectors, text: &str) -> StaticEmbedding {
    let mut sum = vec![0.0; vectors.dim()];
    let mut found = 0usize;
    for token in tokenize(text) {
        if let Some(v) = vectors.vector(&token) {
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += x;
            }
            found += 1;
        }
    }
    if found == 0 {
        return StaticEmbedding {
            vector: sum,
            all_out_of_vocabulary: true,
        };
    }
    sum.iter_mut().for_each(|s| *s /= found as f64);
    StaticEmbedding {
        vector: sum,
        all_out_of_vocabulary: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> VectorTable {
        let mut m = HashMap::new();
        m.insert("recht".to_string(), vec![1.0, 2.0]);
        m.insert("löschung".to_string(), vec![3.0, -2.0]);
        VectorTable::new(2, m).unwrap()
    }

    #[test]
    fn single_token_is_its_vector() {
        let e = embed_blob_static(&table(), "Recht");
        assert_eq!(e.vector, vec![1.0, 2.0]);
        assert!(!e.all_out_of_vocabulary);
    }

    #[test]
    fn two_tokens_average() {
        let e = embed_blob_static(&table(), "Recht Löschung");
        assert_eq!(e.vector, vec![2.0, 0.0]);
    }

    #[test]
    fn out_of_vocabulary_tokens_are_skipped() {
        let e = embed_blob_static(&table(), "Recht unbekannt");
        assert_eq!(e.vector, vec![1.0, 2.0]);
        let e = embed_blob_static(&table(), "nur unbekannte Wörter");
        assert_eq!(e.vector, vec![0.0, 0.0]);
        assert!(e.all_out_of_vocabulary);
    }

    #[test]
    fn hashed_vectors_are_deterministic() {
        let h = HashedVectors { dim: 8, seed: 1 };
        let a = embed_blob_static(&h, "Sie haben das Recht");
        let b = embed_blob_static(&h, "Sie haben das Recht");
        assert_eq!(a, b);
        assert_eq!(a.vector.len(), 8);
    }

    #[test]
    fn text_file_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "2 3\nrecht 1 2 3\nRecht2 4 5 6\n").unwrap();
        let t = VectorTable::from_text_file(&path).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.vector("recht2"), Some(vec![4.0, 5.0, 6.0]));
        std::fs::write(&path, "a 1 2\nb 1\n").unwrap();
        assert!(matches!(VectorTable::from_text_file(&path), Err(Error::ModelAsset(_))));
    }
}
