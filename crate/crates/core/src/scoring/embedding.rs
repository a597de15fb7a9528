use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entities::word_tokens;
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: Arc<str>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, clamped to `[-1, 1]`. Zero when either vector has zero
/// norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.provider_id != b.provider_id {
        return Err(Error::Contract(format!(
            "cosine between providers `{}` and `{}`",
            a.provider_id, b.provider_id
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::Contract(format!("cosine between dimensions {} and {}", a.dim(), b.dim())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Maps text to a fixed-dimension vector. Implementations must be
/// deterministic and safe for concurrent reads.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Unweighted mean of the vectors of in-vocabulary lowercase word tokens.
#[derive(Debug, Clone)]
pub struct WordAverageProvider {
    id: Arc<str>,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordAverageProvider {
    pub fn from_vectors(id: &str, dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("word vectors must have positive dimension".into()));
        }
        if let Some((token, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::Contract(format!("vector for `{token}` has dimension {}, expected {dim}", v.len())));
        }
        Ok(Self {
            id: id.into(),
            dim,
            vectors,
        })
    }

    /// Parses the whitespace text format `token v1 ... vd`, one token per
    /// line. A leading `count dim` header line is skipped. The provider id is
    /// derived from the file content.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Vec<&str> = fields.collect();
            if i == 0 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                continue;
            }
            let values = values
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::parse(source_name, i + 1, e))?;
            match dim {
                None if values.is_empty() => return Err(Error::parse(source_name, i + 1, "vector has no values")),
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::parse(
                        source_name,
                        i + 1,
                        format!("expected {d} values, found {}", values.len()),
                    ))
                }
                Some(_) => {}
            }
            vectors.entry(token.to_lowercase()).or_insert(values);
        }
        let dim = dim.ok_or_else(|| Error::EmptySet(format!("word vectors {source_name}")))?;
        let id = format!("word-avg:{}", &sha256_hex(text)[..16]);
        Self::from_vectors(&id, dim, vectors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vectors.len()
    }
}

impl EmbeddingProvider for WordAverageProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut sum = vec![0.0; self.dim];
        let mut count = 0usize;
        for (_, _, token) in word_tokens(text) {
            if let Some(v) = self.vectors.get(&token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                count += 1;
            }
        }
        if count > 0 {
            for s in &mut sum {
                *s /= count as f64;
            }
        }
        Ok(EmbeddingVector {
            values: sum,
            provider_id: self.id.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheRecord {
    sha256: String,
    text: String,
    vector: Vec<f64>,
    provider_id: String,
}

/// Precomputed sentence embeddings keyed by the SHA-256 of the exact text.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    id: Arc<str>,
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingCache {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut id: Option<String> = None;
        let mut dim = None;
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord = serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e))?;
            if sha256_hex(&rec.text) != rec.sha256 {
                return Err(Error::parse(source_name, i + 1, "sha256 does not match text"));
            }
            match &id {
                None => id = Some(rec.provider_id.clone()),
                Some(p) if *p != rec.provider_id => {
                    return Err(Error::parse(
                        source_name,
                        i + 1,
                        format!("mixed providers `{p}` and `{}`", rec.provider_id),
                    ))
                }
                Some(_) => {}
            }
            match dim {
                None => dim = Some(rec.vector.len()),
                Some(d) if d != rec.vector.len() => {
                    return Err(Error::parse(source_name, i + 1, format!("expected dimension {d}")))
                }
                Some(_) => {}
            }
            entries.insert(rec.sha256, rec.vector);
        }
        let (Some(id), Some(dim)) = (id, dim) else {
            return Err(Error::EmptySet(format!("embedding cache {source_name}")));
        };
        if dim == 0 {
            return Err(Error::parse(source_name, 1, "zero-dimensional vectors"));
        }
        Ok(Self {
            id: id.into(),
            dim,
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl EmbeddingProvider for EmbeddingCache {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let hash = sha256_hex(text);
        match self.entries.get(&hash) {
            Some(v) => Ok(EmbeddingVector {
                values: v.clone(),
                provider_id: self.id.clone(),
            }),
            None => Err(Error::CacheMiss { hash }),
        }
    }
}

/// Embeds each distinct text with `provider` and writes cache JSONL lines,
/// sorted by hash.
pub fn cache_jsonl<'a>(provider: &dyn EmbeddingProvider, texts: impl IntoIterator<Item = &'a str>) -> Result<String> {
    let mut records = std::collections::BTreeMap::new();
    for text in texts {
        let hash = sha256_hex(text);
        if records.contains_key(&hash) {
            continue;
        }
        let v = provider.embed(text)?;
        records.insert(
            hash.clone(),
            CacheRecord {
                sha256: hash,
                text: text.to_string(),
                vector: v.values,
                provider_id: provider.id().to_string(),
            },
        );
    }
    let mut out = String::new();
    for rec in records.values() {
        out.push_str(&serde_json::to_string(rec).expect("cache record serializes"));
        out.push('\n');
    }
    Ok(out)
}
