use std::collections::HashMap;

use super::normalize_newlines;
use crate::{Error, Result};

/// Word vectors of a fixed dimension. Absent tokens map to the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
    unknown: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: HashMap::new(),
            unknown: vec![0.0; dimension],
        }
    }

    /// Inserts `vector` under `token` unless the token is already present.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::invalid(format!(
                "vector of length {} in table of dimension {}",
                vector.len(),
                self.dimension
            )));
        }
        let token = token.into();
        if self.entries.contains_key(&token) {
            return Ok(false);
        }
        self.entries.insert(token, vector);
        Ok(true)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// The all-zero vector used for unknown tokens and sentence edges.
    pub fn unknown_vector(&self) -> &[f64] {
        &self.unknown
    }

    /// Exact lookup, then lowercase lookup, then the zero vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        if let Some(v) = self.entries.get(token) {
            return v;
        }
        let lower = token.to_lowercase();
        self.entries.get(&lower).map_or(&self.unknown, |v| v)
    }

    /// Applies `f` to every stored vector.
    pub fn map_vectors(&mut self, mut f: impl FnMut(&mut [f64])) {
        for v in self.entries.values_mut() {
            f(v);
        }
    }
}

/// Parses a text embedding file: a token followed by `dimension` reals per line.
/// Duplicate tokens keep their first vector.
pub fn load_embeddings(text: &str, dimension: usize) -> Result<EmbeddingTable> {
    if dimension == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let text = normalize_newlines(text);
    let mut table = EmbeddingTable::new(dimension);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut fields = raw.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("non-numeric value {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vector.len() != dimension {
            return Err(Error::parse(
                line,
                format!("expected {dimension} values, found {}", vector.len()),
            ));
        }
        table.insert(token, vector)?;
    }
    Ok(table)
}
