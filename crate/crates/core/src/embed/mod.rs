//! Word and entity vector tables.

mod sampler;
mod skipgram;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub use sampler::UnigramSampler;
pub use skipgram::{phrase_score, skipgram_train, SkipGram, SkipGramConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Word,
    Entity,
}

/// Row-major `(|vocab|, dim)` matrix with a string index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct EmbeddingTable {
    kind: EmbeddingKind,
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    kind: EmbeddingKind,
    dim: usize,
    vocab: Vec<String>,
    data: Vec<f64>,
}

impl TryFrom<TableRepr> for EmbeddingTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        if r.data.len() != r.vocab.len() * r.dim {
            return Err(Error::Checkpoint(format!(
                "embedding table has {} values for {} rows of dim {}",
                r.data.len(),
                r.vocab.len(),
                r.dim
            )));
        }
        let mut t = EmbeddingTable::new(r.kind, r.dim);
        for (w, row) in r.vocab.iter().zip(r.data.chunks(r.dim.max(1))) {
            if t.push(w, row).is_none() {
                return Err(Error::Checkpoint(format!("duplicate embedding key {w:?}")));
            }
        }
        Ok(t)
    }
}

impl From<EmbeddingTable> for TableRepr {
    fn from(t: EmbeddingTable) -> Self {
        TableRepr {
            kind: t.kind,
            dim: t.dim,
            vocab: t.vocab,
            data: t.data,
        }
    }
}

impl EmbeddingTable {
    pub fn new(kind: EmbeddingKind, dim: usize) -> Self {
        EmbeddingTable {
            kind,
            dim,
            vocab: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn id(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.id(key).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends a row; `None` if the key already exists.
    pub fn push(&mut self, key: &str, row: &[f64]) -> Option<usize> {
        assert_eq!(row.len(), self.dim, "row dimension");
        if self.index.contains_key(key) {
            return None;
        }
        let id = self.vocab.len();
        self.vocab.push(key.to_string());
        self.index.insert(key.to_string(), id);
        self.data.extend_from_slice(row);
        Some(id)
    }

    /// Row id for `key`, adding the deterministic out-of-vocabulary vector if absent.
    pub fn ensure(&mut self, key: &str) -> usize {
        match self.id(key) {
            Some(id) => id,
            None => {
                let v = oov_vector(key, self.dim);
                self.push(key, &v).expect("key was absent")
            }
        }
    }

    /// The stored vector, or the out-of-vocabulary vector for unknown keys.
    pub fn lookup(&self, key: &str) -> std::borrow::Cow<'_, [f64]> {
        match self.get(key) {
            Some(v) => std::borrow::Cow::Borrowed(v),
            None => std::borrow::Cow::Owned(oov_vector(key, self.dim)),
        }
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, word) in self.vocab.iter().enumerate() {
            write!(w, "{word}").map_err(io)?;
            for x in self.row(i) {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Deterministic vector in `[-0.01, 0.01]^dim` for words missing from a table.
pub fn oov_vector(word: &str, dim: usize) -> Vec<f64> {
    let mut r = rng::seeded(rng::stable_hash(word));
    (0..dim).map(|_| r.gen_range(-0.01..=0.01)).collect()
}

/// Parses the whitespace-separated text format: an optional `count dim`
/// header, then `word v1 ... vd` per line.
pub fn parse_text_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let values = rest
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad vector component: {e}"),
            })?;
        let t = table.get_or_insert_with(|| EmbeddingTable::new(EmbeddingKind::Word, values.len()));
        if values.len() != t.dim || values.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("row has dimension {}, expected {}", values.len(), t.dim),
            });
        }
        if t.push(word, &values).is_none() {
            warn!("line {line_no}: duplicate word {word:?}, keeping the first vector");
        }
    }
    Ok(table.unwrap_or_else(|| EmbeddingTable::new(EmbeddingKind::Word, 0)))
}

pub fn load_text_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text_embeddings(&text)
}

/// Builds entity vectors by averaging the word vectors of every token of
/// every mention linked to the entity.
///
/// Entities with no in-vocabulary mention token get a seeded vector in
/// `[-0.1, 0.1]^d`. The result does not depend on instance order.
pub fn init_entity_vectors(ds: &Dataset, words: &EmbeddingTable, seed: u64) -> EmbeddingTable {
    let dim = words.dim();
    let mut bags: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for inst in &ds.instances {
        for m in [&inst.m1, &inst.m2] {
            let bag = bags.entry(m.entity_id.as_str()).or_default();
            for t in &inst.tokens[m.span()] {
                if words.id(&t.surface).is_some() {
                    *bag.entry(t.surface.as_str()).or_default() += 1;
                }
            }
        }
    }
    let mut fallback = rng::derive(seed, 0xe7);
    let mut table = EmbeddingTable::new(EmbeddingKind::Entity, dim);
    for (entity, bag) in bags {
        let total: usize = bag.values().sum();
        let v: Vec<f64> = if total == 0 {
            (0..dim).map(|_| fallback.gen_range(-0.1..=0.1)).collect()
        } else {
            let mut acc = vec![0.0; dim];
            for (w, count) in bag {
                let row = words.get(w).expect("bag only holds known words");
                for (a, x) in acc.iter_mut().zip(row) {
                    *a += count as f64 * x;
                }
            }
            acc.iter().map(|a| a / total as f64).collect()
        };
        table.push(entity, &v);
    }
    table
}
