//! Word vectors: word2vec text-format parsing, cosine measures and
//! per-dimension means.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::ErrorCode;

pub const DEFAULT_DIM: usize = 300;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("missing `<vocab_count> <dim>` header")]
    MissingHeader,
    #[error("line 1: malformed header `{0}`")]
    BadHeader(String),
    #[error("line {line}: expected {expected} fields (word + dim), found {found}")]
    Arity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: component `{token}` is not a finite number")]
    NonNumeric { line: usize, token: String },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("no input words")]
    EmptyInput,
    #[error("none of the {0} words has a vector")]
    NoneFound(usize),
}

impl ErrorCode for EmbeddingError {
    fn code(&self) -> &'static str {
        match self {
            EmbeddingError::Io { .. } => "embedding.io",
            EmbeddingError::MissingHeader => "embedding.missing_header",
            EmbeddingError::BadHeader(_) => "embedding.bad_header",
            EmbeddingError::Arity { .. } => "embedding.arity",
            EmbeddingError::NonNumeric { .. } => "embedding.non_numeric",
            EmbeddingError::ZeroNorm => "embedding.zero_norm",
            EmbeddingError::DimMismatch(..) => "embedding.dim_mismatch",
            EmbeddingError::EmptyInput => "embedding.empty_input",
            EmbeddingError::NoneFound(_) => "embedding.none_found",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * factor).collect())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Read-only word to vector map.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vocab: HashMap<String, Vector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vocab: HashMap::new(),
        }
    }

    /// Adds a vector unless the word is already present. Returns whether it was added.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vector) -> Result<bool, EmbeddingError> {
        if vector.dim() != self.dim {
            return Err(EmbeddingError::DimMismatch(vector.dim(), self.dim));
        }
        let word = word.into();
        if self.vocab.contains_key(&word) {
            return Ok(false);
        }
        self.vocab.insert(word, vector);
        Ok(true)
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

    pub fn get(&self, word: &str) -> Option<&Vector> {
        self.vocab.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(word)
    }

    /// Words in lexicographic order.
    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.vocab.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }
}

/// Parses a word2vec text file. With `restrict_to`, only the listed words are
/// kept in memory; every row is still checked for arity.
pub fn load_embeddings(
    path: &Path,
    restrict_to: Option<&HashSet<String>>,
) -> Result<EmbeddingStore, EmbeddingError> {
    let io_err = |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    read_embeddings(BufReader::with_capacity(1 << 20, file), restrict_to).map_err(|e| match e {
        EmbeddingError::Io { source, .. } => io_err(source),
        other => other,
    })
}

pub fn read_embeddings<R: BufRead>(
    mut reader: R,
    restrict_to: Option<&HashSet<String>>,
) -> Result<EmbeddingStore, EmbeddingError> {
    let io_err = |source| EmbeddingError::Io {
        path: "<reader>".into(),
        source,
    };
    let mut line = String::new();
    if reader.read_line(&mut line).map_err(io_err)? == 0 || line.trim().is_empty() {
        return Err(EmbeddingError::MissingHeader);
    }
    let header: Vec<&str> = line.split_ascii_whitespace().collect();
    let (declared, dim) = match header.as_slice() {
        [count, dim] => match (count.parse::<usize>(), dim.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(EmbeddingError::BadHeader(line.trim().to_string())),
        },
        _ => return Err(EmbeddingError::BadHeader(line.trim().to_string())),
    };

    let mut store = EmbeddingStore::new(dim);
    let mut rows = 0usize;
    let mut line_no = 1usize;
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(io_err)? == 0 {
            break;
        }
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let mut fields = line.split_ascii_whitespace();
        let word = fields.next().expect("non-blank line has a first field");
        let wanted = restrict_to.is_none_or(|set| set.contains(word));
        if !wanted {
            let found = 1 + fields.count();
            if found != dim + 1 {
                return Err(EmbeddingError::Arity {
                    line: line_no,
                    expected: dim + 1,
                    found,
                });
            }
            continue;
        }
        let mut components = Vec::with_capacity(dim);
        for token in fields {
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => components.push(v),
                _ => {
                    return Err(EmbeddingError::NonNumeric {
                        line: line_no,
                        token: token.to_string(),
                    })
                }
            }
        }
        if components.len() != dim {
            return Err(EmbeddingError::Arity {
                line: line_no,
                expected: dim + 1,
                found: components.len() + 1,
            });
        }
        if !store.insert(word, Vector(components))? {
            log::warn!("line {line_no}: duplicate word `{word}` ignored, keeping first occurrence");
        }
    }
    if rows != declared {
        log::warn!("header declares {declared} words but {rows} rows were read");
    }
    Ok(store)
}

/// Writes the store in word2vec text format, words sorted.
pub fn write_embeddings<W: Write>(store: &EmbeddingStore, mut out: W) -> io::Result<()> {
    writeln!(out, "{} {}", store.len(), store.dim())?;
    for word in store.words() {
        write!(out, "{word}")?;
        for c in store.vocab[word].as_slice() {
            write!(out, " {c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &Vector, b: &Vector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity`, in [0, 2].
pub fn cosine_distance(a: &Vector, b: &Vector) -> Result<f64, EmbeddingError> {
    cosine_similarity(a, b).map(|s| 1.0 - s)
}

/// Per-dimension mean over the words that have vectors; returns the mean and
/// how many words contributed.
pub fn mean_vector<S: AsRef<str>>(
    words: &[S],
    store: &EmbeddingStore,
) -> Result<(Vector, usize), EmbeddingError> {
    if words.is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let mut mean = vec![0.0; store.dim()];
    let mut found = 0usize;
    for v in words.iter().filter_map(|w| store.get(w.as_ref())) {
        found += 1;
        // running mean: exact when all inputs are equal
        let k = found as f64;
        for (m, x) in mean.iter_mut().zip(v.as_slice()) {
            *m += (x - *m) / k;
        }
    }
    if found == 0 {
        return Err(EmbeddingError::NoneFound(words.len()));
    }
    Ok((Vector(mean), found))
}
