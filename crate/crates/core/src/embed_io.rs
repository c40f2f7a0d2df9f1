//! Word2vec text format: a `<n> <d>` header line followed by one
//! `<token> <v1> ... <vd>` line per word.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{l2_norm, Real};

/// Tolerance on the row norm of a normalized set.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EmbedIoError {
    #[error("malformed header: {0:?}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("invalid token {0:?}: tokens must be non-empty and free of whitespace")]
    InvalidToken(String),
    #[error("line {0}: non-finite or unparsable value")]
    NonFiniteValue(usize),
    #[error("header announces {expected} rows, file has {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("word id {0} has a zero vector")]
    ZeroVector(usize),
    #[error("embedding set is empty")]
    EmptySet,
    #[error("matrix has {len} entries, expected {rows}x{dim}")]
    ShapeMismatch { len: usize, rows: usize, dim: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Ordered set of unique tokens with a dense 0-based id for each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Result<Self, EmbedIoError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for w in words {
            vocab.push(w.into())?;
        }
        Ok(vocab)
    }

    /// Appends a token, returning its id.
    pub fn push(&mut self, word: String) -> Result<usize, EmbedIoError> {
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(EmbedIoError::InvalidToken(word));
        }
        if self.index.contains_key(&word) {
            return Err(EmbedIoError::DuplicateToken(word));
        }
        let id = self.words.len();
        self.index.insert(word.clone(), id);
        self.words.push(word);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// A vocabulary and its row-major `n x dim` matrix of word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    vocab: Arc<Vocabulary>,
    matrix: Vec<T>,
    dim: usize,
    normalized: bool,
}

impl<T: Real> EmbeddingSet<T> {
    /// Builds an unnormalized set, checking shape and finiteness.
    pub fn new(vocab: Vocabulary, matrix: Vec<T>, dim: usize) -> Result<Self, EmbedIoError> {
        Self::with_shared_vocab(Arc::new(vocab), matrix, dim)
    }

    pub fn with_shared_vocab(
        vocab: Arc<Vocabulary>,
        matrix: Vec<T>,
        dim: usize,
    ) -> Result<Self, EmbedIoError> {
        if matrix.len() != vocab.len() * dim || (dim == 0 && !vocab.is_empty()) {
            return Err(EmbedIoError::ShapeMismatch {
                len: matrix.len(),
                rows: vocab.len(),
                dim,
            });
        }
        if let Some(pos) = matrix.iter().position(|x| !x.is_finite()) {
            // Data line of the offending row, counting the header as line 1.
            return Err(EmbedIoError::NonFiniteValue(pos / dim + 2));
        }
        Ok(EmbeddingSet {
            vocab,
            matrix,
            dim,
            normalized: false,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn row(&self, id: usize) -> &[T] {
        &self.matrix[id * self.dim..(id + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        // chunks_exact panics on a zero chunk size; an empty set has no rows either way
        self.matrix.chunks_exact(self.dim.max(1))
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.vocab.id(word).map(|id| self.row(id))
    }

    /// Divides every row by its L2 norm.
    pub fn normalize_rows(mut self) -> Result<Self, EmbedIoError> {
        let dim = self.dim;
        for (id, row) in self.matrix.chunks_exact_mut(dim.max(1)).enumerate() {
            let norm = l2_norm(row);
            if norm == T::zero() {
                return Err(EmbedIoError::ZeroVector(id));
            }
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        self.normalized = true;
        Ok(self)
    }

    /// Joins the vectors of several sets word by word.
    ///
    /// The result covers the words present in every input, in the order of
    /// the first input.
    pub fn concat(sets: &[&EmbeddingSet<T>]) -> Result<Self, EmbedIoError> {
        let first = sets.first().ok_or(EmbedIoError::EmptySet)?;
        let dim: usize = sets.iter().map(|s| s.dim).sum();
        let mut vocab = Vocabulary::default();
        let mut matrix = Vec::new();
        'words: for word in first.vocab.words() {
            let mut rows = Vec::with_capacity(sets.len());
            for set in sets {
                match set.get(word) {
                    Some(row) => rows.push(row),
                    None => continue 'words,
                }
            }
            vocab.push(word.clone())?;
            for row in rows {
                matrix.extend_from_slice(row);
            }
        }
        if vocab.is_empty() {
            return Err(EmbedIoError::EmptySet);
        }
        EmbeddingSet::new(vocab, matrix, dim)
    }
    /// Restricts every set to the words present in all of them, in the order
    /// of the first, behind one shared vocabulary.
    pub fn align(sets: &[EmbeddingSet<T>]) -> Result<Vec<Self>, EmbedIoError> {
        let first = sets.first().ok_or(EmbedIoError::EmptySet)?;
        if sets.iter().all(|s| s.vocab == first.vocab) {
            let vocab = first.shared_vocab();
            return Ok(sets
                .iter()
                .map(|s| EmbeddingSet {
                    vocab: Arc::clone(&vocab),
                    ..s.clone()
                })
                .collect());
        }
        let mut vocab = Vocabulary::default();
        for word in first.vocab.words() {
            if sets.iter().all(|s| s.vocab.id(word).is_some()) {
                vocab.push(word.clone())?;
            }
        }
        if vocab.is_empty() {
            return Err(EmbedIoError::EmptySet);
        }
        let vocab = Arc::new(vocab);
        Ok(sets
            .iter()
            .map(|s| {
                let matrix = vocab
                    .words()
                    .iter()
                    .flat_map(|w| s.get(w).unwrap())
                    .copied()
                    .collect();
                EmbeddingSet {
                    vocab: Arc::clone(&vocab),
                    matrix,
                    dim: s.dim,
                    normalized: s.normalized,
                }
            })
            .collect())
    }
}

pub fn load_embeddings<T: Real>(path: impl AsRef<Path>) -> Result<EmbeddingSet<T>, EmbedIoError> {
    read_embeddings(BufReader::new(File::open(path)?))
}

pub fn read_embeddings<T: Real, R: BufRead>(reader: R) -> Result<EmbeddingSet<T>, EmbedIoError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| EmbedIoError::MalformedHeader(String::new()))?;
    let (rows, dim) = parse_header(&header)?;

    let mut vocab = Vocabulary::default();
    let mut matrix = Vec::with_capacity(rows * dim);
    let mut found = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        found += 1;
        if found > rows {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        vocab.push(token.to_string())?;
        let before = matrix.len();
        for field in fields {
            let value: T = field
                .parse()
                .map_err(|_| EmbedIoError::NonFiniteValue(line_no))?;
            if !value.is_finite() {
                return Err(EmbedIoError::NonFiniteValue(line_no));
            }
            matrix.push(value);
        }
        let n_values = matrix.len() - before;
        if n_values != dim {
            return Err(EmbedIoError::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: n_values,
            });
        }
    }
    if found != rows {
        return Err(EmbedIoError::RowCountMismatch {
            expected: rows,
            found,
        });
    }
    EmbeddingSet::new(vocab, matrix, dim)
}

fn parse_header(header: &str) -> Result<(usize, usize), EmbedIoError> {
    let bad = || EmbedIoError::MalformedHeader(header.to_string());
    let mut parts = header.split_whitespace();
    let rows = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() || dim == 0 {
        return Err(bad());
    }
    Ok((rows, dim))
}

pub fn save_embeddings<T: Real>(
    set: &EmbeddingSet<T>,
    path: impl AsRef<Path>,
) -> Result<(), EmbedIoError> {
    if set.is_empty() {
        return Err(EmbedIoError::EmptySet);
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_embeddings(set, &mut out)?;
    out.flush()?;
    Ok(())
}

/// `Display` on floats prints the shortest string that parses back to the
/// same value, so the text round trip is exact.
pub fn write_embeddings<T: Real, W: Write>(
    set: &EmbeddingSet<T>,
    out: &mut W,
) -> Result<(), EmbedIoError> {
    if set.is_empty() {
        return Err(EmbedIoError::EmptySet);
    }
    writeln!(out, "{} {}", set.len(), set.dim())?;
    for (word, row) in set.vocab().words().iter().zip(set.rows()) {
        write!(out, "{word}")?;
        for x in row {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
