//! Exact k-nearest-neighbor search under cosine similarity.
//!
//! Search runs over unit-normalized rows, where cosine similarity is the dot
//! product. Ranking is by similarity descending with ties broken by ascending
//! word id, and a word is never its own neighbor (excluded by id, so distinct
//! words with identical vectors remain eligible).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::embed_io::{EmbedIoError, EmbeddingSet, Vocabulary};
use crate::scalar::{dot, Real};

/// Query rows scored together against each candidate row.
const QUERY_BLOCK: usize = 32;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("zero vector")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown word id {0}")]
    UnknownWord(usize),
    #[error("k must be at least 1")]
    KZero,
    #[error("word {0:?} is not in both vocabularies")]
    VocabularyDiffers(String),
    #[error("embedding set must be L2-normalized before neighbor search")]
    NotNormalized,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Vocab(#[from] EmbedIoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub id: usize,
    pub similarity: T,
}

/// Ranking order: `Less` means `a` ranks ahead of `b`.
pub fn rank_order<T: Real>(a: &Neighbor<T>, b: &Neighbor<T>) -> Ordering {
    b.similarity
        .partial_cmp(&a.similarity)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

/// Heap entry whose maximum is the worst-ranked candidate kept so far.
struct Kept<T>(Neighbor<T>);

impl<T: Real> PartialEq for Kept<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Kept<T> {}
impl<T: Real> PartialOrd for Kept<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Kept<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// Bounded selection of the `k` best candidates.
struct TopK<T> {
    k: usize,
    heap: BinaryHeap<Kept<T>>,
}

impl<T: Real> TopK<T> {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, cand: Neighbor<T>) {
        if self.heap.len() < self.k {
            self.heap.push(Kept(cand));
        } else if let Some(worst) = self.heap.peek() {
            if rank_order(&cand, &worst.0) == Ordering::Less {
                self.heap.pop();
                self.heap.push(Kept(cand));
            }
        }
    }

    fn into_sorted(self) -> Vec<Neighbor<T>> {
        // ascending heap order is best-first under `rank_order`
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|k| k.0)
            .collect()
    }
}

#[inline]
fn clamp_unit<T: Real>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> Result<T, KnnError> {
    if a.len() != b.len() {
        return Err(KnnError::LengthMismatch(a.len(), b.len()));
    }
    let (na2, nb2) = (dot(a, a), dot(b, b));
    if na2 == T::zero() || nb2 == T::zero() {
        return Err(KnnError::ZeroVector);
    }
    Ok(clamp_unit(dot(a, b) / (na2 * nb2).sqrt()))
}

fn check_query<T: Real>(e: &EmbeddingSet<T>, k: usize) -> Result<(), KnnError> {
    if k == 0 {
        return Err(KnnError::KZero);
    }
    if !e.is_normalized() {
        return Err(KnnError::NotNormalized);
    }
    Ok(())
}

/// The `k` words most similar to `v`, best first.
pub fn top_k_neighbors<T: Real>(
    e: &EmbeddingSet<T>,
    v: usize,
    k: usize,
) -> Result<Vec<Neighbor<T>>, KnnError> {
    check_query(e, k)?;
    if v >= e.len() {
        return Err(KnnError::UnknownWord(v));
    }
    let query = e.row(v);
    let mut top = TopK::new(k);
    for (id, row) in e.rows().enumerate() {
        if id != v {
            top.offer(Neighbor {
                id,
                similarity: clamp_unit(dot(query, row)),
            });
        }
    }
    Ok(top.into_sorted())
}

/// Neighbor lists of every word, in word-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList<T> {
    k: usize,
    vocab: Arc<Vocabulary>,
    entries: Vec<Vec<Neighbor<T>>>,
}

impl<T: Real> NeighborList<T> {
    /// Assembles a list from explicit entries, validating ids, self
    /// exclusion, duplicates, ordering and the similarity range.
    pub fn from_entries(
        k: usize,
        vocab: Arc<Vocabulary>,
        entries: Vec<Vec<Neighbor<T>>>,
    ) -> Result<Self, KnnError> {
        if k == 0 {
            return Err(KnnError::KZero);
        }
        let n = vocab.len();
        let bad = |v: usize, reason: &str| KnnError::MalformedLine {
            line: v,
            reason: reason.to_string(),
        };
        if entries.len() != n {
            return Err(bad(n, "entry count differs from vocabulary size"));
        }
        for (v, list) in entries.iter().enumerate() {
            if list.len() > k {
                return Err(bad(v, "more than k neighbors"));
            }
            for (i, nb) in list.iter().enumerate() {
                if nb.id >= n {
                    return Err(KnnError::UnknownWord(nb.id));
                }
                if nb.id == v {
                    return Err(bad(v, "word listed as its own neighbor"));
                }
                if !(nb.similarity >= -T::one() && nb.similarity <= T::one()) {
                    return Err(bad(v, "similarity outside [-1, 1]"));
                }
                if list[..i].iter().any(|p| p.id == nb.id) {
                    return Err(bad(v, "duplicate neighbor"));
                }
                if i > 0 && list[i - 1].similarity < nb.similarity {
                    return Err(bad(v, "neighbors not sorted by similarity"));
                }
            }
        }
        Ok(NeighborList { k, vocab, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The same lists over `vocab`, which must hold exactly the same words.
    pub fn reindexed(&self, vocab: Arc<Vocabulary>) -> Result<Self, KnnError> {
        if let Some(w) = self.vocab.words().iter().find(|w| vocab.id(w).is_none()) {
            return Err(KnnError::VocabularyDiffers(w.clone()));
        }
        let old_to_new: Vec<usize> = self
            .vocab
            .words()
            .iter()
            .map(|w| vocab.id(w).unwrap())
            .collect();
        let mut entries = Vec::with_capacity(vocab.len());
        for w in vocab.words() {
            let old = self
                .vocab
                .id(w)
                .ok_or_else(|| KnnError::VocabularyDiffers(w.clone()))?;
            let mut list: Vec<Neighbor<T>> = self.entries[old]
                .iter()
                .map(|nb| Neighbor {
                    id: old_to_new[nb.id],
                    similarity: nb.similarity,
                })
                .collect();
            list.sort_by(rank_order);
            entries.push(list);
        }
        Ok(NeighborList {
            k: self.k,
            vocab,
            entries,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[Neighbor<T>] {
        &self.entries[v]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Neighbor<T>])> + '_ {
        self.entries.iter().map(Vec::as_slice).enumerate()
    }

    /// One `word \t neighbor \t similarity` line per entry, neighbors in rank
    /// order, similarity with 6 decimals.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (v, list) in self.iter() {
            let word = &self.vocab.words()[v];
            for nb in list {
                writeln!(
                    out,
                    "{word}\t{}\t{:.6}",
                    self.vocab.words()[nb.id],
                    nb.similarity
                )?;
            }
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<(), KnnError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Parses the TSV written by [`NeighborList::write_tsv`].
    ///
    /// Word ids follow first appearance in the first column, then first
    /// appearance of words seen only as neighbors. `k` is the longest list.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, KnnError> {
        let mut rows = Vec::new();
        let mut heads = Vocabulary::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| KnnError::MalformedLine {
                line: line_no,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad("expected 3 tab-separated fields"));
            }
            let sim: T = fields[2]
                .parse()
                .map_err(|_| bad("unparsable similarity"))?;
            if !sim.is_finite() {
                return Err(bad("non-finite similarity"));
            }
            if heads.id(fields[0]).is_none() {
                heads.push(fields[0].to_string())?;
            }
            rows.push((line_no, fields[0].to_string(), fields[1].to_string(), sim));
        }
        let mut vocab = heads;
        for (_, _, nb, _) in &rows {
            if vocab.id(nb).is_none() {
                vocab.push(nb.clone())?;
            }
        }
        let mut entries: Vec<Vec<Neighbor<T>>> = vec![Vec::new(); vocab.len()];
        for (_, word, nb, sim) in rows {
            let v = vocab.id(&word).expect("head word registered");
            entries[v].push(Neighbor {
                id: vocab.id(&nb).expect("neighbor registered"),
                similarity: sim,
            });
        }
        let k = entries.iter().map(Vec::len).max().unwrap_or(0).max(1);
        Self::from_entries(k, Arc::new(vocab), entries)
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self, KnnError> {
        Self::read_tsv(BufReader::new(File::open(path)?))
    }
}

/// Exact neighbor lists for every word.
///
/// Query words are processed in parallel blocks; each block is scored
/// against every candidate row with the same left-to-right dot product as
/// [`top_k_neighbors`], so the output does not depend on the thread count.
pub fn all_neighbors<T: Real>(e: &EmbeddingSet<T>, k: usize) -> Result<NeighborList<T>, KnnError> {
    check_query(e, k)?;
    let n = e.len();
    let blocks: Vec<Vec<Vec<Neighbor<T>>>> = (0..n.div_ceil(QUERY_BLOCK))
        .into_par_iter()
        .map(|b| {
            let queries = b * QUERY_BLOCK..((b + 1) * QUERY_BLOCK).min(n);
            let mut tops: Vec<TopK<T>> = queries.clone().map(|_| TopK::new(k)).collect();
            for (id, row) in e.rows().enumerate() {
                for (q, top) in queries.clone().zip(tops.iter_mut()) {
                    if q != id {
                        top.offer(Neighbor {
                            id,
                            similarity: clamp_unit(dot(e.row(q), row)),
                        });
                    }
                }
            }
            tops.into_iter().map(TopK::into_sorted).collect()
        })
        .collect();
    Ok(NeighborList {
        k,
        vocab: e.shared_vocab(),
        entries: blocks.into_iter().flatten().collect(),
    })
}
