//! Directed k-NN graph over a vocabulary.
//!
//! Each word points at its nearest neighbors. When several neighbor lists
//! (one per independently trained embedding sample) are merged, the edge
//! `(v, w)` carries `m / S`: the fraction of the `S` samples in which `w` is
//! among the neighbors of `v`. Weights are stored as the integer `m` next to
//! `S`, so they are exact.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::alias;
use crate::embed_io::{EmbedIoError, Vocabulary};
use crate::knn::NeighborList;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("at least one neighbor list is required")]
    NoSamples,
    #[error("sample {0} has a different vocabulary than sample 0")]
    VocabMismatch(usize),
    #[error("sample {sample} has k={found}, sample 0 has k={expected}")]
    KMismatch {
        sample: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid edge {src}->{dst}: {reason}")]
    InvalidEdge {
        src: usize,
        dst: usize,
        reason: &'static str,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Vocab(#[from] EmbedIoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Weighted digraph in compressed sparse row form.
///
/// Out-edges of each node are sorted by target id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedDigraph {
    vocab: Arc<Vocabulary>,
    samples: u32,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    counts: Vec<u32>,
}

impl WeightedDigraph {
    /// Builds a graph from `(src, dst, m)` triples where the edge weight is
    /// `m / samples`.
    pub fn from_edges(
        vocab: Arc<Vocabulary>,
        samples: u32,
        mut edges: Vec<(usize, usize, u32)>,
    ) -> Result<Self, GraphError> {
        if samples == 0 {
            return Err(GraphError::NoSamples);
        }
        let n = vocab.len();
        edges.sort_unstable();
        for (i, &(src, dst, m)) in edges.iter().enumerate() {
            let reason = if src >= n || dst >= n {
                Some("node id out of range")
            } else if src == dst {
                Some("self-loop")
            } else if m == 0 || m > samples {
                Some("membership count outside 1..=samples")
            } else if i > 0 && edges[i - 1].0 == src && edges[i - 1].1 == dst {
                Some("duplicate edge")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(GraphError::InvalidEdge { src, dst, reason });
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for &(src, _, _) in &edges {
            offsets[src + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Ok(WeightedDigraph {
            vocab,
            samples,
            offsets,
            targets: edges.iter().map(|e| e.1 as u32).collect(),
            counts: edges.iter().map(|e| e.2).collect(),
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn node_count(&self) -> usize {
        self.vocab.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Number of merged samples `S`.
    pub fn samples(&self) -> u32 {
        self.samples
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for &t in &self.targets {
            deg[t as usize] += 1;
        }
        deg
    }

    /// Targets of `v`, ascending.
    pub fn targets(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Membership counts `m` aligned with [`WeightedDigraph::targets`].
    pub fn counts(&self, v: usize) -> &[u32] {
        &self.counts[self.offsets[v]..self.offsets[v + 1]]
    }

    /// `(target, weight)` pairs of `v`.
    pub fn out_edges(&self, v: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let s = self.samples as f64;
        self.targets(v)
            .iter()
            .zip(self.counts(v))
            .map(move |(&t, &m)| (t as usize, m as f64 / s))
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.targets(src).binary_search(&(dst as u32)).is_ok()
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<f64> {
        let i = self.targets(src).binary_search(&(dst as u32)).ok()?;
        Some(self.counts(src)[i] as f64 / self.samples as f64)
    }

    /// All edges as `(src, dst, m)`, sorted by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.node_count()).flat_map(move |v| {
            self.targets(v)
                .iter()
                .zip(self.counts(v))
                .map(move |(&t, &m)| (v, t as usize, m))
        })
    }

    /// Writes `#samples`, one `#node` line per node in id order, then one
    /// `src \t dst \t weight` line per edge sorted by `(src, dst)`.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "#samples\t{}", self.samples)?;
        for word in self.vocab.words() {
            writeln!(out, "#node\t{word}")?;
        }
        let words = self.vocab.words();
        let s = self.samples as f64;
        for (src, dst, m) in self.edges() {
            writeln!(out, "{}\t{}\t{}", words[src], words[dst], m as f64 / s)?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Reads the format of [`WeightedDigraph::write_tsv`].
    ///
    /// Without `#node` lines node ids follow first appearance in the edge
    /// lines; without `#samples` the graph is single-sample.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, GraphError> {
        let mut samples = 1u32;
        let mut vocab = Vocabulary::default();
        let mut declared_nodes = false;
        let mut raw = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let bad = |reason: &str| GraphError::MalformedLine {
                line: line_no,
                reason: reason.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "#samples" if fields.len() == 2 => {
                    samples = fields[1]
                        .parse()
                        .ok()
                        .filter(|&s| s > 0)
                        .ok_or_else(|| bad("sample count must be a positive integer"))?;
                }
                "#node" if fields.len() == 2 => {
                    if !raw.is_empty() {
                        return Err(bad("#node lines must precede edges"));
                    }
                    declared_nodes = true;
                    vocab.push(fields[1].to_string())?;
                }
                f if f.starts_with('#') => return Err(bad("unknown directive")),
                _ => {
                    if fields.len() != 3 {
                        return Err(bad("expected 3 tab-separated fields"));
                    }
                    let w: f64 = fields[2].parse().map_err(|_| bad("unparsable weight"))?;
                    if !(w.is_finite() && w > 0.0) {
                        return Err(bad("weight must be positive"));
                    }
                    raw.push((line_no, fields[0].to_string(), fields[1].to_string(), w));
                }
            }
        }
        let mut edges = Vec::with_capacity(raw.len());
        for (line, src, dst, w) in raw {
            let bad = |reason: &str| GraphError::MalformedLine {
                line,
                reason: reason.to_string(),
            };
            let mut id_of = |word: String| -> Result<usize, GraphError> {
                match vocab.id(&word) {
                    Some(id) => Ok(id),
                    None if declared_nodes => Err(bad("undeclared node")),
                    None => Ok(vocab.push(word)?),
                }
            };
            let s = id_of(src)?;
            let d = id_of(dst)?;
            let scaled = w * samples as f64;
            let m = scaled.round();
            if m < 1.0 || m > samples as f64 || (scaled - m).abs() > 1e-9 * samples as f64 {
                return Err(bad(
                    "weight is not m/samples for an integer 1 <= m <= samples",
                ));
            }
            edges.push((s, d, m as u32));
        }
        Self::from_edges(Arc::new(vocab), samples, edges).map_err(|e| match e {
            GraphError::InvalidEdge { src, dst, reason } => GraphError::MalformedLine {
                line: 0,
                reason: format!("edge {src}->{dst}: {reason}"),
            },
            other => other,
        })
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::read_tsv(BufReader::new(File::open(path)?))
    }
}

/// One edge of weight 1 from every word to each of its neighbors.
pub fn induce_single<T: Real>(nn: &NeighborList<T>) -> Result<WeightedDigraph, GraphError> {
    induce_multi(std::slice::from_ref(nn))
}

/// Merges neighbor lists of several samples: `weight(v, w)` is the number of
/// samples whose list for `v` contains `w`, divided by the sample count.
pub fn induce_multi<T: Real>(nns: &[NeighborList<T>]) -> Result<WeightedDigraph, GraphError> {
    let first = nns.first().ok_or(GraphError::NoSamples)?;
    for (i, nn) in nns.iter().enumerate().skip(1) {
        if nn.vocab() != first.vocab() {
            return Err(GraphError::VocabMismatch(i));
        }
        if nn.k() != first.k() {
            return Err(GraphError::KMismatch {
                sample: i,
                expected: first.k(),
                found: nn.k(),
            });
        }
    }
    let n = first.len();
    let per_node: Vec<Vec<(usize, usize, u32)>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut ids: Vec<usize> = nns
                .iter()
                .flat_map(|nn| nn.neighbors(v).iter().map(|nb| nb.id))
                .collect();
            ids.sort_unstable();
            let mut out: Vec<(usize, usize, u32)> = Vec::new();
            for id in ids {
                match out.last_mut() {
                    Some(last) if last.1 == id => last.2 += 1,
                    _ => out.push((v, id, 1)),
                }
            }
            out
        })
        .collect();
    WeightedDigraph::from_edges(
        first.shared_vocab(),
        nns.len() as u32,
        per_node.into_iter().flatten().collect(),
    )
}

/// Per-node alias tables over out-edge weights, laid out like the CSR arrays.
#[derive(Debug, Clone)]
pub struct AliasTable {
    offsets: Vec<usize>,
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn build(g: &WeightedDigraph) -> Self {
        let mut prob = vec![0.0; g.edge_count()];
        let mut alias = vec![0u32; g.edge_count()];
        let mut weights = Vec::new();
        for v in 0..g.node_count() {
            let range = g.offsets[v]..g.offsets[v + 1];
            weights.clear();
            weights.extend(g.counts(v).iter().map(|&m| m as f64));
            alias::build_into(&weights, &mut prob[range.clone()], &mut alias[range]);
        }
        AliasTable {
            offsets: g.offsets.clone(),
            prob,
            alias,
        }
    }

    pub fn is_dangling(&self, v: usize) -> bool {
        self.offsets[v] == self.offsets[v + 1]
    }

    /// Index into the out-edges of `v`, drawn proportionally to edge weight.
    /// `None` for a node without out-edges.
    #[inline]
    pub fn draw_index<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Option<usize> {
        let range = self.offsets[v]..self.offsets[v + 1];
        if range.is_empty() {
            return None;
        }
        Some(alias::draw(
            &self.prob[range.clone()],
            &self.alias[range],
            rng,
        ))
    }

    /// Target node drawn proportionally to edge weight.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(
        &self,
        g: &WeightedDigraph,
        v: usize,
        rng: &mut R,
    ) -> Option<usize> {
        self.draw_index(v, rng).map(|i| g.targets(v)[i] as usize)
    }
}

pub fn build_alias_tables(g: &WeightedDigraph) -> AliasTable {
    AliasTable::build(g)
}
