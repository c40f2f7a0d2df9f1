//! Second-order biased random walks (node2vec) over a [`WeightedDigraph`].
//!
//! From `cur`, having arrived from `prev`, the walk moves to out-neighbor `x`
//! with probability proportional to `weight(cur, x) * bias(prev, x)`:
//!
//! | case                          | bias  |
//! |-------------------------------|-------|
//! | `x == prev`                   | `1/p` |
//! | edge `prev -> x` exists       | `1`   |
//! | otherwise                     | `1/q` |
//!
//! The first step has no `prev` and follows edge weights alone. A node with
//! no out-edges ends the walk.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed_io::Vocabulary;
use crate::graph::{AliasTable, WeightedDigraph};

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
    #[error("node {0} has no out-edges")]
    DanglingNode(usize),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    /// Maximum number of nodes in a walk, start included.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            walk_length: 80,
            walks_per_node: 10,
            seed: 1,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        let bad = |msg: &str| Err(WalkError::InvalidConfig(msg.to_string()));
        if !(self.p.is_finite() && self.p > 0.0) {
            return bad("p must be positive");
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return bad("q must be positive");
        }
        if self.walk_length == 0 {
            return bad("walk_length must be at least 1");
        }
        if self.walks_per_node == 0 {
            return bad("walks_per_node must be at least 1");
        }
        Ok(())
    }
}

/// Precomputed bias factors for one `(p, q)` setting.
#[derive(Debug, Clone, Copy)]
pub struct Bias {
    ret: f64,
    out: f64,
    max: f64,
}

impl Bias {
    pub fn new(p: f64, q: f64) -> Self {
        let (ret, out) = (1.0 / p, 1.0 / q);
        Bias {
            ret,
            out,
            max: ret.max(out).max(1.0),
        }
    }

    #[inline]
    pub fn factor(&self, g: &WeightedDigraph, prev: usize, x: usize) -> f64 {
        if x == prev {
            self.ret
        } else if g.has_edge(prev, x) {
            1.0
        } else {
            self.out
        }
    }
}

/// Next-step distribution from `cur`, as `(target, probability)` in target
/// order. `prev` is `None` on the first step.
pub fn transition_distribution(
    g: &WeightedDigraph,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
) -> Result<Vec<(usize, f64)>, WalkError> {
    let n = g.node_count();
    if cur >= n {
        return Err(WalkError::UnknownNode(cur));
    }
    if let Some(prev) = prev.filter(|&v| v >= n) {
        return Err(WalkError::UnknownNode(prev));
    }
    if g.out_degree(cur) == 0 {
        return Err(WalkError::DanglingNode(cur));
    }
    let bias = Bias::new(p, q);
    let mut dist: Vec<(usize, f64)> = g
        .out_edges(cur)
        .map(|(x, w)| (x, w * prev.map_or(1.0, |pv| bias.factor(g, pv, x))))
        .collect();
    let total: f64 = dist.iter().map(|d| d.1).sum();
    for d in &mut dist {
        d.1 /= total;
    }
    Ok(dist)
}

/// Draws the next node, or `None` if `cur` has no out-edges.
///
/// The edge-weight factor comes from the alias table; the bias factor is
/// applied by rejection, which leaves the target distribution exact.
#[inline]
pub fn step<R: Rng + ?Sized>(
    g: &WeightedDigraph,
    table: &AliasTable,
    bias: &Bias,
    prev: Option<usize>,
    cur: usize,
    rng: &mut R,
) -> Option<usize> {
    let Some(prev) = prev else {
        return table.draw(g, cur, rng);
    };
    loop {
        let x = table.draw(g, cur, rng)?;
        let accept = bias.factor(g, prev, x);
        if accept >= bias.max || rng.random::<f64>() * bias.max < accept {
            return Some(x);
        }
    }
}

pub fn generate_walk<R: Rng + ?Sized>(
    g: &WeightedDigraph,
    table: &AliasTable,
    start: usize,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Vec<u32> {
    let bias = Bias::new(cfg.p, cfg.q);
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start as u32);
    let mut prev = None;
    let mut cur = start;
    while walk.len() < cfg.walk_length {
        match step(g, table, &bias, prev, cur, rng) {
            Some(next) => {
                walk.push(next as u32);
                prev = Some(cur);
                cur = next;
            }
            None => break,
        }
    }
    walk
}

/// Random stream for the walk `round` started at `start`.
fn walk_rng(seed: u64, start: usize, round: usize, rounds: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + (start * rounds + round) as u64);
    rng
}

/// Walks over the graph vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub vocab: Arc<Vocabulary>,
    pub walks: Vec<Vec<u32>>,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// Each walk as a sequence of words.
    pub fn sentences(&self) -> impl Iterator<Item = Vec<&str>> + '_ {
        let words = self.vocab.words();
        self.walks
            .iter()
            .map(move |w| w.iter().map(|&id| words[id as usize].as_str()).collect())
    }

    /// One walk per line, space-separated words.
    pub fn write_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for sentence in self.sentences() {
            writeln!(out, "{}", sentence.join(" "))?;
        }
        Ok(())
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<(), WalkError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_text(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// `walks_per_node` rounds; each round visits every node once in a freshly
/// shuffled order. Every walk draws from its own stream keyed by
/// `(seed, start, round)`, so the corpus is independent of the thread count.
pub fn generate_corpus(g: &WeightedDigraph, cfg: &WalkConfig) -> Result<WalkCorpus, WalkError> {
    cfg.validate()?;
    let n = g.node_count();
    let table = AliasTable::build(g);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jobs = Vec::with_capacity(n * cfg.walks_per_node);
    let mut nodes: Vec<usize> = (0..n).collect();
    for round in 0..cfg.walks_per_node {
        nodes.shuffle(&mut order_rng);
        jobs.extend(nodes.iter().map(|&v| (v, round)));
    }
    let walks = jobs
        .into_par_iter()
        .map(|(start, round)| {
            let mut rng = walk_rng(cfg.seed, start, round, cfg.walks_per_node);
            generate_walk(g, &table, start, cfg, &mut rng)
        })
        .collect();
    Ok(WalkCorpus {
        vocab: g.shared_vocab(),
        walks,
    })
}
