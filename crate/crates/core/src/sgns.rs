//! Skip-gram with negative sampling.
//!
//! For every center token, a context radius `b` is drawn uniformly from
//! `1..=window`, and each token within `b` positions forms a positive pair.
//! A pair takes one positive logistic update plus `negatives` updates
//! against words drawn from the unigram distribution raised to
//! `unigram_power`. The learning rate decays linearly over all processed
//! tokens. Input vectors start uniform in `[-0.5/dim, 0.5/dim]`, output
//! vectors at zero, and the input vectors are returned as the embedding.

use std::cell::UnsafeCell;
use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alias::AliasSampler;
use crate::embed_io::{EmbedIoError, EmbeddingSet, Vocabulary};
use crate::scalar::{dot, sigmoid, softplus, Real};
use crate::walks::WalkCorpus;

#[derive(Debug, Error)]
pub enum SgnsError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty after min_count filtering")]
    EmptyCorpus,
    #[error("no word reaches min_count")]
    EmptyVocabulary,
    #[error("non-finite loss in epoch {epoch}; try a lower learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Vocab(#[from] EmbedIoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Maximum context offset.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Words seen fewer times are dropped from the corpus.
    pub min_count: u64,
    pub unigram_power: f64,
    /// Frequent-word subsampling threshold; `None` disables subsampling.
    pub subsample: Option<f64>,
    pub seed: u64,
    /// Worker threads. 1 is the deterministic mode; more workers update the
    /// shared parameters without locks.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig::for_text()
    }
}

impl SgnsConfig {
    /// First-order training over raw text.
    pub fn for_text() -> Self {
        SgnsConfig {
            dim: 100,
            window: 8,
            negatives: 5,
            epochs: 10,
            lr_start: 0.025,
            lr_end: 0.0001,
            min_count: 4,
            unigram_power: 0.75,
            subsample: None,
            seed: 1,
            threads: 1,
        }
    }

    /// Second-order training over a walk corpus, which already holds
    /// `walks_per_node` passes over the graph.
    pub fn for_walks() -> Self {
        SgnsConfig {
            window: 10,
            epochs: 1,
            min_count: 1,
            ..SgnsConfig::for_text()
        }
    }

    pub fn validate(&self) -> Result<(), SgnsError> {
        let bad = |msg: &str| Err(SgnsError::InvalidConfig(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return bad("learning rates must satisfy lr_start >= lr_end > 0");
        }
        if !(self.unigram_power.is_finite() && self.unigram_power >= 0.0) {
            return bad("unigram_power must be finite and non-negative");
        }
        if self.subsample.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return bad("subsample threshold must be positive");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }
}

/// Token sequences over a frequency-ordered vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocab: Vocabulary,
    counts: Vec<u64>,
    sentences: Vec<Vec<u32>>,
}

impl Corpus {
    /// Word ids are assigned by descending count, ties by first appearance.
    pub fn from_sentences<I, S, W>(sentences: I) -> Result<Self, SgnsError>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = W>,
        W: AsRef<str>,
    {
        let mut first_seen: HashMap<String, u32> = HashMap::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut words: Vec<String> = Vec::new();
        let mut raw: Vec<Vec<u32>> = Vec::new();
        for sentence in sentences {
            let mut ids = Vec::new();
            for token in sentence {
                let token = token.as_ref();
                let id = match first_seen.get(token) {
                    Some(&id) => id,
                    None => {
                        let id = words.len() as u32;
                        first_seen.insert(token.to_string(), id);
                        words.push(token.to_string());
                        counts.push(0);
                        id
                    }
                };
                counts[id as usize] += 1;
                ids.push(id);
            }
            if !ids.is_empty() {
                raw.push(ids);
            }
        }
        let mut order: Vec<usize> = (0..words.len()).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let mut remap = vec![0u32; words.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new as u32;
        }
        let vocab = Vocabulary::new(order.iter().map(|&i| std::mem::take(&mut words[i])))?;
        let counts = order.iter().map(|&i| counts[i]).collect();
        for s in &mut raw {
            for id in s.iter_mut() {
                *id = remap[*id as usize];
            }
        }
        Ok(Corpus {
            vocab,
            counts,
            sentences: raw,
        })
    }

    /// One sentence per line, whitespace-separated tokens.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, SgnsError> {
        let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
        Self::from_sentences(lines.iter().map(|l| l.split_whitespace()))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self, SgnsError> {
        Self::read_text(BufReader::new(File::open(path)?))
    }

    pub fn from_walks(walks: &WalkCorpus) -> Result<Self, SgnsError> {
        Self::from_sentences(walks.sentences())
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sentences(&self) -> &[Vec<u32>] {
        &self.sentences
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Drops words below `min_count`, keeping the relative order of ids.
    fn filtered(&self, min_count: u64) -> Result<Corpus, SgnsError> {
        let mut remap = vec![u32::MAX; self.vocab.len()];
        let mut vocab = Vocabulary::default();
        let mut counts = Vec::new();
        for (id, word) in self.vocab.words().iter().enumerate() {
            if self.counts[id] >= min_count {
                remap[id] = vocab.push(word.clone())? as u32;
                counts.push(self.counts[id]);
            }
        }
        let sentences: Vec<Vec<u32>> = self
            .sentences
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&id| remap[id as usize])
                    .filter(|&id| id != u32::MAX)
                    .collect::<Vec<u32>>()
            })
            .filter(|s| !s.is_empty())
            .collect();
        Ok(Corpus {
            vocab,
            counts,
            sentences,
        })
    }
}

/// Noise distribution for negative sampling.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    ids: Vec<u32>,
    probs: Vec<f64>,
    sampler: AliasSampler,
}

/// `P(w) = count(w)^power / sum(count^power)` over words with
/// `count >= min_count`.
pub fn build_negative_table(
    counts: &[u64],
    min_count: u64,
    power: f64,
) -> Result<NegativeTable, SgnsError> {
    let ids: Vec<u32> = (0..counts.len() as u32)
        .filter(|&i| counts[i as usize] >= min_count.max(1))
        .collect();
    if ids.is_empty() {
        return Err(SgnsError::EmptyVocabulary);
    }
    let weights: Vec<f64> = ids
        .iter()
        .map(|&i| (counts[i as usize] as f64).powf(power))
        .collect();
    let total: f64 = weights.iter().sum();
    let sampler = AliasSampler::new(&weights).ok_or(SgnsError::EmptyVocabulary)?;
    Ok(NegativeTable {
        probs: weights.iter().map(|w| w / total).collect(),
        ids,
        sampler,
    })
}

impl NegativeTable {
    /// Probability of drawing `id`; 0 for excluded words.
    pub fn probability(&self, id: usize) -> f64 {
        self.ids
            .binary_search(&(id as u32))
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.ids[self.sampler.sample(rng)] as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient<T> {
    pub grad_w: Vec<T>,
    pub grad_c: Vec<T>,
    pub loss: T,
}

/// Loss `-ln s(w.c)` for a positive pair (`label` 1) or `-ln s(-w.c)` for a
/// negative one, where `s` is the logistic function, and its gradients.
pub fn sgns_pair_gradient<T: Real>(w: &[T], c: &[T], label: bool) -> PairGradient<T> {
    let x = dot(w, c);
    let y = if label { T::one() } else { T::zero() };
    let coef = sigmoid(x) - y;
    let loss = if label { softplus(-x) } else { softplus(x) };
    PairGradient {
        grad_w: c.iter().map(|&ci| coef * ci).collect(),
        grad_c: w.iter().map(|&wi| coef * wi).collect(),
        loss,
    }
}

/// Parameter matrix that workers update without synchronization.
///
/// Concurrent workers may read and write the same row at once; a torn or
/// lost update is accepted as in lock-free asynchronous SGD. With a single
/// worker every access is exclusive.
struct SharedMatrix<T> {
    data: UnsafeCell<Vec<T>>,
    dim: usize,
}

unsafe impl<T: Send + Sync> Sync for SharedMatrix<T> {}

impl<T: Real> SharedMatrix<T> {
    fn new(data: Vec<T>, dim: usize) -> Self {
        SharedMatrix {
            data: UnsafeCell::new(data),
            dim,
        }
    }

    /// # Safety
    /// No other reference to row `i` may be held by the calling thread.
    #[allow(clippy::mut_from_ref)]
    unsafe fn row(&self, i: usize) -> &mut [T] {
        let data = &mut *self.data.get();
        &mut data[i * self.dim..(i + 1) * self.dim]
    }

    fn into_inner(self) -> Vec<T> {
        self.data.into_inner()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean logistic loss per update (positive and negative) in each epoch.
    pub epoch_losses: Vec<f64>,
    pub vocab_size: usize,
    pub tokens_per_epoch: usize,
}

struct Shared<'a, T> {
    cfg: &'a SgnsConfig,
    input: SharedMatrix<T>,
    output: SharedMatrix<T>,
    table: NegativeTable,
    keep_prob: Option<Vec<f64>>,
    processed: AtomicUsize,
    total_work: usize,
    failed: AtomicBool,
}

impl<T: Real> Shared<'_, T> {
    fn learning_rate(&self) -> T {
        let done = self.processed.load(Ordering::Relaxed) as f64 / self.total_work.max(1) as f64;
        let lr = self.cfg.lr_start - (self.cfg.lr_start - self.cfg.lr_end) * done;
        T::of(lr.max(self.cfg.lr_end))
    }

    /// Returns summed loss and update count for the sentences.
    fn run_worker(&self, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng) -> (f64, usize) {
        let dim = self.cfg.dim;
        let mut grad_in = vec![T::zero(); dim];
        let mut kept = Vec::new();
        let (mut loss, mut updates) = (0.0, 0usize);
        for sentence in sentences {
            if self.failed.load(Ordering::Relaxed) {
                break;
            }
            kept.clear();
            match &self.keep_prob {
                Some(keep) => kept.extend(
                    sentence
                        .iter()
                        .copied()
                        .filter(|&id| rng.random::<f64>() < keep[id as usize]),
                ),
                None => kept.extend_from_slice(sentence),
            }
            let lr = self.learning_rate();
            for (pos, &center) in kept.iter().enumerate() {
                let radius = rng.random_range(1..=self.cfg.window);
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(kept.len() - 1);
                for (ctx_pos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = context as usize;
                    grad_in.iter_mut().for_each(|g| *g = T::zero());
                    // SAFETY: one input row and one output row are borrowed at
                    // a time; the matrices are distinct allocations.
                    let center_row = unsafe { self.input.row(center as usize) };
                    loss += self.update(center_row, context, true, lr, &mut grad_in);
                    updates += 1;
                    for _ in 0..self.cfg.negatives {
                        let mut neg = self.table.sample(rng);
                        if neg == context {
                            neg = self.table.sample(rng);
                            if neg == context {
                                continue;
                            }
                        }
                        loss += self.update(center_row, neg, false, lr, &mut grad_in);
                        updates += 1;
                    }
                    for (c, g) in center_row.iter_mut().zip(&grad_in) {
                        *c += *g;
                    }
                }
            }
            self.processed.fetch_add(sentence.len(), Ordering::Relaxed);
            if !loss.is_finite() {
                self.failed.store(true, Ordering::Relaxed);
            }
        }
        (loss, updates)
    }

    /// One logistic step on output row `target`; the center-row gradient is
    /// accumulated into `grad_in` and applied once per pair.
    #[inline]
    fn update(&self, center: &[T], target: usize, label: bool, lr: T, grad_in: &mut [T]) -> f64 {
        // SAFETY: see `run_worker`.
        let out = unsafe { self.output.row(target) };
        let x = dot(center, out);
        let y = if label { T::one() } else { T::zero() };
        let g = (y - sigmoid(x)) * lr;
        for (gi, &o) in grad_in.iter_mut().zip(out.iter()) {
            *gi += g * o;
        }
        for (o, &c) in out.iter_mut().zip(center) {
            *o += g * c;
        }
        let loss = if label { softplus(-x) } else { softplus(x) };
        loss.as_f64()
    }
}

/// Trains on `corpus` and returns the input vectors.
pub fn train<T: Real>(corpus: &Corpus, cfg: &SgnsConfig) -> Result<EmbeddingSet<T>, SgnsError> {
    train_with_report(corpus, cfg).map(|(e, _)| e)
}

pub fn train_with_report<T: Real>(
    corpus: &Corpus,
    cfg: &SgnsConfig,
) -> Result<(EmbeddingSet<T>, TrainReport), SgnsError> {
    cfg.validate()?;
    let corpus = corpus.filtered(cfg.min_count)?;
    if corpus.token_count() == 0 {
        return Err(SgnsError::EmptyCorpus);
    }
    let n = corpus.vocab.len();
    let dim = cfg.dim;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / dim as f64;
    let input: Vec<T> = (0..n * dim)
        .map(|_| T::of(init_rng.random_range(-half..half)))
        .collect();
    let table = build_negative_table(&corpus.counts, 1, cfg.unigram_power)?;
    let keep_prob = cfg.subsample.map(|t| {
        let total = corpus.token_count() as f64;
        corpus
            .counts
            .iter()
            .map(|&c| {
                let f = c as f64 / (t * total);
                ((f.sqrt() + 1.0) / f).min(1.0)
            })
            .collect()
    });
    let tokens = corpus.token_count();
    let shared = Shared {
        cfg,
        input: SharedMatrix::new(input, dim),
        output: SharedMatrix::new(vec![T::zero(); n * dim], dim),
        table,
        keep_prob,
        processed: AtomicUsize::new(0),
        total_work: tokens * cfg.epochs,
        failed: AtomicBool::new(false),
    };

    let threads = cfg.threads.min(corpus.sentences.len()).max(1);
    let chunk = corpus.sentences.len().div_ceil(threads);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let rng_for = |worker: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + (epoch * threads + worker) as u64);
            rng
        };
        let (loss, updates) = if threads == 1 {
            shared.run_worker(&corpus.sentences, &mut rng_for(0))
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = corpus
                    .sentences
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        let shared = &shared;
                        let mut rng = rng_for(w);
                        scope.spawn(move || shared.run_worker(part, &mut rng))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })
        };
        if shared.failed.load(Ordering::Relaxed) || !loss.is_finite() {
            return Err(SgnsError::NonFiniteLoss { epoch });
        }
        epoch_losses.push(loss / updates.max(1) as f64);
    }

    let matrix = shared.input.into_inner();
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(SgnsError::NonFiniteLoss {
            epoch: cfg.epochs.saturating_sub(1),
        });
    }
    let report = TrainReport {
        epoch_losses,
        vocab_size: n,
        tokens_per_epoch: tokens,
    };
    Ok((EmbeddingSet::new(corpus.vocab, matrix, dim)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::cosine_similarity;

    fn small_cfg() -> SgnsConfig {
        SgnsConfig {
            dim: 10,
            window: 2,
            epochs: 5,
            min_count: 1,
            ..SgnsConfig::for_text()
        }
    }

    #[test]
    fn corpus_orders_vocab_by_frequency() {
        let c = Corpus::read_text("b a c\na a\n\nc".as_bytes()).unwrap();
        assert_eq!(c.vocab().words(), ["a", "c", "b"]);
        assert_eq!(c.counts(), [3, 2, 1]);
        assert_eq!(c.sentences(), [vec![2, 0, 1], vec![0, 0], vec![1]]);
        assert_eq!(c.token_count(), 6);
    }

    #[test]
    fn negative_table_examples() {
        let t = build_negative_table(&[1, 1], 1, 0.75).unwrap();
        assert!((t.probability(0) - 0.5).abs() < 1e-15);
        assert!((t.probability(1) - 0.5).abs() < 1e-15);

        let t = build_negative_table(&[2, 1, 1], 1, 0.75).unwrap();
        let expect = 2f64.powf(0.75) / (2f64.powf(0.75) + 2.0);
        assert!((t.probability(0) - expect).abs() < 1e-15);
        assert!((t.probability(0) - 0.456786).abs() < 1e-6);
        let sum: f64 = (0..3).map(|i| t.probability(i)).sum();
        assert!((sum - 1.0).abs() < 1e-12);

        let t = build_negative_table(&[10, 3, 4], 4, 0.75).unwrap();
        assert_eq!(t.probability(1), 0.0);
        assert_eq!(t.len(), 2);

        assert!(matches!(
            build_negative_table(&[1, 2], 4, 0.75),
            Err(SgnsError::EmptyVocabulary)
        ));
    }

    #[test]
    fn pair_gradient_examples() {
        let g = sgns_pair_gradient(&[0.0, 0.0], &[1.0, 2.0], true);
        assert_eq!(g.grad_w, [-0.5, -1.0]);
        assert!((g.loss - std::f64::consts::LN_2).abs() < 1e-15);

        let g = sgns_pair_gradient(&[30.0f64], &[30.0], false);
        // coefficient saturates at 1
        assert!((g.grad_w[0] - 30.0).abs() < 1e-9);
        assert!((g.grad_c[0] - 30.0).abs() < 1e-9);
        assert!(g.loss.is_finite() && g.loss > 899.0);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = Corpus::read_text("a b c a b c".as_bytes()).unwrap();
        let cfg = SgnsConfig {
            epochs: 0,
            ..small_cfg()
        };
        let e: EmbeddingSet<f64> = train(&corpus, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let half = 0.5 / cfg.dim as f64;
        let init: Vec<f64> = (0..3 * cfg.dim)
            .map(|_| rng.random_range(-half..half))
            .collect();
        assert_eq!(e.matrix(), init.as_slice());
        assert!(e.matrix().iter().all(|x| x.abs() <= half));
    }

    #[test]
    fn config_and_corpus_errors() {
        let corpus = Corpus::read_text("a b".as_bytes()).unwrap();
        for cfg in [
            SgnsConfig {
                dim: 0,
                ..small_cfg()
            },
            SgnsConfig {
                window: 0,
                ..small_cfg()
            },
            SgnsConfig {
                negatives: 0,
                ..small_cfg()
            },
            SgnsConfig {
                lr_end: 0.0,
                ..small_cfg()
            },
            SgnsConfig {
                lr_start: 0.0001,
                lr_end: 0.01,
                ..small_cfg()
            },
            SgnsConfig {
                threads: 0,
                ..small_cfg()
            },
        ] {
            assert!(matches!(
                train::<f64>(&corpus, &cfg),
                Err(SgnsError::InvalidConfig(_))
            ));
        }
        let cfg = SgnsConfig {
            min_count: 2,
            ..small_cfg()
        };
        assert!(matches!(
            train::<f64>(&corpus, &cfg),
            Err(SgnsError::EmptyCorpus)
        ));
        let empty = Corpus::read_text("".as_bytes()).unwrap();
        assert!(matches!(
            train::<f64>(&empty, &small_cfg()),
            Err(SgnsError::EmptyCorpus)
        ));
    }

    #[test]
    fn min_count_drops_rare_words() {
        let corpus = Corpus::read_text("a a a a b b b c c c c c".as_bytes()).unwrap();
        let cfg = SgnsConfig {
            min_count: 4,
            ..small_cfg()
        };
        let e: EmbeddingSet<f64> = train(&corpus, &cfg).unwrap();
        assert_eq!(e.vocab().words(), ["c", "a"]);
    }

    #[test]
    fn huge_learning_rate_is_reported() {
        let corpus = Corpus::read_text("a b a b a b a b c d c d".repeat(50).as_bytes()).unwrap();
        let cfg = SgnsConfig {
            lr_start: 1e300,
            lr_end: 1e300,
            ..small_cfg()
        };
        assert!(matches!(
            train::<f64>(&corpus, &cfg),
            Err(SgnsError::NonFiniteLoss { .. })
        ));
    }

    /// Sentences where `a`/`b` always appear together, `c`/`d` likewise,
    /// and the two pairs never share a sentence.
    fn paired_corpus() -> Corpus {
        let lines: Vec<String> = (0..400)
            .map(|i| {
                if i % 2 == 0 {
                    "a b a b b a"
                } else {
                    "c d d c c d"
                }
                .to_string()
            })
            .collect();
        Corpus::from_sentences(lines.iter().map(|l| l.split(' '))).unwrap()
    }

    #[test]
    fn co_occurring_words_end_up_closer() {
        let corpus = paired_corpus();
        let e: EmbeddingSet<f64> = train(&corpus, &small_cfg()).unwrap();
        let cos =
            |x: &str, y: &str| cosine_similarity(e.get(x).unwrap(), e.get(y).unwrap()).unwrap();
        assert!(cos("a", "b") > cos("a", "c"));
        assert!(cos("c", "d") > cos("b", "d"));
    }

    #[test]
    fn deterministic_mode_is_reproducible() {
        let corpus = paired_corpus();
        let a: EmbeddingSet<f64> = train(&corpus, &small_cfg()).unwrap();
        let b: EmbeddingSet<f64> = train(&corpus, &small_cfg()).unwrap();
        assert_eq!(a, b);
        let c: EmbeddingSet<f64> = train(
            &corpus,
            &SgnsConfig {
                seed: 2,
                ..small_cfg()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn epoch_loss_decreases() {
        let corpus = paired_corpus();
        let (_, report) = train_with_report::<f64>(&corpus, &small_cfg()).unwrap();
        assert_eq!(report.epoch_losses.len(), 5);
        assert!(
            report.epoch_losses[4] < report.epoch_losses[0],
            "{:?}",
            report.epoch_losses
        );
    }

    #[test]
    fn parallel_mode_still_separates_pairs() {
        let corpus = paired_corpus();
        let cfg = SgnsConfig {
            threads: 4,
            ..small_cfg()
        };
        let e: EmbeddingSet<f32> = train(&corpus, &cfg).unwrap();
        let cos =
            |x: &str, y: &str| cosine_similarity(e.get(x).unwrap(), e.get(y).unwrap()).unwrap();
        assert!(cos("a", "b") > cos("a", "c"));
        assert!(cos("c", "d") > cos("b", "d"));
    }

    #[test]
    fn subsampling_keeps_training_functional() {
        let corpus = paired_corpus();
        let cfg = SgnsConfig {
            subsample: Some(0.1),
            ..small_cfg()
        };
        let e: EmbeddingSet<f64> = train(&corpus, &cfg).unwrap();
        assert_eq!(e.len(), 4);
    }
}
