//! Neighborhood diagnostics: how tightly each word sits among its nearest
//! neighbors, and how stable neighborhoods are across embedding samples.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knn::NeighborList;
use crate::scalar::Real;

/// Lowest pooled neighbor similarity at the minimal end, first-order space,
/// observed on a large news corpus with k = 10 and m = 10. Reference only.
pub const REFERENCE_FIRST_ORDER_MIN: f64 = 0.24;
/// The same statistic in the second-order space derived from it.
pub const REFERENCE_SECOND_ORDER_MIN: f64 = 0.75;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown word id {0}")]
    UnknownWord(usize),
    #[error("word id {0} has no neighbors")]
    NoNeighbors(usize),
    #[error("vocabulary of {n} words is too small for {m} extremal words per end")]
    VocabTooSmall { n: usize, m: usize },
    #[error("sample {0} has a different vocabulary than sample 0")]
    VocabMismatch(usize),
    #[error("at least one neighbor list is required")]
    NoSamples,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Mean of the stored similarities between `v` and its neighbors.
pub fn mean_nn_similarity<T: Real>(nn: &NeighborList<T>, v: usize) -> Result<T, AnalysisError> {
    if v >= nn.len() {
        return Err(AnalysisError::UnknownWord(v));
    }
    let list = nn.neighbors(v);
    if list.is_empty() {
        return Err(AnalysisError::NoNeighbors(v));
    }
    let sum: T = list.iter().map(|n| n.similarity).sum();
    Ok(sum / T::of(list.len() as f64))
}

/// Five-number summary; quartiles interpolate linearly between order
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of<T: Real>(values: &[T]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Summary {
            count: v.len(),
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport<T> {
    pub k: usize,
    /// Mean neighbor similarity of every word, by word id.
    pub means: Vec<T>,
    /// The `m` words with the highest mean, best first.
    pub max_words: Vec<usize>,
    /// The `m` words with the lowest mean, lowest first.
    pub min_words: Vec<usize>,
    /// Neighbor similarities of `max_words`, concatenated in that order.
    pub max_pool: Vec<T>,
    pub min_pool: Vec<T>,
}

impl<T: Real> DensityReport<T> {
    pub fn max_summary(&self) -> Option<Summary> {
        Summary::of(&self.max_pool)
    }

    pub fn min_summary(&self) -> Option<Summary> {
        Summary::of(&self.min_pool)
    }
}

/// Mean similarity per word, plus the pooled neighbor similarities of the
/// `m` words at each extreme. Ties go to the lower word id.
pub fn density_report<T: Real>(
    nn: &NeighborList<T>,
    m: usize,
) -> Result<DensityReport<T>, AnalysisError> {
    let n = nn.len();
    if n < 2 * m {
        return Err(AnalysisError::VocabTooSmall { n, m });
    }
    let means = (0..n)
        .map(|v| mean_nn_similarity(nn, v))
        .collect::<Result<Vec<T>, _>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
    let max_words: Vec<usize> = order[..m].to_vec();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap().then(a.cmp(&b)));
    let min_words: Vec<usize> = order[..m].to_vec();
    let pool = |words: &[usize]| -> Vec<T> {
        words
            .iter()
            .flat_map(|&v| nn.neighbors(v).iter().map(|x| x.similarity))
            .collect()
    };
    Ok(DensityReport {
        k: nn.k(),
        max_pool: pool(&max_words),
        min_pool: pool(&min_words),
        means,
        max_words,
        min_words,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    /// In every sample.
    All,
    /// In more than one sample but not all.
    Some,
    /// In exactly one of several samples.
    One,
}

impl Membership {
    pub fn of(count: usize, samples: usize) -> Membership {
        if count == samples {
            Membership::All
        } else if count == 1 {
            Membership::One
        } else {
            Membership::Some
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub word: usize,
    pub samples: usize,
    /// `(neighbor id, number of samples containing it)`, most shared first,
    /// then by id.
    pub members: Vec<(usize, usize)>,
}

impl OverlapRow {
    pub fn count(&self, label: Membership) -> usize {
        self.members
            .iter()
            .filter(|&&(_, c)| Membership::of(c, self.samples) == label)
            .count()
    }

    pub fn union_size(&self) -> usize {
        self.members.len()
    }
}

fn check_samples<T: Real>(nns: &[NeighborList<T>]) -> Result<(), AnalysisError> {
    let first = nns.first().ok_or(AnalysisError::NoSamples)?;
    match nns.iter().position(|nn| nn.vocab() != first.vocab()) {
        Some(i) => Err(AnalysisError::VocabMismatch(i)),
        None => Ok(()),
    }
}

/// Labels each neighbor in the union of `v`'s lists with how many samples
/// contain it.
pub fn neighborhood_overlap<T: Real>(
    nns: &[NeighborList<T>],
    v: usize,
) -> Result<OverlapRow, AnalysisError> {
    check_samples(nns)?;
    if v >= nns[0].len() {
        return Err(AnalysisError::UnknownWord(v));
    }
    Ok(overlap_row(nns, v))
}

fn overlap_row<T: Real>(nns: &[NeighborList<T>], v: usize) -> OverlapRow {
    let mut ids: Vec<usize> = nns
        .iter()
        .flat_map(|nn| nn.neighbors(v).iter().map(|x| x.id))
        .collect();
    ids.sort_unstable();
    let mut members: Vec<(usize, usize)> = Vec::new();
    for id in ids {
        match members.last_mut() {
            Some(last) if last.0 == id => last.1 += 1,
            _ => members.push((id, 1)),
        }
    }
    members.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    OverlapRow {
        word: v,
        samples: nns.len(),
        members,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub samples: usize,
    pub words: usize,
    pub mean_union_size: f64,
    pub mean_all: f64,
    pub mean_some: f64,
    pub mean_one: f64,
    /// Jaccard index of two samples' lists for the same word, averaged over
    /// sample pairs and words. 1 with a single sample.
    pub mean_pairwise_jaccard: f64,
}

pub fn overlap_rows<T: Real>(nns: &[NeighborList<T>]) -> Result<Vec<OverlapRow>, AnalysisError> {
    check_samples(nns)?;
    Ok((0..nns[0].len()).map(|v| overlap_row(nns, v)).collect())
}

pub fn overlap_summary<T: Real>(nns: &[NeighborList<T>]) -> Result<OverlapSummary, AnalysisError> {
    let rows = overlap_rows(nns)?;
    let words = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&OverlapRow) -> usize| rows.iter().map(f).sum::<usize>() as f64 / words;
    let mut jaccard = 0.0;
    let mut pairs = 0usize;
    for v in 0..rows.len() {
        for i in 0..nns.len() {
            for j in i + 1..nns.len() {
                let a: Vec<usize> = nns[i].neighbors(v).iter().map(|x| x.id).collect();
                let b: Vec<usize> = nns[j].neighbors(v).iter().map(|x| x.id).collect();
                let inter = a.iter().filter(|x| b.contains(x)).count();
                let union = a.len() + b.len() - inter;
                jaccard += if union == 0 {
                    1.0
                } else {
                    inter as f64 / union as f64
                };
                pairs += 1;
            }
        }
    }
    Ok(OverlapSummary {
        samples: nns.len(),
        words: rows.len(),
        mean_union_size: mean(&|r| r.union_size()),
        mean_all: mean(&|r| r.count(Membership::All)),
        mean_some: mean(&|r| r.count(Membership::Some)),
        mean_one: mean(&|r| r.count(Membership::One)),
        mean_pairwise_jaccard: if pairs == 0 {
            1.0
        } else {
            jaccard / pairs as f64
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndStats {
    pub min_end: Option<Summary>,
    pub max_end: Option<Summary>,
}

impl EndStats {
    pub fn of<T: Real>(r: &DensityReport<T>) -> Self {
        EndStats {
            min_end: r.min_summary(),
            max_end: r.max_summary(),
        }
    }
}

/// Second minus first, for each statistic present in both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub min_end_min: Option<f64>,
    pub min_end_median: Option<f64>,
    pub max_end_min: Option<f64>,
    pub max_end_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    pub first: EndStats,
    pub second: EndStats,
    pub deltas: Deltas,
    pub reference_first_min: f64,
    pub reference_second_min: f64,
}

pub fn compare_density<T: Real>(
    first: &DensityReport<T>,
    second: &DensityReport<T>,
) -> DensityComparison {
    let (a, b) = (EndStats::of(first), EndStats::of(second));
    let diff =
        |x: Option<Summary>, y: Option<Summary>, f: fn(&Summary) -> f64| Some(f(&y?) - f(&x?));
    DensityComparison {
        deltas: Deltas {
            min_end_min: diff(a.min_end, b.min_end, |s| s.min),
            min_end_median: diff(a.min_end, b.min_end, |s| s.median),
            max_end_min: diff(a.max_end, b.max_end, |s| s.min),
            max_end_median: diff(a.max_end, b.max_end, |s| s.median),
        },
        first: a,
        second: b,
        reference_first_min: REFERENCE_FIRST_ORDER_MIN,
        reference_second_min: REFERENCE_SECOND_ORDER_MIN,
    }
}

impl DensityComparison {
    pub fn write_summary<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let fmt = |s: Option<Summary>| match s {
            Some(s) => format!(
                "n={} min={:.4} q1={:.4} median={:.4} q3={:.4} max={:.4}",
                s.count, s.min, s.q1, s.median, s.q3, s.max
            ),
            None => "empty".to_string(),
        };
        writeln!(out, "first-order  minimal end: {}", fmt(self.first.min_end))?;
        writeln!(out, "first-order  maximal end: {}", fmt(self.first.max_end))?;
        writeln!(
            out,
            "second-order minimal end: {}",
            fmt(self.second.min_end)
        )?;
        writeln!(
            out,
            "second-order maximal end: {}",
            fmt(self.second.max_end)
        )?;
        if let Some(d) = self.deltas.min_end_min {
            writeln!(out, "minimal-end lowest similarity delta: {d:+.4}")?;
        }
        if let Some(d) = self.deltas.min_end_median {
            writeln!(out, "minimal-end median delta: {d:+.4}")?;
        }
        writeln!(
            out,
            "large-corpus reference lowest similarity: first-order {:.2}, second-order {:.2}",
            self.reference_first_min, self.reference_second_min
        )
    }
}

/// Writes `<name>_density.tsv` (`word \t mean`), `<name>_extremal.tsv`
/// (`end \t word \t neighbor \t similarity`) and `<name>_summary.txt`.
pub fn write_density_files<T: Real>(
    dir: &Path,
    name: &str,
    report: &DensityReport<T>,
    nn: &NeighborList<T>,
) -> Result<(), AnalysisError> {
    fs::create_dir_all(dir)?;
    let words = nn.vocab().words();
    let mut out = Vec::new();
    for (v, mean) in report.means.iter().enumerate() {
        writeln!(out, "{}\t{:.6}", words[v], mean)?;
    }
    fs::write(dir.join(format!("{name}_density.tsv")), out)?;

    let mut out = Vec::new();
    for (end, list) in [("max", &report.max_words), ("min", &report.min_words)] {
        for &v in list {
            for nb in nn.neighbors(v) {
                writeln!(
                    out,
                    "{end}\t{}\t{}\t{:.6}",
                    words[v], words[nb.id], nb.similarity
                )?;
            }
        }
    }
    fs::write(dir.join(format!("{name}_extremal.tsv")), out)?;

    let mut out = Vec::new();
    writeln!(out, "k={} words={}", report.k, report.means.len())?;
    let ends = [
        ("maximal", &report.max_words, report.max_summary()),
        ("minimal", &report.min_words, report.min_summary()),
    ];
    for (end, list, summary) in ends {
        let names: Vec<&str> = list.iter().map(|&v| words[v].as_str()).collect();
        writeln!(out, "{end} words: {}", names.join(" "))?;
        if let Some(s) = summary {
            writeln!(
                out,
                "{end} pool: n={} min={:.4} q1={:.4} median={:.4} q3={:.4} max={:.4}",
                s.count, s.min, s.q1, s.median, s.q3, s.max
            )?;
        }
    }
    fs::write(dir.join(format!("{name}_summary.txt")), out)?;
    Ok(())
}

/// Gnuplot data: one index block per `(space, end)`, each line a sorted
/// pooled similarity. Blocks are separated by two blank lines.
pub fn write_gnuplot_data<T: Real, W: Write>(
    out: &mut W,
    spaces: &[(&str, &DensityReport<T>)],
) -> io::Result<()> {
    for (name, report) in spaces {
        for (end, pool) in [("max", &report.max_pool), ("min", &report.min_pool)] {
            let mut v: Vec<f64> = pool.iter().map(|x| x.as_f64()).collect();
            v.sort_by(f64::total_cmp);
            writeln!(out, "# {name} {end}")?;
            for x in v {
                writeln!(out, "{x:.6}")?;
            }
            writeln!(out)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed_io::{EmbeddingSet, Vocabulary};
    use crate::knn::{all_neighbors, cosine_similarity, Neighbor};
    use std::sync::Arc;

    fn vocab(n: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::new((0..n).map(|i| format!("w{i}"))).unwrap())
    }

    fn ids_list(k: usize, v: Arc<Vocabulary>, lists: &[&[usize]]) -> NeighborList<f64> {
        let entries = lists
            .iter()
            .map(|l| {
                l.iter()
                    .map(|&id| Neighbor {
                        id,
                        similarity: 0.5,
                    })
                    .collect()
            })
            .collect();
        NeighborList::from_entries(k, v, entries).unwrap()
    }

    fn gaussian_set(n: usize, d: usize, seed: u64) -> EmbeddingSet<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = (0..n * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        EmbeddingSet::new((*vocab(n)).clone(), m, d).unwrap()
    }

    #[test]
    fn mean_examples() {
        let v = vocab(3);
        let nn = NeighborList::from_entries(
            2,
            v,
            vec![
                vec![
                    Neighbor {
                        id: 1,
                        similarity: 1.0,
                    },
                    Neighbor {
                        id: 2,
                        similarity: 0.5,
                    },
                ],
                vec![],
                vec![Neighbor {
                    id: 0,
                    similarity: 0.25,
                }],
            ],
        )
        .unwrap();
        assert_eq!(mean_nn_similarity(&nn, 0).unwrap(), 0.75);
        assert!(matches!(
            mean_nn_similarity(&nn, 1),
            Err(AnalysisError::NoNeighbors(1))
        ));
        assert!(matches!(
            mean_nn_similarity(&nn, 3),
            Err(AnalysisError::UnknownWord(3))
        ));
    }

    #[test]
    fn identical_neighbors_have_mean_one() {
        let vocab = Vocabulary::new(["a", "b", "c"]).unwrap();
        let e = EmbeddingSet::new(vocab, vec![0.3f64, 0.4, 0.3, 0.4, 0.3, 0.4], 2)
            .unwrap()
            .normalize_rows()
            .unwrap();
        let nn = all_neighbors(&e, 2).unwrap();
        assert!((mean_nn_similarity(&nn, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn means_match_recomputation_from_raw_vectors() {
        let raw = gaussian_set(120, 12, 4);
        let nn = all_neighbors(&raw.clone().normalize_rows().unwrap(), 10).unwrap();
        for v in 0..raw.len() {
            let direct: f64 = nn
                .neighbors(v)
                .iter()
                .map(|x| cosine_similarity(raw.row(v), raw.row(x.id)).unwrap())
                .sum::<f64>()
                / 10.0;
            assert!((mean_nn_similarity(&nn, v).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn report_pools_m_times_k_stored_values() {
        let e = gaussian_set(200, 10, 8).normalize_rows().unwrap();
        let nn = all_neighbors(&e, 10).unwrap();
        let r = density_report(&nn, 10).unwrap();
        assert_eq!(r.max_pool.len(), 100);
        assert_eq!(r.min_pool.len(), 100);
        for (i, &v) in r.max_words.iter().enumerate() {
            let stored: Vec<f64> = nn.neighbors(v).iter().map(|x| x.similarity).collect();
            assert_eq!(&r.max_pool[i * 10..(i + 1) * 10], stored.as_slice());
        }
        assert!(r
            .max_pool
            .iter()
            .chain(&r.min_pool)
            .all(|s| (-1.0..=1.0).contains(s)));
        let lowest_max = r
            .max_words
            .iter()
            .map(|&v| r.means[v])
            .fold(f64::MAX, f64::min);
        assert!(r
            .means
            .iter()
            .enumerate()
            .all(|(v, &m)| r.max_words.contains(&v) || m <= lowest_max));
        let highest_min = r
            .min_words
            .iter()
            .map(|&v| r.means[v])
            .fold(f64::MIN, f64::max);
        assert!(r
            .means
            .iter()
            .enumerate()
            .all(|(v, &m)| r.min_words.contains(&v) || m >= highest_min));
    }

    #[test]
    fn clones_land_at_the_maximal_end() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let d = 16;
        let base: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut m = Vec::new();
        // 6 near-copies of one vector, then 60 random words
        for _ in 0..6 {
            m.extend(base.iter().map(|x| {
                x + 1e-3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            }));
        }
        for _ in 0..60 * d {
            m.push(StandardNormal.sample(&mut rng));
        }
        let e = EmbeddingSet::new((*vocab(66)).clone(), m, d)
            .unwrap()
            .normalize_rows()
            .unwrap();
        let nn = all_neighbors(&e, 5).unwrap();
        let r = density_report(&nn, 6).unwrap();
        let mut top = r.max_words.clone();
        top.sort();
        assert_eq!(top, [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn degenerate_reports() {
        let nn = ids_list(1, vocab(3), &[&[1], &[0], &[0]]);
        let r = density_report(&nn, 0).unwrap();
        assert!(r.max_pool.is_empty() && r.min_pool.is_empty());
        assert_eq!(r.max_summary(), None);
        assert!(matches!(
            density_report(&nn, 2),
            Err(AnalysisError::VocabTooSmall { n: 3, m: 2 })
        ));
    }

    #[test]
    fn summary_quartiles() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        let s = Summary::of(&[1.0, 2.0]).unwrap();
        assert_eq!(s.median, 1.5);
        assert_eq!(Summary::of::<f64>(&[]), None);
    }

    #[test]
    fn overlap_examples() {
        // a..f = 1..6, query word 0
        let v = vocab(7);
        let s1 = ids_list(3, v.clone(), &[&[1, 2, 3], &[], &[], &[], &[], &[], &[]]);
        let s2 = ids_list(3, v.clone(), &[&[1, 2, 4], &[], &[], &[], &[], &[], &[]]);
        let s3 = ids_list(3, v.clone(), &[&[1, 5, 6], &[], &[], &[], &[], &[], &[]]);
        let row = neighborhood_overlap(&[s1.clone(), s2.clone(), s3], 0).unwrap();
        assert_eq!(
            row.members,
            [(1, 3), (2, 2), (3, 1), (4, 1), (5, 1), (6, 1)]
        );
        assert_eq!(row.count(Membership::All), 1);
        assert_eq!(row.count(Membership::Some), 1);
        assert_eq!(row.count(Membership::One), 4);

        let same = neighborhood_overlap(&[s1.clone(), s1.clone(), s1.clone()], 0).unwrap();
        assert_eq!(same.count(Membership::All), 3);
        assert_eq!(same.union_size(), 3);

        let d1 = ids_list(2, v.clone(), &[&[1, 2], &[], &[], &[], &[], &[], &[]]);
        let d2 = ids_list(2, v.clone(), &[&[3, 4], &[], &[], &[], &[], &[], &[]]);
        let row = neighborhood_overlap(&[d1, d2], 0).unwrap();
        assert!(row.members.iter().all(|&(_, c)| c == 1));
        assert_eq!(row.count(Membership::One), 4);

        let other = ids_list(3, vocab(8), &[&[1], &[], &[], &[], &[], &[], &[], &[]]);
        assert!(matches!(
            neighborhood_overlap(&[s2, other], 0),
            Err(AnalysisError::VocabMismatch(1))
        ));
    }

    #[test]
    fn overlap_partition_covers_union() {
        let samples: Vec<NeighborList<f64>> = (0..3)
            .map(|s| all_neighbors(&gaussian_set(60, 3, s).normalize_rows().unwrap(), 5).unwrap())
            .collect();
        for row in overlap_rows(&samples).unwrap() {
            let cells = row.count(Membership::All)
                + row.count(Membership::Some)
                + row.count(Membership::One);
            assert_eq!(cells, row.union_size());
        }
        let summary = overlap_summary(&samples).unwrap();
        assert!(summary.mean_pairwise_jaccard > 0.0 && summary.mean_pairwise_jaccard < 1.0);
        let same = overlap_summary(&[samples[0].clone(), samples[0].clone()]).unwrap();
        assert_eq!(same.mean_pairwise_jaccard, 1.0);
        assert_eq!(same.mean_all, 5.0);
    }

    #[test]
    fn relabeling_preserves_aggregates() {
        let e = gaussian_set(90, 8, 31);
        let n = e.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        let words: Vec<String> = perm.iter().map(|&i| e.vocab().words()[i].clone()).collect();
        let m: Vec<f64> = perm.iter().flat_map(|&i| e.row(i).to_vec()).collect();
        let p = EmbeddingSet::new(Vocabulary::new(words).unwrap(), m, e.dim()).unwrap();
        let ra = density_report(
            &all_neighbors(&e.normalize_rows().unwrap(), 10).unwrap(),
            10,
        )
        .unwrap();
        let rb = density_report(
            &all_neighbors(&p.normalize_rows().unwrap(), 10).unwrap(),
            10,
        )
        .unwrap();
        assert_eq!(ra.max_summary(), rb.max_summary());
        assert_eq!(ra.min_summary(), rb.min_summary());
        let c = compare_density(&ra, &rb);
        assert_eq!(c.deltas.min_end_min, Some(0.0));
        assert_eq!(c.deltas.max_end_median, Some(0.0));
    }

    #[test]
    fn writers_emit_files() {
        let e = gaussian_set(40, 4, 2).normalize_rows().unwrap();
        let nn = all_neighbors(&e, 3).unwrap();
        let r = density_report(&nn, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_density_files(dir.path(), "first", &r, &nn).unwrap();
        let dens = fs::read_to_string(dir.path().join("first_density.tsv")).unwrap();
        assert_eq!(dens.lines().count(), 40);
        let ext = fs::read_to_string(dir.path().join("first_extremal.tsv")).unwrap();
        assert_eq!(ext.lines().count(), 12);
        let mut buf = Vec::new();
        write_gnuplot_data(&mut buf, &[("first", &r)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 2);
        let mut buf = Vec::new();
        compare_density(&r, &r).write_summary(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("+0.0000"));
    }
}
