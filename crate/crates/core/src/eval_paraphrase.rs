//! Linear paraphrase recognition over additive sentence vectors.
//!
//! A sentence is the sum of its in-vocabulary word vectors. A pair becomes
//! either the concatenation `[a; b]` or the difference `a - b`, and an
//! L2-regularized logistic regression is fit with the objective
//!
//! ```text
//! 0.5 * |w|^2 + C * sum_i ln(1 + exp(-y_i (w . x_i + b)))
//! ```
//!
//! where `y_i` is +1 for "equivalent" and -1 otherwise. `C` scales the loss,
//! not the regularizer, and the intercept `b` is not penalized.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed_io::EmbeddingSet;
use crate::scalar::{dot, sigmoid, softplus, Real};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("feature vectors differ in length: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("example {0} has a non-finite feature")]
    NonFiniteFeature(usize),
    #[error("{0} predictions for {1} gold labels")]
    LengthMismatch(usize, usize),
    #[error("no training examples")]
    EmptyData,
    #[error("cost must be positive and finite")]
    InvalidCost,
    #[error("line {0}: malformed row")]
    MalformedRow(usize),
    #[error("unknown pair feature mode {0:?}; expected concat or subtract")]
    UnknownMode(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub sentence_a: Vec<String>,
    pub sentence_b: Vec<String>,
    /// True for "equivalent".
    pub label: bool,
}

/// Lowercases, splits on whitespace and strips leading and trailing
/// non-alphanumeric characters from every token; tokens left empty are
/// dropped.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// [`tokenize`].
    #[default]
    Basic,
    /// Whitespace split only.
    Whitespace,
}

impl Tokenizer {
    pub fn tokenize(self, sentence: &str) -> Vec<String> {
        match self {
            Tokenizer::Basic => tokenize(sentence),
            Tokenizer::Whitespace => sentence.split_whitespace().map(str::to_string).collect(),
        }
    }
}

/// Parses the paraphrase corpus TSV: a header line, then
/// `label \t id1 \t id2 \t sentence1 \t sentence2` rows with label 1 for
/// equivalent pairs and 0 otherwise.
pub fn read_msrpc<R: BufRead>(reader: R) -> Result<Vec<SentencePair>, EvalError> {
    read_msrpc_with(reader, Tokenizer::Basic)
}

pub fn read_msrpc_with<R: BufRead>(
    reader: R,
    tokenizer: Tokenizer,
) -> Result<Vec<SentencePair>, EvalError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(EvalError::MalformedRow(line_no));
        }
        let label = match fields[0].trim() {
            "1" => true,
            "0" => false,
            _ => return Err(EvalError::MalformedRow(line_no)),
        };
        pairs.push(SentencePair {
            sentence_a: tokenizer.tokenize(fields[3]),
            sentence_b: tokenizer.tokenize(fields[4]),
            label,
        });
    }
    Ok(pairs)
}

pub fn ingest_msrpc(path: impl AsRef<Path>) -> Result<Vec<SentencePair>, EvalError> {
    read_msrpc(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition<T> {
    pub vector: Vec<T>,
    /// Tokens found in the vocabulary.
    pub in_vocab: usize,
}

impl<T> Composition<T> {
    pub fn all_oov(&self) -> bool {
        self.in_vocab == 0
    }
}

/// Sum of the vectors of in-vocabulary tokens; unknown tokens are skipped.
pub fn compose_sentence<T: Real, S: AsRef<str>>(
    e: &EmbeddingSet<T>,
    tokens: &[S],
) -> Composition<T> {
    let mut vector = vec![T::zero(); e.dim()];
    let mut in_vocab = 0;
    for row in tokens.iter().filter_map(|t| e.get(t.as_ref())) {
        for (acc, &x) in vector.iter_mut().zip(row) {
            *acc += x;
        }
        in_vocab += 1;
    }
    Composition { vector, in_vocab }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Concat,
    Subtract,
}

impl FromStr for FeatureMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concat" => Ok(FeatureMode::Concat),
            "subtract" => Ok(FeatureMode::Subtract),
            other => Err(EvalError::UnknownMode(other.to_string())),
        }
    }
}

pub fn pair_features<T: Real>(va: &[T], vb: &[T], mode: FeatureMode) -> Result<Vec<T>, EvalError> {
    if va.len() != vb.len() {
        return Err(EvalError::DimMismatch(va.len(), vb.len()));
    }
    Ok(match mode {
        FeatureMode::Concat => va.iter().chain(vb).copied().collect(),
        FeatureMode::Subtract => va.iter().zip(vb).map(|(&a, &b)| a - b).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub cost: f64,
}

impl<T: Real> LogRegModel<T> {
    /// Probability of the positive class.
    pub fn probability(&self, x: &[T]) -> T {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    pub fn predict(&self, x: &[T], threshold: f64) -> bool {
        self.probability(x).as_f64() >= threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the gradient norm falls to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
    pub converged: bool,
}

fn signed(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

/// Regularized logistic objective at `(weights, bias)`.
pub fn logreg_objective<T: Real>(
    weights: &[T],
    bias: T,
    features: &[Vec<T>],
    labels: &[bool],
    cost: f64,
) -> T {
    let loss: T = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| softplus(-T::of(signed(y)) * (dot(weights, x) + bias)))
        .sum();
    T::of(0.5) * dot(weights, weights) + T::of(cost) * loss
}

/// Gradient of [`logreg_objective`] as `(d/dweights, d/dbias)`.
pub fn logreg_gradient<T: Real>(
    weights: &[T],
    bias: T,
    features: &[Vec<T>],
    labels: &[bool],
    cost: f64,
) -> (Vec<T>, T) {
    let mut gw = weights.to_vec();
    let mut gb = T::zero();
    let c = T::of(cost);
    for (x, &y) in features.iter().zip(labels) {
        let y = T::of(signed(y));
        let coef = -c * y * sigmoid(-y * (dot(weights, x) + bias));
        gb += coef;
        for (g, &xi) in gw.iter_mut().zip(x) {
            *g += coef * xi;
        }
    }
    (gw, gb)
}

fn check_training_data<T: Real>(
    features: &[Vec<T>],
    labels: &[bool],
    cost: f64,
) -> Result<usize, EvalError> {
    if features.len() != labels.len() {
        return Err(EvalError::LengthMismatch(features.len(), labels.len()));
    }
    let first = features.first().ok_or(EvalError::EmptyData)?;
    if !(cost.is_finite() && cost > 0.0) {
        return Err(EvalError::InvalidCost);
    }
    for (i, x) in features.iter().enumerate() {
        if x.len() != first.len() {
            return Err(EvalError::DimMismatch(first.len(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteFeature(i));
        }
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(EvalError::SingleClass);
    }
    Ok(first.len())
}

pub fn train_logreg<T: Real>(
    features: &[Vec<T>],
    labels: &[bool],
    cost: f64,
) -> Result<LogRegModel<T>, EvalError> {
    train_logreg_with(features, labels, cost, SolverOptions::default()).map(|(m, _)| m)
}

/// Batch gradient descent from zero with a backtracking line search.
pub fn train_logreg_with<T: Real>(
    features: &[Vec<T>],
    labels: &[bool],
    cost: f64,
    opts: SolverOptions,
) -> Result<(LogRegModel<T>, SolverReport), EvalError> {
    let dim = check_training_data(features, labels, cost)?;
    let objective = |w: &[T], b: T| logreg_objective(w, b, features, labels, cost);
    let mut w = vec![T::zero(); dim];
    let mut b = T::zero();
    let mut f = objective(&w, b);
    let mut step = T::one();
    let mut report = SolverReport {
        iterations: 0,
        gradient_norm: f64::INFINITY,
        objective: f.as_f64(),
        converged: false,
    };
    let half = T::of(0.5);
    for it in 0..=opts.max_iterations {
        let (gw, gb) = logreg_gradient(&w, b, features, labels, cost);
        let g2 = dot(&gw, &gw) + gb * gb;
        report.iterations = it;
        report.gradient_norm = g2.sqrt().as_f64();
        if report.gradient_norm <= opts.tolerance {
            report.converged = true;
            break;
        }
        if it == opts.max_iterations {
            break;
        }
        // Armijo backtracking; the step carries over, doubled, to the next
        // iteration
        let mut accepted = false;
        for _ in 0..80 {
            let w_new: Vec<T> = w.iter().zip(&gw).map(|(&wi, &gi)| wi - step * gi).collect();
            let b_new = b - step * gb;
            let f_new = objective(&w_new, b_new);
            if f_new <= f - half * step * g2 {
                w = w_new;
                b = b_new;
                f = f_new;
                accepted = true;
                break;
            }
            step *= half;
        }
        if !accepted {
            // no representable decrease left
            break;
        }
        step *= T::of(2.0);
    }
    report.objective = f.as_f64();
    Ok((
        LogRegModel {
            weights: w,
            bias: b,
            cost,
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    /// Set when a metric's denominator was zero and it was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

/// Precision, recall, F1 and accuracy with "equivalent" (`true`) as the
/// positive class.
pub fn evaluate_prf(predictions: &[bool], gold: &[bool]) -> Result<PrfReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), gold.len()));
    }
    let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fneg);
    let (f1, f1_undefined) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    let (accuracy, _) = ratio(tp + tn, gold.len());
    Ok(PrfReport {
        precision,
        recall,
        f1,
        accuracy,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
        true_negatives: tn,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    })
}

/// Feature vectors and labels for a set of pairs, plus the number of
/// sentences with no in-vocabulary token.
pub fn build_features<T: Real>(
    e: &EmbeddingSet<T>,
    pairs: &[SentencePair],
    mode: FeatureMode,
) -> (Vec<Vec<T>>, Vec<bool>, usize) {
    let rows: Vec<(Vec<T>, usize)> = pairs
        .par_iter()
        .map(|p| {
            let a = compose_sentence(e, &p.sentence_a);
            let b = compose_sentence(e, &p.sentence_b);
            let oov = a.all_oov() as usize + b.all_oov() as usize;
            let x =
                pair_features(&a.vector, &b.vector, mode).expect("compositions share a dimension");
            (x, oov)
        })
        .collect();
    let oov = rows.iter().map(|r| r.1).sum();
    let labels = pairs.iter().map(|p| p.label).collect();
    (rows.into_iter().map(|r| r.0).collect(), labels, oov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: FeatureMode,
    pub cost: f64,
    pub threshold: f64,
    pub embedding_dim: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub train_positive_fraction: f64,
    pub all_oov_sentences: usize,
    pub solver: SolverReport,
    pub train: PrfReport,
    pub test: PrfReport,
}

/// Fits on `train` and scores both splits.
pub fn run_paraphrase_eval<T: Real>(
    e: &EmbeddingSet<T>,
    train: &[SentencePair],
    test: &[SentencePair],
    mode: FeatureMode,
    cost: f64,
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    let (x_train, y_train, oov_train) = build_features(e, train, mode);
    let (x_test, y_test, oov_test) = build_features(e, test, mode);
    let (model, solver) = train_logreg_with(&x_train, &y_train, cost, SolverOptions::default())?;
    let predict =
        |xs: &[Vec<T>]| -> Vec<bool> { xs.iter().map(|x| model.predict(x, threshold)).collect() };
    Ok(EvalReport {
        mode,
        cost,
        threshold,
        embedding_dim: e.dim(),
        train_pairs: train.len(),
        test_pairs: test.len(),
        train_positive_fraction: y_train.iter().filter(|&&y| y).count() as f64
            / y_train.len().max(1) as f64,
        all_oov_sentences: oov_train + oov_test,
        solver,
        train: evaluate_prf(&predict(&x_train), &y_train)?,
        test: evaluate_prf(&predict(&x_test), &y_test)?,
    })
}
