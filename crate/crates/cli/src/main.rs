use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use second_order::analysis::{
    compare_density, density_report, overlap_rows, overlap_summary, write_density_files,
    write_gnuplot_data, DensityReport, Membership,
};
use second_order::embed_io::{load_embeddings, save_embeddings, EmbedIoError, EmbeddingSet};
use second_order::eval_paraphrase::{
    read_msrpc_with, run_paraphrase_eval, EvalError, FeatureMode, Tokenizer,
};
use second_order::graph::{induce_multi, WeightedDigraph};
use second_order::knn::{all_neighbors, KnnError, NeighborList};
use second_order::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use second_order::scalar::Real;
use second_order::sgns::{train_with_report, Corpus, SgnsConfig, SgnsError};
use second_order::walks::{generate_corpus, WalkConfig, WalkError};

/// Environment variable read by `--threads`.
const THREADS_ENV: &str = "SECOND_ORDER_THREADS";

#[derive(Parser)]
#[command(
    name = "second-order",
    version,
    about = "Second-order word embeddings from nearest-neighbor graphs",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure."
)]
struct Cli {
    /// Worker threads for parallel stages [default: all cores]
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    /// Scalar type for vectors
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    precision: Precision,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Exact cosine k-nearest-neighbor lists of an embedding file
    Knn(KnnArgs),
    /// Build the weighted k-NN graph from one or more neighbor-list files
    Induce(InduceArgs),
    /// Generate node2vec walks over a graph
    Walk(WalkArgs),
    /// Train skip-gram embeddings on a whitespace-tokenized corpus
    Train(TrainArgs),
    /// Run every stage from first-order embeddings to the density comparison
    ///
    /// Flags override values read from --config. Unset flags keep the file
    /// value, or the default shown.
    Pipeline(PipelineArgs),
    /// Neighborhood diagnostics
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Paraphrase recognition with additive sentence vectors
    EvalParaphrase(EvalArgs),
}

#[derive(Args)]
struct KnnArgs {
    /// Embeddings in word2vec text format
    #[arg(long)]
    emb: PathBuf,
    /// Neighbors per word
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Output TSV: word, neighbor, similarity
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct InduceArgs {
    /// Neighbor-list TSV, one per sample; all must cover the same words
    #[arg(long = "nn", required = true, num_args = 1..)]
    nn: Vec<PathBuf>,
    /// Output graph TSV
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct WalkArgs {
    /// Graph TSV written by `induce`
    #[arg(long)]
    graph: PathBuf,
    /// Return parameter
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// In-out parameter
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Nodes per walk, start included
    #[arg(long, default_value_t = 80)]
    walk_length: usize,
    /// Walks started from each node
    #[arg(long, default_value_t = 10)]
    walks_per_node: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// One walk per line
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// One sentence per line
    #[arg(long)]
    corpus: PathBuf,
    /// Output embeddings, word2vec text format
    #[arg(long)]
    output: PathBuf,
    /// Vector dimension
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Maximum context offset
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Passes over the corpus
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// Initial learning rate
    #[arg(long, default_value_t = 0.025)]
    lr_start: f64,
    /// Final learning rate, reached linearly
    #[arg(long, default_value_t = 0.0001)]
    lr_end: f64,
    /// Drop words seen fewer times
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Frequent-word subsampling threshold, e.g. 1e-3 [default: off]
    #[arg(long)]
    subsample: Option<f64>,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Single-threaded training with reproducible output
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat `key = value` file; keys are the long flag names with `_` for `-`
    #[arg(long)]
    config: Option<PathBuf>,
    /// First-order embedding files, comma-separated or repeated
    #[arg(long, value_delimiter = ',')]
    samples: Vec<PathBuf>,
    /// Output directory [default: second_order_out]
    #[arg(long)]
    output: Option<PathBuf>,
    /// Graph neighbors per word [default: 10]
    #[arg(long)]
    k: Option<usize>,
    /// Return parameter [default: 1]
    #[arg(long)]
    p: Option<f64>,
    /// In-out parameter [default: 1]
    #[arg(long)]
    q: Option<f64>,
    /// Nodes per walk [default: 80]
    #[arg(long)]
    walk_length: Option<usize>,
    /// Walks started from each node [default: 10]
    #[arg(long)]
    walks_per_node: Option<usize>,
    /// Second-order dimension [default: 100]
    #[arg(long)]
    dim: Option<usize>,
    /// Maximum context offset [default: 10]
    #[arg(long)]
    window: Option<usize>,
    /// Negative samples per positive pair [default: 5]
    #[arg(long)]
    negatives: Option<usize>,
    /// Passes over the walk corpus [default: 1]
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate [default: 0.025]
    #[arg(long)]
    lr_start: Option<f64>,
    /// Final learning rate [default: 0.0001]
    #[arg(long)]
    lr_end: Option<f64>,
    /// Drop nodes visited fewer times [default: 1]
    #[arg(long)]
    min_count: Option<u64>,
    /// Seed for walks and training [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Single-threaded training with reproducible output
    #[arg(long)]
    deterministic: bool,
    /// Neighbors per word in the density analysis [default: 10]
    #[arg(long)]
    analysis_k: Option<usize>,
    /// Extremal words per end [default: 10]
    #[arg(long)]
    extremal: Option<usize>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Mean neighbor similarity, extremal words and pooled similarities
    Density(DensityArgs),
    /// Agreement of neighbor lists across samples
    Overlap(OverlapArgs),
}

#[derive(Args)]
struct DensityArgs {
    /// Embedding files; with exactly two, the first is compared to the second
    #[arg(long, required = true, num_args = 1..)]
    emb: Vec<PathBuf>,
    /// Neighbors per word
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Extremal words per end
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct OverlapArgs {
    /// Embedding samples, restricted to their common words
    #[arg(long, required = true, num_args = 1..)]
    emb: Vec<PathBuf>,
    /// Neighbors per word
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Concat,
    Subtract,
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerArg {
    /// Lowercase and strip punctuation at token edges
    Basic,
    /// Split on whitespace only
    Whitespace,
}

#[derive(Args)]
struct EvalArgs {
    /// Embedding files; several are joined per word over their common words
    #[arg(long, required = true, num_args = 1..)]
    emb: Vec<PathBuf>,
    /// Training pairs, tab-separated with a header line
    #[arg(long)]
    train: PathBuf,
    /// Test pairs, same format
    #[arg(long)]
    test: PathBuf,
    /// Pair features: [a; b] or a - b
    #[arg(long, value_enum, default_value_t = Mode::Concat)]
    mode: Mode,
    /// Weight of the logistic loss against the L2 penalty
    #[arg(long, default_value_t = 0.001)]
    cost: f64,
    /// Predict "equivalent" at or above this probability
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Sentence tokenizer
    #[arg(long, value_enum, default_value_t = TokenizerArg::Basic)]
    tokenizer: TokenizerArg,
    /// JSON report path
    #[arg(long)]
    report: Option<PathBuf>,
}

macro_rules! with_precision {
    ($p:expr, $f:ident($($arg:expr),*)) => {
        match $p {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
        }
    };
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let p = cli.precision;
    match &cli.command {
        Command::Knn(a) => with_precision!(p, knn(a)),
        Command::Induce(a) => induce(a),
        Command::Walk(a) => walk(a),
        Command::Train(a) => with_precision!(p, train(a, cli.threads)),
        Command::Pipeline(a) => with_precision!(p, pipeline(a, cli.threads)),
        Command::Analyze(AnalyzeCommand::Density(a)) => with_precision!(p, density(a)),
        Command::Analyze(AnalyzeCommand::Overlap(a)) => with_precision!(p, overlap(a)),
        Command::EvalParaphrase(a) => with_precision!(p, eval(a)),
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return e.exit_code() as u8;
        }
        let usage = matches!(cause.downcast_ref::<KnnError>(), Some(KnnError::KZero))
            || matches!(
                cause.downcast_ref::<WalkError>(),
                Some(WalkError::InvalidConfig(_))
            )
            || matches!(
                cause.downcast_ref::<SgnsError>(),
                Some(SgnsError::InvalidConfig(_))
            )
            || matches!(
                cause.downcast_ref::<EvalError>(),
                Some(EvalError::InvalidCost | EvalError::UnknownMode(_))
            );
        if usage {
            return 1;
        }
        let numeric = matches!(
            cause.downcast_ref::<SgnsError>(),
            Some(SgnsError::NonFiniteLoss { .. })
        ) || matches!(
            cause.downcast_ref::<EvalError>(),
            Some(EvalError::NonFiniteFeature(_))
        );
        if numeric {
            return 3;
        }
    }
    2
}

fn load_normalized<T: Real>(path: &Path) -> Result<EmbeddingSet<T>, EmbedIoError> {
    load_embeddings::<T>(path)?.normalize_rows()
}

fn ctx(path: &Path) -> String {
    path.display().to_string()
}

fn knn<T: Real>(a: &KnnArgs) -> Result<()> {
    let e = load_normalized::<T>(&a.emb).with_context(|| ctx(&a.emb))?;
    let nn = all_neighbors(&e, a.k)?;
    nn.save_tsv(&a.output).with_context(|| ctx(&a.output))?;
    println!("{} words, k={} -> {}", nn.len(), a.k, a.output.display());
    Ok(())
}

fn induce(a: &InduceArgs) -> Result<()> {
    let mut nns = Vec::with_capacity(a.nn.len());
    for path in &a.nn {
        let nn = NeighborList::<f64>::load_tsv(path).with_context(|| ctx(path))?;
        let nn = match nns.first() {
            Some(first) => nn
                .reindexed(NeighborList::shared_vocab(first))
                .with_context(|| ctx(path))?,
            None => nn,
        };
        nns.push(nn);
    }
    let g = induce_multi(&nns)?;
    g.save_tsv(&a.output).with_context(|| ctx(&a.output))?;
    println!(
        "{} nodes, {} edges from {} samples -> {}",
        g.node_count(),
        g.edge_count(),
        g.samples(),
        a.output.display()
    );
    Ok(())
}

fn walk(a: &WalkArgs) -> Result<()> {
    let g = WeightedDigraph::load_tsv(&a.graph).with_context(|| ctx(&a.graph))?;
    let cfg = WalkConfig {
        p: a.p,
        q: a.q,
        walk_length: a.walk_length,
        walks_per_node: a.walks_per_node,
        seed: a.seed,
    };
    let corpus = generate_corpus(&g, &cfg)?;
    corpus
        .save_text(&a.output)
        .with_context(|| ctx(&a.output))?;
    println!(
        "{} walks, {} tokens -> {}",
        corpus.walks.len(),
        corpus.token_count(),
        a.output.display()
    );
    Ok(())
}

fn resolve_threads(requested: Option<usize>, deterministic: bool) -> usize {
    if deterministic {
        1
    } else {
        requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn train<T: Real>(a: &TrainArgs, threads: Option<usize>) -> Result<()> {
    let corpus = Corpus::load_text(&a.corpus).with_context(|| ctx(&a.corpus))?;
    let cfg = SgnsConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        lr_start: a.lr_start,
        lr_end: a.lr_end,
        min_count: a.min_count,
        subsample: a.subsample,
        seed: a.seed,
        threads: resolve_threads(threads, a.deterministic),
        ..SgnsConfig::for_walks()
    };
    let (e, report) = train_with_report::<T>(&corpus, &cfg)?;
    save_embeddings(&e, &a.output).with_context(|| ctx(&a.output))?;
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "{} words x {} dims, final epoch loss {last:.4} -> {}",
        e.len(),
        e.dim(),
        a.output.display()
    );
    Ok(())
}

fn pipeline_config(a: &PipelineArgs, threads: Option<usize>) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if !a.samples.is_empty() {
        cfg.samples = a.samples.clone();
    }
    let overrides = [
        ("output", a.output.as_ref().map(|p| p.display().to_string())),
        ("k", a.k.map(|v| v.to_string())),
        ("p", a.p.map(|v| v.to_string())),
        ("q", a.q.map(|v| v.to_string())),
        ("walk_length", a.walk_length.map(|v| v.to_string())),
        ("walks_per_node", a.walks_per_node.map(|v| v.to_string())),
        ("dim", a.dim.map(|v| v.to_string())),
        ("window", a.window.map(|v| v.to_string())),
        ("negatives", a.negatives.map(|v| v.to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("lr_start", a.lr_start.map(|v| v.to_string())),
        ("lr_end", a.lr_end.map(|v| v.to_string())),
        ("min_count", a.min_count.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("threads", threads.map(|v| v.to_string())),
        ("analysis_k", a.analysis_k.map(|v| v.to_string())),
        ("extremal", a.extremal.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if a.deterministic {
        cfg.deterministic = true;
    }
    Ok(cfg)
}

fn pipeline<T: Real>(a: &PipelineArgs, threads: Option<usize>) -> Result<()> {
    let cfg = pipeline_config(a, threads)?;
    let out = run_pipeline::<T>(&cfg)?;
    let mut summary = Vec::new();
    out.comparison.write_summary(&mut summary)?;
    print!("{}", String::from_utf8_lossy(&summary));
    println!(
        "{} words, {} edges, {} walk tokens; {} artifacts in {}",
        out.manifest.vocab_size,
        out.manifest.graph_edges,
        out.manifest.walk_tokens,
        out.manifest.artifacts.len() + 1,
        cfg.output.display()
    );
    Ok(())
}

/// File stems, suffixed with their position when two inputs share one.
fn space_names(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map_or("space".into(), |s| s.to_string_lossy().into_owned())
        })
        .collect();
    let mut seen = HashSet::new();
    let unique = stems.iter().all(|s| seen.insert(s));
    if unique {
        stems
    } else {
        stems
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{s}_{}", i + 1))
            .collect()
    }
}

fn density<T: Real>(a: &DensityArgs) -> Result<()> {
    fs::create_dir_all(&a.output).with_context(|| ctx(&a.output))?;
    let names = space_names(&a.emb);
    let mut reports: Vec<DensityReport<T>> = Vec::new();
    for (path, name) in a.emb.iter().zip(&names) {
        let e = load_normalized::<T>(path).with_context(|| ctx(path))?;
        let nn = all_neighbors(&e, a.k)?;
        let report = density_report(&nn, a.m).with_context(|| ctx(path))?;
        write_density_files(&a.output, name, &report, &nn)?;
        if let Some(s) = report.min_summary() {
            println!(
                "{name}: minimal-end median {:.4}, lowest {:.4}",
                s.median, s.min
            );
        }
        reports.push(report);
    }
    let spaces: Vec<(&str, &DensityReport<T>)> =
        names.iter().map(String::as_str).zip(&reports).collect();
    let mut dat = Vec::new();
    write_gnuplot_data(&mut dat, &spaces)?;
    fs::write(a.output.join("density.dat"), dat)?;
    if let [first, second] = reports.as_slice() {
        let mut summary = Vec::new();
        compare_density(first, second).write_summary(&mut summary)?;
        fs::write(a.output.join("comparison.txt"), &summary)?;
        print!("{}", String::from_utf8_lossy(&summary));
    }
    Ok(())
}

fn overlap<T: Real>(a: &OverlapArgs) -> Result<()> {
    let mut sets = Vec::with_capacity(a.emb.len());
    for path in &a.emb {
        sets.push(load_normalized::<T>(path).with_context(|| ctx(path))?);
    }
    let sets = EmbeddingSet::align(&sets)?;
    let nns = sets
        .iter()
        .map(|e| all_neighbors(e, a.k))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = overlap_rows(&nns)?;
    let words = nns[0].vocab().words();
    let mut tsv = String::new();
    for row in &rows {
        for &(id, count) in &row.members {
            let label = match Membership::of(count, row.samples) {
                Membership::All => "all",
                Membership::Some => "some",
                Membership::One => "one",
            };
            tsv.push_str(&format!(
                "{}\t{}\t{count}\t{label}\n",
                words[row.word], words[id]
            ));
        }
    }
    fs::create_dir_all(&a.output).with_context(|| ctx(&a.output))?;
    fs::write(a.output.join("overlap.tsv"), tsv)?;
    let summary = overlap_summary(&nns)?;
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(a.output.join("overlap_summary.json"), format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

fn eval<T: Real>(a: &EvalArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        bail!(Usage("--threshold must lie in [0, 1]".into()));
    }
    let mut sets = Vec::with_capacity(a.emb.len());
    for path in &a.emb {
        sets.push(load_embeddings::<T>(path).with_context(|| ctx(path))?);
    }
    let refs: Vec<&EmbeddingSet<T>> = sets.iter().collect();
    let e = if sets.len() == 1 {
        sets.pop().unwrap()
    } else {
        EmbeddingSet::concat(&refs)?
    };
    let tokenizer = match a.tokenizer {
        TokenizerArg::Basic => Tokenizer::Basic,
        TokenizerArg::Whitespace => Tokenizer::Whitespace,
    };
    let read = |path: &Path| -> Result<_> {
        let file = fs::File::open(path).with_context(|| ctx(path))?;
        read_msrpc_with(std::io::BufReader::new(file), tokenizer).with_context(|| ctx(path))
    };
    let (train, test) = (read(&a.train)?, read(&a.test)?);
    let mode = match a.mode {
        Mode::Concat => FeatureMode::Concat,
        Mode::Subtract => FeatureMode::Subtract,
    };
    let report = run_paraphrase_eval(&e, &train, &test, mode, a.cost, a.threshold)?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &a.report {
        fs::write(path, format!("{json}\n")).with_context(|| ctx(path))?;
    }
    println!(
        "test: precision {:.4} recall {:.4} F1 {:.4} accuracy {:.4} ({} train / {} test pairs)",
        report.test.precision,
        report.test.recall,
        report.test.f1,
        report.test.accuracy,
        report.train_pairs,
        report.test_pairs
    );
    Ok(())
}
