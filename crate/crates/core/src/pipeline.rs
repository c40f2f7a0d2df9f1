//! End-to-end run: first-order embeddings → k-NN lists → induced graph →
//! walks → second-order embeddings → density comparison.
//!
//! Every intermediate artifact is written to the output directory as soon as
//! it exists, so a failed run leaves everything up to the failing stage.
//! `manifest.json` lists the resolved configuration and a SHA-256 digest per
//! artifact.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    compare_density, density_report, write_density_files, write_gnuplot_data, AnalysisError,
    DensityComparison, DensityReport,
};
use crate::embed_io::{load_embeddings, save_embeddings, EmbedIoError, EmbeddingSet};
use crate::graph::{induce_multi, GraphError};
use crate::knn::{all_neighbors, KnnError, NeighborList};
use crate::scalar::Real;
use crate::sgns::{train_with_report, Corpus, SgnsConfig, SgnsError, TrainReport};
use crate::walks::{generate_corpus, WalkConfig, WalkError};

pub const NN_PREFIX: &str = "nn_sample";
pub const GRAPH_FILE: &str = "graph.tsv";
pub const WALKS_FILE: &str = "walks.txt";
pub const SECOND_ORDER_FILE: &str = "second_order.txt";
pub const CONFIG_FILE: &str = "pipeline.conf";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Knn,
    Induce,
    Walk,
    Train,
    Analyze,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Knn => "knn",
            Stage::Induce => "induce",
            Stage::Walk => "walk",
            Stage::Train => "train",
            Stage::Analyze => "analyze",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Embed(#[from] EmbedIoError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Sgns(#[from] SgnsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numeric => 3,
        }
    }
}

impl StageError {
    pub fn class(&self) -> ErrorClass {
        match self {
            StageError::Sgns(SgnsError::NonFiniteLoss { .. }) => ErrorClass::Numeric,
            StageError::Sgns(SgnsError::InvalidConfig(_))
            | StageError::Walk(WalkError::InvalidConfig(_)) => ErrorClass::Usage,
            StageError::Knn(KnnError::KZero) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Config(_) => ErrorClass::Usage,
            PipelineError::Stage { source, .. } => source.class(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}

fn at<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: e.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// First-order embedding files, one per sample.
    pub samples: Vec<PathBuf>,
    pub output: PathBuf,
    /// Neighbors per word in the induced graph.
    pub k: usize,
    pub p: f64,
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub min_count: u64,
    pub seed: u64,
    /// Training threads; 0 uses every core.
    pub threads: usize,
    /// Forces single-threaded training.
    pub deterministic: bool,
    /// Neighbors per word for the density analysis.
    pub analysis_k: usize,
    /// Extremal words per end.
    pub extremal: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let walk = WalkConfig::default();
        let sgns = SgnsConfig::for_walks();
        PipelineConfig {
            samples: Vec::new(),
            output: PathBuf::from("second_order_out"),
            k: 10,
            p: walk.p,
            q: walk.q,
            walk_length: walk.walk_length,
            walks_per_node: walk.walks_per_node,
            dim: sgns.dim,
            window: sgns.window,
            negatives: sgns.negatives,
            epochs: sgns.epochs,
            lr_start: sgns.lr_start,
            lr_end: sgns.lr_end,
            min_count: sgns.min_count,
            seed: 1,
            threads: 0,
            deterministic: false,
            analysis_k: 10,
            extremal: 10,
        }
    }
}

/// Keys accepted by [`PipelineConfig::set`], in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "samples",
    "output",
    "k",
    "p",
    "q",
    "walk_length",
    "walks_per_node",
    "dim",
    "window",
    "negatives",
    "epochs",
    "lr_start",
    "lr_end",
    "min_count",
    "seed",
    "threads",
    "deterministic",
    "analysis_k",
    "extremal",
];

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, PipelineError> {
    value
        .parse()
        .map_err(|_| PipelineError::Config(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    /// Sets one key from its text form. `samples` is comma-separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let value = value.trim();
        match key {
            "samples" => {
                self.samples = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "output" => self.output = PathBuf::from(value),
            "k" => self.k = parse_value(key, value)?,
            "p" => self.p = parse_value(key, value)?,
            "q" => self.q = parse_value(key, value)?,
            "walk_length" => self.walk_length = parse_value(key, value)?,
            "walks_per_node" => self.walks_per_node = parse_value(key, value)?,
            "dim" => self.dim = parse_value(key, value)?,
            "window" => self.window = parse_value(key, value)?,
            "negatives" => self.negatives = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "lr_start" => self.lr_start = parse_value(key, value)?,
            "lr_end" => self.lr_end = parse_value(key, value)?,
            "min_count" => self.min_count = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "threads" => self.threads = parse_value(key, value)?,
            "deterministic" => self.deterministic = parse_value(key, value)?,
            "analysis_k" => self.analysis_k = parse_value(key, value)?,
            "extremal" => self.extremal = parse_value(key, value)?,
            other => return Err(PipelineError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key = value", i + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// The configuration in the format read by [`PipelineConfig::from_text`].
    pub fn to_text(&self) -> String {
        let samples: Vec<String> = self
            .samples
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        let values: [String; 19] = [
            samples.join(","),
            self.output.display().to_string(),
            self.k.to_string(),
            self.p.to_string(),
            self.q.to_string(),
            self.walk_length.to_string(),
            self.walks_per_node.to_string(),
            self.dim.to_string(),
            self.window.to_string(),
            self.negatives.to_string(),
            self.epochs.to_string(),
            self.lr_start.to_string(),
            self.lr_end.to_string(),
            self.min_count.to_string(),
            self.seed.to_string(),
            self.threads.to_string(),
            self.deterministic.to_string(),
            self.analysis_k.to_string(),
            self.extremal.to_string(),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            p: self.p,
            q: self.q,
            walk_length: self.walk_length,
            walks_per_node: self.walks_per_node,
            seed: self.seed,
        }
    }

    /// Training settings with the thread count resolved.
    pub fn sgns_config(&self) -> SgnsConfig {
        let threads = if self.deterministic {
            1
        } else if self.threads == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.threads
        };
        SgnsConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            min_count: self.min_count,
            seed: self.seed,
            threads,
            ..SgnsConfig::for_walks()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.samples.is_empty() {
            return bad("at least one sample is required".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.analysis_k == 0 {
            return bad("analysis_k must be at least 1".into());
        }
        if let Err(e) = self.walk_config().validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.sgns_config().validate() {
            return bad(e.to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub walk: WalkConfig,
    pub sgns: SgnsConfig,
    pub vocab_size: usize,
    pub graph_edges: usize,
    pub walk_tokens: usize,
    pub epoch_losses: Vec<f64>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug)]
pub struct PipelineOutput<T> {
    pub embeddings: EmbeddingSet<T>,
    pub first_density: DensityReport<T>,
    pub second_density: DensityReport<T>,
    pub comparison: DensityComparison,
    pub train_report: TrainReport,
    pub manifest: Manifest,
}

struct Writer {
    dir: PathBuf,
    names: Vec<String>,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let path = self.path(name);
        fs::write(path, body).map_err(at(Stage::Write))
    }
}

/// Runs every stage in order; see the module docs for the outputs.
pub fn run_pipeline<T: Real>(cfg: &PipelineConfig) -> Result<PipelineOutput<T>, PipelineError> {
    cfg.validate()?;
    let walk_cfg = cfg.walk_config();
    let sgns_cfg = cfg.sgns_config();
    fs::create_dir_all(&cfg.output).map_err(at(Stage::Write))?;
    let mut out = Writer {
        dir: cfg.output.clone(),
        names: Vec::new(),
    };
    out.text(CONFIG_FILE, cfg.to_text())?;

    let mut first = Vec::with_capacity(cfg.samples.len());
    for path in &cfg.samples {
        let e = load_embeddings::<T>(path)
            .and_then(EmbeddingSet::normalize_rows)
            .map_err(at(Stage::Load))?;
        first.push(e);
    }
    // samples trained separately list their words in different orders
    let first = EmbeddingSet::align(&first).map_err(at(Stage::Load))?;

    let mut nns: Vec<NeighborList<T>> = Vec::with_capacity(first.len());
    for (i, e) in first.iter().enumerate() {
        let nn = all_neighbors(e, cfg.k).map_err(at(Stage::Knn))?;
        let path = out.path(&format!("{NN_PREFIX}{}.tsv", i + 1));
        nn.save_tsv(path).map_err(at(Stage::Write))?;
        nns.push(nn);
    }

    let graph = induce_multi(&nns).map_err(at(Stage::Induce))?;
    graph
        .save_tsv(out.path(GRAPH_FILE))
        .map_err(at(Stage::Write))?;

    let walks = generate_corpus(&graph, &walk_cfg).map_err(at(Stage::Walk))?;
    walks
        .save_text(out.path(WALKS_FILE))
        .map_err(at(Stage::Write))?;

    let corpus = Corpus::from_walks(&walks).map_err(at(Stage::Train))?;
    let (second, train_report) =
        train_with_report::<T>(&corpus, &sgns_cfg).map_err(at(Stage::Train))?;
    save_embeddings(&second, out.path(SECOND_ORDER_FILE)).map_err(at(Stage::Write))?;

    // neighbor lists are recomputed in each space at the analysis k
    let first_nn = if cfg.analysis_k == cfg.k {
        nns.swap_remove(0)
    } else {
        all_neighbors(&first[0], cfg.analysis_k).map_err(at(Stage::Analyze))?
    };
    let second_norm = second
        .clone()
        .normalize_rows()
        .map_err(at(Stage::Analyze))?;
    let second_nn = all_neighbors(&second_norm, cfg.analysis_k).map_err(at(Stage::Analyze))?;
    let first_density = density_report(&first_nn, cfg.extremal).map_err(at(Stage::Analyze))?;
    let second_density = density_report(&second_nn, cfg.extremal).map_err(at(Stage::Analyze))?;
    let comparison = compare_density(&first_density, &second_density);

    for (name, report, nn) in [
        ("first_order", &first_density, &first_nn),
        ("second_order", &second_density, &second_nn),
    ] {
        write_density_files(&cfg.output, name, report, nn).map_err(at(Stage::Write))?;
        for suffix in ["density.tsv", "extremal.tsv", "summary.txt"] {
            out.names.push(format!("{name}_{suffix}"));
        }
    }
    let mut dat = Vec::new();
    write_gnuplot_data(
        &mut dat,
        &[
            ("first_order", &first_density),
            ("second_order", &second_density),
        ],
    )
    .map_err(at(Stage::Write))?;
    out.text("density.dat", dat)?;
    let mut summary = Vec::new();
    comparison
        .write_summary(&mut summary)
        .map_err(at(Stage::Write))?;
    out.text("comparison.txt", summary)?;

    let artifacts = out
        .names
        .iter()
        .map(|name| {
            let path = cfg.output.join(name);
            Ok(Artifact {
                path: name.clone(),
                sha256: sha256_file(&path)?,
                bytes: fs::metadata(&path)?.len(),
            })
        })
        .collect::<io::Result<Vec<_>>>()
        .map_err(at(Stage::Write))?;
    let manifest = Manifest {
        config: cfg.clone(),
        walk: walk_cfg,
        sgns: sgns_cfg,
        vocab_size: graph.node_count(),
        graph_edges: graph.edge_count(),
        walk_tokens: walks.token_count(),
        epoch_losses: train_report.epoch_losses.clone(),
        artifacts,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(at(Stage::Write))?;
    out.text(MANIFEST_FILE, json + "\n")?;

    Ok(PipelineOutput {
        embeddings: second,
        first_density,
        second_density,
        comparison,
        train_report,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed_io::Vocabulary;
    use rand::{Rng, SeedableRng};

    fn write_sample(path: &Path, n: usize, dim: usize, seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let centers: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let matrix: Vec<f64> = (0..n)
            .flat_map(|i| {
                let c = centers[i % 3].clone();
                let noise: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.3..0.3)).collect();
                c.into_iter()
                    .zip(noise)
                    .map(|(a, b)| a + b)
                    .collect::<Vec<_>>()
            })
            .collect();
        let e = EmbeddingSet::new(Vocabulary::new(words).unwrap(), matrix, dim).unwrap();
        save_embeddings(&e, path).unwrap();
    }

    fn small_config(dir: &Path, samples: usize) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        for s in 0..samples {
            let path = dir.join(format!("sample{s}.txt"));
            write_sample(&path, 40, 8, 10 + s as u64);
            cfg.samples.push(path);
        }
        cfg.output = dir.join("out");
        cfg.k = 5;
        cfg.walk_length = 20;
        cfg.walks_per_node = 3;
        cfg.dim = 8;
        cfg.analysis_k = 5;
        cfg.extremal = 5;
        cfg.deterministic = true;
        cfg
    }

    #[test]
    fn config_text_round_trip_and_errors() {
        let cfg = PipelineConfig {
            samples: vec!["a.txt".into(), "b.txt".into()],
            q: 0.5,
            deterministic: true,
            ..Default::default()
        };
        assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);

        let cfg = PipelineConfig::from_text("# run\n\nk = 25\nsamples = x, y ,z\n").unwrap();
        assert_eq!(cfg.k, 25);
        assert_eq!(cfg.samples.len(), 3);
        assert!(matches!(
            PipelineConfig::from_text("colour = red"),
            Err(PipelineError::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_text("k = ten"),
            Err(PipelineError::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_text("k"),
            Err(PipelineError::Config(_))
        ));
        assert_eq!(CONFIG_KEYS.len(), 19);
    }

    #[test]
    fn validation_is_a_usage_error() {
        let cfg = PipelineConfig::default();
        let err = run_pipeline::<f64>(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let mut cfg = PipelineConfig {
            samples: vec!["x".into()],
            ..Default::default()
        };
        cfg.k = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        cfg.k = 3;
        cfg.p = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_sample_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            samples: vec![dir.path().join("absent.txt")],
            output: dir.path().join("out"),
            ..Default::default()
        };
        match run_pipeline::<f64>(&cfg) {
            Err(
                e @ PipelineError::Stage {
                    stage: Stage::Load, ..
                },
            ) => {
                assert_eq!(e.exit_code(), 2);
                assert!(e.to_string().starts_with("load stage failed"));
            }
            other => panic!("{:?}", other.err()),
        }
        // the config is written before any stage runs
        assert!(dir.path().join("out").join(CONFIG_FILE).exists());
    }

    #[test]
    fn three_sample_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), 3);
        let run = run_pipeline::<f64>(&cfg).unwrap();
        let out = &cfg.output;
        for name in [
            "nn_sample1.tsv",
            "nn_sample3.tsv",
            GRAPH_FILE,
            WALKS_FILE,
            SECOND_ORDER_FILE,
        ] {
            assert!(out.join(name).exists(), "{name}");
        }
        let graph = crate::graph::WeightedDigraph::load_tsv(out.join(GRAPH_FILE)).unwrap();
        for (_, _, m) in graph.edges() {
            assert!((1..=3).contains(&m));
        }
        let weights: Vec<f64> = (0..graph.node_count())
            .flat_map(|v| graph.out_edges(v).map(|e| e.1).collect::<Vec<_>>())
            .collect();
        assert!(weights
            .iter()
            .all(|w| [1.0 / 3.0, 2.0 / 3.0, 1.0].contains(w)));

        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest, run.manifest);
        assert_eq!(manifest.sgns.threads, 1);
        let listed: Vec<&str> = manifest.artifacts.iter().map(|a| a.path.as_str()).collect();
        for entry in fs::read_dir(out).unwrap() {
            let name = entry.unwrap().file_name().into_string().unwrap();
            if name != MANIFEST_FILE {
                assert!(
                    listed.contains(&name.as_str()),
                    "{name} missing from manifest"
                );
            }
        }
        for a in &manifest.artifacts {
            assert_eq!(sha256_file(out.join(&a.path)).unwrap(), a.sha256);
        }
        assert_eq!(run.embeddings.len(), 40);
        assert_eq!(run.first_density.min_pool.len(), 25);
    }

    #[test]
    fn deterministic_rerun_reproduces_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), 1);
        let a = run_pipeline::<f64>(&cfg).unwrap().manifest;
        let replay = PipelineConfig::load(cfg.output.join(CONFIG_FILE)).unwrap();
        let b = run_pipeline::<f64>(&replay).unwrap().manifest;
        assert_eq!(a.artifacts, b.artifacts);
    }
}
