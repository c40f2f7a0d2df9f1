mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use second_order::{load_embeddings, save_embeddings, EmbeddingSet, Vocabulary};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_second-order"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// The same vectors as `src`, rows listed in reverse.
fn write_reversed(src: &Path, dst: &Path) {
    let e = load_embeddings::<f64>(src).unwrap();
    let ids: Vec<usize> = (0..e.len()).rev().collect();
    let vocab = Vocabulary::new(ids.iter().map(|&i| e.vocab().words()[i].clone())).unwrap();
    let matrix = ids.iter().flat_map(|&i| e.row(i).to_vec()).collect();
    save_embeddings(&EmbeddingSet::new(vocab, matrix, e.dim()).unwrap(), dst).unwrap();
}

#[test]
fn pipeline_equals_chained_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    common::write_mixture(&dir.join("s1.txt"), 120, 16, 4, 1);
    common::write_mixture(&dir.join("tmp.txt"), 120, 16, 4, 2);
    // a second sample whose words come in another order
    write_reversed(&dir.join("tmp.txt"), &dir.join("s2.txt"));

    let shared = [
        "--seed",
        "9",
        "--dim",
        "24",
        "--walk-length",
        "30",
        "--walks-per-node",
        "4",
    ];
    let mut args = vec![
        "pipeline",
        "--deterministic",
        "--k",
        "6",
        "--samples",
        "s1.txt,s2.txt",
        "--output",
        "out",
    ];
    args.extend(shared);
    run(&args, dir);

    run(
        &["knn", "--emb", "s1.txt", "--k", "6", "--output", "nn1.tsv"],
        dir,
    );
    run(
        &["knn", "--emb", "s2.txt", "--k", "6", "--output", "nn2.tsv"],
        dir,
    );
    run(
        &[
            "induce",
            "--nn",
            "nn1.tsv",
            "nn2.tsv",
            "--output",
            "graph.tsv",
        ],
        dir,
    );
    let walk = [
        "walk",
        "--graph",
        "graph.tsv",
        "--seed",
        "9",
        "--walk-length",
        "30",
        "--walks-per-node",
        "4",
        "--output",
        "walks.txt",
    ];
    run(&walk, dir);
    let train = [
        "train",
        "--corpus",
        "walks.txt",
        "--deterministic",
        "--seed",
        "9",
        "--dim",
        "24",
        "--output",
        "emb.txt",
    ];
    run(&train, dir);

    let read = |p: &str| fs::read(dir.join(p)).unwrap();
    assert_eq!(read("nn1.tsv"), read("out/nn_sample1.tsv"));
    assert_eq!(read("graph.tsv"), read("out/graph.tsv"));
    assert_eq!(read("walks.txt"), read("out/walks.txt"));
    assert_eq!(read("emb.txt"), read("out/second_order.txt"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    common::write_mixture(&dir.join("s.txt"), 60, 8, 3, 3);
    fs::write(
        dir.join("run.conf"),
        "samples = s.txt\noutput = out\nk = 4\ndim = 8\nwalks_per_node = 2\nwalk_length = 10\nextremal = 3\nanalysis_k = 4\n",
    )
    .unwrap();
    run(
        &[
            "pipeline",
            "--config",
            "run.conf",
            "--k",
            "5",
            "--deterministic",
        ],
        dir,
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["k"], 5);
    assert_eq!(manifest["config"]["dim"], 8);
    assert_eq!(manifest["sgns"]["threads"], 1);
    let written = fs::read_to_string(dir.join("out/pipeline.conf")).unwrap();
    assert!(written.contains("k = 5\n"));
}

#[test]
fn threads_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    common::write_mixture(&dir.join("s.txt"), 60, 8, 3, 4);
    let out = bin()
        .args([
            "pipeline",
            "--samples",
            "s.txt",
            "--output",
            "out",
            "--k",
            "4",
            "--dim",
            "8",
            "--walks-per-node",
            "2",
            "--extremal",
            "3",
            "--analysis-k",
            "4",
        ])
        .env("SECOND_ORDER_THREADS", "2")
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["sgns"]["threads"], 2);
}

#[test]
fn exit_codes_classify_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let code = |args: &[&str]| {
        bin()
            .args(args)
            .current_dir(dir)
            .output()
            .unwrap()
            .status
            .code()
    };

    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["knn"]), Some(1));
    assert_eq!(
        code(&["knn", "--emb", "absent.txt", "--output", "x.tsv"]),
        Some(2)
    );
    assert_eq!(code(&["pipeline"]), Some(1));

    fs::write(dir.join("bad.txt"), "2 2\na 1 0\nb 1\n").unwrap();
    assert_eq!(
        code(&["knn", "--emb", "bad.txt", "--output", "x.tsv"]),
        Some(2)
    );

    fs::write(dir.join("corpus.txt"), "a b c a b c d\n".repeat(50)).unwrap();
    let diverge = [
        "train",
        "--corpus",
        "corpus.txt",
        "--output",
        "e.txt",
        "--dim",
        "4",
        "--lr-start",
        "1e300",
        "--deterministic",
    ];
    assert_eq!(code(&diverge), Some(3));
    let bad_lr = [
        "train",
        "--corpus",
        "corpus.txt",
        "--output",
        "e.txt",
        "--lr-start",
        "0",
    ];
    assert_eq!(code(&bad_lr), Some(1));
}

#[test]
fn analyze_and_eval_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    common::write_mixture(&dir.join("a.txt"), 50, 6, 3, 5);
    common::write_mixture(&dir.join("b.txt"), 50, 6, 3, 6);
    run(
        &[
            "analyze", "density", "--emb", "a.txt", "b.txt", "--k", "5", "--m", "4", "--output",
            "dens",
        ],
        dir,
    );
    for f in [
        "a_density.tsv",
        "b_extremal.tsv",
        "density.dat",
        "comparison.txt",
    ] {
        assert!(dir.join("dens").join(f).exists(), "{f}");
    }
    run(
        &[
            "analyze", "overlap", "--emb", "a.txt", "b.txt", "--k", "5", "--output", "ov",
        ],
        dir,
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("ov/overlap_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["samples"], 2);

    let header = "Quality\t#1 ID\t#2 ID\t#1 String\t#2 String\n";
    let rows = "1\t1\t2\tw1 w2 w3\tw1 w2 w4\n0\t3\t4\tw5 w6\tw40 w41\n1\t5\t6\tw7 w8\tw7 w8\n0\t7\t8\tw9\tw30 w31\n";
    fs::write(dir.join("train.tsv"), format!("{header}{rows}")).unwrap();
    fs::write(dir.join("test.tsv"), format!("{header}{rows}")).unwrap();
    run(
        &[
            "eval-paraphrase",
            "--emb",
            "a.txt",
            "b.txt",
            "--train",
            "train.tsv",
            "--test",
            "test.tsv",
            "--mode",
            "subtract",
            "--report",
            "r.json",
        ],
        dir,
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["embedding_dim"], 12);
    assert_eq!(report["test_pairs"], 4);
}
