use std::path::Path;
use std::process::{Command, Output};

use vocab_rsa::embed_io::{save_matrix, EmbeddingKind, EmbeddingMatrix, VocabEntry, VocabMap};
use vocab_rsa::experiments::synthetic::{cluster_of, interpolation, random_matrix};
use vocab_rsa::rdm::load_rdm;

const N: usize = 60;
const CLUSTERS: usize = 6;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vocab-rsa"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_vocab(dir: &Path, n: usize) {
    let v = VocabMap::from_entries(
        (0..n)
            .map(|i| VocabEntry {
                token_id: i as u32,
                surface: format!(" w{i}"),
                is_word_start: true,
            })
            .collect(),
    )
    .unwrap();
    v.save(dir.join("vocab.tsv")).unwrap();
}

/// Writes checkpoints, manifest, vocabulary, word list and cluster table.
fn fixture(dir: &Path, mats: &[EmbeddingMatrix], outputs: bool, tokens_per_step: Option<u64>) {
    let mut entries = Vec::new();
    for (i, m) in mats.iter().enumerate() {
        save_matrix(dir.join(format!("in{i}.npy")), m).unwrap();
        let mut e = format!(r#"{{"step": {}, "input_path": "in{i}.npy""#, i * 100);
        if outputs {
            save_matrix(dir.join(format!("out{i}.npy")), m).unwrap();
            e += &format!(r#", "output_path": "out{i}.npy""#);
        }
        entries.push(e + "}");
    }
    let list = format!("[{}]", entries.join(", "));
    let manifest = match tokens_per_step {
        Some(t) => format!(r#"{{"tokens_per_step": {t}, "checkpoints": {list}}}"#),
        None => list,
    };
    std::fs::write(dir.join("manifest.json"), manifest).unwrap();
    let n = mats[0].rows();
    write_vocab(dir, n);
    let words: String = (0..n).map(|i| format!("w{i}\n")).collect();
    std::fs::write(dir.join("words.txt"), words).unwrap();
    let groups: String = (0..n)
        .map(|i| format!("w{i}\tc{}\n", cluster_of(i, CLUSTERS)))
        .collect();
    std::fs::write(dir.join("clusters.tsv"), groups).unwrap();
    let freq: String = (0..n).map(|i| format!("w{i}\t{}\n", 1000 - i)).collect();
    std::fs::write(dir.join("freq.tsv"), freq).unwrap();
    std::fs::write(
        dir.join("run.toml"),
        r#"
manifest = "manifest.json"
vocab = "vocab.tsv"
out_dir = "results"

[conv_rsa]
words = "words.txt"

[[hyp_rsa.hypotheses]]
type = "grouping"
path = "clusters.tsv"
name = "clusters"

[freq]
table = "freq.tsv"
words_total = 60
bucket_size = 20

[drift]
sample_size = 30
seed = 5

[inout]
words = "words.txt"

[diff]
early_step = 100
k = 5
"#,
    )
    .unwrap();
}

fn interp_fixture(dir: &Path) {
    let alphas: Vec<f64> = (0..=5).map(|k| k as f64 / 5.0).collect();
    fixture(dir, &interpolation(N, 64, CLUSTERS, &alphas, 11).unwrap(), true, Some(1000));
}

fn csv_values(path: &Path, series: &str) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        // series names may be quoted; the five numeric columns never are
        .map(|l| l.rsplitn(6, ',').collect::<Vec<_>>())
        .filter(|f| f[5].trim_matches('"') == series)
        .map(|f| f[2].parse().unwrap())
        .collect()
}

#[test]
fn count_writes_frequency_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("fixture.txt"), "the cat the").unwrap();
    let o = run(&["count", "fixture.txt", "--out", "freq.tsv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("freq.tsv")).unwrap(), "the\t2\ncat\t1\n");
    let o = run(&["count", "fixture.txt"], dir.path());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "the\t2\ncat\t1\n");
    let o = run(&["count", "missing.txt"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn conv_rsa_on_identical_checkpoints_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let m = random_matrix(N, 8, 3);
    fixture(dir.path(), &[m.clone(), m], false, None);
    let o = run(&["conv-rsa", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = csv_values(&dir.path().join("results/conv_rsa.csv"), "convergence");
    assert_eq!(v, vec![1.0, 1.0]);
    assert!(dir.path().join("results/conv_rsa.json").exists());
    assert!(dir.path().join("results/conv_rsa.svg").exists());
}

#[test]
fn hyp_rsa_is_monotone_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    interp_fixture(dir.path());
    let o = run(&["hyp-rsa", "--config", "run.toml", "--threads", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = dir.path().join("results/hyp_rsa.csv");
    let v = csv_values(&csv, "clusters");
    assert_eq!(v.len(), 6);
    assert!(v.windows(2).all(|w| w[0] <= w[1]), "{v:?}");
    let first = std::fs::read(&csv).unwrap();
    let o = run(
        &["hyp-rsa", "--config", "run.toml", "--threads", "4", "--checkpoint-workers", "3", "--no-plots"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(first, std::fs::read(&csv).unwrap());
}

#[test]
fn rescaling_follows_tokens_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let m = random_matrix(N, 8, 3);
    fixture(dir.path(), &[m.clone(), m], false, None);
    let o = run(&["freq", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("tokens_per_step"));
    assert!(!dir.path().join("results/freq_convergence_rescaled.svg").exists());
    let cfg = std::fs::read_to_string(dir.path().join("run.toml")).unwrap();
    std::fs::write(dir.path().join("strict.toml"), cfg.replace("bucket_size = 20", "bucket_size = 20\nrescale = true")).unwrap();
    assert_eq!(code(&run(&["freq", "--config", "strict.toml"], dir.path())), 2);

    let dir = tempfile::tempdir().unwrap();
    interp_fixture(dir.path());
    assert_eq!(code(&run(&["freq", "--config", "run.toml"], dir.path())), 0);
    assert!(dir.path().join("results/freq_convergence_rescaled.svg").exists());
}

#[test]
fn dry_run_validates_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    interp_fixture(dir.path());
    let o = run(&["hyp-rsa", "--config", "run.toml", "--dry-run"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan = String::from_utf8(o.stdout).unwrap();
    assert!(plan.contains("6 checkpoints"), "{plan}");
    assert!(plan.contains("hypothesis clusters: 60 tokens"), "{plan}");
    assert!(!dir.path().join("results").exists());
    std::fs::remove_file(dir.path().join("in3.npy")).unwrap();
    let o = run(&["conv-rsa", "--config", "run.toml", "--dry-run"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("in3.npy"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    interp_fixture(dir.path());
    std::fs::write(dir.path().join("bad.toml"), "manifets = \"manifest.json\"\n").unwrap();
    assert_eq!(code(&run(&["conv-rsa", "--config", "bad.toml"], dir.path())), 2);
    assert_eq!(code(&run(&["conv-rsa", "--vocab", "vocab.tsv"], dir.path())), 2);
    assert_eq!(code(&run(&["diff", "--config", "run.toml", "--early-step", "7"], dir.path())), 2);
    write_vocab(dir.path(), N - 1);
    assert_eq!(code(&run(&["conv-rsa", "--config", "run.toml"], dir.path())), 2);
    assert_eq!(code(&run(&["no-such-command"], dir.path())), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let good = random_matrix(N, 8, 1);
    let mut values: Vec<f64> = (0..N).flat_map(|r| good.row(r)).collect();
    values[..8].fill(0.5);
    let bad = EmbeddingMatrix::from_f64(N, 8, values, EmbeddingKind::Input).unwrap();
    fixture(dir.path(), &[bad, good], false, None);
    let o = run(&["conv-rsa", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("token 0"), "{}", stderr(&o));
}

#[test]
fn rdm_subcommand_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    interp_fixture(dir.path());
    let o = run(
        &["rdm", "--matrix", "in5.npy", "--vocab", "vocab.tsv", "--words", "words.txt", "--metric", "cosine", "--step", "500", "--out", "r.npy"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (rdm, man) = load_rdm(dir.path().join("r.npy")).unwrap();
    assert_eq!(rdm.len(), N);
    assert_eq!(man.source_step, 500);
    assert_eq!(rdm.values().len(), N * (N - 1) / 2);
}

#[test]
fn remaining_experiments_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    interp_fixture(dir.path());
    for cmd in ["freq", "drift", "inout", "diff"] {
        let o = run(&[cmd, "--config", "run.toml"], dir.path());
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    let r = dir.path().join("results");
    let drift = csv_values(&r.join("drift.csv"), "drift (n=30, seed=5)");
    assert_eq!(drift.last(), Some(&0.0));
    assert!(csv_values(&r.join("inout.csv"), "all").iter().all(|v| *v == 1.0));
    assert_eq!(csv_values(&r.join("freq_convergence.csv"), "bucket_3").last(), Some(&1.0));
    assert!(r.join("freq_buckets.tsv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(r.join("diff.json")).unwrap()).unwrap();
    assert_eq!(report["closing"].as_array().unwrap().len(), 5);
    let tsv = std::fs::read_to_string(r.join("diff.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 11);
}
