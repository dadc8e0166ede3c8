use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arsent::corpus::to_jsonl;
use arsent::synthetic::{generate, SyntheticSpec};

fn arsent(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arsent")).args(args).current_dir(dir).output().expect("spawn arsent")
}

fn write_corpus(dir: &Path, n: usize) {
    fs::write(dir.join("corpus.jsonl"), to_jsonl(&generate(&SyntheticSpec::three_class(n, 3)))).unwrap();
}

#[test]
fn train_is_reproducible_and_predict_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 300);
    for (out, seed) in [("a.json", "5"), ("b.json", "5"), ("c.json", "6")] {
        let o = arsent(
            &[
                "train",
                "--corpus",
                "corpus.jsonl",
                "--classifier",
                "rf",
                "--features",
                "uni_bi",
                "--seed",
                seed,
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.json"), read("c.json"));

    let o = arsent(&["predict", "--model", "a.json", "--text", "نص غير معروف"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(["positive", "negative", "neutral"].contains(&v["label"].as_str().unwrap()));
    let scores = v["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 3);
    let total: f64 = scores.iter().map(|s| s["score"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn missing_files_exit_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = arsent(&["predict", "--model", "nowhere/model.json", "--text", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere/model.json"));

    let o = arsent(&["experiment", "--corpus", "absent.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.jsonl"));
}

#[test]
fn bad_usage_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(arsent(&["train", "--classifier", "svm"], dir.path()).status.code(), Some(1));
    assert_eq!(arsent(&["no-such-command"], dir.path()).status.code(), Some(1));
    assert_eq!(arsent(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn experiment_with_config_and_single_format() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 240);
    fs::write(
        dir.path().join("run.toml"),
        "corpus_path = \"corpus.jsonl\"\noutput_dir = \"out\"\nseed = 11\n\n[grid]\nclassifiers = [\"mnb\", \"logreg\"]\ntasks = [\"two\"]\n",
    )
    .unwrap();
    let o = arsent(&["experiment", "--config", "run.toml", "--format", "csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    // 3 feature sets × 2 classifiers, plus the header.
    assert_eq!(csv.lines().count(), 7);
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn preprocess_and_inspect_vocab() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.jsonl"),
        "{\"text\": \"الكتاب جميل جدا http://x.org\", \"label\": \"positive\"}\n{\"text\": \"خبر سيء\", \"label\": \"negative\"}\n",
    )
    .unwrap();
    let o = arsent(&["preprocess", "--corpus", "c.jsonl"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<serde_json::Value> =
        String::from_utf8(o.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(!lines[0].to_string().contains("http"));

    let o = arsent(&["inspect-vocab", "--corpus", "c.jsonl", "--top", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!o.stdout.is_empty());
}
