use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use robust_knn::Seed;
use robust_knn_harness::experiments::synthetic_split;
use robust_knn_harness::io::write_dataset_csv;
use robust_knn_harness::results::RESULT_HEADER;

fn rnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synthetic_split(400, 100, Seed(1));
    write_dataset_csv(
        fs::File::create(dir.path().join("train.csv")).unwrap(),
        &train,
        &[],
        &[],
    )
    .unwrap();
    write_dataset_csv(
        fs::File::create(dir.path().join("test.csv")).unwrap(),
        &test,
        &[],
        &[],
    )
    .unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(rnn(d, &["--help"]).status.code(), Some(0));
    assert_eq!(rnn(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        rnn(
            d,
            &["estimate-noise", "--data", "train.csv", "--k-prime", "x"]
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        rnn(d, &["fig1b", "--tau-plus", "0.1", "--tau-minus", "0.3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        rnn(d, &["cv", "--data", "train.csv", "--method", "svm"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        rnn(d, &["estimate-noise", "--data", "missing.csv"])
            .status
            .code(),
        Some(2)
    );
    fs::write(d.join("bad.csv"), "a,label\n1,0\n2,oops\n").unwrap();
    let o = rnn(d, &["estimate-noise", "--data", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(
        rnn(d, &["estimate-noise", "--data", "empty.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn estimate_noise_prints_key_value_lines() {
    let dir = workspace();
    let o = rnn(
        dir.path(),
        &["estimate-noise", "--data", "train.csv", "--k-prime", "20"],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("tau_plus_hat="));
    assert!(lines[1].starts_with("tau_minus_hat="));
    let v: f64 = lines[0]["tau_plus_hat=".len()..].parse().unwrap();
    assert!((0.0..=1.0).contains(&v));
}

#[test]
fn figure_output_follows_the_schema() {
    let dir = workspace();
    let o = rnn(
        dir.path(),
        &[
            "fig1a",
            "--trials",
            "2",
            "--grid-k",
            "5,25",
            "--n-train",
            "500",
            "--n-test",
            "100",
        ],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULT_HEADER.join(","));
    assert_eq!(lines.count(), 2 * 2 * 3);

    let o = rnn(
        dir.path(),
        &[
            "fig1c", "--trials", "2", "--grid-n", "100,400", "--out", "c.csv",
        ],
    );
    assert!(o.status.success());
    let summary = fs::read_to_string(dir.path().join("c.summary.csv")).unwrap();
    assert!(summary
        .lines()
        .any(|l| l.starts_with("fig1c,band_lower,,,400,")));
    assert!(summary.lines().any(|l| l.starts_with("fig1c,bayes_error,")));
}

#[test]
fn predict_accepts_libsvm() {
    let dir = workspace();
    let d = dir.path();
    fs::write(
        d.join("train.svm"),
        "1 1:0.1 2:0.1\n1 1:0.2 2:0.15\n-1 1:0.9 2:0.8\n-1 2:0.95 1:0.85\n",
    )
    .unwrap();
    fs::write(d.join("test.svm"), "1 1:0.12 2:0.1\n-1 1:0.88 2:0.85\n").unwrap();
    let o = rnn(
        d,
        &[
            "predict",
            "--data",
            "train.svm",
            "--test",
            "test.svm",
            "--format",
            "libsvm",
            "--k",
            "1",
            "--method",
            "knn",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        stdout(&o),
        "index,label,eta_hat,prediction\n0,1,1,1\n1,0,0,0\n"
    );
}

#[test]
fn inject_noise_keeps_clean_labels_alongside() {
    let dir = workspace();
    let o = rnn(
        dir.path(),
        &[
            "inject-noise",
            "--data",
            "train.csv",
            "--tau-plus",
            "0.4",
            "--tau-minus",
            "0.4",
        ],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,label,clean_label");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 400);
    let flipped = rows.iter().filter(|r| r[2] != r[3]).count();
    assert!((100..220).contains(&flipped), "{flipped}");
}

#[test]
fn cv_and_sweep_write_summaries() {
    let dir = workspace();
    let d = dir.path();
    let o = rnn(
        d,
        &[
            "cv",
            "--data",
            "train.csv",
            "--trials",
            "1",
            "--grid-k",
            "5:5:15",
            "--grid-k-prime",
            "10",
            "--out",
            "cv.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(d.join("cv.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 4 * 3
    );
    assert!(d.join("cv.summary.csv").exists());

    let o = rnn(
        d,
        &[
            "sweep",
            "k-prime",
            "--data",
            "train.csv",
            "--trials",
            "2",
            "--k",
            "10",
            "--grid-k-prime",
            "5,40",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("sweep_k_prime,") && l.contains(",rnn,10,")));
}
