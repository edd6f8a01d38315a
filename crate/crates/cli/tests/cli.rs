use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn flexduplex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexduplex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn generate(dir: &TempDir, name: &str, pairs: &str, count: &str, seed: &str) -> String {
    let out = path(dir, name);
    let run = flexduplex(&[
        "generate", "--pairs", pairs, "--count", count, "--seed", seed, "--out", &out,
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    out
}

/// Data lines of a CSV file or output, skipping `#` comments.
fn csv_lines(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("effective config"))
        .map(str::to_string)
        .collect()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_is_deterministic_in_the_seed() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "a.bin", "3", "5", "9");
    let b = generate(&dir, "b.bin", "3", "5", "9");
    let c = generate(&dir, "c.bin", "3", "5", "10");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn generate_echoes_the_effective_config() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "d.bin");
    let run = flexduplex(&["generate", "--pairs", "2", "--count", "1", "--out", &out]);
    let text = stdout(&run);
    let line = text.lines().find(|l| l.starts_with("effective config: ")).unwrap();
    let cfg: serde_json::Value = serde_json::from_str(line.trim_start_matches("effective config: ")).unwrap();
    assert_eq!(cfg["pairs"], 2);
    assert_eq!(cfg["count"], 1);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "x.bin");
    assert_eq!(code(&flexduplex(&["generate", "--pairs", "0", "--out", &out])), 2);
    assert!(!Path::new(&out).exists());
    assert_eq!(code(&flexduplex(&["generate", "--no-such-flag"])), 2);
    assert_eq!(code(&flexduplex(&["frobnicate"])), 2);

    let data = generate(&dir, "d.bin", "2", "3", "1");
    let run = flexduplex(&["evaluate", "--dataset", &data, "--methods", "heuristic,bogus"]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("bogus"));
    assert_eq!(
        code(&flexduplex(&["evaluate", "--dataset", &data, "--methods", "flexnet"])),
        2
    );
}

#[test]
fn exhaustive_refuses_large_networks() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "big.bin", "17", "1", "1");
    let run = flexduplex(&["evaluate", "--dataset", &data, "--methods", "exhaustive"]);
    assert_eq!(code(&run), 2);
}

#[test]
fn unreadable_inputs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.bin");
    assert_eq!(
        code(&flexduplex(&[
            "evaluate",
            "--dataset",
            &missing,
            "--methods",
            "maxpower"
        ])),
        1
    );

    let corrupt = path(&dir, "corrupt.bin");
    fs::write(&corrupt, b"not a dataset").unwrap();
    let run = flexduplex(&["evaluate", "--dataset", &corrupt, "--methods", "maxpower"]);
    assert_eq!(code(&run), 1);
    assert!(!String::from_utf8_lossy(&run.stderr).is_empty());

    let data = generate(&dir, "d.bin", "2", "3", "1");
    let model = path(&dir, "model.json");
    fs::write(&model, "{\"format_version\": 1}").unwrap();
    let run = flexduplex(&["evaluate", "--dataset", &data, "--model", &model]);
    assert_eq!(code(&run), 1);
}

#[test]
fn config_files_are_overridden_by_flags_and_checked_for_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "d.bin");
    let cfg = path(&dir, "gen.json");
    fs::write(&cfg, format!("{{\"pairs\": 3, \"count\": 4, \"out\": {out:?}}}")).unwrap();
    let run = flexduplex(&["generate", "--config", &cfg, "--count", "2"]);
    assert_eq!(code(&run), 0);
    assert!(stdout(&run).contains("wrote 2 samples of 6 nodes"));

    fs::write(&cfg, "{\"pairs\": 3, \"colour\": 1}").unwrap();
    let run = flexduplex(&["generate", "--config", &cfg]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("colour"));
}

#[test]
fn train_then_evaluate_writes_the_documented_csv() {
    let dir = TempDir::new().unwrap();
    let train = generate(&dir, "train.bin", "2", "40", "1");
    let test = generate(&dir, "test.bin", "2", "10", "2");
    let model = path(&dir, "model.json");
    let run = flexduplex(&[
        "train",
        "--dataset",
        &train,
        "--out",
        &model,
        "--epochs",
        "3",
        "--hidden",
        "8",
        "--layers",
        "2",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let history = fs::read_to_string(format!("{model}.history.csv")).unwrap();
    let lines = csv_lines(&history);
    assert_eq!(lines[0], "epoch,mean_loss");
    assert_eq!(lines.len(), 4);

    let results = path(&dir, "results.csv");
    let run = flexduplex(&["evaluate", "--dataset", &test, "--model", &model, "--out", &results]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(&results).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        [
            "method",
            "n_pairs",
            "mean_rate",
            "ratio",
            "mean_seconds",
            "samples",
            "seed"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let methods: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(
        methods,
        ["flexnet", "exhaustive", "heuristic", "maxpower", "maxpower_silent"]
    );
    for r in &rows {
        assert_eq!(&r[1], "2");
        assert_eq!(&r[5], "10");
        let ratio: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&ratio));
    }
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn evaluate_without_exhaustive_leaves_ratio_empty() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "d.bin", "2", "3", "1");
    let run = flexduplex(&["evaluate", "--dataset", &data, "--methods", "maxpower"]);
    assert_eq!(code(&run), 0);
    let lines = csv_lines(&stdout(&run));
    assert_eq!(lines[0], "method,n_pairs,mean_rate,ratio,mean_seconds,samples,seed");
    assert!(lines[1].starts_with("maxpower,2,"));
    assert!(lines[1].contains(",,"));
}

#[test]
fn bench_time_reports_every_size_and_notes_what_is_timed() {
    let run = flexduplex(&[
        "bench-time",
        "--pairs",
        "1,2",
        "--samples",
        "2",
        "--methods",
        "flexnet,exhaustive,maxpower",
        "--exhaustive-max-pairs",
        "1",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let text = stdout(&run);
    assert!(text.lines().any(|l| l.starts_with("# ") && l.contains("wall time")));
    let lines = csv_lines(&text);
    assert_eq!(lines[0], "method,n_pairs,mean_seconds");
    let keys: Vec<String> = lines[1..]
        .iter()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        ["flexnet,1", "exhaustive,1", "maxpower,1", "flexnet,2", "maxpower,2"]
    );
}

#[test]
fn generalize_reports_both_model_kinds_per_size() {
    let run = flexduplex(&[
        "generalize",
        "--pairs",
        "1,2",
        "--train-count",
        "20",
        "--test-count",
        "4",
        "--epochs",
        "1",
        "--hidden",
        "8",
        "--layers",
        "1",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let lines = csv_lines(&stdout(&run));
    assert_eq!(lines[0], "model_kind,n_pairs,mean_rate,ratio");
    let keys: Vec<String> = lines[1..]
        .iter()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(keys, ["mixed,1", "per_size,1", "mixed,2", "per_size,2"]);
}
