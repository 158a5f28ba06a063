mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn densify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densify")).args(args).output().unwrap()
}

fn write_config(dir: &Path, dataset: &Path) -> std::path::PathBuf {
    let mut text = common::config_text(dataset, &dir.join("out"), "both");
    text = text.replace("[split]", "[tfidf]\nmax_features = 300\n[boost]\nstages = 3\nmax_depth = 2\n[models.random_forest]\ntrees = 6\n[models.mlp2]\nhidden = 16\nepochs = 2\n[split]");
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn synth_then_staged_commands() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = densify(&["synth", "--out", csv.to_str().unwrap(), "--rows", "400", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 401);

    let cfg = write_config(dir.path(), &csv);
    let c = cfg.to_str().unwrap();
    for cmd in ["ingest", "vectorize", "train", "evaluate"] {
        let o = densify(&[cmd, "-c", c]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let out = dir.path().join("out");
    let o = densify(&["compare", "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("mlp2"));

    let acts = dir.path().join("acts.csv");
    let o = densify(&["dump-activations", "-c", c, "--out", acts.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&acts).unwrap();
    assert!(text.starts_with("h0,h1,"));
    assert_eq!(text.lines().next().unwrap().split(',').count(), 16);

    let mut child = Command::new(env!("CARGO_BIN_EXE_densify"))
        .args(["predict", "--artifact", out.join("model.densify").to_str().unwrap(), "--model", "naive_bayes"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"first post\nsecond post\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "Anxiety\tBPD\tbipolar\tothers");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let sum: f64 = l.split('\t').map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }
}

#[test]
fn run_prints_tables() {
    let dir = tempfile::tempdir().unwrap();
    let csv = common::synth_csv(dir.path(), 400, 5);
    let cfg = write_config(dir.path(), &csv);
    let o = densify(&["run", "-c", cfg.to_str().unwrap(), "--set", "run.scenario=\"fe\""]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("sparsity raw train"));
    assert!(stdout.contains("average"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // missing dataset: config failure
    let cfg = write_config(dir.path(), &dir.path().join("absent.csv"));
    let o = densify(&["run", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset.path"));

    // unknown key
    let o = densify(&["run", "-c", cfg.to_str().unwrap(), "--set", "boost.nope=3"]);
    assert_eq!(o.status.code(), Some(1));

    // unparseable data: data failure
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,text,label\n1,hello,NotAClass\n").unwrap();
    let o = densify(&["run", "-c", cfg.to_str().unwrap(), "--dataset", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    // evaluate before train: data failure
    let o = densify(&["evaluate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(densify(&["--help"]).status.code(), Some(0));
    assert_eq!(densify(&["frobnicate"]).status.code(), Some(1));
}
