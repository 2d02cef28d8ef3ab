use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jointscl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointscl"))
        .args(args)
        .current_dir(dir)
        .env_remove("JOINTSCL_DATA_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = jointscl(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Synthetic corpus plus merged labeled files `alpha.review`, `beta.review`.
fn corpus(dir: &Path) {
    ok(dir, &["synth", "--labeled", "300", "--unlabeled", "300", "--seed", "2", "--out", "data"]);
    for d in ["alpha", "beta"] {
        let pos = fs::read(dir.join(format!("data/{d}/positive.review"))).unwrap();
        let neg = fs::read(dir.join(format!("data/{d}/negative.review"))).unwrap();
        fs::write(dir.join(format!("{d}.review")), [pos, neg].concat()).unwrap();
    }
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn pivots_writes_at_most_p_terms() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    ok(
        tmp.path(),
        &[
            "pivots", "--strategy", "mi", "--p", "100", "--source", "alpha.review", "--target",
            "data/beta/unlabeled.review", "--out", "pivots.txt",
        ],
    );
    let text = fs::read_to_string(tmp.path().join("pivots.txt")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(!rows.is_empty() && rows.len() <= 100);
    assert!(tmp.path().join("pivots.txt.manifest.json").exists());
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    fs::write(tmp.path().join("run.conf"), "# pivots\np = 7\nstrategy = frequency\n").unwrap();
    let base = [
        "pivots", "--config", "run.conf", "--source", "alpha.review", "--target", "data/beta/unlabeled.review",
    ];
    ok(tmp.path(), &[&base[..], &["--out", "a.txt"]].concat());
    ok(tmp.path(), &[&base[..], &["--p", "3", "--out", "b.txt"]].concat());
    let count = |f: &str| {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(text.starts_with("# strategy=frequency"));
        text.lines().filter(|l| !l.starts_with('#')).count()
    };
    assert_eq!(count("a.txt"), 7);
    assert_eq!(count("b.txt"), 3);

    fs::write(tmp.path().join("bad.conf"), "no_such_flag = 1\n").unwrap();
    let out = jointscl(tmp.path(), &["pivots", "--config", "bad.conf", "--source", "x", "--target", "y", "--out", "z"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_reproduces_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    ok(
        tmp.path(),
        &[
            "train", "--system", "joint", "--source", "alpha.review", "--target", "data/beta/unlabeled.review",
            "--hidden", "8", "--epochs", "2", "--p", "10", "--train-size", "100", "--validation-size", "40",
            "--seed", "3", "--out", "m.ckpt",
        ],
    );
    let first = fs::read(tmp.path().join("m.ckpt")).unwrap();
    fs::remove_file(tmp.path().join("m.ckpt")).unwrap();
    ok(tmp.path(), &["replay", "m.ckpt.manifest.json"]);
    assert_eq!(fs::read(tmp.path().join("m.ckpt")).unwrap(), first);

    ok(tmp.path(), &["eval", "--model", "m.ckpt", "--target", "beta.review", "--out", "eval.json"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("eval.json")).unwrap()).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn benchmark_writes_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let stdout = ok(
        tmp.path(),
        &[
            "benchmark", "--data-dir", "data", "--domains", "alpha,beta", "--systems", "joint_mi,aescl",
            "--seeds", "2", "--hidden", "8", "--aescl-hidden", "8", "--epochs", "2", "--p", "10",
            "--train-size", "150", "--validation-size", "50", "--out", "bench",
        ],
    );
    let csv = fs::read_to_string(tmp.path().join("bench/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "source,target,system,seed,accuracy,best_epoch,config_hash");
    // 2 directed pairs x 2 systems x 2 seeds
    assert_eq!(lines.len(), 1 + 8);
    assert!(stdout.contains("alpha->beta"));
    for f in ["welch.csv", "summary.md", "summary.txt", "manifest.json"] {
        assert!(tmp.path().join("bench").join(f).exists(), "{f}");
    }
}

#[test]
fn selfcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["selfcheck", "--trials", "30"]);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().all(|l| l.contains(" ok ")), "{out}");
}

#[test]
fn errors_are_single_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let out = jointscl(tmp.path(), &["vocab", "--source", "missing.review", "--target", "also.review", "--out", "v.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "io");

    let out = jointscl(tmp.path(), &["vocab", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let out = jointscl(tmp.path(), &["benchmark", "--out", "b"]);
    assert_eq!(out.status.code(), Some(2), "data dir is required without the environment variable");

    fs::write(tmp.path().join("bad.review"), "good:1 #label#:sideways\n").unwrap();
    let out = jointscl(tmp.path(), &["vocab", "--source", "bad.review", "--target", "bad.review", "--out", "v.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("bad.review"));
}
