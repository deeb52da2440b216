use std::path::Path;
use std::process::{Command, Output};

use anchorhull::pipeline::{ANCHORS_FILE, METRICS_FILE, SWEEP_FILE};
use anchorhull::toy::bundled_corpus;

fn anchorhull(work: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchorhull"))
        .arg("--work-dir")
        .arg(work)
        .args(args)
        .output()
        .unwrap()
}

/// Curation flags suited to the small bundled corpus.
const TOY: [&str; 2] = ["--min-freq", "5"];

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn stages_run_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.txt");
    std::fs::write(&corpus, bundled_corpus()).unwrap();
    let work = dir.path().join("work");
    let corpus = corpus.to_str().unwrap();

    let mut ingest = vec!["ingest", "--corpus", corpus];
    ingest.extend(TOY);
    for args in [
        ingest,
        vec!["cooccur"],
        vec!["embed", "--method", "pca"],
        vec!["anchors", "--method", "pca"],
        vec!["recover", "--k", "4"],
        vec!["metrics"],
    ] {
        let out = anchorhull(&work, &args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(work.join(ANCHORS_FILE).exists());
    assert!(work.join(METRICS_FILE).exists());

    let svg = dir.path().join("hull.svg");
    let out = anchorhull(&work, &["viz", "--format", "json", "--output", svg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // A 3-D embedding cannot be drawn as SVG.
    let out = anchorhull(&work, &["viz", "--format", "svg", "--output", svg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    // More topics than hull vertices is a stage failure.
    let out = anchorhull(&work, &["recover", "--k", "10000"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn sweep_and_pipeline_commands() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.txt");
    std::fs::write(&corpus, bundled_corpus()).unwrap();
    let work = dir.path().join("work");
    let corpus = corpus.to_str().unwrap();

    let mut args = vec!["sweep", "--corpus", corpus, "--method", "greedy", "--k-range", "2:4"];
    args.extend(TOY);
    let out = anchorhull(&work, &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(work.join(SWEEP_FILE)).unwrap();
    assert_eq!(text.lines().count(), 4);

    let mut args = vec!["pipeline", "--corpus", corpus, "--method", "pca", "--k", "3"];
    args.extend(TOY);
    let out = anchorhull(&work, &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["k"], 3);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&anchorhull(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&anchorhull(dir.path(), &["recover"])), 1);
    let out = anchorhull(dir.path(), &["sweep", "--corpus", "x", "--k-range", "a:b"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&anchorhull(dir.path(), &["--help"])), 0);
}

#[test]
fn missing_inputs_are_stage_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&anchorhull(dir.path(), &["cooccur"])), 2);
    let missing = dir.path().join("absent.txt");
    assert_eq!(
        code(&anchorhull(
            dir.path(),
            &["ingest", "--corpus", missing.to_str().unwrap()]
        )),
        2
    );
}
