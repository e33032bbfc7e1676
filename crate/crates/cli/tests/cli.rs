use std::path::Path;
use std::process::{Command, Output};

fn pplink(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pplink"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn synth_then_stages_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = pplink(
        dir.path(),
        &["synth", "--scenario", "homonym", "--out", "corpus", "--seed", "4"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(dir.path().join("corpus/config.toml").exists());
    for stage in [
        "ingest",
        "families",
        "pairs",
        "mesh-extract",
        "embed",
        "refs",
        "ipc-filter",
        "rank",
        "report",
    ] {
        let out = pplink(
            dir.path(),
            &[stage, "--config", "corpus/config.toml", "--stage-dir", "work"],
        );
        assert!(out.status.success(), "{stage}: {}", text(&out.stderr));
        assert!(text(&out.stdout).starts_with(stage), "{}", text(&out.stdout));
    }
    assert!(dir.path().join("work/final_pairs.jsonl").exists());
    assert!(dir.path().join("work/report.csv").exists());
}

#[test]
fn run_all_prints_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pplink(dir.path(), &["synth", "--out", "corpus"]).status.success());
    let out = pplink(
        dir.path(),
        &[
            "run-all",
            "--config",
            "corpus/config.toml",
            "--stage-dir",
            "work",
            "--verbose",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 9, "{stdout}");
    assert!(stdout.contains("rank: final_pairs="));
}

#[test]
fn missing_input_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = pplink(dir.path(), &["rank", "--stage-dir", "empty"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        text(&out.stderr).contains("pairs_features.jsonl"),
        "{}",
        text(&out.stderr)
    );
}

#[test]
fn invalid_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[pairing]\nmin_years = 3.0\n").unwrap();
    let out = pplink(dir.path(), &["ingest", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("min_years"));
    let out = pplink(dir.path(), &["ingest", "--config", "nope.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_subcommand_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let out = pplink(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(text(&out.stderr).contains("Usage"));
    let out = pplink(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("run-all"));
}
