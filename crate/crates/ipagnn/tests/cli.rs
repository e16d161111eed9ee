//! End-to-end command-line tests on fixture files: golden stdout for the
//! inspection commands, exit codes, config-file layering, and a miniature
//! gen -> mask -> train -> eval -> attn pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ipagnn"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_prints_environment_target_and_trace() {
    let out = bin()
        .args(["run", &fixture("counted_loop.txt")])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "v0 = 985\nv1 = 0\ntarget = 985\ntrace = 0 1 2 3 4 5 6 7 2 3 4 5 6 7 2 3 4 7 2 3 4 7 2 3 4 7 2 3 4 7 2 8\n"
    );
}

#[test]
fn cfg_prints_the_adjacency_listing() {
    let out = bin()
        .args(["cfg", &fixture("counted_loop.txt")])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "0: out=[1] in=[] type=[true]\n\
         1: out=[2] in=[0] type=[true]\n\
         2: out=[3,8] in=[1,7] type=[true,false]\n\
         3: out=[4] in=[2] type=[true]\n\
         4: out=[5,7] in=[3] type=[true,false]\n\
         5: out=[6] in=[4] type=[true]\n\
         6: out=[7] in=[5] type=[true]\n\
         7: out=[2] in=[4,6] type=[true]\n\
         8: out=[8] in=[2,8] type=[true]\n"
    );
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_program_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "v1 = 3\n").unwrap();
    let out = bin().args(["run", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("must begin with v0 = M"));
}

#[test]
fn missing_data_file_exits_two() {
    let out = bin()
        .args(["eval", "--ckpt", "/nonexistent.ckpt", "--data", "/nonexistent.jsonl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run_ok = |args: &[&str]| {
        let out = bin().args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };

    run_ok(&[
        "gen",
        "--out",
        data.to_str().unwrap(),
        "--train-count",
        "120",
        "--valid-count",
        "30",
        "--buckets",
        "12:20",
        "--seed",
        "4",
    ]);
    for name in ["train.jsonl", "valid.jsonl", "test.jsonl", "manifest.json"] {
        assert!(data.join(name).exists(), "{name} missing");
    }

    let masked = dir.path().join("masked.jsonl");
    run_ok(&[
        "mask",
        "--input",
        data.join("test.jsonl").to_str().unwrap(),
        "--output",
        masked.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    let text = std::fs::read_to_string(&masked).unwrap();
    assert_eq!(text.lines().count(), 20);
    assert!(text.contains("\"mask_index\""));

    let out_dir = dir.path().join("run");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--model",
        "ipagnn",
        "--hidden",
        "16",
        "--epochs",
        "1",
        "--max-steps",
        "3",
        "--precision",
        "f64",
        "--seed",
        "1",
    ]);
    let ckpt = out_dir.join("model.ckpt");
    assert!(ckpt.exists());

    let report_path = dir.path().join("report.json");
    let out = run_ok(&[
        "eval",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--data",
        data.join("test.jsonl").to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    let table = stdout(&out);
    assert!(table.contains("length"), "{table}");
    assert!(table.contains("overall"), "{table}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["overall_n"], 20);

    // The discrete-thread model evaluates under the soft-pointer weights.
    run_ok(&[
        "eval",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--data",
        data.join("test.jsonl").to_str().unwrap(),
        "--as",
        "hardip",
    ]);

    let attn_path = dir.path().join("attn.tsv");
    run_ok(&[
        "attn",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--program",
        &fixture("branchy.txt"),
        "--v0",
        "849",
        "--out",
        attn_path.to_str().unwrap(),
    ]);
    let attn = std::fs::read_to_string(&attn_path).unwrap();
    let lines: Vec<&str> = attn.lines().collect();
    assert_eq!(lines[0], "t\t0\t1\t2\t3\t4\t5");
    // Rows: t = 0..=T for the 6-node program (T = 6).
    assert_eq!(lines.len(), 8);
}

#[test]
fn sweep_trains_the_grid_and_names_a_winner() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = bin()
        .args([
            "gen",
            "--out",
            data.to_str().unwrap(),
            "--train-count",
            "48",
            "--valid-count",
            "16",
            "--buckets",
            "12:4",
            "--seed",
            "11",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());

    let sweep_dir = dir.path().join("sweep");
    let out = bin()
        .args([
            "sweep",
            "--data",
            data.to_str().unwrap(),
            "--out",
            sweep_dir.to_str().unwrap(),
            "--model",
            "line",
            "--profile",
            "desk",
            "--epochs",
            "1",
            "--seed",
            "2",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    // Four desk-grid cells plus the winner line.
    assert_eq!(text.matches("cell H=64").count(), 4);
    assert!(text.contains("winner: H=64 lr="), "{text}");
    assert!(sweep_dir.join("sweep.json").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let config = dir.path().join("settings.conf");
    std::fs::write(
        &config,
        format!(
            "[gen]\nout = {}\ntrain_count = 40\nvalid_count = 10\nbuckets = 12:5\nseed = 6\n",
            data.display()
        ),
    )
    .unwrap();

    // All values from the file.
    let out = bin()
        .args(["gen", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("wrote 40 train, 10 valid, 5 test"));

    // The flag overrides the file.
    let out = bin()
        .args([
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--train-count",
            "25",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("wrote 25 train"));
}

#[test]
fn gen_rejects_bad_bucket_syntax() {
    let out = bin()
        .args(["gen", "--out", "/tmp/x", "--buckets", "20x500"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
