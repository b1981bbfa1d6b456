use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[paths]
program = "builtin:game_loop"
out_dir = "out"

[protocol]
cases = 70
duration_s = 1.0
repeats = 2
rounds = 2

[fit]
restarts = 2
max_iters = 20000
nonneg = true
"#;

fn emod(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emod")).current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_program(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("prog.mj");
    std::fs::write(&p, emod_core::fixtures::GAME_LOOP).unwrap();
    p
}

#[test]
fn missing_inputs_exit_with_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = emod(dir.path(), &["blocks", "nowhere.mj"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.mj"));

    std::fs::write(dir.path().join("bad.toml"), "[paths]\nprogram = \"missing/prog.mj\"\n").unwrap();
    let out = emod(dir.path(), &["pipeline", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing/prog.mj"));

    let out = emod(dir.path(), &["run", "--out-dir", "empty"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plan.json"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[protocol]\ncasez = 3\n").unwrap();
    let out = emod(dir.path(), &["pipeline", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn static_commands_describe_the_program() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write_program(dir.path());
    let prog = prog.to_str().unwrap();

    let text = ok(&emod(dir.path(), &["parse", prog]));
    assert!(text.starts_with("19 method(s), 108 block(s), 55 operation(s)"), "{text}");
    let ast: serde_json::Value = serde_json::from_str(&ok(&emod(dir.path(), &["parse", prog, "--dump-ast"]))).unwrap();
    assert!(ast.is_object());

    let blocks: serde_json::Value = serde_json::from_str(&ok(&emod(dir.path(), &["blocks", prog]))).unwrap();
    let list = blocks["blocks"].as_array().unwrap();
    assert_eq!(list.len(), 108);
    assert_eq!(list.iter().filter(|b| b["removable"] == true).count(), 65);
    assert!(blocks["config_hash"].as_str().unwrap().len() == 64);

    let dict = ok(&emod(dir.path(), &["dict", prog]));
    let mut lines = dict.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "block");
    assert_eq!(header.len(), 56);
    assert_eq!(lines.count(), 108);

    ok(&emod(dir.path(), &["dict", prog, "--out", "d.csv"]));
    assert_eq!(std::fs::read_to_string(dir.path().join("d.csv")).unwrap(), dict);
}

#[test]
fn pipeline_is_reproducible_stage_by_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), SMALL).unwrap();
    let text = ok(&emod(d, &["pipeline", "run.toml", "--svg", "--entries", "--traces"]));
    assert!(text.contains("val_nmae"));
    let out = d.join("out");
    for f in [
        "plan.json",
        "truth.json",
        "measurements.csv",
        "counts.csv",
        "model.json",
        "metrics.csv",
        "validation.json",
        "report.json",
        "report_ops.csv",
        "ops.svg",
        "blocks.svg",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(out.join("runs/case_0000.csv").exists());
    assert!(out.join("runs/case_0000.log").exists());
    assert!(out.join("traces/case_0000_meas.csv").exists());
    let read = |f: &str| std::fs::read(out.join(f)).unwrap();
    let (model, measurements, report) = (read("model.json"), read("measurements.csv"), read("report.json"));

    let report_json: serde_json::Value = serde_json::from_slice(&report).unwrap();
    assert!(report_json["top10_share"].as_f64().unwrap() > 0.0);
    assert_eq!(report_json["variants"].as_array().unwrap().len(), 4);

    // The whole pipeline again, single-threaded.
    ok(&emod(d, &["pipeline", "run.toml", "--jobs", "1"]));
    assert_eq!(read("model.json"), model);
    assert_eq!(read("measurements.csv"), measurements);

    // One stage alone, from the artifacts on disk.
    let cfg = d.join("run.toml");
    let cfg = cfg.to_str().unwrap();
    ok(&emod(d, &["fit", "--config", cfg]));
    assert_eq!(read("model.json"), model);
    ok(&emod(d, &["report", "--config", cfg]));
    assert_eq!(read("report.json"), report);

    // A different seed changes the hash and the measurements.
    ok(&emod(d, &["pipeline", "run.toml", "--seed", "5", "--out-dir", "other"]));
    assert_ne!(std::fs::read(d.join("other/measurements.csv")).unwrap(), measurements);
}
