use std::path::Path;
use std::process::{Command, Output};

fn invrl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invrl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn every_verb_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(invrl(
        &[
            "generate-data",
            "--seed",
            "3",
            "--products",
            "4",
            "--days",
            "20",
            "--out",
            "data",
        ],
        d,
    ));
    ok(invrl(
        &[
            "ingest",
            "--orders",
            "data/orders.csv",
            "--metadata",
            "data/metadata.csv",
            "--days",
            "20",
            "--out",
            "clean",
        ],
        d,
    ));
    assert_eq!(
        std::fs::read(d.join("data/orders.csv")).unwrap(),
        std::fs::read(d.join("clean/orders.csv")).unwrap()
    );

    let config = "agent = \"a2c_mod\"\nseed = 0\nepisodes = 2\noutput_dir = \"run\"\n\
        [data]\norders = \"clean/orders.csv\"\nmetadata = \"clean/metadata.csv\"\n\
        [data.generator]\ndays = 20\n[data.split]\ntrain_periods = 60\ntest_periods = 20\n";
    std::fs::write(d.join("run.toml"), config).unwrap();
    let out = ok(invrl(
        &["train", "--seed", "5", "--config", "run.toml", "--evaluate"],
        d,
    ));
    assert!(out.contains("test: business"), "{out}");
    let saved = std::fs::read_to_string(d.join("run/config.toml")).unwrap();
    assert!(saved.contains("seed = 5"));

    assert!(ok(invrl(&["evaluate", "--run", "run"], d)).starts_with("test: business"));
    ok(invrl(&["heatmap", "--run", "run", "--resolution", "11"], d));
    let rows = std::fs::read_to_string(d.join("run/heatmap_value.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 122);
    ok(invrl(&["report", "--run", "run"], d));
    let rows = std::fs::read_to_string(d.join("run/reward_components.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 3);
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!invrl(&["train", "--agent", "dqn", "--desk"], dir.path())
        .status
        .success());
    assert!(!invrl(&["generate-data"], dir.path()).status.success());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("orders.csv"), "product_id,timestamp\nP1,not-a-time\n").unwrap();
    let out = invrl(&["ingest", "--orders", "orders.csv"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("orders.csv:2:"));
    assert!(!invrl(&["evaluate", "--run", "missing"], d).status.success());
}
