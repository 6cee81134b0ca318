//! End-to-end CLI behavior through the built binary.

use std::path::Path;
use std::process::Command;

fn rltc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rltc"));
    cmd.env_remove("RLTC_WORKERS");
    cmd
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn run_row_count_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let status = rltc()
        .args([
            "run",
            "--grid-dim",
            "3",
            "--policy",
            "trust-all",
            "--noise",
            "0.1",
            "--eval-episodes",
            "10",
            "--seeds",
            "7,8",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    let lines: Vec<&str> = text.lines().collect();
    // header + 2 per-seed rows + 1 aggregate row
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("config_id,grid_dim,n_agents"));
    assert!(lines[1].contains(",7,"));
    assert!(lines[2].contains(",8,"));
    assert!(lines[3].contains(",all,"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(
        &config,
        "grid_dim = 3\npolicy = \"trust-all\"\nnoise = 0.3\neval_episodes = 5\nseeds = [1]\n",
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let status = rltc()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--noise", "0.05", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    assert!(
        text.contains(",0.050000,"),
        "flag value should win:\n{text}"
    );
    assert!(!text.contains(",0.300000,"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "grid_dmi = 3\n").unwrap();
    let output = rltc()
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("grid_dmi"), "stderr: {stderr}");
}

#[test]
fn out_of_range_flag_names_the_key() {
    let output = rltc()
        .args(["run", "--noise", "1.5", "--seeds", "1"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("noise"), "stderr: {stderr}");
}

#[test]
fn bad_policy_token_is_rejected() {
    let output = rltc()
        .args(["run", "--policy", "trustall"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("policy"), "stderr: {stderr}");
}

#[test]
fn master_seed_derivation() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let status = rltc()
            .args([
                "run",
                "--grid-dim",
                "3",
                "--policy",
                "oracle",
                "--eval-episodes",
                "5",
                "--master-seed",
                "99",
                "--seed-count",
                "3",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(read(&out_a), read(&out_b));
    // 3 derived seeds -> 3 per-seed rows + aggregate + header
    assert_eq!(read(&out_a).lines().count(), 5);
}

#[test]
fn json_mirror_and_train_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let json = dir.path().join("rows.json");
    let train = dir.path().join("train.csv");
    let status = rltc()
        .args([
            "run",
            "--grid-dim",
            "3",
            "--policy",
            "rltc",
            "--train-episodes",
            "12",
            "--eval-episodes",
            "4",
            "--seeds",
            "1",
            "--out",
        ])
        .arg(&out)
        .arg("--json")
        .arg(&json)
        .arg("--train-log")
        .arg(&train)
        .status()
        .unwrap();
    assert!(status.success());

    let rows: serde_json::Value = serde_json::from_str(&read(&json)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let train_text = read(&train);
    let mut lines = train_text.lines();
    assert_eq!(lines.next().unwrap(), "config_id,seed,episode,avg_reward");
    // one line per training episode
    assert_eq!(lines.count(), 12);
}

#[test]
fn qtable_snapshots_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let qt = dir.path().join("qt.txt");
    let status = rltc()
        .args([
            "run",
            "--grid-dim",
            "3",
            "--frac-reliable",
            "1.0",
            "--policy",
            "rltc",
            "--train-episodes",
            "30",
            "--eval-episodes",
            "4",
            "--seeds",
            "5",
            "--out",
        ])
        .arg(&out)
        .arg("--qtable-out")
        .arg(&qt)
        .status()
        .unwrap();
    assert!(status.success());
    let snapshot = dir.path().join("qt-seed5.txt");
    assert!(snapshot.exists());
    let tables = rltc::learning::QTableSet::load(&snapshot).unwrap();
    // 9 reliable agents, all states present, values finite
    assert_eq!(tables.agents().count(), 9);
    for agent in tables.agents() {
        let table = tables.table(agent).unwrap();
        for state in 0..table.state_count() as u32 {
            assert!(table.max_value(state).unwrap().is_finite());
        }
    }
}

#[test]
fn oracle_grid_instance_and_curve_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let output = rltc()
        .args([
            "oracle",
            "--grid-dim",
            "3",
            "--frac-reliable",
            "1.0",
            "--noise",
            "0.2",
            "--horizon",
            "5",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let values: Vec<f64> = stdout.lines().map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(values.len(), 5);
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));

    let text = read(&out);
    assert!(text.starts_with("t,expected_success_rate\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn oracle_rejects_rltc_policy_and_oversized_grids() {
    let output = rltc()
        .args(["oracle", "--fixture", "path2", "--policy", "rltc"])
        .output()
        .unwrap();
    assert!(!output.status.success());

    // 4x4 = 16 nodes exceeds the exact-evolution bound of 14
    let output = rltc().args(["oracle", "--grid-dim", "4"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("14"), "stderr: {stderr}");
}
