use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn rescue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rescue"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_one_cell(dir: &Path, episodes: usize) {
    let cfg = dir.join("train.json");
    std::fs::write(
        &cfg,
        r#"{"strategy": "qmix", "episodes": 40, "warmup": 8, "batch_size": 4, "updates_per_episode": 4, "epsilon_anneal": 0.5, "hidden": [8], "seed": 1}"#,
    )
    .unwrap();
    let out = rescue(&[
        "train",
        "--scenario",
        arg(&scenario("one_cell.json")),
        "--train-config",
        arg(&cfg),
        "--out",
        arg(dir),
        "--episodes",
        &episodes.to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_writes_log_checkpoint_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    train_one_cell(dir.path(), 5);
    let rewards = std::fs::read_to_string(dir.path().join("rewards_qmix.csv")).unwrap();
    let lines: Vec<&str> = rewards.lines().collect();
    assert_eq!(lines[0], "episode,strategy,return,mean_loss,epsilon");
    assert_eq!(lines.len(), 6);
    assert!(dir.path().join("model_qmix.ckpt").is_file());
    assert!(dir.path().join("trace_qmix.jsonl").is_file());
}

#[test]
fn replay_accumulates_the_final_episode_return() {
    let dir = tempfile::tempdir().unwrap();
    train_one_cell(dir.path(), 3);
    let rewards = std::fs::read_to_string(dir.path().join("rewards_qmix.csv")).unwrap();
    let last_return: f64 = rewards.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let trace = dir.path().join("trace_qmix.jsonl");
    let out = rescue(&["replay", arg(&trace)]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "tick,engine_distances,light_phases,reward,cumulative_reward,collisions");
    let trace_lines = std::fs::read_to_string(&trace).unwrap().lines().count();
    assert_eq!(rows.len(), trace_lines + 1);
    let cumulative: f64 = rows.last().unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((cumulative - last_return).abs() < 1e-9, "{cumulative} vs {last_return}");
    assert!(rows[1].starts_with("0,1,"), "{}", rows[1]);
}

#[test]
fn eval_of_trained_one_cell_policy_arrives_in_one_step() {
    let dir = tempfile::tempdir().unwrap();
    train_one_cell(dir.path(), 40);
    let json = dir.path().join("eval.json");
    let out = rescue(&[
        "eval",
        "--scenario",
        arg(&scenario("one_cell.json")),
        "--checkpoint",
        arg(&dir.path().join("model_qmix.ckpt")),
        "--episodes",
        "3",
        "--out",
        arg(&json),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary["arrival_rate"], 1.0);
    assert_eq!(summary["mean_steps_to_arrival"], 1.0);
    assert!((summary["mean_return"].as_f64().unwrap() - 100.9).abs() < 1e-9);
}

#[test]
fn eval_rejects_a_checkpoint_for_another_scenario() {
    let dir = tempfile::tempdir().unwrap();
    train_one_cell(dir.path(), 1);
    let out = rescue(&[
        "eval",
        "--scenario",
        arg(&scenario("desk.json")),
        "--checkpoint",
        arg(&dir.path().join("model_qmix.ckpt")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_inputs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"strategy": "qmix", "gamma": 1.5}"#).unwrap();
    let out = rescue(&["train", "--scenario", arg(&scenario("one_cell.json")), "--train-config", arg(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let garbage = dir.path().join("trace.jsonl");
    std::fs::write(&garbage, "{}\n").unwrap();
    assert_ne!(rescue(&["replay", arg(&garbage)]).status.code(), Some(0));
}
