use std::fs;
use std::process::Command;

fn cgrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cgrl"))
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "# small run\nrollout_len = 16\nminibatches = 2\n").unwrap();
    let out = dir.path().join("run");
    let status = cgrl()
        .args(["train", "--env", "cardgame", "--guidance", "action-mask", "--frames", "64"])
        .args(["--num-envs", "2", "--seed", "3", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);

    let eval = cgrl()
        .args(["eval", "--env", "cardgame", "--guidance", "action-mask", "--episodes", "5", "--checkpoint"])
        .arg(out.join("checkpoint.bin"))
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let text = String::from_utf8(eval.stdout).unwrap();
    assert!(text.contains("episodes = 5"));
    assert!(text.contains("invalid_actions = 0"));
}

#[test]
fn eval_on_wrong_environment_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let train = cgrl()
        .args(["train", "--frames", "32", "--num-envs", "2", "--set", "rollout_len=16", "--set", "minibatches=1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let eval = cgrl()
        .args(["eval", "--env", "gridworld", "--episodes", "1", "--checkpoint"])
        .arg(out.join("checkpoint.bin"))
        .output()
        .unwrap();
    assert!(!eval.status.success());
    assert!(String::from_utf8_lossy(&eval.stderr).contains("does not fit"));
}

#[test]
fn bad_values_exit_nonzero_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = cgrl()
        .args(["train", "--frames", "10", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("total_frames"));

    let unknown = cgrl().args(["train", "--guidance", "shield"]).output().unwrap();
    assert!(!unknown.status.success());
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = cgrl()
        .args(["sweep", "--guidance", "none,action-replace", "--seed", "0,1", "--frames", "32", "--num-envs", "2"])
        .args(["--set", "rollout_len=16", "--set", "minibatches=1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("action-replace-seed1").join("metrics.csv").exists());
}
