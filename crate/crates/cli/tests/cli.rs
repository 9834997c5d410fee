use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[world]
num_uams = 2
num_passengers = 4
episode_minutes = 20.0

[training]
epochs = 12
batch_size = 8
train_gate = 8
actor_hidden = 8
critic_hidden = 16
dqn_hidden = 8
trajectory_every = 5
inference_episodes = 2
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_uam-marl"));
    c.env_remove("UAM_MARL_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("{SMALL}\n{extra}")).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_writes_the_run_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("out");
    let o = run(&["train", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = out.join("commnet_ctde").join("3");
    for f in [
        "config_echo.toml",
        "epochs.csv",
        "checkpoint.bin",
        "trajectories.jsonl",
        "metrics.json",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(dir.join("epochs.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,epsilon,mean_reward,per_agent_reward_1,per_agent_reward_2,buffer_size,wall_ms"
    );
    assert_eq!(lines.count(), 12);
}

#[test]
fn rerun_gives_byte_identical_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let read = |root: &str, file: &str| std::fs::read(tmp.path().join(root).join("dqn/1").join(file)).unwrap();
    for root in ["a", "b"] {
        let out = tmp.path().join(root);
        let o = run(&[
            "train",
            "--config",
            &cfg,
            "--algorithm",
            "dqn",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read("a", "epochs.csv"), read("b", "epochs.csv"));
    assert_eq!(read("a", "trajectories.jsonl"), read("b", "trajectories.jsonl"));
    assert_eq!(read("a", "checkpoint.bin"), read("b", "checkpoint.bin"));
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let first = tmp.path().join("first");
    let o = run(&[
        "train",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--epochs",
        "9",
        "--mode",
        "fomdp",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = first.join("commnet_ctde/5/config_echo.toml");
    let second = tmp.path().join("second");
    let o = run(&[
        "train",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = std::fs::read(first.join("commnet_ctde/5/epochs.csv")).unwrap();
    let b = std::fs::read(second.join("commnet_ctde/5/epochs.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);
}

#[test]
fn discount_above_one_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("[training]", "[training]\ndiscount = 1.5");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&[
        "train",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("discount factor out of range"), "{}", stderr(&o));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "[battery]\ncapacity_mwh = 1.0\n");
    let o = run(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unknown config key"), "{}", stderr(&o));
    assert!(stderr(&o).contains("capacity_mwh"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = run(&[
        "train",
        "--config",
        &cfg,
        "--out",
        blocker.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("output not writable"), "{}", stderr(&o));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    for args in [
        ["train", "--mode", "partial"].as_slice(),
        ["train", "--algorithm", "ppo"].as_slice(),
        ["train", "--algorithm", "dqn,iac"].as_slice(),
        ["train", "--jobs", "0"].as_slice(),
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn sweep_two_algorithms_three_seeds_gives_six_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--algorithm",
        "commnet_ctde,monte_carlo",
        "--seed",
        "1,2,3",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let table = json.as_object().unwrap();
    assert_eq!(table.len(), 2);
    for alg in ["commnet_ctde", "monte_carlo"] {
        assert_eq!(table[alg].as_object().unwrap().len(), 3);
        for seed in ["1", "2", "3"] {
            assert!(out.join(alg).join(seed).join("eval_metrics.json").is_file());
        }
    }
}

#[test]
fn sweep_matches_separate_train_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--algorithm",
        "iac,hybrid",
        "--seed",
        "2",
        "--jobs",
        "2",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "train",
        "--config",
        &cfg,
        "--algorithm",
        "hybrid",
        "--seed",
        "2",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("hybrid/2/epochs.csv")).unwrap(),
        std::fs::read(b.join("hybrid/2/epochs.csv")).unwrap()
    );
}

#[test]
fn eval_reads_the_training_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let o = run(&["eval", "--config", &cfg, "--out", out_s]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));

    let o = run(&["train", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["eval", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("commnet_ctde/1/eval_metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["episodes"], 2);
    assert_eq!(metrics["per_episode"].as_array().unwrap().len(), 2);

    // Same checkpoint, different observation size.
    let o = run(&["eval", "--config", &cfg, "--out", out_s, "--mode", "fomdp"]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(stderr(&o).contains("checkpoint"), "{}", stderr(&o));
}

#[test]
fn output_root_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let root = tmp.path().join("from_env");
    let o = bin()
        .args(["train", "--config", &cfg, "--algorithm", "monte_carlo", "--epochs", "2"])
        .env("UAM_MARL_OUT", &root)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("monte_carlo/1/epochs.csv").is_file());
}

#[test]
fn validate_spec_flags_discrepancies() {
    let o = run(&["validate-spec"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    for field in [
        "disc_area_m2",
        "rotor_solidity",
        "tip_speed_mps",
        "mean_induced_velocity_mps",
    ] {
        assert!(text.contains(field), "{text}");
    }
    let flagged: Vec<&str> = text.lines().filter(|l| l.contains("discrepancy")).collect();
    assert!(flagged.iter().any(|l| l.starts_with("tip_speed_mps")));
    assert!(flagged.iter().any(|l| l.starts_with("mean_induced_velocity_mps")));
    assert!(!flagged.iter().any(|l| l.starts_with("disc_area_m2")));
}

#[test]
fn validate_spec_rejects_non_physical_aircraft() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[aircraft]\nrotor_radius_m = -1.0\n").unwrap();
    let o = run(&["validate-spec", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
