use std::path::Path;
use std::process::{Command, Output};

fn perch(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perch")).args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_without_source_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = perch(&["generate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).trim_end().lines().count(), 1, "{}", stderr(&o));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn conflicting_sources_and_unknown_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(perch(&["evaluate", "--scripted", "--checkpoint", "x.ckpt"], dir.path()).status.code(), Some(2));
    assert_eq!(perch(&["train", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(perch(&["fly", "--scripted", "--initial", "1,2"], dir.path()).status.code(), Some(2));
    assert_eq!(perch(&["evaluate", "--scripted", "--trials", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = perch(&["evaluate", "--checkpoint", "/nonexistent/policy.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[quad]\nmass = -1.0\n").unwrap();
    let o = perch(&["inspect", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mass"), "{}", stderr(&o));
}

#[test]
fn help_lists_global_flags() {
    let o = Command::new(env!("CARGO_BIN_EXE_perch")).arg("--help").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--config", "--seed", "--out", "train", "generate", "fly", "evaluate", "inspect"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn oracle_trajectory_is_tracked() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let o = perch(&["generate", "--scripted", "--initial", "1.6,0.2,-0.1"], &gen);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = gen.join("trajectory.csv");
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(gen.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(side["checkpoint"], serde_json::Value::Null);

    let fly = dir.path().join("fly");
    let o = perch(&["fly", "--oracle-trajectory", traj.to_str().unwrap()], &fly);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "perched");
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(fly.join("mission.json")).unwrap()).unwrap();
    let pitch = summary["contact"]["pitch_deg"].as_f64().unwrap();
    assert!((pitch - 90.0).abs() <= 10.0, "{pitch}");
    // the tracked reference is the given file, unchanged
    assert_eq!(std::fs::read(fly.join("trajectory.csv")).unwrap(), std::fs::read(&traj).unwrap());

    let log = std::fs::read_to_string(fly.join("mission.csv")).unwrap();
    let header = log.lines().next().unwrap();
    assert!(header.starts_with("t,stage,x,y,z,vx,vy,vz,r11,"));
    let stages: Vec<&str> = log.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(stages.first(), Some(&"I_gen"));
    assert_eq!(stages.last(), Some(&"III_attitude"));
}

#[test]
fn malformed_oracle_trajectory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "t,x,y\n0,1,2\n").unwrap();
    let o = perch(&["fly", "--oracle-trajectory", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing column"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn train_writes_checkpoint_curve_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[train]\nepisode_budget = 8\nepisodes_per_iteration = 4\n").unwrap();
    let out = dir.path().join("run");
    let o = perch(&["train", "--config", cfg.to_str().unwrap(), "--checkpoint-every", "1"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("iteration,episodes,mean_return,policy_loss,value_loss"));
    assert_eq!(curve.lines().count(), 3);
    assert!(out.join("checkpoints/iter_000002.ckpt").exists());
    let ckpt = perch::checkpoint::Checkpoint::load(&out.join("checkpoint.ckpt")).unwrap();
    assert_eq!(ckpt.meta.episodes, 8);
    assert_eq!(std::fs::read(out.join("checkpoints/iter_000002.ckpt")).unwrap(), ckpt.to_bytes());

    let o = perch(&["inspect", "--config", cfg.to_str().unwrap(), "--checkpoint", out.join("checkpoint.ckpt").to_str().unwrap()], &out);
    let info: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(info["checkpoint"]["matches_config"], true);
    assert_eq!(info["checkpoint"]["meta"]["iteration"], 2);
}

#[test]
fn warm_start_continues_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[train]\nepisode_budget = 4\nepisodes_per_iteration = 4\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let first = dir.path().join("a");
    assert!(perch(&["train", "--config", cfg], &first).status.success());
    let init = first.join("checkpoint.ckpt");
    let second = dir.path().join("b");
    let o = perch(&["train", "--config", cfg, "--init", init.to_str().unwrap(), "--checkpoint-every", "1"], &second);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = perch::checkpoint::Checkpoint::load(&second.join("checkpoint.ckpt")).unwrap();
    assert_eq!((ckpt.meta.iteration, ckpt.meta.episodes), (2, 8));
    assert!(second.join("checkpoints/iter_000002.ckpt").exists());
    let curve = std::fs::read_to_string(second.join("curve.csv")).unwrap();
    assert!(curve.lines().nth(1).unwrap().starts_with("1,8,"), "{curve}");
    assert_ne!(std::fs::read(&init).unwrap(), ckpt.to_bytes());

    let o = perch(&["train", "--init", "/nonexistent.ckpt", "--budget", "4"], &dir.path().join("c"));
    assert_eq!(o.status.code(), Some(1));
}
