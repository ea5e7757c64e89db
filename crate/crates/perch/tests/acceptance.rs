//! Acceptance checks 1–9. Runs as a plain binary (`harness = false`) so each
//! criterion prints exactly one PASS/FAIL line:
//!
//! ```text
//! cargo test --release -p perch --test acceptance
//! ```
//!
//! Set `PERCH_ACCEPTANCE=1,5,8` to run a subset, and `PERCH_ACCEPTANCE_STRICT=1`
//! to exit non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use perch_core::dynamics::{mix_forward, mix_inverse, step, MotorCommand, QuadParams, QuadState};
use perch_core::mission::{
    initial_state_sampler, landing_stats, monte_carlo_with, ContactRecord, TrialOutcome,
};
use perch_core::nn::MlpNet;
use perch_core::rl::policy::{log_likelihood_backward, policy_distribution, value, value_backward, Observation};
use perch_core::rl::train::train;
use perch_core::rl::vtrace::vtrace_from_parts;
use perch_core::so3::{hat, rotation_error, vee, Mat3, RotationMatrix, Vec3};
use perch_core::controller::thrust_and_attitude;
use perch::checkpoint::Checkpoint;
use perch::config::ToolkitConfig;
use perch::formats::stats_table;
use perch::parallel::Rayon;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Output of `perch train --seed 0` with the default config.
fn pinned_checkpoint() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/policy.ckpt")
}

fn vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

fn rotation(rng: &mut ChaCha8Rng) -> RotationMatrix {
    use std::f64::consts::PI;
    RotationMatrix::from_euler_zyx(
        rng.random_range(-PI..PI),
        rng.random_range(-PI / 2.0..PI / 2.0),
        rng.random_range(-PI..PI),
    )
}

fn orthonormality(m: &Mat3) -> f64 {
    (m.transpose() * *m - Mat3::IDENTITY).frobenius_norm()
}

fn criterion_1() -> Outcome {
    const N: usize = 10_000;
    const TOL: f64 = 1e-9;
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = QuadParams::default();
    let mut worst = [0.0f64; 5];
    for _ in 0..N {
        let v = vec3(&mut rng, 10.0);
        let y = vec3(&mut rng, 10.0);
        worst[0] = worst[0].max((vee(hat(v)).unwrap() - v).norm());
        let s = hat(vec3(&mut rng, 10.0));
        worst[0] = worst[0].max((hat(vee(s).unwrap()) - s).frobenius_norm());
        worst[1] = worst[1].max((hat(v) * y - v.cross(y)).norm());
        let (a, b) = (rotation(&mut rng), rotation(&mut rng));
        worst[2] = worst[2].max((rotation_error(&a, &b) + rotation_error(&b, &a)).norm());
        worst[3] = worst[3].max(rotation_error(&a, &a).norm());
        let a_c = vec3(&mut rng, 15.0);
        let psi = rng.random_range(-3.0..3.0);
        if let Ok((_, r)) = thrust_and_attitude(a_c, psi, &p) {
            worst[4] = worst[4].max(orthonormality(r.as_mat())).max((r.as_mat().det() - 1.0).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        worst.iter().all(|w| *w < TOL) && secs < 5.0,
        format!(
            "{N} cases each; max err hat/vee {:.1e}, cross {:.1e}, antisym {:.1e}, zero {:.1e}, R_c {:.1e}; {secs:.2} s",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let p = QuadParams::default();
    let dt = 0.001;
    let run = |s0: QuadState, cmd: &dyn Fn(usize) -> MotorCommand, steps: usize| {
        let mut s = s0;
        let mut worst_orth = 0.0f64;
        for k in 0..steps {
            s = step(&s, &cmd(k), dt, &p).expect("rollout stays sane");
            worst_orth = worst_orth.max(orthonormality(s.r.as_mat()));
        }
        (s, worst_orth)
    };

    let (fall, _) = run(QuadState::at_rest(Vec3::ZERO), &|_| MotorCommand::splat(0.0), 1000);
    let fall_err = (fall.v - p.gravity * 1.0).norm();

    let hover_cmd = MotorCommand::splat(p.hover_thrust());
    let (hover, _) = run(QuadState::at_rest(Vec3::ZERO), &|_| hover_cmd, 5000);
    let drift = hover.x.norm();

    let spin0 = QuadState { omega: Vec3::new(0.0, 0.0, 5.0), ..QuadState::at_rest(Vec3::ZERO) };
    let (spin, spin_orth) = run(spin0, &|_| hover_cmd, 10_000);
    let spin_err = (spin.omega - spin0.omega).norm();

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mix_err = 0.0f64;
    for _ in 0..10_000 {
        let c = MotorCommand(std::array::from_fn(|_| rng.random_range(p.thrust_min..p.thrust_max)));
        let back = mix_inverse(&mix_forward(&c, &p), &p).command;
        mix_err = (0..4).fold(mix_err, |m, i| m.max((back.0[i] - c.0[i]).abs()));
    }

    // tumbling rollout under piecewise-random differential thrust
    let mut orth = spin_orth;
    for trial in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let cmds: Vec<MotorCommand> = (0..100)
            .map(|_| MotorCommand(std::array::from_fn(|_| p.hover_thrust() + rng.random_range(-0.02..0.02))))
            .collect();
        let s0 = QuadState { omega: vec3(&mut rng, 3.0), ..QuadState::at_rest(Vec3::ZERO) };
        let (_, o) = run(s0, &|k| cmds[k / 100], 10_000);
        orth = orth.max(o);
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        fall_err < 1e-9 && drift < 1e-6 && spin_err < 1e-6 && mix_err < 1e-9 && orth < 1e-6 && secs < 10.0,
        format!(
            "free fall {fall_err:.1e}, hover drift {drift:.1e} m, spin {spin_err:.1e}, mixer {mix_err:.1e}, \
             |R'R-I| {orth:.1e}; {secs:.2} s"
        ),
    )
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Backprop against central differences on `coords` random parameters of a
/// scalar function of the network.
fn gradient_check(
    net: &MlpNet,
    f: &dyn Fn(&MlpNet) -> f64,
    grad: &[f64],
    coords: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let i = rng.random_range(0..net.params().len());
        let mut plus = net.clone();
        plus.params_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max(relative_error(grad[i], fd));
    }
    worst
}

fn criterion_3() -> Outcome {
    const COORDS: usize = 200;
    let cfg = ToolkitConfig::default();
    let task = cfg.task();
    let head = cfg.train.policy_head(&task);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = MlpNet::glorot(&cfg.train.policy_sizes(), 1.0, &mut rng).unwrap();
    let value_net = MlpNet::glorot(&cfg.train.value_sizes(), 1.0, &mut rng).unwrap();
    let (mut worst_pi, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let obs = Observation(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let action = policy_distribution(&policy, &obs, &head).sample(&mut rng);

        let mut grad = vec![0.0; policy.params().len()];
        let mut acts = policy.activations();
        log_likelihood_backward(&policy, &mut acts, &obs, &head, &action, |_| 1.0, &mut grad);
        let f = |n: &MlpNet| policy_distribution(n, &obs, &head).log_density(&action);
        worst_pi = worst_pi.max(gradient_check(&policy, &f, &grad, COORDS / 5, &mut rng));

        let mut grad = vec![0.0; value_net.params().len()];
        let mut acts = value_net.activations();
        value_backward(&value_net, &mut acts, &obs, |_| 1.0, &mut grad);
        let f = |n: &MlpNet| value(n, &obs);
        worst_v = worst_v.max(gradient_check(&value_net, &f, &grad, COORDS / 5, &mut rng));
    }
    check(
        worst_pi < 1e-4 && worst_v < 1e-4,
        format!("{COORDS} coordinates per network; max relative error policy {worst_pi:.1e}, value {worst_v:.1e}"),
    )
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            let (top, bottom) = a.split_at_mut(r);
            for (x, p) in bottom[0][c..].iter_mut().zip(&top[c][c..]) {
                *x -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn criterion_4() -> Outcome {
    const S: usize = 5;
    const HORIZON: usize = 3;
    let gamma = 0.9;
    // each (state, action) moves to one of two successors
    let next = |s: usize, a: usize| [(s + 1 + a) % S, (s + 3 * a + 2) % S];
    let p_next = |s: usize, a: usize| [0.3 + 0.1 * a as f64 + 0.05 * s as f64, 0.7 - 0.1 * a as f64 - 0.05 * s as f64];
    let reward = |s: usize, a: usize| (s as f64 - 2.0) * 0.5 + if a == 0 { -1.0 } else { 0.75 };
    let pi = |s: usize| [0.2 + 0.15 * s as f64, 0.8 - 0.15 * s as f64];

    // analytic V^π = (I - γ P_π)^-1 r_π
    let mut a = vec![vec![0.0; S]; S];
    let mut b = vec![0.0; S];
    for s in 0..S {
        a[s][s] += 1.0;
        for act in 0..2 {
            b[s] += pi(s)[act] * reward(s, act);
            for (k, &n) in next(s, act).iter().enumerate() {
                a[s][n] -= gamma * pi(s)[act] * p_next(s, act)[k];
            }
        }
    }
    let v_pi = solve(a, b);

    /// (probability, visited (state, action) pairs, final state)
    type Path = (f64, Vec<(usize, usize)>, usize);
    // every length-HORIZON path from each start with its probability
    fn paths(
        s: usize,
        depth: usize,
        prob: f64,
        path: &mut Vec<(usize, usize)>,
        out: &mut Vec<Path>,
        step: &dyn Fn(usize, usize) -> [(usize, f64); 2],
        pi: &dyn Fn(usize) -> [f64; 2],
    ) {
        if depth == 0 {
            out.push((prob, path.clone(), s));
            return;
        }
        for act in 0..2 {
            for (n, pn) in step(s, act) {
                path.push((s, act));
                paths(n, depth - 1, prob * pi(s)[act] * pn, path, out, step, pi);
                path.pop();
            }
        }
    }
    let step_fn = |s: usize, a: usize| {
        let n = next(s, a);
        let p = p_next(s, a);
        [(n[0], p[0]), (n[1], p[1])]
    };
    let all: Vec<Vec<Path>> = (0..S)
        .map(|s0| {
            let mut out = Vec::new();
            paths(s0, HORIZON, 1.0, &mut Vec::new(), &mut out, &step_fn, &pi);
            out
        })
        .collect();

    // on-policy behaviour: every importance ratio is exactly 1
    let ratios = vec![1.0; HORIZON];
    let mut v = vec![0.0; S];
    let mut iterations = 0;
    for it in 0..5000 {
        let mut new_v = [0.0; S];
        for s0 in 0..S {
            for (prob, path, last) in &all[s0] {
                let rewards: Vec<f64> = path.iter().map(|&(s, a)| reward(s, a)).collect();
                let values: Vec<f64> = path.iter().map(|&(s, _)| v[s]).collect();
                let t = vtrace_from_parts(&rewards, &values, v[*last], &ratios, gamma).unwrap();
                new_v[s0] += prob * t.value_targets[0];
            }
        }
        let change = new_v.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        for s in 0..S {
            v[s] += 0.5 * (new_v[s] - v[s]);
        }
        iterations = it + 1;
        if change < 1e-12 {
            break;
        }
    }
    let err = v.iter().zip(&v_pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(err < 1e-3, format!("max |V - V^pi| = {err:.1e} after {iterations} iterations (V^pi from linear solve)"))
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let mut cfg = ToolkitConfig::default();
    cfg.mission.trial_count = 10;
    let setup = cfg.mission_setup();
    let (stats, _) = monte_carlo_with(&setup, 5, &Rayon, |s0| {
        Ok(cfg.scripted.trajectory(s0, cfg.mission.perch_point, &cfg.quad))
    });
    let secs = t0.elapsed().as_secs_f64();
    let detail = match (stats.pitch_deg, stats.y_cm, stats.z_cm) {
        (Some(p), Some(y), Some(z)) => format!(
            "{}/10 perched; pitch {:.2}±{:.2} deg, y {:.2}±{:.2} cm, z {:.2}±{:.2} cm; {secs:.1} s",
            stats.successes, p.mean, p.sd, y.mean, y.sd, z.mean, z.sd
        ),
        _ => format!("{}/10 perched; {secs:.1} s", stats.successes),
    };
    check(stats.successes >= 9 && secs < 60.0, detail)
}

fn window_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criterion_6() -> Outcome {
    const WINDOW: usize = 10;
    let t0 = Instant::now();
    let cfg = ToolkitConfig::default();
    let task = cfg.task();
    let out = train(&task, &cfg.train, initial_state_sampler(&cfg.mission), &Rayon, |_, _, _| {})
        .map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let returns: Vec<f64> = out.curve.iter().map(|r| r.mean_return).collect();
    let initial = window_mean(&returns[..WINDOW]);
    let fin = window_mean(&returns[returns.len() - WINDOW..]);
    let closed = (fin - initial) / (0.0 - initial);
    let pinned = Checkpoint::load(&pinned_checkpoint())
        .map(|c| c.policy == out.policy && c.value == out.value)
        .unwrap_or(false);
    check(
        closed >= 0.5,
        format!(
            "{} episodes: mean return {initial:.1} -> {fin:.1} (first/last {WINDOW} iterations), gap closed {:.0}%; \
             reproduces assets/policy.ckpt: {pinned}; {secs:.0} s",
            cfg.train.episode_budget,
            100.0 * closed
        ),
    )
}

fn perch_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perch"))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = perch_bin()
        .args(["evaluate", "--trials", "50", "--seed", "7", "--checkpoint"])
        .arg(pinned_checkpoint())
        .arg("--out")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("evaluate failed: {}", String::from_utf8_lossy(&status.stderr).trim()));
    }
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("stats.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let rate = json["stats"]["success_rate"].as_f64().unwrap_or(0.0);
    let table = std::fs::read_to_string(dir.path().join("stats.txt")).unwrap_or_default();
    for line in table.lines() {
        println!("    {line}");
    }
    check(rate >= 0.6, format!("success rate {:.0}% over 50 trials (need >= 60%)", 100.0 * rate))
}

fn criterion_8() -> Outcome {
    let contact = |y_cm: f64, z_cm: f64, pitch_deg: f64| ContactRecord {
        t: 1.0,
        y: y_cm / 100.0,
        z: z_cm / 100.0,
        pitch: pitch_deg.to_radians(),
        speed: 1.0,
    };
    let ys = [-1.0, 0.5, 2.0, 3.5];
    let zs = [-2.0, -1.0, -3.0, -2.0];
    let ps = [87.0, 89.0, 91.0, 93.0];
    let mut outcomes: Vec<TrialOutcome> = (0..4)
        .map(|i| TrialOutcome {
            trial: i,
            seed: i as u64,
            initial: QuadState::at_rest(Vec3::new(1.5, 0.0, 0.0)),
            contact: Some(contact(ys[i], zs[i], ps[i])),
            success: true,
            failure: None,
        })
        .collect();
    // a failed trial must not enter the statistics
    outcomes.push(TrialOutcome {
        trial: 4,
        seed: 4,
        initial: QuadState::at_rest(Vec3::new(1.5, 0.0, 0.0)),
        contact: Some(contact(40.0, 40.0, 30.0)),
        success: false,
        failure: Some(perch_core::mission::TrialFailure::Tolerance),
    });
    let s = landing_stats(&outcomes);
    // closed forms: mean, and sample SD with n - 1
    let expect = [(1.25, (11.25f64 / 3.0).sqrt()), (-2.0, (2.0f64 / 3.0).sqrt()), (90.0, (20.0f64 / 3.0).sqrt())];
    let got = [s.y_cm.unwrap(), s.z_cm.unwrap(), s.pitch_deg.unwrap()];
    let err = got
        .iter()
        .zip(expect)
        .map(|(g, (m, sd))| (g.mean - m).abs().max((g.sd - sd).abs()))
        .fold(0.0, f64::max);
    let table = stats_table(&s);
    let rows = ["y-axis (cm)", "z-axis (cm)", "Pitch angle (deg)"];
    let row_ok = rows.iter().all(|r| table.lines().filter(|l| l.starts_with(r)).count() == 1);
    check(
        err < 1e-12 && s.successes == 4 && s.trials == 5 && (s.success_rate - 0.8).abs() < 1e-15 && row_ok,
        format!("max deviation from closed form {err:.1e}; success 4/5; table rows y/z/pitch present: {row_ok}"),
    )
}

fn run_cli(args: &[&str], out: &Path, extra: &[&Path]) -> Result<Vec<u8>, String> {
    let mut cmd = perch_bin();
    cmd.args(args).args(extra).arg("--out").arg(out);
    let o = cmd.output().map_err(|e| e.to_string())?;
    if !o.status.success() && !matches!(args.first(), Some(&"fly")) {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()));
    }
    Ok(o.stdout)
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("small.toml");
    std::fs::write(&config, "seed = 11\n[train]\nepisode_budget = 48\nepisodes_per_iteration = 8\n[mission]\ntrial_count = 6\n")
        .map_err(|e| e.to_string())?;
    let ckpt = pinned_checkpoint();
    let cfg = config.to_str().unwrap();
    let runs: Vec<(&str, Vec<&str>, Vec<&Path>)> = vec![
        ("train", vec!["train", "--config", cfg, "--checkpoint-every", "3"], vec![]),
        ("generate --scripted", vec!["generate", "--config", cfg, "--scripted"], vec![]),
        ("generate --checkpoint", vec!["generate", "--config", cfg, "--checkpoint"], vec![&ckpt]),
        ("fly --scripted", vec!["fly", "--config", cfg, "--scripted"], vec![]),
        ("fly --checkpoint", vec!["fly", "--config", cfg, "--checkpoint"], vec![&ckpt]),
        ("evaluate --scripted", vec!["evaluate", "--config", cfg, "--scripted"], vec![]),
        ("evaluate --checkpoint", vec!["evaluate", "--config", cfg, "--seed", "7", "--checkpoint"], vec![&ckpt]),
        ("inspect", vec!["inspect", "--config", cfg, "--checkpoint"], vec![&ckpt]),
    ];
    let mut compared = 0;
    for (name, args, extra) in &runs {
        let out = tmp.path().join("out");
        let mut results = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&out);
            let stdout = run_cli(args, &out, extra)?;
            results.push((stdout, snapshot(&out)));
        }
        if results[0] != results[1] {
            return Err(format!("`{name}` produced different output on the second run"));
        }
        compared += results[0].1.len() + 1;
    }
    // the oracle trajectory path, fed from a generated file
    let gen = tmp.path().join("gen");
    run_cli(&["generate", "--config", cfg, "--scripted"], &gen, &[])?;
    let traj = gen.join("trajectory.csv");
    let out = tmp.path().join("oracle");
    let mut results = Vec::new();
    for _ in 0..2 {
        let _ = std::fs::remove_dir_all(&out);
        run_cli(&["fly", "--config", cfg, "--oracle-trajectory"], &out, &[&traj])?;
        results.push(snapshot(&out));
    }
    if results[0] != results[1] || results[0].is_empty() {
        return Err("`fly --oracle-trajectory` produced different output on the second run".into());
    }
    compared += results[0].len();
    check(true, format!("{} subcommand runs repeated, {compared} outputs byte-identical", runs.len() + 1))
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("PERCH_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    type Criterion = (usize, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        (1, "algebraic suite", criterion_1),
        (2, "dynamics oracles", criterion_2),
        (3, "gradient checks", criterion_3),
        (4, "V-trace tabular oracle", criterion_4),
        (5, "controller-only perch", criterion_5),
        (6, "training progress", criterion_6),
        (7, "end-to-end Monte Carlo", criterion_7),
        (8, "statistics correctness", criterion_8),
        (9, "reproducibility", criterion_9),
    ];
    let (mut run, mut failed) = (0, 0);
    for (n, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&n)) {
            continue;
        }
        run += 1;
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(d) => println!("criterion {n} ({name}): PASS  {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL  {d}");
            }
        }
    }
    println!("acceptance: {}/{run} criteria passed", run - failed);
    // Failures are reported above; they only fail the process in strict mode.
    if failed > 0 && std::env::var_os("PERCH_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
