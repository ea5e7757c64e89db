//! `perch` command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use perch_core::dynamics::QuadState;
use perch_core::mission::{
    fly_reference, initial_state_sampler, monte_carlo, monte_carlo_with, sample_initial_state, trial_seed,
    MissionError, MissionLog,
};
use perch_core::nn::MlpNet;
use perch_core::rl::train::{train, train_from, CurveRow, TrainError};
use perch_core::so3::{RotationMatrix, Vec3};
use perch_core::trajgen::{generate, ReferenceTrajectory};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError, CheckpointMeta};
use crate::config::{load_config, ConfigError, ToolkitConfig};
use crate::formats::{self, FormatError};
use crate::fsutil::write_atomic;
use crate::parallel::Rayon;

#[derive(Debug, Parser)]
#[command(name = "perch", version, about = "Learned quadrotor perching: train, generate, fly, evaluate")]
pub struct Cli {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides `seed` from the config file).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides `output_dir` from the config file).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the policy and value networks; writes checkpoints and curve.csv.
    Train(TrainArgs),
    /// Stage I only: roll out the policy and write the reference trajectory.
    Generate(GenerateArgs),
    /// Full mission from one initial state; writes mission.csv and mission.json.
    Fly(FlyArgs),
    /// Monte-Carlo landing statistics; writes stats.txt, stats.json and trials.csv.
    Evaluate(EvaluateArgs),
    /// Print checkpoint and resolved configuration metadata as JSON.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Episode budget (overrides `train.episode_budget`).
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,
    /// Also save a checkpoint every N iterations (0 = final only).
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Start from the networks in this checkpoint instead of a fresh
    /// initialisation. Iteration and episode counts continue from it.
    #[arg(long, value_name = "PATH")]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["checkpoint", "scripted"])))]
pub struct GenerateArgs {
    /// Trained checkpoint whose policy generates the trajectory.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Use the hand-designed analytic approach instead of a policy.
    #[arg(long)]
    pub scripted: bool,
    /// Initial position and velocity `x,y,z[,vx,vy,vz]`; sampled from the
    /// mission box with the seed when omitted.
    #[arg(long, value_name = "STATE", value_parser = parse_initial)]
    pub initial: Option<QuadState>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["checkpoint", "scripted", "oracle_trajectory"])))]
pub struct FlyArgs {
    /// Trained checkpoint whose policy generates the reference.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Track the hand-designed analytic approach.
    #[arg(long)]
    pub scripted: bool,
    /// Track a trajectory CSV (same columns as `generate` writes), bypassing
    /// the policy. The initial state defaults to its first sample.
    #[arg(long, value_name = "PATH")]
    pub oracle_trajectory: Option<PathBuf>,
    /// Initial position and velocity `x,y,z[,vx,vy,vz]`.
    #[arg(long, value_name = "STATE", value_parser = parse_initial)]
    pub initial: Option<QuadState>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["checkpoint", "scripted"])))]
pub struct EvaluateArgs {
    /// Trained checkpoint to evaluate.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate the hand-designed analytic approach.
    #[arg(long)]
    pub scripted: bool,
    /// Number of trials (overrides `mission.trial_count`).
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Checkpoint to describe.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Write the full checkpoint (including parameters) as JSON to this file.
    #[arg(long, value_name = "PATH", requires = "checkpoint")]
    pub export_json: Option<PathBuf>,
}

fn parse_initial(s: &str) -> Result<QuadState, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    if !(v.len() == 3 || v.len() == 6) || v.iter().any(|x| !x.is_finite()) {
        return Err("expected 3 or 6 finite comma-separated numbers".into());
    }
    let mut st = QuadState::at_rest(Vec3::new(v[0], v[1], v[2]));
    if v.len() == 6 {
        st.v = Vec3::new(v[3], v[4], v[5]);
    }
    Ok(st)
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error("training failed: {0}")]
    Train(#[from] TrainError),
    #[error("{0}")]
    Mission(String),
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Diagnostics go to stderr as a single line.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("perch: {}", one_line(&e.render().to_string()));
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("perch: error: {}", one_line(&e.to_string()));
            e.exit_code()
        }
    }
}

fn one_line(text: &str) -> String {
    text.lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Resolved configuration: file (or defaults), then command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ToolkitConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ToolkitConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Train(a) => {
            if let Some(b) = a.budget {
                cfg.train.episode_budget = b;
                cfg.validate()?;
            }
            cmd_train(&cfg, a)
        }
        Command::Generate(a) => cmd_generate(&cfg, a),
        Command::Fly(a) => cmd_fly(&cfg, a),
        Command::Evaluate(a) => {
            if let Some(n) = a.trials {
                if n == 0 {
                    return Err(CliError::Usage("--trials must be at least 1".into()));
                }
                cfg.mission.trial_count = n;
            }
            cmd_evaluate(&cfg, a)
        }
        Command::Inspect(a) => cmd_inspect(&cfg, a),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("json values serialise");
    text.push('\n');
    write(path, text.as_bytes())
}

fn load_checkpoint(path: &Path, cfg: &ToolkitConfig) -> Result<Checkpoint, CliError> {
    let c = Checkpoint::load(path).map_err(|source| CliError::Checkpoint { path: path.to_path_buf(), source })?;
    let expect = (cfg.train.policy_sizes(), cfg.train.value_sizes());
    if c.policy.sizes() != expect.0.as_slice() || c.value.sizes() != expect.1.as_slice() {
        let source = CheckpointError::ShapeMismatch(format!(
            "networks {:?}/{:?} do not match the configured {:?}/{:?}",
            c.policy.sizes(),
            c.value.sizes(),
            expect.0,
            expect.1
        ));
        return Err(CliError::Checkpoint { path: path.to_path_buf(), source });
    }
    Ok(c)
}

fn initial_state(cfg: &ToolkitConfig, given: Option<QuadState>) -> QuadState {
    given.unwrap_or_else(|| sample_initial_state(&cfg.mission, trial_seed(cfg.seed, 0)))
}

fn cmd_train(cfg: &ToolkitConfig, a: &TrainArgs) -> Result<(), CliError> {
    let out = &cfg.output_dir;
    let task = cfg.task();
    let head = cfg.train.policy_head(&task);
    let config_hash = cfg.hash();
    let start = a.init.as_deref().map(|p| load_checkpoint(p, cfg)).transpose()?;
    let (it0, ep0) = start.as_ref().map_or((0, 0), |c| (c.meta.iteration as usize, c.meta.episodes as usize));
    let make = |iteration: usize, episodes: usize, policy: &MlpNet, value: &MlpNet| {
        Checkpoint {
            meta: CheckpointMeta {
                iteration: (it0 + iteration) as u64,
                episodes: (ep0 + episodes) as u64,
                seed: cfg.seed,
                config_hash,
            },
            head,
            policy: policy.clone(),
            value: value.clone(),
        }
    };
    write(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    let mut save_err = None;
    let progress = |row: &CurveRow, p: &MlpNet, v: &MlpNet| {
        if row.iteration % 10 == 0 {
            eprintln!(
                "iteration {:>5}  episodes {:>7}  mean return {:>10.2}",
                it0 + row.iteration,
                ep0 + row.episodes,
                row.mean_return
            );
        }
        if a.checkpoint_every > 0 && (row.iteration + 1) % a.checkpoint_every == 0 && save_err.is_none() {
            let path = out.join("checkpoints").join(format!("iter_{:06}.ckpt", it0 + row.iteration + 1));
            if let Err(e) = write(&path, &make(row.iteration + 1, row.episodes, p, v).to_bytes()) {
                save_err = Some(e);
            }
        }
    };
    let sampler = initial_state_sampler(&cfg.mission);
    let outcome = match start {
        Some(c) => train_from(&task, &cfg.train, c.policy, c.value, sampler, &Rayon, progress)?,
        None => train(&task, &cfg.train, sampler, &Rayon, progress)?,
    };
    if let Some(e) = save_err {
        return Err(e);
    }
    let last = outcome.curve.last().map_or((0, 0), |r| (r.iteration + 1, r.episodes));
    let ckpt = make(last.0, last.1, &outcome.policy, &outcome.value);
    write(&out.join("checkpoint.ckpt"), &ckpt.to_bytes())?;
    let curve: Vec<CurveRow> = outcome
        .curve
        .iter()
        .map(|r| CurveRow { iteration: it0 + r.iteration, episodes: ep0 + r.episodes, ..*r })
        .collect();
    write(&out.join("curve.csv"), &formats::curve_csv(&curve))?;
    println!("{}", out.join("checkpoint.ckpt").display());
    Ok(())
}

enum Source {
    Policy(Checkpoint),
    Scripted,
}

fn source(cfg: &ToolkitConfig, checkpoint: &Option<PathBuf>) -> Result<Source, CliError> {
    match checkpoint {
        Some(p) => Ok(Source::Policy(load_checkpoint(p, cfg)?)),
        None => Ok(Source::Scripted),
    }
}

fn reference(cfg: &ToolkitConfig, src: &Source, s0: &QuadState) -> Result<ReferenceTrajectory, MissionError> {
    match src {
        Source::Policy(c) => {
            let task = cfg.task();
            Ok(generate(&c.policy, &c.head, &task, *s0, &cfg.mission.rollout_tolerance)?.0)
        }
        Source::Scripted => Ok(cfg.scripted.trajectory(s0, cfg.mission.perch_point, &cfg.quad)),
    }
}

fn source_id(src: &Source) -> Option<String> {
    match src {
        Source::Policy(c) => Some(c.id()),
        Source::Scripted => None,
    }
}

fn cmd_generate(cfg: &ToolkitConfig, a: &GenerateArgs) -> Result<(), CliError> {
    let src = source(cfg, &a.checkpoint)?;
    let s0 = initial_state(cfg, a.initial);
    let r = reference(cfg, &src, &s0).map_err(|e| CliError::Mission(e.to_string()))?;
    let out = &cfg.output_dir;
    write(&out.join("trajectory.csv"), &formats::trajectory_csv(&r))?;
    write_json(&out.join("trajectory.json"), &formats::trajectory_sidecar(&r, source_id(&src).as_deref()))?;
    println!("{}", out.join("trajectory.csv").display());
    Ok(())
}

fn cmd_fly(cfg: &ToolkitConfig, a: &FlyArgs) -> Result<(), CliError> {
    let setup = cfg.mission_setup();
    let (result, id) = if let Some(path) = &a.oracle_trajectory {
        let bytes = std::fs::read(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
        let r = formats::read_trajectory_csv(&bytes, cfg.mission.perch_point)
            .map_err(|source| CliError::Format { path: path.clone(), source })?;
        let first = r.samples[0];
        let s0 = a.initial.unwrap_or(QuadState { r: RotationMatrix::IDENTITY, omega: Vec3::ZERO, x: first.x, v: first.v });
        (fly_reference(s0, r, &setup), None)
    } else {
        let src = source(cfg, &a.checkpoint)?;
        let s0 = initial_state(cfg, a.initial);
        let result = reference(cfg, &src, &s0).and_then(|r| fly_reference(s0, r, &setup));
        (result, source_id(&src))
    };
    let out = &cfg.output_dir;
    let (log, outcome): (Option<&MissionLog>, String) = match &result {
        Ok(log) => {
            let ok = log.contact.is_some_and(|c| c.is_success(&cfg.mission));
            (Some(log), if ok { "perched" } else { "out_of_tolerance" }.to_string())
        }
        Err(MissionError::MissionTimeout(log)) => (Some(log), "timeout".into()),
        Err(MissionError::SimulationDiverged(log)) => (Some(log), "diverged".into()),
        Err(e) => return Err(CliError::Mission(e.to_string())),
    };
    let log = log.expect("every remaining branch carries a log");
    write(&out.join("mission.csv"), &formats::mission_csv(log))?;
    write(&out.join("trajectory.csv"), &formats::trajectory_csv(&log.reference))?;
    write_json(&out.join("mission.json"), &formats::mission_summary(log, &outcome, id.as_deref()))?;
    println!("{outcome}");
    match &result {
        Ok(_) => Ok(()),
        Err(e) => Err(CliError::Mission(e.to_string())),
    }
}

fn cmd_evaluate(cfg: &ToolkitConfig, a: &EvaluateArgs) -> Result<(), CliError> {
    let setup = cfg.mission_setup();
    let src = source(cfg, &a.checkpoint)?;
    let (stats, outcomes) = match &src {
        Source::Policy(c) => monte_carlo(&setup, &c.policy, cfg.seed, &Rayon),
        Source::Scripted => monte_carlo_with(&setup, cfg.seed, &Rayon, |s0| reference(cfg, &src, s0)),
    };
    let out = &cfg.output_dir;
    let table = formats::stats_table(&stats);
    let mut json = formats::stats_json(&stats, &outcomes);
    json["checkpoint"] = source_id(&src).into();
    json["seed"] = cfg.seed.into();
    write(&out.join("stats.txt"), table.as_bytes())?;
    write_json(&out.join("stats.json"), &json)?;
    write(&out.join("trials.csv"), &formats::trials_csv(&outcomes))?;
    print!("{table}");
    Ok(())
}

fn cmd_inspect(cfg: &ToolkitConfig, a: &InspectArgs) -> Result<(), CliError> {
    let mut info = serde_json::json!({
        "config_hash": format!("{:016x}", cfg.hash()),
        "config": serde_json::to_value(cfg).expect("config serialises"),
    });
    if let Some(p) = &a.checkpoint {
        let c = Checkpoint::load(p).map_err(|source| CliError::Checkpoint { path: p.clone(), source })?;
        info["checkpoint"] = serde_json::json!({
            "path": p,
            "id": c.id(),
            "format_version": crate::checkpoint::VERSION,
            "meta": c.meta,
            "config_hash": format!("{:016x}", c.meta.config_hash),
            "matches_config": c.meta.config_hash == cfg.hash(),
            "head": c.head,
            "policy_sizes": c.policy.sizes(),
            "value_sizes": c.value.sizes(),
            "parameters": c.policy.params().len() + c.value.params().len(),
        });
        if let Some(e) = &a.export_json {
            write_json(e, &c.to_json())?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&info).expect("json values serialise"));
    Ok(())
}
