//! The four subcommands as library functions.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use swarmnav_core::eval::{run_trials_observed, EvalOptions, EvalReport, FixedPolicy, Policy};
use swarmnav_core::geom::Vec2;
use swarmnav_core::navmesh::{astar_channel, build_navmesh, channel_waypoints, MapSpec};
use swarmnav_core::ppo::{TrainError, TrainSink, TrainState, Trainer, UpdateReport};
use swarmnav_core::sim::{ScenarioKind, ScenarioSpec, StepOutcome, WorldConfig};
use swarmnav_core::{Action, World};

use crate::error::{CliError, Result};
use crate::formats::checkpoint::{self, Checkpoint};
use crate::formats::run::{self, effective_seed, ResolvedRun, WorldSection};
use crate::formats::scenario::scenario_arg;
use crate::formats::telemetry::TelemetryWriter;
use crate::formats::trajectory::{self, ReplaySummary, Setup, TrajectoryWriter};
use crate::formats::{map, report, write_text};

pub const RUN_FILE: &str = "run.toml";
pub const RESOLVED_FILE: &str = "resolved.toml";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub config: PathBuf,
    pub resume: bool,
    pub seed: Option<u64>,
    /// Value of `SWARMNAV_SEED`, if set.
    pub seed_env: Option<String>,
    pub workers: Option<usize>,
    pub max_steps: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Print one line per update to stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub dir: PathBuf,
    pub config_hash: String,
    pub env_steps: u64,
    pub updates: u64,
    pub checkpoints: Vec<PathBuf>,
    pub last_report: Option<UpdateReport>,
}

struct DirSink<'a> {
    dir: &'a Path,
    hash: &'a str,
    telemetry: TelemetryWriter,
    checkpoints: Vec<PathBuf>,
    last: Option<UpdateReport>,
    verbose: bool,
    started: Instant,
}

impl TrainSink for DirSink<'_> {
    type Error = CliError;

    fn checkpoint(&mut self, state: &TrainState) -> Result<()> {
        let ckpt = Checkpoint {
            config_hash: self.hash.to_string(),
            state: state.clone(),
        };
        self.checkpoints.push(checkpoint::save(self.dir, &ckpt)?);
        Ok(())
    }

    fn report(&mut self, r: &UpdateReport) -> Result<()> {
        self.telemetry.write(r)?;
        if self.verbose {
            eprintln!(
                "update {} steps {} reward {:.5} clip {:.3} arrived {} collided {} ({:.0}s)",
                r.update,
                r.env_steps,
                r.window_reward,
                r.clip_fraction,
                r.episodes.arrived,
                r.episodes.collided,
                self.started.elapsed().as_secs_f64()
            );
        }
        self.last = Some(r.clone());
        Ok(())
    }
}

/// Loads a run file and applies the command-line overrides.
pub fn load_run_config(opts: &TrainOptions) -> Result<(ResolvedRun, String)> {
    let (mut cfg, text) = run::load_run(&opts.config)?;
    let (seed, source) = effective_seed(opts.seed, opts.seed_env.as_deref(), cfg.seed)?;
    if opts.verbose {
        eprintln!("seed {seed} (from {source:?})");
    }
    cfg.seed = seed;
    if let Some(w) = opts.workers {
        cfg.train.workers = w;
    }
    if let Some(m) = opts.max_steps {
        cfg.train.max_steps = m;
    }
    if let Some(d) = &opts.output_dir {
        cfg.output_dir = d.clone();
    }
    Ok((run::resolve(cfg, base(opts))?, text))
}

fn base(opts: &TrainOptions) -> &Path {
    opts.config.parent().unwrap_or(Path::new("."))
}

pub fn cmd_train(opts: &TrainOptions) -> Result<TrainSummary> {
    let (run, text) = load_run_config(opts)?;
    let dir = run.config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let resolved_path = dir.join(RESOLVED_FILE);
    let telemetry_path = dir.join(TELEMETRY_FILE);
    let existing = checkpoint::latest(&dir)?;

    let (mut trainer, telemetry) = if opts.resume {
        let prior = run::resolve(run::load_run(&resolved_path)?.0, base(opts))?;
        if prior.hash != run.hash {
            return Err(CliError::Incompatible(format!(
                "{} holds a different configuration than {}",
                dir.display(),
                opts.config.display()
            )));
        }
        let path = existing.ok_or_else(|| CliError::Config(format!("no checkpoint to resume in {}", dir.display())))?;
        let ckpt = checkpoint::load(&path)?;
        if ckpt.config_hash != run.hash {
            return Err(CliError::Incompatible(format!("{} belongs to another configuration", path.display())));
        }
        let telemetry = TelemetryWriter::resume(&telemetry_path, &run.hash, ckpt.state.updates)?;
        let trainer = Trainer::resume(run.train.clone(), run.world.clone(), run.spec().clone(), ckpt.state)?;
        (trainer, telemetry)
    } else {
        if existing.is_some() {
            return Err(CliError::Config(format!(
                "{} already holds a run; pass --resume to continue it",
                dir.display()
            )));
        }
        write_text(&dir.join(RUN_FILE), &text)?;
        write_text(&resolved_path, &run.canonical)?;
        let telemetry = TelemetryWriter::create(&telemetry_path, &run.hash)?;
        let trainer = Trainer::new(run.train.clone(), run.world.clone(), run.spec().clone())?;
        (trainer, telemetry)
    };

    let started = Instant::now();
    let mut sink = DirSink {
        dir: &dir,
        hash: &run.hash,
        telemetry,
        checkpoints: Vec::new(),
        last: None,
        verbose: opts.verbose,
        started,
    };
    trainer.run(&mut sink).map_err(|e| match e {
        TrainError::Ppo(p) => p.into(),
        TrainError::Sink(s) => s,
    })?;
    let state = trainer.state();
    let summary = serde_json::json!({
        "format": "swarmnav-summary v1",
        "config_hash": run.hash,
        "env_steps": state.env_steps,
        "updates": state.updates,
        "window_reward": sink.last.as_ref().map(|r| r.window_reward),
        "wall_clock_secs": started.elapsed().as_secs_f64(),
        "checkpoints": sink.checkpoints.iter().map(|p| p.file_name().unwrap().to_string_lossy()).collect::<Vec<_>>(),
    });
    write_text(
        &dir.join(SUMMARY_FILE),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("summary serializes")),
    )?;
    Ok(TrainSummary {
        dir: dir.clone(),
        config_hash: run.hash.clone(),
        env_steps: state.env_steps,
        updates: state.updates,
        checkpoints: sink.checkpoints,
        last_report: sink.last,
    })
}

/// Policy to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    Checkpoint(PathBuf),
    Fixed(FixedPolicy),
}

pub fn fixed_policy(name: &str) -> Result<FixedPolicy> {
    match name {
        "planner" => Ok(FixedPolicy::Planner),
        "uniform" => Ok(FixedPolicy::Uniform),
        "dodge" => Ok(FixedPolicy::Dodge),
        _ => Err(CliError::Config(format!("unknown policy {name:?} (planner, uniform, dodge)"))),
    }
}

#[derive(Debug, Clone)]
pub struct EvalCommand {
    pub policy: PolicySource,
    /// Preset name or scenario file.
    pub scenario: String,
    pub trials: u64,
    pub agents: Option<usize>,
    pub side: Option<f64>,
    pub seed: Option<u64>,
    pub seed_env: Option<String>,
    pub baseline: bool,
    pub stochastic: bool,
    pub max_steps: Option<u64>,
    pub crowd_cap: Option<u64>,
    pub out: PathBuf,
    pub trajectory: Option<PathBuf>,
}

impl EvalCommand {
    pub fn new(policy: PolicySource, scenario: &str, trials: u64, out: impl Into<PathBuf>) -> Self {
        EvalCommand {
            policy,
            scenario: scenario.to_string(),
            trials,
            agents: None,
            side: None,
            seed: None,
            seed_env: None,
            baseline: false,
            stochastic: false,
            max_steps: None,
            crowd_cap: None,
            out: out.into(),
            trajectory: None,
        }
    }
}

/// World settings a checkpoint was trained with, read from the run directory
/// next to it when present.
fn training_world(ckpt: &Path) -> Result<Option<WorldSection>> {
    let Some(resolved) = ckpt.parent().map(|d| d.join(RESOLVED_FILE)).filter(|p| p.exists()) else {
        return Ok(None);
    };
    let (cfg, _) = run::load_run(&resolved)?;
    Ok(Some(cfg.world))
}

pub fn cmd_evaluate(cmd: &EvalCommand) -> Result<EvalReport> {
    let (mut policy, world_section, hash, method): (Box<dyn Policy>, WorldSection, String, String) = match &cmd.policy {
        PolicySource::Checkpoint(p) => {
            let ckpt = checkpoint::load(p)?;
            let world = training_world(p)?.unwrap_or_default();
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            (Box::new(ckpt.state.params), world, ckpt.config_hash, name)
        }
        PolicySource::Fixed(f) => {
            let name = match f {
                FixedPolicy::Planner => "planner",
                FixedPolicy::Uniform => "uniform",
                FixedPolicy::Dodge => "dodge",
            };
            (Box::new(*f), WorldSection::default(), "none".into(), name.into())
        }
    };
    let mut scenario = scenario_arg(&cmd.scenario)?;
    if let Some(side) = cmd.side {
        let kind = scenario.spec.kind;
        scenario.spec = ScenarioSpec::scaled(kind, side);
        scenario.map = None;
    }
    let agents = cmd.agents.unwrap_or(scenario.agents);
    let seed = effective_seed(cmd.seed, cmd.seed_env.as_deref(), 0)?.0;
    let map: MapSpec = match &scenario.map {
        Some(m) => m.clone(),
        None => scenario.spec.build_map(seed)?,
    };
    let mut world = WorldConfig::new(map, agents, seed);
    world_section.apply(&mut world);
    world.baseline_mode |= cmd.baseline;
    if let Some(m) = cmd.max_steps {
        world.max_steps = m;
    }
    world.validate()?;
    if let PolicySource::Checkpoint(p) = &cmd.policy {
        check_widths(policy.as_ref(), &world, p)?;
    }
    policy.check(&world)?;

    let mut opts = EvalOptions::new(cmd.trials);
    opts.seed = seed;
    opts.stochastic = cmd.stochastic;
    if let Some(c) = cmd.crowd_cap {
        opts.crowd_cap = c;
    }
    fs::create_dir_all(&cmd.out).map_err(CliError::io(&cmd.out))?;
    let mut writer = match &cmd.trajectory {
        Some(p) => {
            let file = fs::File::create(p).map_err(CliError::io(p))?;
            let setup = Setup::new(&hash, &method, &world, &scenario.spec);
            Some(TrajectoryWriter::new(BufWriter::new(file), p, &setup)?)
        }
        None => None,
    };
    let mut write_error = None;
    let started = Instant::now();
    let mut observer = |_: &World, _: &[Option<Action>], out: &StepOutcome| {
        if let (Some(w), None) = (writer.as_mut(), write_error.as_ref()) {
            if let Err(e) = w.step(out) {
                write_error = Some(e);
            }
        }
    };
    let mut report = run_trials_observed(policy.as_mut(), world, scenario.spec.clone(), &opts, &mut observer)?;
    if let Some(e) = write_error {
        return Err(e);
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    report.wall_clock_secs = Some(started.elapsed().as_secs_f64());
    let meta = report::ReportMeta {
        config_hash: &hash,
        method: &method,
        scenario: scenario.spec.kind.name(),
        agents,
    };
    report::write_all(&cmd.out, &report, &meta)?;
    Ok(report)
}

fn check_widths(policy: &dyn Policy, world: &WorldConfig, path: &Path) -> Result<()> {
    if let Err(swarmnav_core::eval::EvalError::Incompatible(why)) = policy.check(world) {
        let ckpt = checkpoint::load(path)?;
        let s = ckpt.shape();
        return Err(CliError::Incompatible(format!(
            "{why}: checkpoint {} has observation width {} and {} actions, the scenario needs {} and {}",
            path.display(),
            s.input,
            s.actions,
            world.observation_width(),
            world.action_count()
        )));
    }
    Ok(())
}

pub fn cmd_replay(path: &Path) -> Result<ReplaySummary> {
    trajectory::replay(&trajectory::load_trajectory(path)?)
}

#[derive(Debug, Clone)]
pub struct NavmeshCommand {
    pub map: Option<PathBuf>,
    pub scenario: Option<String>,
    pub side: Option<f64>,
    pub seed: u64,
    pub radius: f64,
    pub from: Option<Vec2>,
    pub to: Option<Vec2>,
}

pub fn cmd_navmesh(cmd: &NavmeshCommand) -> Result<String> {
    let map = match (&cmd.map, &cmd.scenario) {
        (Some(p), None) => map::load_map(p)?,
        (None, Some(s)) => {
            let mut sc = scenario_arg(s)?;
            if let Some(side) = cmd.side {
                sc.spec = ScenarioSpec::scaled(sc.spec.kind, side);
                sc.map = None;
            }
            match sc.map {
                Some(m) => m,
                None => sc.spec.build_map(cmd.seed)?,
            }
        }
        (None, None) => MapSpec::empty(cmd.side.unwrap_or(ScenarioSpec::preset(ScenarioKind::Basic).side)),
        (Some(_), Some(_)) => return Err(CliError::Config("give either a map file or --scenario, not both".into())),
    };
    let mesh = build_navmesh(&map, cmd.radius).map_err(|e| CliError::Config(format!("navmesh: {e}")))?;
    let f = crate::formats::fmt_f64;
    let mut out = format!("swarmnav-navmesh v1\nvertices {}\n", mesh.vertices.len());
    for (i, v) in mesh.vertices.iter().enumerate() {
        out.push_str(&format!("v {i} {} {}\n", f(v.x), f(v.y)));
    }
    out.push_str(&format!("triangles {}\n", mesh.triangles.len()));
    for (i, (t, adj)) in mesh.triangles.iter().zip(&mesh.adjacency).enumerate() {
        let n = |k: usize| adj[k].map_or("-".to_string(), |a| a.to_string());
        out.push_str(&format!("t {i} {} {} {} {} {} {}\n", t[0], t[1], t[2], n(0), n(1), n(2)));
    }
    match (cmd.from, cmd.to) {
        (Some(a), Some(b)) => {
            let ch = astar_channel(&mesh, a, b).map_err(|e| CliError::Config(format!("channel: {e}")))?;
            let ids: Vec<String> = ch.triangle_indices.iter().map(|t| t.to_string()).collect();
            out.push_str(&format!("channel {}\ncost {}\n", ids.join(" "), f(ch.total_cost)));
            for p in channel_waypoints(&ch, a, b).points {
                out.push_str(&format!("waypoint {} {}\n", f(p.x), f(p.y)));
            }
        }
        (None, None) => {}
        _ => return Err(CliError::Config("--from and --to go together".into())),
    }
    Ok(out)
}

/// Parses `x,y`.
pub fn parse_point(s: &str) -> Result<Vec2> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| CliError::Config(format!("point {s:?} should look like x,y")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("point {s:?} should look like x,y")))
    };
    Ok(Vec2::new(num(x)?, num(y)?))
}

pub fn scenario_names() -> Vec<&'static str> {
    ScenarioKind::ALL.iter().map(|k| k.name()).collect()
}
