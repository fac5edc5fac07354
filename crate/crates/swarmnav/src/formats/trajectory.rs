//! Trajectory logs: the header, one JSON line with everything needed to
//! rebuild the world, then one whitespace-separated record per agent and
//! step:
//!
//! ```text
//! step agent x y heading action reward status
//! ```
//!
//! Floats are written in shortest round-trip form so replays can compare
//! bits.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarmnav_core::geom::Vec2;
use swarmnav_core::navmesh::{MapSpec, Polygon};
use swarmnav_core::sim::{
    Action, AgentStatus, RewardConstants, ScenarioKind, ScenarioSpec, StepOutcome, World, WorldConfig,
};

use super::{fmt_f64, parse_f64, read_text, strip_header};
use crate::error::{CliError, Result};

pub const HEADER: &str = "swarmnav-traj v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MapJson {
    domain_side: f64,
    obstacles: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WorldJson {
    map: MapJson,
    agent_count: usize,
    agent_radius: f64,
    speed: f64,
    turn_rate: f64,
    safe_distance: f64,
    max_steps: u64,
    sensor_count: usize,
    sensor_range: f64,
    seed: u64,
    baseline_mode: bool,
    obstacle_inflation: f64,
    arrival_radius: f64,
    rate_limited_navigation: bool,
    rewards: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioJson {
    kind: String,
    side: f64,
    circle_radius: f64,
    obstacle_count: usize,
    obstacle_min_size: f64,
    obstacle_max_size: f64,
    obstacle_clearance: f64,
    region_size: f64,
    min_goal_distance: f64,
}

/// The JSON line after the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub config_hash: String,
    pub policy: String,
    world: WorldJson,
    scenario: ScenarioJson,
}

impl Setup {
    pub fn new(config_hash: &str, policy: &str, w: &WorldConfig, s: &ScenarioSpec) -> Self {
        Setup {
            config_hash: config_hash.to_string(),
            policy: policy.to_string(),
            world: WorldJson {
                map: MapJson {
                    domain_side: w.map.domain_side,
                    obstacles: w
                        .map
                        .obstacles
                        .iter()
                        .map(|p| p.vertices.iter().map(|v| [v.x, v.y]).collect())
                        .collect(),
                },
                agent_count: w.agent_count,
                agent_radius: w.agent_radius,
                speed: w.speed,
                turn_rate: w.turn_rate,
                safe_distance: w.safe_distance,
                max_steps: w.max_steps,
                sensor_count: w.sensor_count,
                sensor_range: w.sensor_range,
                seed: w.seed,
                baseline_mode: w.baseline_mode,
                obstacle_inflation: w.obstacle_inflation,
                arrival_radius: w.arrival_radius,
                rate_limited_navigation: w.rate_limited_navigation,
                rewards: [
                    w.rewards.navigation,
                    w.rewards.collision,
                    w.rewards.arrival,
                    w.rewards.time_penalty,
                ],
            },
            scenario: ScenarioJson {
                kind: s.kind.name().to_string(),
                side: s.side,
                circle_radius: s.circle_radius,
                obstacle_count: s.obstacle_count,
                obstacle_min_size: s.obstacle_min_size,
                obstacle_max_size: s.obstacle_max_size,
                obstacle_clearance: s.obstacle_clearance,
                region_size: s.region_size,
                min_goal_distance: s.min_goal_distance,
            },
        }
    }

    pub fn world_config(&self) -> WorldConfig {
        let w = &self.world;
        let map = MapSpec {
            domain_side: w.map.domain_side,
            obstacles: w
                .map
                .obstacles
                .iter()
                .map(|p| Polygon::new(p.iter().map(|v| Vec2::new(v[0], v[1])).collect()))
                .collect(),
        };
        let mut c = WorldConfig::new(map, w.agent_count, w.seed);
        c.agent_radius = w.agent_radius;
        c.speed = w.speed;
        c.turn_rate = w.turn_rate;
        c.safe_distance = w.safe_distance;
        c.max_steps = w.max_steps;
        c.sensor_count = w.sensor_count;
        c.sensor_range = w.sensor_range;
        c.baseline_mode = w.baseline_mode;
        c.obstacle_inflation = w.obstacle_inflation;
        c.arrival_radius = w.arrival_radius;
        c.rate_limited_navigation = w.rate_limited_navigation;
        let [navigation, collision, arrival, time_penalty] = w.rewards;
        c.rewards = RewardConstants {
            navigation,
            collision,
            arrival,
            time_penalty,
        };
        c
    }

    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let s = &self.scenario;
        let kind: ScenarioKind = s
            .kind
            .parse()
            .map_err(|_| CliError::Config(format!("unknown scenario kind {:?}", s.kind)))?;
        Ok(ScenarioSpec {
            kind,
            side: s.side,
            circle_radius: s.circle_radius,
            obstacle_count: s.obstacle_count,
            obstacle_min_size: s.obstacle_min_size,
            obstacle_max_size: s.obstacle_max_size,
            obstacle_clearance: s.obstacle_clearance,
            region_size: s.region_size,
            min_goal_distance: s.min_goal_distance,
        })
    }
}

/// One logged agent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub step: u64,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub action: Action,
    pub reward: f64,
    pub status: AgentStatus,
}

impl Record {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {} {} {} {} {}",
            self.step,
            self.agent,
            fmt_f64(self.x),
            fmt_f64(self.y),
            fmt_f64(self.heading),
            self.action.name(),
            fmt_f64(self.reward),
            self.status.name()
        )
    }

    fn parse(line: &str, path: &Path, n: usize) -> Result<Record> {
        let w: Vec<&str> = line.split_whitespace().collect();
        if w.len() != 8 {
            return Err(CliError::parse(path, n, format!("expected 8 fields, found {}", w.len())));
        }
        let int = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| CliError::parse(path, n, format!("{what}: {s:?} is not an integer")))
        };
        Ok(Record {
            step: int(w[0], "step")?,
            agent: int(w[1], "agent")? as usize,
            x: parse_f64(w[2], path, n, "x")?,
            y: parse_f64(w[3], path, n, "y")?,
            heading: parse_f64(w[4], path, n, "heading")?,
            action: Action::from_name(w[5])
                .ok_or_else(|| CliError::parse(path, n, format!("unknown action {:?}", w[5])))?,
            reward: parse_f64(w[6], path, n, "reward")?,
            status: AgentStatus::from_name(w[7])
                .ok_or_else(|| CliError::parse(path, n, format!("unknown status {:?}", w[7])))?,
        })
    }
}

/// Records of every agent that acted in `outcome`.
pub fn records(outcome: &StepOutcome) -> impl Iterator<Item = Record> + '_ {
    outcome.agents.iter().enumerate().filter_map(move |(agent, s)| {
        s.as_ref().map(|s| Record {
            step: outcome.step,
            agent,
            x: s.position.x,
            y: s.position.y,
            heading: s.heading,
            action: s.action,
            reward: s.reward.total,
            status: s.transition.unwrap_or(AgentStatus::Running),
        })
    })
}

pub struct TrajectoryWriter<W: Write> {
    out: W,
    path: PathBuf,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, path: &Path, setup: &Setup) -> Result<Self> {
        let json = serde_json::to_string(setup).expect("setup serializes");
        writeln!(out, "{HEADER}\n{json}").map_err(CliError::io(path))?;
        Ok(TrajectoryWriter {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn step(&mut self, outcome: &StepOutcome) -> Result<()> {
        for r in records(outcome) {
            writeln!(self.out, "{}", r.line()).map_err(CliError::io(&self.path))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(CliError::io(&self.path))?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `None` for a zero-byte file.
    pub setup: Option<Setup>,
    pub records: Vec<Record>,
}

pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    if text.is_empty() {
        return Ok(Trajectory {
            setup: None,
            records: Vec::new(),
        });
    }
    let body = strip_header(text, HEADER, path)?;
    let mut lines = body.lines();
    let setup_line = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 2, "missing setup line"))?;
    let setup: Setup =
        serde_json::from_str(setup_line).map_err(|e| CliError::parse(path, 2, format!("setup: {e}")))?;
    let records = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Record::parse(l, path, i + 3))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        setup: Some(setup),
        records,
    })
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(&read_text(path)?, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub step: u64,
    pub agent: Option<usize>,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub steps: u64,
    pub records: usize,
    /// Every record (or missing record) that differs from the re-simulation.
    pub divergences: Vec<Divergence>,
}

/// Re-simulates the logged actions from the logged setup and compares every
/// record bit for bit.
pub fn replay(t: &Trajectory) -> Result<ReplaySummary> {
    let Some(setup) = &t.setup else {
        return Ok(ReplaySummary {
            steps: 0,
            records: 0,
            divergences: Vec::new(),
        });
    };
    let mut world = World::new(setup.world_config(), setup.scenario()?)?;
    let n = world.agents().len();
    let mut divergences = Vec::new();
    let mut i = 0;
    while i < t.records.len() {
        let step = t.records[i].step;
        let mut j = i;
        while j < t.records.len() && t.records[j].step == step {
            j += 1;
        }
        let group = &t.records[i..j];
        i = j;
        if step <= world.step_count() {
            divergences.push(Divergence {
                step,
                agent: None,
                what: format!("step {step} is out of order"),
            });
            break;
        }
        // Steps without any acting agent leave no records.
        while world.step_count() + 1 < step {
            let out = world.step(&vec![None; n])?;
            if out.agents.iter().any(Option::is_some) {
                divergences.push(Divergence {
                    step: out.step,
                    agent: None,
                    what: "agents acted in a step missing from the log".into(),
                });
            }
        }
        let mut actions = vec![None; n];
        for r in group {
            if r.agent >= n {
                return Err(CliError::Incompatible(format!("agent {} does not exist", r.agent)));
            }
            actions[r.agent] = Some(r.action);
        }
        let out = match world.step(&actions) {
            Ok(out) => out,
            Err(e) => {
                divergences.push(Divergence {
                    step,
                    agent: None,
                    what: format!("simulation refused the logged actions: {e}"),
                });
                break;
            }
        };
        let sim: Vec<Record> = records(&out).collect();
        for r in group {
            match sim.iter().find(|s| s.agent == r.agent) {
                Some(s) => {
                    if let Some(what) = differs(s, r) {
                        divergences.push(Divergence {
                            step,
                            agent: Some(r.agent),
                            what,
                        });
                    }
                }
                None => divergences.push(Divergence {
                    step,
                    agent: Some(r.agent),
                    what: "agent was not running".into(),
                }),
            }
        }
    }
    Ok(ReplaySummary {
        steps: world.step_count(),
        records: t.records.len(),
        divergences,
    })
}

fn differs(sim: &Record, log: &Record) -> Option<String> {
    let fields = [
        ("x", sim.x, log.x),
        ("y", sim.y, log.y),
        ("heading", sim.heading, log.heading),
        ("reward", sim.reward, log.reward),
    ];
    for (name, a, b) in fields {
        if a.to_bits() != b.to_bits() {
            return Some(format!("{name}: logged {}, simulated {}", fmt_f64(b), fmt_f64(a)));
        }
    }
    if sim.status != log.status {
        return Some(format!(
            "status: logged {}, simulated {}",
            log.status.name(),
            sim.status.name()
        ));
    }
    None
}
