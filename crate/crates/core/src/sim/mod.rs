//! Discrete-time multi-agent world.
//!
//! Every step each running agent picks one [`Action`]. Moves are applied from
//! the pre-step state, then collisions, arrivals and timeouts are evaluated,
//! rewards assembled, and agents whose trial ended are respawned with a new
//! start and goal before the step returns.

mod action;
mod config;
mod reward;
mod scenario;
pub mod sensor;

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{self, Pose, RayHit, Segment, Vec2};
use crate::math::{self, PI};
use crate::navmesh::{self, MeshError, NavMesh, Waypoints};

pub use action::Action;
pub use config::WorldConfig;
pub use reward::{RewardConstants, ScenarioEvent, StepReward};
pub use scenario::{four_wall_map, random_rect_map, ScenarioKind, ScenarioSpec};

/// Spawn attempts per agent before giving up.
pub const SPAWN_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("could not place agent {agent} without overlap after {SPAWN_ATTEMPTS} attempts")]
    Overcrowded { agent: usize },
    #[error("agent {agent}: {reason}")]
    Protocol { agent: usize, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentStatus {
    Running,
    Arrived,
    Collided,
    TimedOut,
}

impl AgentStatus {
    pub fn name(self) -> &'static str {
        match self {
            AgentStatus::Running => "running",
            AgentStatus::Arrived => "arrived",
            AgentStatus::Collided => "collided",
            AgentStatus::TimedOut => "timed_out",
        }
    }

    pub fn from_name(name: &str) -> Option<AgentStatus> {
        [
            AgentStatus::Running,
            AgentStatus::Arrived,
            AgentStatus::Collided,
            AgentStatus::TimedOut,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub pose: Pose,
    pub start: Vec2,
    pub goal: Vec2,
    pub spawn_step: u64,
    pub distance_traveled: f64,
    /// Planner path length from start to the edge of the arrival disc.
    pub baseline_length: f64,
    pub channel_cache: Option<Waypoints>,
    /// Anything but `Running` means the agent waits for a free spawn spot.
    pub status: AgentStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub rays: Vec<RayHit>,
    pub encoded: Vec<f64>,
}

/// What happened to one agent during a step. Position, heading and
/// distances are taken before any respawn.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub action: Action,
    pub reward: StepReward,
    /// Terminal status if the trial ended this step.
    pub transition: Option<AgentStatus>,
    pub position: Vec2,
    pub heading: f64,
    pub agent_contact: bool,
    pub obstacle_contact: bool,
    pub distance_traveled: f64,
    pub baseline_length: f64,
    /// The agent was placed on a new trip at the end of this step.
    pub respawned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Step counter after this step.
    pub step: u64,
    /// `None` for agents that were not running.
    pub agents: Vec<Option<AgentStep>>,
}

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    scenario: ScenarioSpec,
    mesh: NavMesh,
    walls: Vec<Segment>,
    agents: Vec<AgentState>,
    step: u64,
    rng: ChaCha8Rng,
}

/// Builds the navmesh and places every agent on its first trip.
pub fn init_world(config: WorldConfig, scenario: ScenarioSpec) -> Result<World, SimError> {
    World::new(config, scenario)
}

impl World {
    pub fn new(config: WorldConfig, scenario: ScenarioSpec) -> Result<World, SimError> {
        config.validate()?;
        let mesh = navmesh::build_navmesh(&config.map, config.obstacle_inflation)?;
        let walls = config.map.segments();
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let placeholder = AgentState {
            id: 0,
            pose: Pose::new(Vec2::ZERO, 0.0),
            start: Vec2::ZERO,
            goal: Vec2::ZERO,
            spawn_step: 0,
            distance_traveled: 0.0,
            baseline_length: 0.0,
            channel_cache: None,
            status: AgentStatus::TimedOut,
        };
        let agents = (0..config.agent_count)
            .map(|id| AgentState {
                id,
                ..placeholder.clone()
            })
            .collect();
        let mut world = World {
            config,
            scenario,
            mesh,
            walls,
            agents,
            step: 0,
            rng,
        };
        for id in 0..world.agents.len() {
            if !world.spawn(id, SPAWN_ATTEMPTS) {
                return Err(SimError::Overcrowded { agent: id });
            }
        }
        Ok(world)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn mesh(&self) -> &NavMesh {
        &self.mesh
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agent(&self, id: usize) -> &AgentState {
        &self.agents[id]
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Steps `id` has taken on its current trip.
    pub fn age(&self, id: usize) -> u64 {
        self.step - self.agents[id].spawn_step
    }

    /// Puts agent `id` on a new trip from `pose` to `goal`, bypassing the
    /// scenario sampler. Meant for hand-built test situations.
    pub fn place_agent(&mut self, id: usize, pose: Pose, goal: Vec2) -> Result<(), SimError> {
        let length = navmesh::shortest_length_estimate(&self.mesh, pose.position, goal)?;
        let a = &mut self.agents[id];
        a.pose = pose;
        a.start = pose.position;
        a.goal = goal;
        a.spawn_step = self.step;
        a.distance_traveled = 0.0;
        a.baseline_length = length - self.config.arrival_radius;
        a.channel_cache = None;
        a.status = AgentStatus::Running;
        Ok(())
    }

    /// Tries to start a new trip for `id`; false if no spot was found.
    fn spawn(&mut self, id: usize, attempts: usize) -> bool {
        let n = self.agents.len();
        let attempts = if self.scenario.kind == ScenarioKind::CircleTransport {
            1
        } else {
            attempts
        };
        for _ in 0..attempts {
            let Some((start, goal)) =
                self.scenario
                    .sample_trip(id, n, &self.config, &self.mesh, &mut self.rng)
            else {
                continue;
            };
            let crowded = self.agents.iter().any(|o| {
                o.id != id
                    && o.status == AgentStatus::Running
                    && o.pose.position.distance(start) < self.config.safe_distance
            });
            if crowded {
                continue;
            }
            let Ok(length) = navmesh::shortest_length_estimate(&self.mesh, start, goal) else {
                continue;
            };
            let heading = scenario::random_heading(&mut self.rng);
            let a = &mut self.agents[id];
            a.pose = Pose::new(start, heading);
            a.start = start;
            a.goal = goal;
            a.spawn_step = self.step;
            a.distance_traveled = 0.0;
            a.baseline_length = length - self.config.arrival_radius;
            a.channel_cache = None;
            a.status = AgentStatus::Running;
            return true;
        }
        false
    }

    fn partners(&self, id: usize) -> Vec<(usize, Vec2)> {
        self.agents
            .iter()
            .filter(|o| o.id != id && o.status == AgentStatus::Running)
            .map(|o| (o.id, o.pose.position))
            .collect()
    }

    pub fn scan(&self, id: usize) -> sensor::Scan {
        let a = &self.agents[id];
        sensor::sweep(
            a.pose.position,
            a.pose.heading(),
            self.config.sensor_count,
            self.config.sensor_range,
            self.config.agent_radius,
            &self.walls,
            &self.partners(id),
        )
    }

    pub fn observe(&self, id: usize) -> Observation {
        let mut encoded = vec![0.0; self.config.observation_width()];
        let rays = self.observe_into(id, &mut encoded).rays;
        Observation { rays, encoded }
    }

    /// Writes the encoded observation of `id` into `out`, which must be
    /// `observation_width()` long, and returns the underlying sweep.
    pub fn observe_into(&self, id: usize, out: &mut [f64]) -> sensor::Scan {
        let scan = self.scan(id);
        let range = self.config.sensor_range;
        sensor::encode_rays(&scan.rays, range, out);
        if self.config.baseline_mode {
            let a = &self.agents[id];
            let to_goal = a.goal - a.pose.position;
            let l = self.config.map.domain_side;
            let diagonal = math::sqrt(2.0 * l * l);
            let k = 2 * self.config.sensor_count;
            out[k] = (to_goal.norm() / diagonal).clamp(0.0, 1.0);
            let bearing = if to_goal.norm_sq() > 0.0 {
                math::wrap_signed(to_goal.angle() - a.pose.heading())
            } else {
                0.0
            };
            out[k + 1] = ((bearing / PI + 1.0) * 0.5).clamp(0.0, 1.0);
        }
        scan
    }

    /// Encoded observations of all agents, row `id` at `out[id * width..]`.
    pub fn observe_all_into(&self, out: &mut [f64]) {
        let w = self.config.observation_width();
        for id in 0..self.agents.len() {
            self.observe_into(id, &mut out[id * w..(id + 1) * w]);
        }
    }

    /// Number of distinct partners hit by at least one sensor ray.
    pub fn crowdedness(&self, id: usize) -> usize {
        self.scan(id).partners_seen()
    }

    /// Moves agent `id` according to `action`. Does not evaluate events.
    pub fn apply_action(&mut self, id: usize, action: Action) -> Result<(), SimError> {
        if self.agents[id].status != AgentStatus::Running {
            return Err(SimError::Protocol {
                agent: id,
                reason: "action for an agent that is not running",
            });
        }
        if self.config.baseline_mode && action == Action::Navigate {
            return Err(SimError::Protocol {
                agent: id,
                reason: "navigate is not available in baseline mode",
            });
        }
        let cfg = &self.config;
        let a = &mut self.agents[id];
        let before = a.pose.position;
        match action {
            Action::Stay => {}
            Action::Forward => a.pose.position = before + a.pose.forward() * cfg.speed,
            Action::Backward => a.pose.position = before - a.pose.forward() * cfg.speed,
            Action::TurnLeft => a.pose.set_heading(a.pose.heading() - cfg.turn_rate),
            Action::TurnRight => a.pose.set_heading(a.pose.heading() + cfg.turn_rate),
            Action::Navigate => navigate(a, &self.mesh, cfg),
        }
        a.distance_traveled += a.pose.position.distance(before);
        Ok(())
    }

    /// Advances the world by one step. `actions[id]` must be `Some` exactly
    /// for the running agents.
    pub fn step(&mut self, actions: &[Option<Action>]) -> Result<StepOutcome, SimError> {
        if actions.len() != self.agents.len() {
            return Err(SimError::Protocol {
                agent: actions.len().min(self.agents.len()),
                reason: "action list length differs from agent count",
            });
        }
        for (id, (a, act)) in self.agents.iter().zip(actions).enumerate() {
            let running = a.status == AgentStatus::Running;
            match act {
                Some(_) if !running => {
                    return Err(SimError::Protocol {
                        agent: id,
                        reason: "action for an agent that is not running",
                    })
                }
                None if running => {
                    return Err(SimError::Protocol {
                        agent: id,
                        reason: "missing action for a running agent",
                    })
                }
                Some(Action::Navigate) if self.config.baseline_mode => {
                    return Err(SimError::Protocol {
                        agent: id,
                        reason: "navigate is not available in baseline mode",
                    })
                }
                _ => {}
            }
        }

        for (id, act) in actions.iter().enumerate() {
            if let Some(action) = *act {
                self.apply_action(id, action)?;
            }
        }
        self.step += 1;

        let n = self.agents.len();
        let running: Vec<usize> = (0..n)
            .filter(|&i| self.agents[i].status == AgentStatus::Running)
            .collect();
        let mut agent_contact = vec![false; n];
        for (k, &i) in running.iter().enumerate() {
            for &j in &running[k + 1..] {
                let d = self.agents[i].pose.position.distance(self.agents[j].pose.position);
                if d < self.config.safe_distance {
                    agent_contact[i] = true;
                    agent_contact[j] = true;
                }
            }
        }

        let mut outcome = StepOutcome {
            step: self.step,
            agents: vec![None; n],
        };
        for &i in &running {
            let a = &self.agents[i];
            let p = a.pose.position;
            let obstacle_contact = self.touches_obstacle(p);
            let collided = agent_contact[i] || obstacle_contact;
            let arrived = p.distance(a.goal) <= self.config.arrival_radius;
            let timed_out = self.step - a.spawn_step > self.config.max_steps;
            let (event, transition) = if collided {
                (ScenarioEvent::Collided, Some(AgentStatus::Collided))
            } else if arrived {
                (ScenarioEvent::Arrived, Some(AgentStatus::Arrived))
            } else if timed_out {
                (ScenarioEvent::Nothing, Some(AgentStatus::TimedOut))
            } else {
                (ScenarioEvent::Nothing, None)
            };
            let action = actions[i].expect("running agents have actions");
            outcome.agents[i] = Some(AgentStep {
                action,
                reward: StepReward::assemble(
                    &self.config.rewards,
                    action == Action::Navigate,
                    event,
                ),
                transition,
                position: p,
                heading: a.pose.heading(),
                agent_contact: agent_contact[i],
                obstacle_contact,
                distance_traveled: a.distance_traveled,
                baseline_length: a.baseline_length,
                respawned: false,
            });
        }

        for (i, step) in outcome.agents.iter().enumerate() {
            if let Some(status) = step.as_ref().and_then(|s| s.transition) {
                self.agents[i].status = status;
            }
        }
        for i in 0..n {
            if self.agents[i].status != AgentStatus::Running && self.spawn(i, SPAWN_ATTEMPTS) {
                if let Some(s) = outcome.agents[i].as_mut() {
                    s.respawned = true;
                }
            }
        }
        Ok(outcome)
    }

    /// Whether a disc at `p` overlaps an obstacle or leaves the domain.
    pub fn touches_obstacle(&self, p: Vec2) -> bool {
        let r = self.config.agent_radius;
        let l = self.config.map.domain_side;
        if p.x < r || p.y < r || p.x > l - r || p.y > l - r {
            return true;
        }
        self.config.map.obstacles.iter().any(|poly| {
            geom::point_in_polygon(p, &poly.vertices)
                || geom::distance_to_polygon_boundary(p, &poly.vertices) < r
        })
    }
}

/// One planner step: head for the goal if it is in plain sight, otherwise
/// for the next portal midpoint of the cached channel.
fn navigate(a: &mut AgentState, mesh: &NavMesh, cfg: &WorldConfig) {
    let pos = a.pose.position;
    let target = if mesh.segment_clear(pos, a.goal) {
        a.goal
    } else {
        let tri = mesh.locate_nearest(pos);
        let stale = a
            .channel_cache
            .as_ref()
            .map_or(true, |w| !w.source_channel.triangle_indices.contains(&tri));
        if stale {
            let from = if mesh.locate(pos).is_some() {
                pos
            } else {
                mesh.barycenters[tri]
            };
            a.channel_cache = navmesh::astar_channel(mesh, from, a.goal)
                .ok()
                .map(|ch| navmesh::channel_waypoints(&ch, from, a.goal));
        }
        match a.channel_cache.as_mut() {
            Some(wp) => {
                while wp.points.len() > 1 && pos.distance(wp.points[0]) <= 0.5 * cfg.speed {
                    wp.points.remove(0);
                }
                wp.points[0]
            }
            None => a.goal,
        }
    };
    let offset = target - pos;
    let dist = offset.norm();
    if dist == 0.0 {
        return;
    }
    let bearing = offset.angle();
    if cfg.rate_limited_navigation {
        let turn = math::wrap_signed(bearing - a.pose.heading());
        if turn.abs() > cfg.turn_rate {
            a.pose.set_heading(a.pose.heading() + cfg.turn_rate * turn.signum());
            return;
        }
    }
    a.pose.set_heading(bearing);
    a.pose.position = pos + offset * (cfg.speed.min(dist) / dist);
}

#[cfg(test)]
mod tests;
