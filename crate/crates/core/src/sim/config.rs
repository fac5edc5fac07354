use super::reward::RewardConstants;
use super::SimError;
use crate::navmesh::MapSpec;

/// Static parameters of one simulated world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub map: MapSpec,
    pub agent_count: usize,
    pub agent_radius: f64,
    /// Distance covered by one forward, backward or planner step.
    pub speed: f64,
    /// Heading change of one turn action, radians.
    pub turn_rate: f64,
    /// Agents closer than this (center to center) have collided.
    pub safe_distance: f64,
    /// Steps an agent may take before its trial times out.
    pub max_steps: u64,
    pub sensor_count: usize,
    pub sensor_range: f64,
    pub seed: u64,
    /// Drop the planner action and append goal features to observations.
    pub baseline_mode: bool,
    /// Margin obstacles are grown by before triangulation.
    pub obstacle_inflation: f64,
    /// An agent has arrived once its center is this close to the goal.
    pub arrival_radius: f64,
    /// Planner steps turn at most `turn_rate` per step instead of snapping to
    /// the waypoint bearing.
    pub rate_limited_navigation: bool,
    pub rewards: RewardConstants,
}

impl WorldConfig {
    pub fn new(map: MapSpec, agent_count: usize, seed: u64) -> Self {
        WorldConfig {
            map,
            agent_count,
            agent_radius: 1.0,
            speed: 1.0,
            turn_rate: 1.0,
            safe_distance: 2.0,
            max_steps: 10_000,
            sensor_count: 45,
            sensor_range: 20.0,
            seed,
            baseline_mode: false,
            obstacle_inflation: 1.0,
            arrival_radius: 1.0,
            rate_limited_navigation: false,
            rewards: RewardConstants::DEFAULT,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.agent_count == 0 {
            return Err(SimError::Config("agent_count must be at least 1"));
        }
        if !positive(self.agent_radius) {
            return Err(SimError::Config("agent_radius must be positive"));
        }
        if !positive(self.speed) {
            return Err(SimError::Config("speed must be positive"));
        }
        if !positive(self.turn_rate) {
            return Err(SimError::Config("turn_rate must be positive"));
        }
        if !positive(self.safe_distance) {
            return Err(SimError::Config("safe_distance must be positive"));
        }
        if !positive(self.sensor_range) {
            return Err(SimError::Config("sensor_range must be positive"));
        }
        if !positive(self.arrival_radius) {
            return Err(SimError::Config("arrival_radius must be positive"));
        }
        if !(self.obstacle_inflation.is_finite() && self.obstacle_inflation >= 0.0) {
            return Err(SimError::Config("obstacle_inflation must be non-negative"));
        }
        if self.sensor_count == 0 {
            return Err(SimError::Config("sensor_count must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(SimError::Config("max_steps must be at least 1"));
        }
        if !(self.map.domain_side >= 10.0 * self.safe_distance) {
            return Err(SimError::Config("domain side must be at least 10 x safe_distance"));
        }
        Ok(())
    }

    /// Width of the encoded observation vector.
    pub fn observation_width(&self) -> usize {
        2 * self.sensor_count + if self.baseline_mode { 2 } else { 0 }
    }

    pub fn action_count(&self) -> usize {
        super::Action::count(self.baseline_mode)
    }
}
