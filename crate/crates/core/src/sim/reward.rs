/// Per-step reward constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConstants {
    /// Granted whenever the planner action is chosen.
    pub navigation: f64,
    pub collision: f64,
    pub arrival: f64,
    /// Charged every step.
    pub time_penalty: f64,
}

impl RewardConstants {
    pub const DEFAULT: RewardConstants = RewardConstants {
        navigation: 0.00005,
        collision: -0.5,
        arrival: 1.0,
        time_penalty: -0.0001,
    };

    /// An agent that arrives after using its whole step budget still ends
    /// with a non-negative arrival-plus-penalty total.
    pub fn arrival_stays_positive(&self, max_steps: u64) -> bool {
        self.arrival + max_steps as f64 * self.time_penalty >= 0.0
    }
}

impl Default for RewardConstants {
    fn default() -> Self {
        RewardConstants::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioEvent {
    Collided,
    Arrived,
    Nothing,
}

/// One agent's reward for one step. `total` is always the plain sum of the
/// three parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReward {
    pub r_navigation: f64,
    pub r_scenario: f64,
    pub r_penalty: f64,
    pub total: f64,
}

impl StepReward {
    pub fn assemble(constants: &RewardConstants, navigated: bool, event: ScenarioEvent) -> Self {
        let r_navigation = if navigated { constants.navigation } else { 0.0 };
        let r_scenario = match event {
            ScenarioEvent::Collided => constants.collision,
            ScenarioEvent::Arrived => constants.arrival,
            ScenarioEvent::Nothing => 0.0,
        };
        let r_penalty = constants.time_penalty;
        StepReward {
            r_navigation,
            r_scenario,
            r_penalty,
            total: r_navigation + r_scenario + r_penalty,
        }
    }
}
