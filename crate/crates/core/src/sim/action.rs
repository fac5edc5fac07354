use core::fmt;

/// The six per-step decisions.
///
/// `Navigate` hands the step to the navmesh planner; the rest are local
/// moves. Turning left lowers the heading and turning right raises it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Navigate,
    Stay,
    Forward,
    TurnLeft,
    TurnRight,
    Backward,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Navigate,
        Action::Stay,
        Action::Forward,
        Action::TurnLeft,
        Action::TurnRight,
        Action::Backward,
    ];

    /// `a0`..`a5`.
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Action> {
        Action::ALL.get(code).copied()
    }

    /// Number of actions the policy chooses between.
    pub fn count(baseline: bool) -> usize {
        if baseline {
            5
        } else {
            6
        }
    }

    /// Maps a policy output index to an action. Without the planner the
    /// outputs cover `a1..a5`.
    pub fn from_policy_index(index: usize, baseline: bool) -> Option<Action> {
        let code = if baseline { index + 1 } else { index };
        if index < Action::count(baseline) {
            Action::from_code(code)
        } else {
            None
        }
    }

    pub fn policy_index(self, baseline: bool) -> Option<usize> {
        match (baseline, self) {
            (true, Action::Navigate) => None,
            (true, a) => Some(a.code() - 1),
            (false, a) => Some(a.code()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Navigate => "navigate",
            Action::Stay => "stay",
            Action::Forward => "forward",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Backward => "backward",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.name() == name)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
