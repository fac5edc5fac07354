//! Trial-based evaluation: success, collision and timeout rates, extra
//! distance proportion (EDP) and crowdedness histograms.
//!
//! A trial is one trip of one agent, from spawn to its first terminal event.
//! Trials are closed in agent-id order within a step and counting stops
//! exactly at the requested number.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math;
use crate::nn::{self, Matrix, NnError, PolicyParams};
use crate::ppo::sample_categorical;
use crate::sim::{Action, AgentStatus, ScenarioSpec, SimError, StepOutcome, World, WorldConfig};

/// Observation samples kept for the crowdedness histogram.
pub const CROWD_SAMPLE_CAP: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("policy does not fit the world: {0}")]
    Incompatible(&'static str),
    #[error("extra distance is undefined for baseline length {0}")]
    UndefinedBaseline(f64),
    #[error("no agent is running, evaluation cannot make progress")]
    Stalled,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// `(d - l) / l`.
pub fn compute_edp(distance: f64, baseline: f64) -> Result<f64, EvalError> {
    if !(baseline > 0.0) {
        return Err(EvalError::UndefinedBaseline(baseline));
    }
    Ok((distance - baseline) / baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialOutcome {
    Success,
    Accident,
    Timeout,
}

impl TrialOutcome {
    pub fn name(self) -> &'static str {
        match self {
            TrialOutcome::Success => "success",
            TrialOutcome::Accident => "accident",
            TrialOutcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub agent: usize,
    pub outcome: TrialOutcome,
    pub distance: f64,
    pub baseline_length: f64,
    /// Only for successes.
    pub edp: Option<f64>,
    /// World step at which the trial closed.
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub trials: u64,
    pub successes: u64,
    pub accidents: u64,
    pub timeouts: u64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub edp_mean: Option<f64>,
    /// Population standard deviation.
    pub edp_std: Option<f64>,
    /// `crowdedness[k]` counts samples in which `k` partners were perceived.
    pub crowdedness: Vec<u64>,
    pub crowd_samples: u64,
    pub world_steps: u64,
    /// Filled in by callers that can read a clock.
    pub wall_clock_secs: Option<f64>,
    pub records: Vec<TrialRecord>,
}

impl EvalReport {
    /// Aggregates closed trials and a crowdedness histogram.
    pub fn from_records(records: Vec<TrialRecord>, crowdedness: Vec<u64>, world_steps: u64) -> EvalReport {
        let count = |o| records.iter().filter(|r| r.outcome == o).count() as u64;
        let (successes, accidents, timeouts) = (
            count(TrialOutcome::Success),
            count(TrialOutcome::Accident),
            count(TrialOutcome::Timeout),
        );
        let trials = records.len() as u64;
        let rate = |k: u64| if trials == 0 { 0.0 } else { k as f64 / trials as f64 };
        let edps: Vec<f64> = records.iter().filter_map(|r| r.edp).collect();
        let (edp_mean, edp_std) = if edps.is_empty() {
            (None, None)
        } else {
            let n = edps.len() as f64;
            let mean = edps.iter().sum::<f64>() / n;
            let var = edps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
            (Some(mean), Some(math::sqrt(var)))
        };
        EvalReport {
            trials,
            successes,
            accidents,
            timeouts,
            success_rate: rate(successes),
            collision_rate: rate(accidents),
            timeout_rate: rate(timeouts),
            edp_mean,
            edp_std,
            crowd_samples: crowdedness.iter().sum(),
            crowdedness,
            world_steps,
            wall_clock_secs: None,
            records,
        }
    }
}

/// Anything that maps an observation batch to action probabilities.
pub trait Policy {
    /// Errors unless the policy can act in worlds configured by `world`.
    fn check(&self, world: &WorldConfig) -> Result<(), EvalError>;

    /// One row of `actions` probabilities per observation row.
    fn probabilities(&mut self, obs: &Matrix, actions: usize) -> Result<Matrix, EvalError>;
}

impl Policy for PolicyParams {
    fn check(&self, world: &WorldConfig) -> Result<(), EvalError> {
        let s = self.shape();
        if s.input != world.observation_width() {
            return Err(EvalError::Incompatible("observation width differs"));
        }
        if s.actions != world.action_count() {
            return Err(EvalError::Incompatible("action count differs"));
        }
        Ok(())
    }

    fn probabilities(&mut self, obs: &Matrix, _actions: usize) -> Result<Matrix, EvalError> {
        Ok(nn::infer(self, obs)?.probs)
    }
}

/// Hand-written reference policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPolicy {
    /// Always follow the planner.
    Planner,
    /// Every available action equally likely.
    Uniform,
    /// Follow the planner, except: turn right when a partner is within
    /// `DODGE_RANGE` of the sensor range on the three front rays, and step
    /// forward while one is that close on the rays 16° to 72° to the right.
    Dodge,
}

/// Fraction of the sensor range at which [`FixedPolicy::Dodge`] reacts.
pub const DODGE_RANGE: f64 = 0.4;

impl FixedPolicy {
    fn dodge_action(row: &[f64]) -> Action {
        let n = row.len() / 2;
        let close = |k: usize| row[2 * k + 1] == 1.0 && row[2 * k] <= DODGE_RANGE;
        if close(n - 1) || close(0) || close(1) {
            Action::TurnRight
        } else if (n - 9..=n - 2).any(close) {
            Action::Forward
        } else {
            Action::Navigate
        }
    }
}

impl Policy for FixedPolicy {
    fn check(&self, world: &WorldConfig) -> Result<(), EvalError> {
        match self {
            FixedPolicy::Planner | FixedPolicy::Dodge if world.baseline_mode => {
                Err(EvalError::Incompatible("planner actions are unavailable in baseline mode"))
            }
            FixedPolicy::Dodge if world.sensor_count < 10 => Err(EvalError::Incompatible("dodge needs at least 10 rays")),
            _ => Ok(()),
        }
    }

    fn probabilities(&mut self, obs: &Matrix, actions: usize) -> Result<Matrix, EvalError> {
        let k = actions;
        let mut p = Matrix::zeros(obs.rows, k);
        for r in 0..obs.rows {
            match self {
                FixedPolicy::Planner => p.row_mut(r)[0] = 1.0,
                FixedPolicy::Uniform => p.row_mut(r).iter_mut().for_each(|v| *v = 1.0 / k as f64),
                FixedPolicy::Dodge => p.row_mut(r)[Self::dodge_action(obs.row(r)).code()] = 1.0,
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub trials: u64,
    /// Sample actions instead of taking the most likely one.
    pub stochastic: bool,
    /// Seed for stochastic action sampling.
    pub seed: u64,
    pub crowd_cap: u64,
}

impl EvalOptions {
    pub fn new(trials: u64) -> Self {
        EvalOptions {
            trials,
            stochastic: false,
            seed: 0,
            crowd_cap: CROWD_SAMPLE_CAP,
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Runs a fresh world until `opts.trials` trials have closed.
pub fn run_trials(
    policy: &mut dyn Policy,
    world: WorldConfig,
    scenario: ScenarioSpec,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    run_trials_observed(policy, world, scenario, opts, &mut |_, _, _| {})
}

/// [`run_trials`], calling `observer` after every step with the world, the
/// actions taken and the outcome.
pub fn run_trials_observed(
    policy: &mut dyn Policy,
    world: WorldConfig,
    scenario: ScenarioSpec,
    opts: &EvalOptions,
    observer: &mut dyn FnMut(&World, &[Option<Action>], &StepOutcome),
) -> Result<EvalReport, EvalError> {
    policy.check(&world)?;
    let baseline = world.baseline_mode;
    let width = world.observation_width();
    let actions_n = world.action_count();
    let mut world = World::new(world, scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = world.agents().len();
    let mut records = Vec::new();
    let mut hist: Vec<u64> = Vec::new();
    let mut samples = 0u64;

    while (records.len() as u64) < opts.trials {
        let live: Vec<usize> = (0..n)
            .filter(|&i| world.agent(i).status == AgentStatus::Running)
            .collect();
        if live.is_empty() {
            return Err(EvalError::Stalled);
        }
        let mut obs = Matrix::zeros(live.len(), width);
        for (row, &i) in live.iter().enumerate() {
            let scan = world.observe_into(i, obs.row_mut(row));
            if samples < opts.crowd_cap {
                let c = scan.partners_seen();
                if hist.len() <= c {
                    hist.resize(c + 1, 0);
                }
                hist[c] += 1;
                samples += 1;
            }
        }
        let probs = policy.probabilities(&obs, actions_n)?;
        let mut actions = vec![None; n];
        for (row, &i) in live.iter().enumerate() {
            let p = probs.row(row);
            let idx = if opts.stochastic {
                sample_categorical(p, &mut rng)
            } else {
                argmax(p)
            };
            actions[i] = Some(
                Action::from_policy_index(idx, baseline).ok_or(EvalError::Incompatible("policy output exceeds action count"))?,
            );
        }
        let outcome = world.step(&actions)?;
        observer(&world, &actions, &outcome);
        for (i, s) in outcome.agents.iter().enumerate() {
            let Some(s) = s else { continue };
            let Some(t) = s.transition else { continue };
            if records.len() as u64 >= opts.trials {
                break;
            }
            let outcome = match t {
                AgentStatus::Arrived => TrialOutcome::Success,
                AgentStatus::Collided => TrialOutcome::Accident,
                _ => TrialOutcome::Timeout,
            };
            let edp = if outcome == TrialOutcome::Success {
                Some(compute_edp(s.distance_traveled, s.baseline_length)?)
            } else {
                None
            };
            records.push(TrialRecord {
                agent: i,
                outcome,
                distance: s.distance_traveled,
                baseline_length: s.baseline_length,
                edp,
                step: world.step_count(),
            });
        }
    }
    Ok(EvalReport::from_records(records, hist, world.step_count()))
}

/// Plain-text table with one row per named report.
pub fn compare_reports(reports: &[(&str, &EvalReport)]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| String::from("-"), |x| format!("{x:.3}"));
    let name_w = reports.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>9}",
        "method", "trials", "success", "edp_mean", "edp_std", "collision"
    );
    for (name, r) in reports {
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>9}",
            name,
            r.trials,
            cell(Some(r.success_rate)),
            cell(r.edp_mean),
            cell(r.edp_std),
            cell(Some(r.collision_rate)),
        );
    }
    out
}
