//! PPO with a clipped surrogate, GAE advantages and a linearly decaying
//! learning rate.
//!
//! Every agent of every training world is one stream. A rollout runs the
//! worlds for `horizon` steps under frozen parameters, after which the whole
//! batch is used for a few epochs of minibatch Adam steps.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math;
use crate::nn::{self, AdamState, Matrix, NetworkShape, NnError, PolicyParams};
use crate::sim::{Action, AgentStatus, ScenarioSpec, SimError, World, WorldConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpoError {
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite loss at update {update} (surrogate {surrogate}, value loss {value_loss})")]
    NonFiniteLoss {
        update: u64,
        surrogate: f64,
        value_loss: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    /// Environment steps (agent transitions) to train for. The last rollout
    /// is shortened so this is never exceeded.
    pub max_steps: u64,
    /// Steps per stream per rollout.
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_weight: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Independent worlds stepped side by side.
    pub worlds: usize,
    /// Checkpoint whenever this many environment steps have passed; 0 keeps
    /// only the initial and final ones.
    pub checkpoint_every: u64,
    /// Transitions averaged for the sliding-window reward.
    pub reward_window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            discount: 0.99,
            gae_lambda: 0.95,
            clip: 0.1,
            learning_rate: 3e-4,
            max_steps: 5_000_000,
            horizon: 2048,
            epochs: 3,
            minibatch_size: 256,
            value_weight: 0.5,
            entropy_coef: 0.0,
            normalize_advantages: true,
            hidden_layers: 4,
            hidden_width: 256,
            worlds: 1,
            checkpoint_every: 0,
            reward_window: 10_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(PpoError::Config("discount must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(PpoError::Config("gae_lambda must be in [0, 1]"));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(PpoError::Config("clip must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PpoError::Config("learning_rate must be positive"));
        }
        if self.horizon == 0 || self.epochs == 0 || self.minibatch_size == 0 {
            return Err(PpoError::Config("horizon, epochs and minibatch_size must be positive"));
        }
        if self.worlds == 0 {
            return Err(PpoError::Config("at least one world is required"));
        }
        if !(self.value_weight >= 0.0 && self.entropy_coef >= 0.0) {
            return Err(PpoError::Config("loss weights must be non-negative"));
        }
        if self.reward_window == 0 {
            return Err(PpoError::Config("reward_window must be positive"));
        }
        Ok(())
    }

    pub fn network_shape(&self, world: &WorldConfig) -> NetworkShape {
        NetworkShape::new(
            world.observation_width(),
            self.hidden_layers,
            self.hidden_width,
            world.action_count(),
        )
    }
}

/// Learning rate after `step` environment steps: linear from the initial
/// rate down to zero at `max_steps`.
pub fn lr_schedule(step: u64, cfg: &TrainConfig) -> f64 {
    if cfg.max_steps == 0 {
        return cfg.learning_rate;
    }
    let frac = (step.min(cfg.max_steps)) as f64 / cfg.max_steps as f64;
    cfg.learning_rate * (1.0 - frac)
}

/// Transitions of one agent in order. `dones[t]` marks the last step of an
/// episode; `bootstrap` is the value of the state after the final transition
/// (unused when that transition is terminal).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stream {
    pub obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: f64,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Episode ends seen while collecting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpisodeCounts {
    pub arrived: u64,
    pub collided: u64,
    pub timed_out: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub obs_width: usize,
    /// Stream `w * agents + a` belongs to agent `a` of world `w`.
    pub streams: Vec<Stream>,
    pub episodes: EpisodeCounts,
}

impl RolloutBuffer {
    pub fn transitions(&self) -> usize {
        self.streams.iter().map(Stream::len).sum()
    }
}

/// Index drawn from the categorical distribution `probs`.
pub fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Runs every world for `horizon` steps with actions sampled from `params`.
/// Each stream gets one transition per step in which its agent was running,
/// so `horizon` per stream unless a respawn failed.
pub fn collect_rollouts(
    params: &PolicyParams,
    worlds: &mut [World],
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBuffer, PpoError> {
    let Some(first) = worlds.first() else {
        return Err(PpoError::Config("at least one world is required"));
    };
    let width = first.config().observation_width();
    let baseline = first.config().baseline_mode;
    let agents: Vec<usize> = worlds.iter().map(|w| w.agents().len()).collect();
    let offsets: Vec<usize> = agents
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    let total: usize = agents.iter().sum();
    let mut streams = vec![Stream::default(); total];
    let mut episodes = EpisodeCounts::default();

    for step in 0..=horizon {
        // who is running right now, in stream order
        let mut live: Vec<(usize, usize)> = Vec::with_capacity(total);
        for (w, world) in worlds.iter().enumerate() {
            for a in 0..agents[w] {
                if world.agent(a).status == AgentStatus::Running {
                    live.push((w, a));
                }
            }
        }
        let mut obs = Matrix::zeros(live.len(), width);
        for (row, &(w, a)) in live.iter().enumerate() {
            worlds[w].observe_into(a, obs.row_mut(row));
        }
        let out = nn::infer(params, &obs)?;
        if step == horizon {
            for (row, &(w, a)) in live.iter().enumerate() {
                streams[offsets[w] + a].bootstrap = out.values[row];
            }
            break;
        }

        let mut actions: Vec<Vec<Option<Action>>> = agents.iter().map(|&n| vec![None; n]).collect();
        for (row, &(w, a)) in live.iter().enumerate() {
            let idx = sample_categorical(out.probs.row(row), rng);
            let s = &mut streams[offsets[w] + a];
            s.obs.extend_from_slice(obs.row(row));
            s.actions.push(idx);
            s.log_probs.push(out.log_probs.get(row, idx));
            s.values.push(out.values[row]);
            actions[w][a] = Some(Action::from_policy_index(idx, baseline).expect("index below action count"));
        }
        for (w, world) in worlds.iter_mut().enumerate() {
            let outcome = world.step(&actions[w])?;
            for (a, step) in outcome.agents.iter().enumerate() {
                let Some(step) = step else { continue };
                let s = &mut streams[offsets[w] + a];
                s.rewards.push(step.reward.total);
                s.dones.push(step.transition.is_some());
                match step.transition {
                    Some(AgentStatus::Arrived) => episodes.arrived += 1,
                    Some(AgentStatus::Collided) => episodes.collided += 1,
                    Some(AgentStatus::TimedOut) => episodes.timed_out += 1,
                    _ => {}
                }
            }
        }
    }
    Ok(RolloutBuffer {
        obs_width: width,
        streams,
        episodes,
    })
}

/// Advantages and value targets of one stream by the backward recursion
/// `Â_t = δ_t + γλ Â_{t+1}`, restarting at every done flag.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    discount: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    for (what, got) in [("values", values.len()), ("dones", dones.len())] {
        if got != n {
            return Err(PpoError::Length {
                what,
                expected: n,
                got,
            });
        }
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let (nv, na) = if dones[t] { (0.0, 0.0) } else { (next_value, next_adv) };
        let delta = rewards[t] + discount * nv - values[t];
        adv[t] = delta + discount * lambda * na;
        next_adv = adv[t];
        next_value = values[t];
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// Flattened training samples of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Matrix,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Batch {
        let w = self.obs.cols;
        let mut obs = Matrix::zeros(idx.len(), w);
        for (r, &i) in idx.iter().enumerate() {
            obs.row_mut(r).copy_from_slice(self.obs.row(i));
        }
        Batch {
            obs,
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            old_log_probs: idx.iter().map(|&i| self.old_log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Runs GAE over every stream and flattens the buffer.
pub fn build_batch(buffer: &RolloutBuffer, cfg: &TrainConfig) -> Result<Batch, PpoError> {
    let n = buffer.transitions();
    let mut obs = Vec::with_capacity(n * buffer.obs_width);
    let mut batch = Batch {
        obs: Matrix::zeros(0, buffer.obs_width),
        actions: Vec::with_capacity(n),
        old_log_probs: Vec::with_capacity(n),
        advantages: Vec::with_capacity(n),
        targets: Vec::with_capacity(n),
    };
    for s in &buffer.streams {
        if s.rewards.len() != s.len() {
            return Err(PpoError::Length {
                what: "rewards",
                expected: s.len(),
                got: s.rewards.len(),
            });
        }
        let (adv, targets) = compute_gae(&s.rewards, &s.values, &s.dones, s.bootstrap, cfg.discount, cfg.gae_lambda)?;
        obs.extend_from_slice(&s.obs);
        batch.actions.extend_from_slice(&s.actions);
        batch.old_log_probs.extend_from_slice(&s.log_probs);
        batch.advantages.extend(adv);
        batch.targets.extend(targets);
    }
    batch.obs = Matrix::from_vec(n, buffer.obs_width, obs)?;
    Ok(batch)
}

/// Shifts and scales `values` to zero mean and unit (population) variance.
/// Leaves them alone when there are fewer than two or they are all equal.
pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return;
    }
    let sd = math::sqrt(var);
    for v in values {
        *v = (*v - mean) / sd;
    }
}

/// Loss terms of one minibatch. The minimized loss is
/// `-surrogate + value_weight * value_loss - entropy_coef * entropy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub loss: f64,
}

/// Loss of `batch` under `params` and its gradient.
pub fn ppo_loss(params: &PolicyParams, batch: &Batch, cfg: &TrainConfig) -> Result<(LossParts, Vec<f64>), PpoError> {
    let n = batch.len();
    if n == 0 {
        return Err(PpoError::Length {
            what: "minibatch",
            expected: 1,
            got: 0,
        });
    }
    let (out, trace) = nn::forward(params, &batch.obs)?;
    let k = out.probs.cols;
    let inv = 1.0 / n as f64;
    let mut d_logits = Matrix::zeros(n, k);
    let mut d_values = vec![0.0; n];
    let (mut surrogate, mut value_loss, mut entropy, mut clipped) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..n {
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let logp = out.log_probs.row(i);
        let p = out.probs.row(i);
        let ratio = math::exp(logp[a] - batch.old_log_probs[i]);
        let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        if (ratio - 1.0).abs() > cfg.clip {
            clipped += 1;
        }
        let unclipped = ratio * adv;
        let bounded = clipped_ratio * adv;
        surrogate += unclipped.min(bounded);
        let h: f64 = -p.iter().zip(logp).map(|(pi, li)| pi * li).sum::<f64>();
        entropy += h;
        let row = d_logits.row_mut(i);
        if unclipped <= bounded {
            // d(-r·A)/dz_j = -A·r·(1[j = a] - p_j)
            let g = -adv * ratio * inv;
            for j in 0..k {
                let ind = if j == a { 1.0 } else { 0.0 };
                row[j] += g * (ind - p[j]);
            }
        }
        if cfg.entropy_coef != 0.0 {
            for j in 0..k {
                row[j] += cfg.entropy_coef * inv * p[j] * (logp[j] + h);
            }
        }
        let err = out.values[i] - batch.targets[i];
        value_loss += err * err;
        d_values[i] = 2.0 * cfg.value_weight * err * inv;
    }
    let surrogate = surrogate * inv;
    let value_loss = value_loss * inv;
    let entropy = entropy * inv;
    let parts = LossParts {
        surrogate,
        value_loss,
        entropy,
        clip_fraction: clipped as f64 * inv,
        loss: -surrogate + cfg.value_weight * value_loss - cfg.entropy_coef * entropy,
    };
    let grad = nn::backward(params, &trace, &d_logits, &d_values)?;
    Ok((parts, grad))
}

/// Summary of one collect-and-update cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub update: u64,
    /// Cumulative environment steps after this update's rollout.
    pub env_steps: u64,
    pub learning_rate: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean advantage before normalization.
    pub mean_advantage: f64,
    /// Mean per-step reward of this rollout.
    pub mean_reward: f64,
    /// Mean per-step reward over the last `reward_window` transitions.
    pub window_reward: f64,
    pub episodes: EpisodeCounts,
}

/// Epochs of shuffled minibatch Adam steps over `batch`. Returns the loss
/// terms averaged over all minibatches and the pre-normalization mean
/// advantage.
pub fn ppo_update(
    params: &mut PolicyParams,
    adam: &mut AdamState,
    mut batch: Batch,
    cfg: &TrainConfig,
    learning_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(LossParts, f64), PpoError> {
    let n = batch.len();
    let mean_advantage = if n > 0 {
        batch.advantages.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    if cfg.normalize_advantages {
        normalize(&mut batch.advantages);
    }
    let mut sum = LossParts {
        surrogate: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
        loss: 0.0,
    };
    let mut count = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mb = batch.select(chunk);
            let (parts, grad) = ppo_loss(params, &mb, cfg)?;
            if !parts.loss.is_finite() {
                return Err(PpoError::NonFiniteLoss {
                    update: adam.t,
                    surrogate: parts.surrogate,
                    value_loss: parts.value_loss,
                });
            }
            nn::adam_step(params, &grad, adam, learning_rate)?;
            sum.surrogate += parts.surrogate;
            sum.value_loss += parts.value_loss;
            sum.entropy += parts.entropy;
            sum.clip_fraction += parts.clip_fraction;
            sum.loss += parts.loss;
            count += 1;
        }
    }
    let c = count.max(1) as f64;
    Ok((
        LossParts {
            surrogate: sum.surrogate / c,
            value_loss: sum.value_loss / c,
            entropy: sum.entropy / c,
            clip_fraction: sum.clip_fraction / c,
            loss: sum.loss / c,
        },
        mean_advantage,
    ))
}

/// Receives checkpoints and reports from [`Trainer::run`].
pub trait TrainSink {
    type Error;

    fn checkpoint(&mut self, state: &TrainState) -> Result<(), Self::Error>;

    fn report(&mut self, report: &UpdateReport) -> Result<(), Self::Error>;
}

#[derive(Debug, Error)]
pub enum TrainError<E> {
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error("sink failed: {0}")]
    Sink(E),
}

/// Everything needed to continue training later.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: PolicyParams,
    pub adam: AdamState,
    pub env_steps: u64,
    pub updates: u64,
}

/// Seed for world `k` of the rollout starting at `env_steps`.
fn world_seed(seed: u64, env_steps: u64, k: usize) -> u64 {
    let mut x = seed ^ env_steps.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (k as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 31;
    x.wrapping_mul(0x94d0_49bb_1331_11eb)
}

pub struct Trainer {
    cfg: TrainConfig,
    world_cfg: WorldConfig,
    scenario: ScenarioSpec,
    state: TrainState,
    worlds: Vec<World>,
    rng: ChaCha8Rng,
    window: VecDeque<f64>,
    window_sum: f64,
}

impl Trainer {
    /// Fresh parameters seeded from `cfg.seed`.
    pub fn new(cfg: TrainConfig, world_cfg: WorldConfig, scenario: ScenarioSpec) -> Result<Trainer, PpoError> {
        cfg.validate()?;
        let params = nn::init_params(cfg.network_shape(&world_cfg), cfg.seed)?;
        let adam = AdamState::new(params.len());
        Trainer::resume(
            cfg,
            world_cfg,
            scenario,
            TrainState {
                params,
                adam,
                env_steps: 0,
                updates: 0,
            },
        )
    }

    /// Continues from a saved state. Worlds and the sampling generator are
    /// reseeded from the configured seed and the step count.
    pub fn resume(cfg: TrainConfig, world_cfg: WorldConfig, scenario: ScenarioSpec, state: TrainState) -> Result<Trainer, PpoError> {
        cfg.validate()?;
        let shape = cfg.network_shape(&world_cfg);
        if state.params.shape() != shape {
            return Err(PpoError::Config("saved parameters do not match the network shape"));
        }
        if state.adam.m.len() != state.params.len() || state.adam.v.len() != state.params.len() {
            return Err(PpoError::Config("saved optimizer state does not match the parameters"));
        }
        let worlds = (0..cfg.worlds)
            .map(|k| {
                let mut wc = world_cfg.clone();
                wc.seed = world_seed(cfg.seed, state.env_steps, k);
                World::new(wc, scenario.clone())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rng = ChaCha8Rng::seed_from_u64(world_seed(cfg.seed, state.env_steps, usize::MAX));
        Ok(Trainer {
            cfg,
            world_cfg,
            scenario,
            state,
            worlds,
            rng,
            window: VecDeque::new(),
            window_sum: 0.0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn world_config(&self) -> &WorldConfig {
        &self.world_cfg
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    /// Rollout length of the next update, shortened so the step budget is
    /// never exceeded. Zero once not even one world step fits.
    fn next_horizon(&self) -> usize {
        let per_step: u64 = self.worlds.iter().map(|w| w.agents().len() as u64).sum();
        let remaining = self.cfg.max_steps.saturating_sub(self.state.env_steps);
        (remaining / per_step.max(1)).min(self.cfg.horizon as u64) as usize
    }

    pub fn done(&self) -> bool {
        self.next_horizon() == 0
    }

    /// One rollout followed by one update.
    pub fn step_update(&mut self) -> Result<UpdateReport, PpoError> {
        let horizon = self.next_horizon().max(1);
        let buffer = collect_rollouts(&self.state.params, &mut self.worlds, horizon, &mut self.rng)?;
        let transitions = buffer.transitions();
        let mut reward_sum = 0.0;
        for s in &buffer.streams {
            for &r in &s.rewards {
                reward_sum += r;
                self.window.push_back(r);
                self.window_sum += r;
                if self.window.len() > self.cfg.reward_window {
                    self.window_sum -= self.window.pop_front().expect("window not empty");
                }
            }
        }
        let lr = lr_schedule(self.state.env_steps, &self.cfg);
        let batch = build_batch(&buffer, &self.cfg)?;
        let (parts, mean_advantage) = ppo_update(
            &mut self.state.params,
            &mut self.state.adam,
            batch,
            &self.cfg,
            lr,
            &mut self.rng,
        )?;
        self.state.env_steps += transitions as u64;
        self.state.updates += 1;
        Ok(UpdateReport {
            update: self.state.updates,
            env_steps: self.state.env_steps,
            learning_rate: lr,
            surrogate: parts.surrogate,
            value_loss: parts.value_loss,
            entropy: parts.entropy,
            clip_fraction: parts.clip_fraction,
            mean_advantage,
            mean_reward: reward_sum / transitions.max(1) as f64,
            window_reward: self.window_sum / self.window.len().max(1) as f64,
            episodes: buffer.episodes,
        })
    }

    /// Trains until `max_steps`, checkpointing at the start (for fresh runs),
    /// on the configured cadence and at the end.
    pub fn run<S: TrainSink>(&mut self, sink: &mut S) -> Result<(), TrainError<S::Error>> {
        if self.state.env_steps == 0 {
            sink.checkpoint(&self.state).map_err(TrainError::Sink)?;
        }
        let mut saved_at = self.state.env_steps;
        while !self.done() {
            let before = self.state.env_steps;
            let report = self.step_update()?;
            sink.report(&report).map_err(TrainError::Sink)?;
            let every = self.cfg.checkpoint_every;
            if every > 0 && before / every != self.state.env_steps / every {
                sink.checkpoint(&self.state).map_err(TrainError::Sink)?;
                saved_at = self.state.env_steps;
            }
        }
        if saved_at != self.state.env_steps {
            sink.checkpoint(&self.state).map_err(TrainError::Sink)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navmesh::MapSpec;
    use crate::sim::ScenarioKind;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            horizon: 16,
            hidden_layers: 1,
            hidden_width: 8,
            minibatch_size: 16,
            max_steps: 64,
            ..TrainConfig::default()
        }
    }

    fn world_cfg(n: usize) -> WorldConfig {
        WorldConfig::new(MapSpec::empty(40.0), n, 3)
    }

    fn spec() -> ScenarioSpec {
        ScenarioSpec::scaled(ScenarioKind::Basic, 40.0)
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 0.0003);
        assert_eq!(lr_schedule(cfg.max_steps, &cfg), 0.0);
        assert!((lr_schedule(cfg.max_steps / 2, &cfg) - 0.00015).abs() < 1e-18);
    }

    #[test]
    fn single_step_gae() {
        let (adv, tgt) = compute_gae(&[0.5], &[0.2], &[false], 0.7, 0.99, 0.95).unwrap();
        assert!((adv[0] - (0.5 + 0.99 * 0.7 - 0.2)).abs() < 1e-15);
        assert!((tgt[0] - (0.5 + 0.99 * 0.7)).abs() < 1e-15);
        let (adv, _) = compute_gae(&[0.0; 4], &[0.0; 4], &[false, true, false, false], 0.0, 0.9, 0.5).unwrap();
        assert!(adv.iter().all(|&a| a == 0.0));
        assert!(matches!(
            compute_gae(&[0.0; 3], &[0.0; 2], &[false; 3], 0.0, 0.9, 0.9),
            Err(PpoError::Length { what: "values", .. })
        ));
    }

    #[test]
    fn done_blocks_bootstrapping() {
        let r = [0.3, -0.2, 1.0, 0.7, 0.1];
        let v = [0.1, 0.4, -0.3, 0.2, 0.5];
        let d = [false, false, true, false, false];
        let (a, _) = compute_gae(&r, &v, &d, 2.0, 0.9, 0.8).unwrap();
        let mut r2 = r;
        r2[3] = 0.0;
        r2[4] = 0.0;
        let (b, _) = compute_gae(&r2, &v, &d, -5.0, 0.9, 0.8).unwrap();
        assert_eq!(&a[..3], &b[..3]);
    }

    #[test]
    fn single_transition_rollout() {
        let params = nn::init_params(small_cfg().network_shape(&world_cfg(1)), 0).unwrap();
        let mut worlds = vec![World::new(world_cfg(1), spec()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let buf = collect_rollouts(&params, &mut worlds, 1, &mut rng).unwrap();
        assert_eq!(buf.transitions(), 1);
        let s = &buf.streams[0];
        let obs = Matrix::from_vec(1, 90, s.obs.clone()).unwrap();
        let out = nn::infer(&params, &obs).unwrap();
        assert!((s.log_probs[0] - out.probs.get(0, s.actions[0]).ln()).abs() < 1e-12);
    }

    #[test]
    fn rollouts_are_deterministic() {
        let run = || {
            let params = nn::init_params(small_cfg().network_shape(&world_cfg(3)), 0).unwrap();
            let mut worlds = vec![World::new(world_cfg(3), spec()).unwrap()];
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            collect_rollouts(&params, &mut worlds, 50, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!(a.streams.iter().all(|s| s.len() == 50 && s.rewards.len() == 50));
    }

    #[test]
    fn uniform_policy_action_frequencies() {
        let wc = world_cfg(4);
        let params = PolicyParams::zeros(small_cfg().network_shape(&wc)).unwrap();
        let mut worlds = vec![World::new(wc, spec()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let buf = collect_rollouts(&params, &mut worlds, 1500, &mut rng).unwrap();
        let mut counts = [0usize; 6];
        for s in &buf.streams {
            for &a in &s.actions {
                counts[a] += 1;
            }
        }
        let n = buf.transitions() as f64;
        let p = 1.0 / 6.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn first_pass_has_ratio_one() {
        let wc = world_cfg(2);
        let cfg = small_cfg();
        let params = nn::init_params(cfg.network_shape(&wc), 0).unwrap();
        let mut worlds = vec![World::new(wc, spec()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let buf = collect_rollouts(&params, &mut worlds, 20, &mut rng).unwrap();
        let mut batch = build_batch(&buf, &cfg).unwrap();
        normalize(&mut batch.advantages);
        let mean: f64 = batch.advantages.iter().sum::<f64>() / batch.len() as f64;
        let var: f64 = batch.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / batch.len() as f64;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-6);
        let (parts, _) = ppo_loss(&params, &batch, &cfg).unwrap();
        assert_eq!(parts.clip_fraction, 0.0);
        assert!(parts.surrogate.abs() < 1e-10);
    }

    #[test]
    fn clipped_sample_has_no_policy_gradient() {
        let cfg = small_cfg();
        let shape = NetworkShape::new(3, 1, 4, 6);
        let params = nn::init_params(shape, 2).unwrap();
        let obs = Matrix::from_vec(1, 3, vec![0.2, -0.4, 0.9]).unwrap();
        let out = nn::infer(&params, &obs).unwrap();
        // old probability much smaller: ratio far above 1 + ε with A > 0
        let batch = Batch {
            obs,
            actions: vec![2],
            old_log_probs: vec![out.log_probs.get(0, 2) - 1.0],
            advantages: vec![1.5],
            targets: vec![out.values[0]],
        };
        let (parts, grad) = ppo_loss(&params, &batch, &cfg).unwrap();
        assert_eq!(parts.clip_fraction, 1.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    struct Recorder {
        checkpoints: Vec<u64>,
        reports: Vec<UpdateReport>,
    }

    impl TrainSink for Recorder {
        type Error = ();

        fn checkpoint(&mut self, state: &TrainState) -> Result<(), ()> {
            self.checkpoints.push(state.env_steps);
            Ok(())
        }

        fn report(&mut self, report: &UpdateReport) -> Result<(), ()> {
            self.reports.push(report.clone());
            Ok(())
        }
    }

    #[test]
    fn zero_budget_only_checkpoints_once() {
        let cfg = TrainConfig {
            max_steps: 0,
            ..small_cfg()
        };
        let mut t = Trainer::new(cfg, world_cfg(2), spec()).unwrap();
        let mut rec = Recorder {
            checkpoints: Vec::new(),
            reports: Vec::new(),
        };
        t.run(&mut rec).unwrap();
        assert_eq!(rec.checkpoints, vec![0]);
        assert!(rec.reports.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_checkpoints_on_cadence() {
        let run = || {
            let cfg = TrainConfig {
                max_steps: 200,
                checkpoint_every: 64,
                ..small_cfg()
            };
            let mut t = Trainer::new(cfg, world_cfg(2), spec()).unwrap();
            let mut rec = Recorder {
                checkpoints: Vec::new(),
                reports: Vec::new(),
            };
            t.run(&mut rec).unwrap();
            (rec.checkpoints, rec.reports, t.into_state())
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        // 32 transitions per update, the last one cut to the 8 that fit
        assert_eq!(a.0, vec![0, 64, 128, 192, 200]);
        assert_eq!(a.1.len(), 7);
        assert_eq!(a.2.env_steps, 200);
        assert!(a.1.iter().all(|r| (0.0..=1.0).contains(&r.clip_fraction)));
    }
}
