//! Run configuration: a header line followed by TOML with a top-level
//! `output_dir` and `seed` and the `[scenario]`, `[world]` and `[train]`
//! tables. Omitted values take the library defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swarmnav_core::ppo::TrainConfig;
use swarmnav_core::sim::{RewardConstants, ScenarioSpec, WorldConfig};

use super::scenario::{Scenario, ScenarioSection};
use super::{parse_toml, read_text, strip_header};
use crate::error::{CliError, Result};

pub const HEADER: &str = "swarmnav-run v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub agent_radius: f64,
    pub speed: f64,
    pub turn_rate: f64,
    pub safe_distance: f64,
    pub max_steps: u64,
    pub sensor_count: usize,
    pub sensor_range: f64,
    pub baseline: bool,
    pub obstacle_inflation: f64,
    pub arrival_radius: f64,
    pub rate_limited_navigation: bool,
    pub reward_navigation: f64,
    pub reward_collision: f64,
    pub reward_arrival: f64,
    pub reward_time_penalty: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldConfig::new(swarmnav_core::MapSpec::empty(1.0), 1, 0);
        WorldSection {
            agent_radius: w.agent_radius,
            speed: w.speed,
            turn_rate: w.turn_rate,
            safe_distance: w.safe_distance,
            max_steps: w.max_steps,
            sensor_count: w.sensor_count,
            sensor_range: w.sensor_range,
            baseline: w.baseline_mode,
            obstacle_inflation: w.obstacle_inflation,
            arrival_radius: w.arrival_radius,
            rate_limited_navigation: w.rate_limited_navigation,
            reward_navigation: w.rewards.navigation,
            reward_collision: w.rewards.collision,
            reward_arrival: w.rewards.arrival,
            reward_time_penalty: w.rewards.time_penalty,
        }
    }
}

impl WorldSection {
    pub fn apply(&self, w: &mut WorldConfig) {
        w.agent_radius = self.agent_radius;
        w.speed = self.speed;
        w.turn_rate = self.turn_rate;
        w.safe_distance = self.safe_distance;
        w.max_steps = self.max_steps;
        w.sensor_count = self.sensor_count;
        w.sensor_range = self.sensor_range;
        w.baseline_mode = self.baseline;
        w.obstacle_inflation = self.obstacle_inflation;
        w.arrival_radius = self.arrival_radius;
        w.rate_limited_navigation = self.rate_limited_navigation;
        w.rewards = RewardConstants {
            navigation: self.reward_navigation,
            collision: self.reward_collision,
            arrival: self.reward_arrival,
            time_penalty: self.reward_time_penalty,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    pub max_steps: u64,
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_weight: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub workers: usize,
    pub checkpoint_every: u64,
    pub reward_window: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            discount: t.discount,
            gae_lambda: t.gae_lambda,
            clip: t.clip,
            learning_rate: t.learning_rate,
            max_steps: t.max_steps,
            horizon: t.horizon,
            epochs: t.epochs,
            minibatch_size: t.minibatch_size,
            value_weight: t.value_weight,
            entropy_coef: t.entropy_coef,
            normalize_advantages: t.normalize_advantages,
            hidden_layers: t.hidden_layers,
            hidden_width: t.hidden_width,
            workers: t.worlds,
            checkpoint_every: t.checkpoint_every,
            reward_window: t.reward_window,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            discount: self.discount,
            gae_lambda: self.gae_lambda,
            clip: self.clip,
            learning_rate: self.learning_rate,
            max_steps: self.max_steps,
            horizon: self.horizon,
            epochs: self.epochs,
            minibatch_size: self.minibatch_size,
            value_weight: self.value_weight,
            entropy_coef: self.entropy_coef,
            normalize_advantages: self.normalize_advantages,
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            worlds: self.workers,
            checkpoint_every: self.checkpoint_every,
            reward_window: self.reward_window,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub world: WorldSection,
    #[serde(default)]
    pub train: TrainSection,
}

/// Where the effective seed came from, highest precedence first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Flag,
    Env,
    Config,
}

/// Picks the seed: command-line flag, then `SWARMNAV_SEED`, then the file.
pub fn effective_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<(u64, SeedSource)> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(v) = env {
        let s = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("SWARMNAV_SEED={v:?} is not an unsigned integer")))?;
        return Ok((s, SeedSource::Env));
    }
    Ok((config, SeedSource::Config))
}

#[derive(Serialize)]
struct HashedPart<'a> {
    seed: u64,
    scenario: &'a ScenarioSection,
    world: &'a WorldSection,
    train: &'a TrainSection,
}

/// A run configuration with everything derived from it.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub world: WorldConfig,
    pub train: TrainConfig,
    /// The configuration with every default written out.
    pub canonical: String,
    /// Hex SHA-256 of the canonical seed, scenario, world and train
    /// sections. The output directory does not enter it.
    pub hash: String,
}

impl ResolvedRun {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.scenario.spec
    }
}

pub fn parse_run(text: &str, path: &Path) -> Result<RunConfig> {
    parse_toml(strip_header(text, HEADER, path)?, path)
}

pub fn load_run(path: &Path) -> Result<(RunConfig, String)> {
    let text = read_text(path)?;
    Ok((parse_run(&text, path)?, text))
}

/// Fills in defaults, builds the map and validates everything. `base` is the
/// directory relative paths in the file are taken from.
pub fn resolve(mut config: RunConfig, base: &Path) -> Result<ResolvedRun> {
    let scenario = config.scenario.resolve(base)?;
    let map = match &scenario.map {
        Some(m) => m.clone(),
        None => scenario.spec.build_map(config.seed)?,
    };
    let mut world = WorldConfig::new(map, scenario.agents, config.seed);
    config.world.apply(&mut world);
    world.validate()?;
    if !world.rewards.arrival_stays_positive(world.max_steps) {
        return Err(CliError::Config(format!(
            "reward_arrival + max_steps * reward_time_penalty = {} is negative",
            world.rewards.arrival + world.max_steps as f64 * world.rewards.time_penalty
        )));
    }
    let train = config.train.to_config(config.seed);
    train.validate()?;
    config.scenario = ScenarioSection::expanded(&scenario, config.scenario.map.clone());
    let canonical = format!("{HEADER}\n{}", toml::to_string(&config).map_err(|e| CliError::Other(e.to_string()))?);
    let hash = hash_text(&toml::to_string(&HashedPart {
        seed: config.seed,
        scenario: &config.scenario,
        world: &config.world,
        train: &config.train,
    })
    .map_err(|e| CliError::Other(e.to_string()))?);
    Ok(ResolvedRun {
        config,
        scenario,
        world,
        train,
        canonical,
        hash,
    })
}

pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "swarmnav-run v1\noutput_dir = \"out\"\nseed = 3\n[scenario]\nkind = \"basic\"\nside = 50.0\nagents = 8\n";

    #[test]
    fn defaults_fill_in() {
        let run = resolve(parse_run(MINIMAL, Path::new("r")).unwrap(), Path::new(".")).unwrap();
        assert_eq!(run.train.discount, 0.99);
        assert_eq!(run.train.seed, 3);
        assert_eq!(run.world.seed, 3);
        assert_eq!(run.world.agent_count, 8);
        assert_eq!(run.hash.len(), 64);
        let again = resolve(parse_run(&run.canonical, Path::new("r")).unwrap(), Path::new(".")).unwrap();
        assert_eq!(again.hash, run.hash);
        let moved = MINIMAL.replace("\"out\"", "\"elsewhere\"");
        let moved = resolve(parse_run(&moved, Path::new("r")).unwrap(), Path::new(".")).unwrap();
        assert_eq!(moved.hash, run.hash);
        let reseeded = resolve(parse_run(&MINIMAL.replace("seed = 3", "seed = 4"), Path::new("r")).unwrap(), Path::new(".")).unwrap();
        assert_ne!(reseeded.hash, run.hash);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(effective_seed(Some(1), Some("2"), 3).unwrap(), (1, SeedSource::Flag));
        assert_eq!(effective_seed(None, Some("2"), 3).unwrap(), (2, SeedSource::Env));
        assert_eq!(effective_seed(None, None, 3).unwrap(), (3, SeedSource::Config));
        assert_eq!(effective_seed(None, Some("x"), 3).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let text = format!("{MINIMAL}[world]\nmax_steps = 20000\n");
        let e = resolve(parse_run(&text, Path::new("r")).unwrap(), Path::new(".")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let text = format!("{MINIMAL}[train]\nhorizon = \"long\"\n");
        match parse_run(&text, Path::new("r")).unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 9),
            e => panic!("{e}"),
        }
    }
}
