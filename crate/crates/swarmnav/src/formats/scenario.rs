//! Scenario files: a header line followed by TOML.
//!
//! ```text
//! swarmnav-scenario v1
//! kind = "circle_transport"
//! side = 200.0
//! agents = 20
//! ```
//!
//! Omitted lengths follow the named preset scaled to `side`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarmnav_core::navmesh::MapSpec;
use swarmnav_core::sim::{ScenarioKind, ScenarioSpec};

use super::{parse_toml, read_text, strip_header};
use crate::error::{CliError, Result};

pub const HEADER: &str = "swarmnav-scenario v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: String,
    pub side: Option<f64>,
    pub agents: Option<usize>,
    pub circle_radius: Option<f64>,
    pub obstacle_count: Option<usize>,
    pub obstacle_min_size: Option<f64>,
    pub obstacle_max_size: Option<f64>,
    pub obstacle_clearance: Option<f64>,
    pub region_size: Option<f64>,
    pub min_goal_distance: Option<f64>,
    /// Map file replacing the generated map, relative to the file naming it.
    pub map: Option<PathBuf>,
}

/// A scenario with every value filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub agents: usize,
    pub map: Option<MapSpec>,
}

impl ScenarioSection {
    pub fn preset(kind: ScenarioKind) -> Self {
        ScenarioSection {
            kind: kind.name().to_string(),
            side: None,
            agents: None,
            circle_radius: None,
            obstacle_count: None,
            obstacle_min_size: None,
            obstacle_max_size: None,
            obstacle_clearance: None,
            region_size: None,
            min_goal_distance: None,
            map: None,
        }
    }

    pub fn resolve(&self, base: &Path) -> Result<Scenario> {
        let kind: ScenarioKind = self
            .kind
            .parse()
            .map_err(|_| CliError::Config(format!("unknown scenario kind {:?}", self.kind)))?;
        let mut spec = match self.side {
            Some(side) => ScenarioSpec::scaled(kind, side),
            None => ScenarioSpec::preset(kind),
        };
        let set = |dst: &mut f64, v: Option<f64>| *dst = v.unwrap_or(*dst);
        set(&mut spec.circle_radius, self.circle_radius);
        set(&mut spec.obstacle_min_size, self.obstacle_min_size);
        set(&mut spec.obstacle_max_size, self.obstacle_max_size);
        set(&mut spec.obstacle_clearance, self.obstacle_clearance);
        set(&mut spec.region_size, self.region_size);
        set(&mut spec.min_goal_distance, self.min_goal_distance);
        spec.obstacle_count = self.obstacle_count.unwrap_or(spec.obstacle_count);
        let map = match &self.map {
            Some(p) => {
                let m = super::map::load_map(&base.join(p))?;
                if m.domain_side != spec.side {
                    return Err(CliError::Config(format!(
                        "map side {} differs from scenario side {}",
                        m.domain_side, spec.side
                    )));
                }
                Some(m)
            }
            None => None,
        };
        Ok(Scenario {
            agents: self.agents.unwrap_or_else(|| spec.default_agents()),
            spec,
            map,
        })
    }

    /// The same scenario with every generated value written out.
    pub fn expanded(s: &Scenario, map: Option<PathBuf>) -> Self {
        ScenarioSection {
            kind: s.spec.kind.name().to_string(),
            side: Some(s.spec.side),
            agents: Some(s.agents),
            circle_radius: Some(s.spec.circle_radius),
            obstacle_count: Some(s.spec.obstacle_count),
            obstacle_min_size: Some(s.spec.obstacle_min_size),
            obstacle_max_size: Some(s.spec.obstacle_max_size),
            obstacle_clearance: Some(s.spec.obstacle_clearance),
            region_size: Some(s.spec.region_size),
            min_goal_distance: Some(s.spec.min_goal_distance),
            map,
        }
    }
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    let body = strip_header(text, HEADER, path)?;
    let section: ScenarioSection = parse_toml(body, path)?;
    section.resolve(path.parent().unwrap_or(Path::new(".")))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&read_text(path)?, path)
}

/// A preset name or a scenario file path.
pub fn scenario_arg(arg: &str) -> Result<Scenario> {
    match arg.parse::<ScenarioKind>() {
        Ok(kind) => ScenarioSection::preset(kind).resolve(Path::new(".")),
        Err(_) if Path::new(arg).exists() => load_scenario(Path::new(arg)),
        Err(_) => Err(CliError::Config(format!(
            "{arg:?} is neither a scenario preset nor an existing file"
        ))),
    }
}
