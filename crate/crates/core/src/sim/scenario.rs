//! Scenario presets: map geometry plus how start/goal pairs are drawn.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SimError, WorldConfig};
use crate::geom::{self, Vec2};
use crate::math::{self, TAU};
use crate::navmesh::{MapSpec, NavMesh, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Open square, uniformly random starts and goals.
    Basic,
    /// Open square, start on one edge, goal on the opposite edge.
    CrossRoad,
    /// Two groups crossing diagonally through a walled center.
    FourWall,
    /// Random rectangles, edge-to-edge trips as in `CrossRoad`.
    RandomObstacle,
    /// Agents on a circle heading for the antipodal point.
    CircleTransport,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Basic,
        ScenarioKind::CrossRoad,
        ScenarioKind::FourWall,
        ScenarioKind::RandomObstacle,
        ScenarioKind::CircleTransport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Basic => "basic",
            ScenarioKind::CrossRoad => "cross_road",
            ScenarioKind::FourWall => "four_wall",
            ScenarioKind::RandomObstacle => "random_obstacle",
            ScenarioKind::CircleTransport => "circle_transport",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or(SimError::Config("unknown scenario kind"))
    }
}

/// Scenario parameters. Fields that do not apply to `kind` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub side: f64,
    pub circle_radius: f64,
    pub obstacle_count: usize,
    pub obstacle_min_size: f64,
    pub obstacle_max_size: f64,
    /// Minimum gap between random obstacles and between them and the walls.
    pub obstacle_clearance: f64,
    /// Side of the corner spawn/goal squares in `FourWall`.
    pub region_size: f64,
    /// Lower bound on `|start - goal|` for randomly drawn trips.
    pub min_goal_distance: f64,
}

impl ScenarioSpec {
    /// Geometry of the reference experiments: a 200 x 200 square, a radius-80
    /// circle, 20 x 20 corner regions.
    pub fn preset(kind: ScenarioKind) -> Self {
        ScenarioSpec {
            kind,
            side: 200.0,
            circle_radius: 80.0,
            obstacle_count: 10,
            obstacle_min_size: 10.0,
            obstacle_max_size: 30.0,
            obstacle_clearance: 8.0,
            region_size: 20.0,
            min_goal_distance: 10.0,
        }
    }

    /// Same kind at a different domain size, with lengths scaled to match.
    pub fn scaled(kind: ScenarioKind, side: f64) -> Self {
        let base = ScenarioSpec::preset(kind);
        let s = side / base.side;
        ScenarioSpec {
            side,
            circle_radius: base.circle_radius * s,
            obstacle_min_size: base.obstacle_min_size * s,
            obstacle_max_size: base.obstacle_max_size * s,
            region_size: base.region_size * s,
            ..base
        }
    }

    /// Agent count used by the reference experiments for this kind.
    pub fn default_agents(&self) -> usize {
        match self.kind {
            ScenarioKind::FourWall => 30,
            ScenarioKind::CircleTransport => 20,
            _ => 80,
        }
    }

    pub fn build_map(&self, seed: u64) -> Result<MapSpec, SimError> {
        let l = self.side;
        if !(l.is_finite() && l > 0.0) {
            return Err(SimError::Config("scenario side must be positive"));
        }
        match self.kind {
            ScenarioKind::Basic | ScenarioKind::CrossRoad | ScenarioKind::CircleTransport => {
                Ok(MapSpec::empty(l))
            }
            ScenarioKind::FourWall => Ok(four_wall_map(l)),
            ScenarioKind::RandomObstacle => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_7073_6565_6421);
                random_rect_map(
                    l,
                    self.obstacle_count,
                    self.obstacle_min_size,
                    self.obstacle_max_size,
                    self.obstacle_clearance,
                    &mut rng,
                )
            }
        }
    }

    /// World configuration with this scenario's map and default parameters.
    pub fn world_config(&self, agent_count: usize, seed: u64) -> Result<WorldConfig, SimError> {
        Ok(WorldConfig::new(self.build_map(seed)?, agent_count, seed))
    }

    /// Draws a (start, goal) pair for agent `id` of `n`. Returns `None` when no
    /// free pair was found within the attempt budget.
    pub(crate) fn sample_trip(
        &self,
        id: usize,
        n: usize,
        config: &WorldConfig,
        mesh: &NavMesh,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec2, Vec2)> {
        let l = config.map.domain_side;
        let m = 2.0 * config.agent_radius;
        let free = |p: Vec2| is_free(p, l, m, config.agent_radius, mesh);
        if self.kind == ScenarioKind::CircleTransport {
            let c = Vec2::new(0.5 * l, 0.5 * l);
            let a = c + Vec2::from_angle(TAU * id as f64 / n as f64) * self.circle_radius;
            let b = c - (a - c);
            return (free(a) && free(b)).then_some((a, b));
        }
        for _ in 0..1000 {
            let (a, b) = match self.kind {
                ScenarioKind::Basic => (uniform_point(rng, m, l - m), uniform_point(rng, m, l - m)),
                ScenarioKind::CrossRoad | ScenarioKind::RandomObstacle => {
                    let edge = rng.gen_range(0..4usize);
                    let u = rng.gen_range(m..l - m);
                    let v = rng.gen_range(m..l - m);
                    match edge {
                        0 => (Vec2::new(u, m), Vec2::new(v, l - m)),
                        1 => (Vec2::new(l - m, u), Vec2::new(m, v)),
                        2 => (Vec2::new(u, l - m), Vec2::new(v, m)),
                        _ => (Vec2::new(m, u), Vec2::new(l - m, v)),
                    }
                }
                ScenarioKind::FourWall => {
                    let r = self.region_size;
                    let high = uniform_point(rng, l - m - r, l - m);
                    let low = uniform_point(rng, m, m + r);
                    if id % 2 == 0 {
                        (high, low)
                    } else {
                        (low, high)
                    }
                }
                ScenarioKind::CircleTransport => unreachable!(),
            };
            if free(a) && free(b) && a.distance(b) >= self.min_goal_distance {
                return Some((a, b));
            }
        }
        None
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec2 {
    Vec2::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

/// Inside the wall margin and clear of every (grown) obstacle.
fn is_free(p: Vec2, side: f64, margin: f64, radius: f64, mesh: &NavMesh) -> bool {
    if p.x < margin || p.y < margin || p.x > side - margin || p.y > side - margin {
        return false;
    }
    mesh.obstacles.iter().all(|poly| {
        !geom::point_in_polygon(p, poly) && geom::distance_to_polygon_boundary(p, poly) >= 0.5 * radius
    })
}

/// Four thin walls on the axes through the center, leaving an open crossing
/// in the middle.
pub fn four_wall_map(side: f64) -> MapSpec {
    let s = side / 200.0;
    let c = 0.5 * side;
    let (half_t, near, far) = (2.0 * s, 10.0 * s, 70.0 * s);
    let len = far - near;
    MapSpec {
        domain_side: side,
        obstacles: alloc::vec![
            Polygon::rect(Vec2::new(c - half_t, c + near), 2.0 * half_t, len),
            Polygon::rect(Vec2::new(c - half_t, c - far), 2.0 * half_t, len),
            Polygon::rect(Vec2::new(c + near, c - half_t), len, 2.0 * half_t),
            Polygon::rect(Vec2::new(c - far, c - half_t), len, 2.0 * half_t),
        ],
    }
}

/// `count` axis-aligned rectangles with sides in `[min_size, max_size]`,
/// pairwise and wall-separated by at least `clearance`.
pub fn random_rect_map(
    side: f64,
    count: usize,
    min_size: f64,
    max_size: f64,
    clearance: f64,
    rng: &mut impl Rng,
) -> Result<MapSpec, SimError> {
    if !(min_size > 0.0 && max_size >= min_size && side > 2.0 * clearance + max_size) {
        return Err(SimError::Config("random obstacle sizes do not fit the domain"));
    }
    let mut rects: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..1000 {
            let w = sample_size(rng, min_size, max_size);
            let h = sample_size(rng, min_size, max_size);
            let x = rng.gen_range(clearance..side - clearance - w);
            let y = rng.gen_range(clearance..side - clearance - h);
            let clash = rects.iter().any(|&(ox, oy, ow, oh)| {
                x < ox + ow + clearance
                    && ox < x + w + clearance
                    && y < oy + oh + clearance
                    && oy < y + h + clearance
            });
            if !clash {
                rects.push((x, y, w, h));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::Config("could not place all random obstacles"));
        }
    }
    Ok(MapSpec {
        domain_side: side,
        obstacles: rects
            .into_iter()
            .map(|(x, y, w, h)| Polygon::rect(Vec2::new(x, y), w, h))
            .collect(),
    })
}

fn sample_size(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Heading drawn uniformly from `[0, 2π)`.
pub(crate) fn random_heading(rng: &mut ChaCha8Rng) -> f64 {
    math::wrap_angle(rng.gen_range(0.0..TAU))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navmesh::build_navmesh;

    #[test]
    fn presets_build_valid_meshes() {
        for kind in ScenarioKind::ALL {
            let spec = ScenarioSpec::preset(kind);
            let map = spec.build_map(3).unwrap();
            let mesh = build_navmesh(&map, 1.0).unwrap();
            assert!(mesh.triangle_count() >= 2, "{kind}");
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ScenarioKind::ALL {
            assert_eq!(kind.name().parse::<ScenarioKind>().unwrap(), kind);
        }
        assert!("maze".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn random_map_respects_clearance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = random_rect_map(100.0, 6, 5.0, 15.0, 4.0, &mut rng).unwrap();
        assert_eq!(map.obstacles.len(), 6);
        map.validate().unwrap();
        build_navmesh(&map, 1.0).unwrap();
    }
}
