//! Range sensing: rays fanned evenly around the heading.

use alloc::vec::Vec;

use crate::geom::{self, Disc, HitKind, HitTarget, RayHit, Segment, Vec2};
use crate::math::TAU;

/// One full sensor sweep. `agent_ids[k]` names the partner ray `k` stopped at.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub rays: Vec<RayHit>,
    pub agent_ids: Vec<Option<usize>>,
}

impl Scan {
    /// Number of distinct partners hit by at least one ray.
    pub fn partners_seen(&self) -> usize {
        let mut ids: Vec<usize> = self.agent_ids.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Casts `count` rays from `origin`, the first along `heading`, each next one
/// `2π / count` further counterclockwise. `partners` are `(id, center)` pairs
/// of discs with radius `radius`.
pub fn sweep(
    origin: Vec2,
    heading: f64,
    count: usize,
    range: f64,
    radius: f64,
    walls: &[Segment],
    partners: &[(usize, Vec2)],
) -> Scan {
    let near_walls: Vec<Segment> = walls
        .iter()
        .filter(|s| s.distance_to(origin) <= range)
        .copied()
        .collect();
    let mut ids = Vec::new();
    let mut discs = Vec::new();
    for &(id, c) in partners {
        if c.distance(origin) <= range + radius {
            ids.push(id);
            discs.push(Disc { center: c, radius });
        }
    }
    let mut rays = Vec::with_capacity(count);
    let mut agent_ids = Vec::with_capacity(count);
    for k in 0..count {
        let dir = Vec2::from_angle(heading + TAU * k as f64 / count as f64);
        let (hit, target) = geom::ray_cast_target(origin, dir, range, &near_walls, &discs)
            .expect("sensor inputs are finite and the range positive");
        rays.push(hit);
        agent_ids.push(match target {
            HitTarget::Disc(i) => Some(ids[i]),
            _ => None,
        });
    }
    Scan { rays, agent_ids }
}

/// Writes `[d / range, agent flag]` per ray into `out`.
pub fn encode_rays(rays: &[RayHit], range: f64, out: &mut [f64]) {
    for (k, hit) in rays.iter().enumerate() {
        out[2 * k] = (hit.distance / range).clamp(0.0, 1.0);
        out[2 * k + 1] = if hit.kind == HitKind::Agent { 1.0 } else { 0.0 };
    }
}
