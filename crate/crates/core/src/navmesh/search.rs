use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{Channel, MeshError, NavMesh, Waypoints};
use crate::geom::Vec2;

/// Entry slot used for the start triangle, which is not entered via an edge.
const NO_ENTRY: usize = 3;

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    depth: u32,
    tri: usize,
    slot: usize,
}

impl Open {
    fn key(&self) -> (f64, u32, usize, usize) {
        (self.f, self.depth, self.tri, self.slot)
    }
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then(b.2.cmp(&a.2))
            .then(b.3.cmp(&a.3))
    }
}

fn locate(mesh: &NavMesh, p: Vec2) -> Result<usize, MeshError> {
    mesh.locate(p).ok_or(MeshError::Location { x: p.x, y: p.y })
}

/// Cheapest triangle channel from the triangle holding `start` to the one
/// holding `goal`.
///
/// Crossing a triangle costs the distance between the midpoints of the edge
/// it was entered through and the edge it is left through; the first and
/// last triangles have only one of the two and cost nothing. Nodes are
/// expanded in order of `g + h` with `h` the barycenter-to-goal distance and
/// ties broken by (channel length, triangle index). Because `h` can
/// overestimate, expansion continues after the first goal is reached until no
/// open node can beat it, so the returned cost is always optimal.
pub fn astar_channel(mesh: &NavMesh, start: Vec2, goal: Vec2) -> Result<Channel, MeshError> {
    let start_t = locate(mesh, start)?;
    let goal_t = locate(mesh, goal)?;
    if start_t == goal_t {
        return Ok(Channel {
            triangle_indices: vec![start_t],
            portals: Vec::new(),
            total_cost: 0.0,
        });
    }

    let states = mesh.triangle_count() * 4;
    let mut best_g = vec![f64::INFINITY; states];
    let mut depth = vec![u32::MAX; states];
    let mut parent: Vec<Option<usize>> = vec![None; states];
    let h = |t: usize| mesh.barycenters[t].distance(goal);

    let s0 = start_t * 4 + NO_ENTRY;
    best_g[s0] = 0.0;
    depth[s0] = 1;
    let mut open = BinaryHeap::new();
    open.push(Open {
        f: h(start_t),
        g: 0.0,
        depth: 1,
        tri: start_t,
        slot: NO_ENTRY,
    });

    let mut incumbent: Option<(f64, u32, usize)> = None;
    let mut first_goal_cost: Option<f64> = None;
    while let Some(node) = open.pop() {
        let state = node.tri * 4 + node.slot;
        if node.g > best_g[state] || (node.g == best_g[state] && node.depth > depth[state]) {
            continue;
        }
        if let Some((cost, d, _)) = incumbent {
            if node.g > cost || (node.g == cost && node.depth >= d) {
                continue;
            }
        }
        if node.tri == goal_t {
            first_goal_cost.get_or_insert(node.g);
            incumbent = Some((node.g, node.depth, state));
            continue;
        }
        for out in 0..3 {
            if out == node.slot {
                continue;
            }
            let Some(next) = mesh.adjacency[node.tri][out] else {
                continue;
            };
            let step = if node.slot == NO_ENTRY {
                0.0
            } else {
                mesh.edge_midpoint(node.tri, node.slot)
                    .distance(mesh.edge_midpoint(node.tri, out))
            };
            let g = node.g + step;
            let slot = mesh
                .shared_edge_slot(next, node.tri)
                .expect("adjacency is symmetric");
            let s = next * 4 + slot;
            let d = node.depth + 1;
            if g < best_g[s] || (g == best_g[s] && d < depth[s]) {
                best_g[s] = g;
                depth[s] = d;
                parent[s] = Some(state);
                open.push(Open {
                    f: g + h(next),
                    g,
                    depth: d,
                    tri: next,
                    slot,
                });
            }
        }
    }

    let Some((cost, _, last)) = incumbent else {
        return Err(MeshError::Unreachable {
            start: start_t,
            goal: goal_t,
        });
    };
    if let Some(first) = first_goal_cost {
        if first > cost {
            log::debug!("heuristic-first channel cost {first} improved to {cost}");
        }
    }

    let mut triangle_indices = Vec::new();
    let mut cursor = Some(last);
    while let Some(s) = cursor {
        triangle_indices.push(s / 4);
        cursor = parent[s];
    }
    triangle_indices.reverse();
    let portals = triangle_indices
        .windows(2)
        .map(|w| {
            let slot = mesh.shared_edge_slot(w[0], w[1]).expect("consecutive triangles adjacent");
            mesh.edge(w[0], slot)
        })
        .collect();
    Ok(Channel {
        triangle_indices,
        portals,
        total_cost: cost,
    })
}

/// Portal midpoints of `channel` followed by `goal`.
pub fn channel_waypoints(channel: &Channel, _start: Vec2, goal: Vec2) -> Waypoints {
    let mut points: Vec<Vec2> = channel.portals.iter().map(|&(a, b)| a.midpoint(b)).collect();
    points.push(goal);
    Waypoints {
        points,
        source_channel: channel.clone(),
    }
}

/// Planner path length from `start` to `goal`: the straight distance when the
/// segment between them is obstacle-free, otherwise the length of the
/// polyline through the channel's portal midpoints.
pub fn shortest_length_estimate(mesh: &NavMesh, start: Vec2, goal: Vec2) -> Result<f64, MeshError> {
    locate(mesh, start)?;
    locate(mesh, goal)?;
    if start == goal {
        return Ok(0.0);
    }
    if mesh.segment_clear(start, goal) {
        return Ok(start.distance(goal));
    }
    let channel = astar_channel(mesh, start, goal)?;
    let wp = channel_waypoints(&channel, start, goal);
    Ok(polyline_length(start, &wp.points))
}

pub(crate) fn polyline_length(start: Vec2, points: &[Vec2]) -> f64 {
    let mut prev = start;
    let mut total = 0.0;
    for &p in points {
        total += prev.distance(p);
        prev = p;
    }
    total
}
