//! Triangulated free space and triangle-channel search.
//!
//! [`build_navmesh`] runs a constrained Delaunay triangulation over the square
//! domain with every obstacle boundary as a constraint, then drops the
//! triangles inside obstacles. [`astar_channel`] searches the triangle
//! adjacency graph where crossing a triangle costs the distance between the
//! midpoints of its entry and exit edges, guided by the distance from the
//! triangle barycenter to the goal.

mod build;
mod search;

use alloc::vec::Vec;

use thiserror::Error;

use crate::geom::{self, Segment, Vec2};

pub use build::{build_navmesh, inflate_polygon};
pub use search::{astar_channel, channel_waypoints, shortest_length_estimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("domain side must be positive and finite, got {0}")]
    BadDomain(f64),
    #[error("obstacle {obstacle}: {reason}")]
    BadObstacle { obstacle: usize, reason: &'static str },
    #[error("obstacle {obstacle}: vertices {first} and {second} are closer than 1e-9")]
    DuplicateVertex {
        obstacle: usize,
        first: usize,
        second: usize,
    },
    #[error("obstacles {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("obstacle {0} is not contained in the domain")]
    OutsideDomain(usize),
    #[error("triangulation rejected constraint edge {edge} of obstacle {obstacle}")]
    Constraint { obstacle: usize, edge: usize },
    #[error("point ({x}, {y}) is not in free space")]
    Location { x: f64, y: f64 },
    #[error("goal triangle {goal} is unreachable from start triangle {start}")]
    Unreachable { start: usize, goal: usize },
}

/// A simple polygon given by its vertices in order (either orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Polygon { vertices }
    }

    /// Axis-aligned rectangle with lower-left corner `min`.
    pub fn rect(min: Vec2, width: f64, height: f64) -> Self {
        Polygon::new(alloc::vec![
            min,
            Vec2::new(min.x + width, min.y),
            Vec2::new(min.x + width, min.y + height),
            Vec2::new(min.x, min.y + height),
        ])
    }

    pub fn area(&self) -> f64 {
        geom::polygon_area(&self.vertices).abs()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        geom::point_in_polygon(p, &self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// The square domain `[0, side]²` and its obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub domain_side: f64,
    pub obstacles: Vec<Polygon>,
}

impl MapSpec {
    pub fn empty(domain_side: f64) -> Self {
        MapSpec {
            domain_side,
            obstacles: Vec::new(),
        }
    }

    pub fn free_area(&self) -> f64 {
        self.domain_side * self.domain_side - self.obstacles.iter().map(Polygon::area).sum::<f64>()
    }

    /// Obstacle edges plus the four domain walls.
    pub fn segments(&self) -> Vec<Segment> {
        let l = self.domain_side;
        let c = [
            Vec2::new(0.0, 0.0),
            Vec2::new(l, 0.0),
            Vec2::new(l, l),
            Vec2::new(0.0, l),
        ];
        let mut out: Vec<Segment> = (0..4).map(|i| Segment::new(c[i], c[(i + 1) % 4])).collect();
        for poly in &self.obstacles {
            out.extend(poly.edges());
        }
        out
    }

    /// Checks the structural invariants: finite coordinates, non-degenerate
    /// simple polygons, no overlaps, containment in the domain.
    pub fn validate(&self) -> Result<(), MeshError> {
        let l = self.domain_side;
        if !(l.is_finite() && l > 0.0) {
            return Err(MeshError::BadDomain(l));
        }
        for (k, poly) in self.obstacles.iter().enumerate() {
            validate_polygon(k, &poly.vertices)?;
            if poly
                .vertices
                .iter()
                .any(|v| v.x <= 0.0 || v.y <= 0.0 || v.x >= l || v.y >= l)
            {
                return Err(MeshError::OutsideDomain(k));
            }
        }
        check_pairwise_disjoint(self.obstacles.iter().map(|p| p.vertices.as_slice()))
    }
}

pub(crate) fn validate_polygon(k: usize, vs: &[Vec2]) -> Result<(), MeshError> {
    let bad = |reason| MeshError::BadObstacle { obstacle: k, reason };
    if vs.len() < 3 {
        return Err(bad("fewer than 3 vertices"));
    }
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite vertex"));
    }
    let n = vs.len();
    for i in 0..n {
        for j in i + 1..n {
            if vs[i].distance(vs[j]) < 1e-9 {
                return Err(MeshError::DuplicateVertex {
                    obstacle: k,
                    first: i,
                    second: j,
                });
            }
        }
    }
    if geom::polygon_area(vs).abs() < 1e-9 {
        return Err(bad("zero area"));
    }
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if geom::segment_intersection(vs[i], vs[(i + 1) % n], vs[j], vs[(j + 1) % n]).is_some() {
                return Err(bad("self-intersecting"));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_pairwise_disjoint<'a>(
    polys: impl Iterator<Item = &'a [Vec2]> + Clone,
) -> Result<(), MeshError> {
    let list: Vec<&[Vec2]> = polys.collect();
    for a in 0..list.len() {
        for b in a + 1..list.len() {
            let (pa, pb) = (list[a], list[b]);
            let touching = (0..pa.len()).any(|i| {
                (0..pb.len()).any(|j| {
                    geom::segment_intersection(
                        pa[i],
                        pa[(i + 1) % pa.len()],
                        pb[j],
                        pb[(j + 1) % pb.len()],
                    )
                    .is_some()
                })
            });
            if touching
                || geom::point_in_polygon(pa[0], pb)
                || geom::point_in_polygon(pb[0], pa)
            {
                return Err(MeshError::Overlap(a, b));
            }
        }
    }
    Ok(())
}

/// Triangulated free space.
///
/// `adjacency[t][k]` is the triangle across edge `k` of `t`, the edge from
/// vertex `k` to vertex `(k + 1) % 3`. Triangles are counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct NavMesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub adjacency: Vec<[Option<usize>; 3]>,
    pub barycenters: Vec<Vec2>,
    /// Obstacles as triangulated (after inflation), counterclockwise.
    pub obstacles: Vec<Vec<Vec2>>,
    pub domain_side: f64,
}

impl NavMesh {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Endpoints of edge `k` of triangle `t`.
    pub fn edge(&self, t: usize, k: usize) -> (Vec2, Vec2) {
        let tri = self.triangles[t];
        (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]])
    }

    pub fn edge_midpoint(&self, t: usize, k: usize) -> Vec2 {
        let (a, b) = self.edge(t, k);
        a.midpoint(b)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * geom::orient(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Lowest-index triangle containing `p` (closed triangles).
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        if !p.is_finite() {
            return None;
        }
        (0..self.triangles.len()).find(|&t| geom::point_in_triangle(p, self.corners(t)).unwrap_or(false))
    }

    /// [`NavMesh::locate`], falling back to the triangle nearest to `p`.
    pub fn locate_nearest(&self, p: Vec2) -> usize {
        if let Some(t) = self.locate(p) {
            return t;
        }
        let mut best = (f64::INFINITY, 0);
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let d = geom::distance_to_polygon_boundary(p, &[a, b, c]);
            if d < best.0 {
                best = (d, t);
            }
        }
        best.1
    }

    /// Slot of the edge of `t` shared with `neighbor`.
    pub fn shared_edge_slot(&self, t: usize, neighbor: usize) -> Option<usize> {
        self.adjacency[t].iter().position(|&n| n == Some(neighbor))
    }

    /// Whether the straight segment `a→b` avoids every obstacle.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        !self
            .obstacles
            .iter()
            .any(|poly| geom::segment_touches_polygon(a, b, poly))
    }
}

/// Ordered triangles a path crosses and the edges shared between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub triangle_indices: Vec<usize>,
    /// `portals[k]` is the edge shared by triangles `k` and `k + 1`.
    pub portals: Vec<(Vec2, Vec2)>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoints {
    /// Portal midpoints in channel order, then the goal.
    pub points: Vec<Vec2>,
    pub source_channel: Channel,
}
