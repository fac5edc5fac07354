use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use spade::handles::FixedVertexHandle;
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{check_pairwise_disjoint, validate_polygon, MapSpec, MeshError, NavMesh};
use crate::geom::{self, Vec2};

/// Offsets every edge of `poly` outward by `margin`, joining neighbouring
/// offset edges at their intersection (mitered corners). Returns the polygon
/// counterclockwise.
pub fn inflate_polygon(poly: &[Vec2], margin: f64) -> Vec<Vec2> {
    let mut ccw: Vec<Vec2> = poly.to_vec();
    if geom::polygon_area(&ccw) < 0.0 {
        ccw.reverse();
    }
    if margin == 0.0 {
        return ccw;
    }
    let n = ccw.len();
    let normal = |i: usize| {
        let e = ccw[(i + 1) % n] - ccw[i];
        let len = e.norm();
        Vec2::new(e.y / len, -e.x / len)
    };
    (0..n)
        .map(|i| {
            let n_prev = normal((i + n - 1) % n);
            let n_next = normal(i);
            let denom = 1.0 + n_prev.dot(n_next);
            ccw[i] + (n_prev + n_next) * (margin / denom)
        })
        .collect()
}

/// Constrained Delaunay triangulation of the free space of `map`, with each
/// obstacle first grown by `inflation` (use the agent radius so that disc
/// agents can follow any path in the mesh; `0` keeps the raw geometry).
pub fn build_navmesh(map: &MapSpec, inflation: f64) -> Result<NavMesh, MeshError> {
    map.validate()?;
    let l = map.domain_side;
    let mut grown = Vec::with_capacity(map.obstacles.len());
    for (k, poly) in map.obstacles.iter().enumerate() {
        let g = inflate_polygon(&poly.vertices, inflation);
        validate_polygon(k, &g)?;
        if geom::polygon_area(&g) <= 0.0 {
            return Err(MeshError::BadObstacle {
                obstacle: k,
                reason: "inflation inverted the polygon",
            });
        }
        if g.iter().any(|v| v.x <= 0.0 || v.y <= 0.0 || v.x >= l || v.y >= l) {
            return Err(MeshError::OutsideDomain(k));
        }
        grown.push(g);
    }
    check_pairwise_disjoint(grown.iter().map(|g| g.as_slice()))?;

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Vec2, k: usize| {
        cdt.insert(Point2::new(p.x, p.y)).map_err(|_| MeshError::BadObstacle {
            obstacle: k,
            reason: "vertex rejected by triangulation",
        })
    };
    let corners = [
        Vec2::new(0.0, 0.0),
        Vec2::new(l, 0.0),
        Vec2::new(l, l),
        Vec2::new(0.0, l),
    ];
    let mut corner_handles = Vec::with_capacity(4);
    for c in corners {
        corner_handles.push(insert(&mut cdt, c, usize::MAX)?);
    }
    let mut obstacle_handles: Vec<Vec<FixedVertexHandle>> = Vec::with_capacity(grown.len());
    for (k, g) in grown.iter().enumerate() {
        let mut hs = Vec::with_capacity(g.len());
        for &p in g {
            hs.push(insert(&mut cdt, p, k)?);
        }
        obstacle_handles.push(hs);
    }
    if cdt.num_vertices() != 4 + grown.iter().map(Vec::len).sum::<usize>() {
        return Err(MeshError::BadObstacle {
            obstacle: usize::MAX,
            reason: "vertices merged during triangulation",
        });
    }
    for i in 0..4 {
        cdt.add_constraint(corner_handles[i], corner_handles[(i + 1) % 4]);
    }
    for (k, hs) in obstacle_handles.iter().enumerate() {
        let n = hs.len();
        for i in 0..n {
            let (a, b) = (hs[i], hs[(i + 1) % n]);
            if !cdt.can_add_constraint(a, b) {
                return Err(MeshError::Constraint { obstacle: k, edge: i });
            }
            cdt.add_constraint(a, b);
        }
    }

    let vertices: Vec<Vec2> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            Vec2::new(p.x, p.y)
        })
        .collect();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        let idx = face.vertices().map(|v| v.fix().index());
        let [a, b, c] = idx.map(|i| vertices[i]);
        let centroid = Vec2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        if grown.iter().any(|g| geom::point_in_polygon(centroid, g)) {
            continue;
        }
        let tri = if geom::orient(a, b, c) > 0.0 {
            idx
        } else {
            [idx[0], idx[2], idx[1]]
        };
        triangles.push(tri);
    }

    let mut edge_owner: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut adjacency = alloc::vec![[None; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (tri[k], tri[(k + 1) % 3]);
            let key = (u.min(v), u.max(v));
            if let Some((other, slot)) = edge_owner.insert(key, (t, k)) {
                adjacency[t][k] = Some(other);
                let row: &mut [Option<usize>; 3] = &mut adjacency[other];
                row[slot] = Some(t);
            }
        }
    }
    let barycenters = triangles
        .iter()
        .map(|tri| {
            let [a, b, c] = tri.map(|i| vertices[i]);
            Vec2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
        })
        .collect();

    Ok(NavMesh {
        vertices,
        triangles,
        adjacency,
        barycenters,
        obstacles: grown,
        domain_side: l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navmesh::Polygon;
    use alloc::vec;

    #[test]
    fn empty_square_has_two_triangles() {
        let mesh = build_navmesh(&MapSpec::empty(10.0), 0.0).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.triangle_count(), 2);
        assert!((mesh.total_area() - 100.0).abs() < 1e-9);
        let shared: usize = mesh.adjacency.iter().flatten().filter(|n| n.is_some()).count();
        assert_eq!(shared, 2);
    }

    #[test]
    fn centered_hole_is_excluded() {
        let map = MapSpec {
            domain_side: 10.0,
            obstacles: vec![Polygon::rect(Vec2::new(4.0, 4.0), 2.0, 2.0)],
        };
        let mesh = build_navmesh(&map, 0.0).unwrap();
        assert!((mesh.total_area() - 96.0).abs() < 1e-6 * 96.0);
        for t in 0..mesh.triangle_count() {
            assert!(mesh.triangle_area(t) > 0.0);
            assert!(!map.obstacles[0].contains(mesh.barycenters[t]));
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        let map = MapSpec {
            domain_side: 30.0,
            obstacles: vec![
                Polygon::rect(Vec2::new(4.0, 4.0), 5.0, 2.0),
                Polygon::rect(Vec2::new(15.0, 10.0), 3.0, 8.0),
            ],
        };
        let mesh = build_navmesh(&map, 1.0).unwrap();
        for t in 0..mesh.triangle_count() {
            for k in 0..3 {
                if let Some(n) = mesh.adjacency[t][k] {
                    let back = mesh.shared_edge_slot(n, t).unwrap();
                    let (a, b) = mesh.edge(t, k);
                    let (c, d) = mesh.edge(n, back);
                    assert_eq!((a, b), (d, c));
                }
            }
        }
    }

    #[test]
    fn inflation_grows_rectangle_by_margin() {
        let sq = Polygon::rect(Vec2::new(1.0, 1.0), 2.0, 2.0);
        let g = inflate_polygon(&sq.vertices, 0.5);
        assert_eq!(g[0], Vec2::new(0.5, 0.5));
        assert_eq!(g[2], Vec2::new(3.5, 3.5));
        let g = inflate_polygon(&[sq.vertices[3], sq.vertices[2], sq.vertices[1], sq.vertices[0]], 0.5);
        assert!((geom::polygon_area(&g) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_named() {
        let map = MapSpec {
            domain_side: 10.0,
            obstacles: vec![Polygon::new(vec![
                Vec2::new(1.0, 1.0),
                Vec2::new(2.0, 2.0),
                Vec2::new(3.0, 3.0),
            ])],
        };
        assert_eq!(
            build_navmesh(&map, 0.0),
            Err(MeshError::BadObstacle { obstacle: 0, reason: "zero area" })
        );
        let map = MapSpec {
            domain_side: 10.0,
            obstacles: vec![Polygon::new(vec![
                Vec2::new(1.0, 1.0),
                Vec2::new(1.0 + 1e-12, 1.0),
                Vec2::new(3.0, 3.0),
                Vec2::new(1.0, 3.0),
            ])],
        };
        assert!(matches!(
            build_navmesh(&map, 0.0),
            Err(MeshError::DuplicateVertex { obstacle: 0, first: 0, second: 1 })
        ));
        let map = MapSpec {
            domain_side: 10.0,
            obstacles: vec![
                Polygon::rect(Vec2::new(1.0, 1.0), 3.0, 3.0),
                Polygon::rect(Vec2::new(2.0, 2.0), 3.0, 3.0),
            ],
        };
        assert_eq!(build_navmesh(&map, 0.0), Err(MeshError::Overlap(0, 1)));
        // fine raw, but the grown copies touch
        let map = MapSpec {
            domain_side: 10.0,
            obstacles: vec![
                Polygon::rect(Vec2::new(2.0, 2.0), 2.0, 2.0),
                Polygon::rect(Vec2::new(4.5, 2.0), 2.0, 2.0),
            ],
        };
        assert!(build_navmesh(&map, 0.0).is_ok());
        assert_eq!(build_navmesh(&map, 1.0), Err(MeshError::Overlap(0, 1)));
        assert_eq!(
            build_navmesh(&MapSpec::empty(-1.0), 0.0),
            Err(MeshError::BadDomain(-1.0))
        );
    }
}
