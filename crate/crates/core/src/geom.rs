//! 2D primitives: vectors, poses, segment/triangle tests and ray casting
//! against static segments and agent discs.
//!
//! Everything is `f64`; boundary decisions use a `1e-9` length tolerance.
//! Segments and triangles are closed sets.

use core::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::math;

/// Length tolerance used by boundary tests.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeomError {
    #[error("non-finite geometry input")]
    NonFinite,
    #[error("degenerate triangle (zero signed area)")]
    DegenerateTriangle,
    #[error("ray direction must have unit norm, got {0}")]
    DirectionNotUnit(f64),
    #[error("ray range must be positive, got {0}")]
    BadRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(x: f64, y: f64) -> Result<Self, GeomError> {
        let v = Vec2 { x, y };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GeomError::NonFinite)
        }
    }

    /// Unit vector at `angle` radians counterclockwise from +x.
    #[inline]
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(math::cos(angle), math::sin(angle))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    #[inline]
    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Angle of the vector in `[0, 2π)`.
    #[inline]
    pub fn angle(self) -> f64 {
        math::wrap_angle(math::atan2(self.y, self.x))
    }

    #[inline]
    pub fn midpoint(self, o: Vec2) -> Vec2 {
        Vec2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    /// Rotates counterclockwise by `angle`.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position plus heading. Heading is counterclockwise from +x and always
/// kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose {
            position,
            heading: math::wrap_angle(heading),
        }
    }

    #[inline]
    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, heading: f64) {
        self.heading = math::wrap_angle(heading);
    }

    /// Unit vector along the heading.
    #[inline]
    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    /// Euclidean distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        if len_sq == 0.0 {
            return p.distance(self.a);
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        p.distance(self.a + ab * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HitKind {
    StaticObstacle,
    Agent,
    None,
}

/// Result of a single ray. `kind == None` exactly when `distance` equals the
/// casting range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub kind: HitKind,
}

/// Which object a ray stopped at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitTarget {
    Segment(usize),
    Disc(usize),
    Nothing,
}

/// Nearest hit along the ray `origin + t·direction`, `t ∈ [0, max_range]`.
pub fn ray_cast(
    origin: Vec2,
    direction: Vec2,
    max_range: f64,
    obstacles: &[Segment],
    agents: &[Disc],
) -> Result<RayHit, GeomError> {
    ray_cast_target(origin, direction, max_range, obstacles, agents).map(|(hit, _)| hit)
}

/// Like [`ray_cast`], also reporting the index of the object hit.
pub fn ray_cast_target(
    origin: Vec2,
    direction: Vec2,
    max_range: f64,
    obstacles: &[Segment],
    agents: &[Disc],
) -> Result<(RayHit, HitTarget), GeomError> {
    if !origin.is_finite() || !direction.is_finite() || !max_range.is_finite() {
        return Err(GeomError::NonFinite);
    }
    if max_range <= 0.0 {
        return Err(GeomError::BadRange(max_range));
    }
    let n = direction.norm();
    if (n - 1.0).abs() > 1e-6 {
        return Err(GeomError::DirectionNotUnit(n));
    }
    let mut best = max_range;
    let mut target = HitTarget::Nothing;
    for (i, seg) in obstacles.iter().enumerate() {
        if !seg.a.is_finite() || !seg.b.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if let Some(t) = ray_segment(origin, direction, seg) {
            if t < best {
                best = t;
                target = HitTarget::Segment(i);
            }
        }
    }
    for (i, disc) in agents.iter().enumerate() {
        if !disc.center.is_finite() || !disc.radius.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if let Some(t) = ray_disc(origin, direction, disc) {
            if t < best {
                best = t;
                target = HitTarget::Disc(i);
            }
        }
    }
    let kind = match target {
        HitTarget::Segment(_) => HitKind::StaticObstacle,
        HitTarget::Disc(_) => HitKind::Agent,
        HitTarget::Nothing => HitKind::None,
    };
    Ok((RayHit { distance: best, kind }, target))
}

/// Ray parameter of the first point of `seg` on the ray, if any.
fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    let w = seg.a - origin;
    let scale = e.norm().max(1.0);
    if denom.abs() <= 1e-12 * scale {
        // parallel: only a collinear segment can be hit
        if w.cross(dir).abs() > EPS * scale {
            return None;
        }
        let ta = (seg.a - origin).dot(dir);
        let tb = (seg.b - origin).dot(dir);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        if hi < 0.0 {
            return None;
        }
        return Some(lo.max(0.0));
    }
    let t = w.cross(e) / denom;
    let s = w.cross(dir) / denom;
    let s_tol = EPS / e.norm().max(EPS);
    if t >= -EPS && s >= -s_tol && s <= 1.0 + s_tol {
        Some(t.max(0.0))
    } else {
        None
    }
}

/// Ray parameter of the entry point into `disc`; zero if the origin is inside.
fn ray_disc(origin: Vec2, dir: Vec2, disc: &Disc) -> Option<f64> {
    let oc = origin - disc.center;
    let c = oc.norm_sq() - disc.radius * disc.radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = dir.dot(oc);
    if b > 0.0 {
        // moving away from a disc that does not contain the origin
        return None;
    }
    let disc_val = b * b - c;
    if disc_val < 0.0 {
        return None;
    }
    Some(-b - math::sqrt(disc_val))
}

/// Intersection of the closed segments `a1a2` and `b1b2`.
///
/// Collinear overlaps return the overlap endpoint nearest to `a1`.
pub fn segment_intersection(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> Option<Vec2> {
    let r = a2 - a1;
    let s = b2 - b1;
    let denom = r.cross(s);
    let qp = b1 - a1;
    let scale = r.norm().max(s.norm()).max(1.0);
    if denom.abs() <= 1e-12 * scale * scale {
        if qp.cross(r).abs() > EPS * scale {
            return None;
        }
        // collinear: project b onto a's parameter line
        let rr = r.norm_sq();
        if rr == 0.0 {
            // a is a point
            let ss = s.norm_sq();
            if ss == 0.0 {
                return if a1.distance(b1) <= EPS { Some(a1) } else { None };
            }
            let t = (a1 - b1).dot(s) / ss;
            return if (-EPS..=1.0 + EPS).contains(&t) {
                Some(a1)
            } else {
                None
            };
        }
        let t0 = qp.dot(r) / rr;
        let t1 = (b2 - a1).dot(r) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let tol = EPS / math::sqrt(rr);
        if hi < -tol || lo > 1.0 + tol {
            return None;
        }
        let t = lo.max(0.0);
        return Some(a1 + r * t);
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let tol_t = EPS / r.norm().max(EPS);
    let tol_u = EPS / s.norm().max(EPS);
    if t >= -tol_t && t <= 1.0 + tol_t && u >= -tol_u && u <= 1.0 + tol_u {
        Some(a1 + r * t.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Twice the signed area of `abc` (positive when counterclockwise).
#[inline]
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Closed point-in-triangle test.
pub fn point_in_triangle(p: Vec2, tri: [Vec2; 3]) -> Result<bool, GeomError> {
    let [a, b, c] = tri;
    if !p.is_finite() || !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(GeomError::NonFinite);
    }
    let area2 = orient(a, b, c);
    if area2.abs() <= EPS * EPS {
        return Err(GeomError::DegenerateTriangle);
    }
    let sign = area2.signum();
    for (u, v) in [(a, b), (b, c), (c, a)] {
        let len = u.distance(v);
        // signed distance of p from the edge line, positive inside
        let d = sign * orient(u, v, p) / len;
        if d < -EPS {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Even-odd point-in-polygon test (boundary points may go either way).
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let x = pj.x + (p.y - pj.y) * (pi.x - pj.x) / (pi.y - pj.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Signed area of a simple polygon (positive when counterclockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut sum = 0.0;
    for i in 0..n {
        sum += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * sum
}

/// Distance from `p` to the boundary of `poly`.
pub fn distance_to_polygon_boundary(p: Vec2, poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| Segment::new(poly[i], poly[(i + 1) % n]).distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

/// Whether the closed segment `a→b` touches the closed polygon `poly`.
pub fn segment_touches_polygon(a: Vec2, b: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        if segment_intersection(a, b, poly[i], poly[(i + 1) % n]).is_some() {
            return true;
        }
    }
    point_in_polygon(a, poly) || point_in_polygon(b, poly)
}
