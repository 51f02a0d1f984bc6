//! Planar geometry primitives: vectors, poses, shapes, penetration and ray queries.
//!
//! All lengths are meters and all angles radians, counterclockwise, with the
//! body frame convention x forward / y left.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or `None` for (near) zero length.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-12).then(|| self * (1.0 / n))
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Planar pose `(x, y, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for Pose {
    fn from(v: [f64; 3]) -> Self {
        Pose::new(v[0], v[1], v[2])
    }
}

impl From<Pose> for [f64; 3] {
    fn from(p: Pose) -> Self {
        [p.x, p.y, p.theta]
    }
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn with_position(&self, p: Vec2) -> Pose {
        Pose::new(p.x, p.y, self.theta)
    }

    /// Body-frame point to world frame.
    pub fn transform(&self, local: Vec2) -> Vec2 {
        local.rotate(self.theta) + self.position()
    }

    /// World-frame point to body frame.
    pub fn inverse_transform(&self, world: Vec2) -> Vec2 {
        (world - self.position()).rotate(-self.theta)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Closed line segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Vec2; 2]", into = "[Vec2; 2]")]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl From<[Vec2; 2]> for Segment {
    fn from(v: [Vec2; 2]) -> Self {
        Segment { a: v[0], b: v[1] }
    }
}

impl From<Segment> for [Vec2; 2] {
    fn from(s: Segment) -> Self {
        [s.a, s.b]
    }
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Parameter in `[0, 1]` of the closest point to `p`.
    pub fn closest_param(&self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let len_sq = d.norm_sq();
        if len_sq <= 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0)
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let t = self.closest_param(p);
        self.a + (self.b - self.a) * t
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_box(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb::new(self.min - Vec2::new(r, r), self.max + Vec2::new(r, r))
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }
}

/// World-frame collision shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle { center: Vec2, radius: f64 },
    /// Convex polygon, counterclockwise vertices.
    Polygon(Vec<Vec2>),
    /// Segment swept by a disc; radius 0 is a bare segment.
    Capsule { seg: Segment, radius: f64 },
}

/// Separation between two shapes: `normal` points from the first shape
/// toward the second; moving the second by `normal * depth` separates them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penetration {
    pub normal: Vec2,
    pub depth: f64,
}

impl Shape {
    pub fn segment(a: Vec2, b: Vec2) -> Shape {
        Shape::Capsule { seg: Segment::new(a, b), radius: 0.0 }
    }

    pub fn aabb(&self) -> Aabb {
        match self {
            Shape::Circle { center, radius } => Aabb::new(*center, *center).inflate(*radius),
            Shape::Polygon(v) => {
                let mut lo = v[0];
                let mut hi = v[0];
                for p in v.iter().skip(1) {
                    lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
                }
                Aabb::new(lo, hi)
            }
            Shape::Capsule { seg, radius } => Aabb::new(
                Vec2::new(seg.a.x.min(seg.b.x), seg.a.y.min(seg.b.y)),
                Vec2::new(seg.a.x.max(seg.b.x), seg.a.y.max(seg.b.y)),
            )
            .inflate(*radius),
        }
    }

    pub fn centroid(&self) -> Vec2 {
        match self {
            Shape::Circle { center, .. } => *center,
            Shape::Polygon(v) => v.iter().fold(Vec2::ZERO, |acc, p| acc + *p) * (1.0 / v.len() as f64),
            Shape::Capsule { seg, .. } => (seg.a + seg.b) * 0.5,
        }
    }

    /// Euclidean distance from `p` to the shape; zero inside.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        match self {
            Shape::Circle { center, radius } => (center.distance(p) - radius).max(0.0),
            Shape::Polygon(v) => {
                if polygon_contains(v, p) {
                    0.0
                } else {
                    polygon_edges(v)
                        .map(|e| e.distance_to(p))
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Shape::Capsule { seg, radius } => (seg.distance_to(p) - radius).max(0.0),
        }
    }

    /// Translate the shape by `d`.
    pub fn translated(&self, d: Vec2) -> Shape {
        match self {
            Shape::Circle { center, radius } => Shape::Circle { center: *center + d, radius: *radius },
            Shape::Polygon(v) => Shape::Polygon(v.iter().map(|p| *p + d).collect()),
            Shape::Capsule { seg, radius } => Shape::Capsule {
                seg: Segment::new(seg.a + d, seg.b + d),
                radius: *radius,
            },
        }
    }

    /// Projection interval onto a unit axis.
    fn project(&self, axis: Vec2) -> (f64, f64) {
        match self {
            Shape::Circle { center, radius } => {
                let c = center.dot(axis);
                (c - radius, c + radius)
            }
            Shape::Polygon(v) => v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let d = p.dot(axis);
                (lo.min(d), hi.max(d))
            }),
            Shape::Capsule { seg, radius } => {
                let a = seg.a.dot(axis);
                let b = seg.b.dot(axis);
                (a.min(b) - radius, a.max(b) + radius)
            }
        }
    }

    fn sat_axes(&self, out: &mut Vec<Vec2>) {
        match self {
            Shape::Circle { .. } => {}
            Shape::Polygon(v) => {
                for e in polygon_edges(v) {
                    if let Some(n) = (e.b - e.a).perp().normalized() {
                        out.push(n);
                    }
                }
            }
            Shape::Capsule { seg, .. } => {
                if let Some(d) = (seg.b - seg.a).normalized() {
                    out.push(d.perp());
                    out.push(d);
                }
            }
        }
    }
}

pub(crate) fn polygon_edges(v: &[Vec2]) -> impl Iterator<Item = Segment> + '_ {
    (0..v.len()).map(move |i| Segment::new(v[i], v[(i + 1) % v.len()]))
}

/// Point-in-convex-polygon (counterclockwise vertices, boundary inclusive).
pub fn polygon_contains(v: &[Vec2], p: Vec2) -> bool {
    if v.len() < 3 {
        return false;
    }
    polygon_edges(v).all(|e| (e.b - e.a).cross(p - e.a) >= 0.0)
}

/// Signed area; positive for counterclockwise vertex order.
pub fn polygon_signed_area(v: &[Vec2]) -> f64 {
    polygon_edges(v).map(|e| e.a.cross(e.b)).sum::<f64>() * 0.5
}

fn circle_vs_polygon(center: Vec2, radius: f64, v: &[Vec2]) -> Option<Penetration> {
    // normal from circle to polygon
    let inside = polygon_contains(v, center);
    let mut best: Option<(f64, Vec2, Segment)> = None;
    for e in polygon_edges(v) {
        let q = e.closest_point(center);
        let d = q.distance(center);
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, q, e));
        }
    }
    let (dist, q, edge) = best?;
    if inside {
        // outward edge normal of the nearest edge; circle must move against it
        let out = (edge.b - edge.a).perp().normalized()?;
        let outward = -out; // ccw polygon: perp points inward
        Some(Penetration { normal: -outward, depth: radius + dist })
    } else {
        if dist >= radius {
            return None;
        }
        let n = (q - center).normalized().or_else(|| (edge.b - edge.a).perp().normalized().map(|p| -p))?;
        Some(Penetration { normal: n, depth: radius - dist })
    }
}

fn sat(a: &Shape, b: &Shape) -> Option<Penetration> {
    let mut axes = Vec::with_capacity(12);
    a.sat_axes(&mut axes);
    b.sat_axes(&mut axes);
    let mut best: Option<Penetration> = None;
    for axis in axes {
        let (amin, amax) = a.project(axis);
        let (bmin, bmax) = b.project(axis);
        let fwd = amax - bmin; // b sits on +axis side
        let back = bmax - amin; // b sits on -axis side
        if fwd <= 0.0 || back <= 0.0 {
            return None;
        }
        let (depth, normal) = if fwd < back { (fwd, axis) } else { (back, -axis) };
        if best.is_none_or(|p| depth < p.depth) {
            best = Some(Penetration { normal, depth });
        }
    }
    best
}

/// Penetration between two shapes, `None` when disjoint or merely touching.
pub fn penetration(a: &Shape, b: &Shape) -> Option<Penetration> {
    use Shape::*;
    match (a, b) {
        (Circle { center: ca, radius: ra }, Circle { center: cb, radius: rb }) => {
            let d = *cb - *ca;
            let dist = d.norm();
            let depth = ra + rb - dist;
            if depth <= 0.0 {
                return None;
            }
            let normal = d.normalized().unwrap_or(Vec2::new(1.0, 0.0));
            Some(Penetration { normal, depth })
        }
        (Circle { center, radius }, Capsule { seg, radius: rc }) => {
            let q = seg.closest_point(*center);
            let d = q - *center;
            let dist = d.norm();
            let depth = radius + rc - dist;
            if depth <= 0.0 {
                return None;
            }
            let normal = d
                .normalized()
                .or_else(|| (seg.b - seg.a).perp().normalized())
                .unwrap_or(Vec2::new(1.0, 0.0));
            Some(Penetration { normal, depth })
        }
        (Capsule { .. }, Circle { .. }) => penetration(b, a).map(flip),
        (Circle { center, radius }, Polygon(v)) => circle_vs_polygon(*center, *radius, v),
        (Polygon(_), Circle { .. }) => penetration(b, a).map(flip),
        _ => sat(a, b),
    }
}

fn flip(p: Penetration) -> Penetration {
    Penetration { normal: -p.normal, depth: p.depth }
}

/// Distance along a unit-direction ray to the first intersection with `shape`,
/// ignoring hits closer than `min_t`.
pub fn ray_cast(origin: Vec2, dir: Vec2, shape: &Shape, min_t: f64) -> Option<f64> {
    match shape {
        Shape::Circle { center, radius } => ray_circle(origin, dir, *center, *radius, min_t),
        Shape::Polygon(v) => polygon_edges(v)
            .filter_map(|e| ray_segment(origin, dir, &e, min_t))
            .reduce(f64::min),
        // leaf thickness is ignored for sensing
        Shape::Capsule { seg, .. } => ray_segment(origin, dir, seg, min_t),
    }
}

pub fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment, min_t: f64) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = seg.a - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    (t >= min_t && (-1e-12..=1.0 + 1e-12).contains(&u)).then_some(t)
}

pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64, min_t: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    let t1 = -b + s;
    if t0 >= min_t {
        Some(t0)
    } else if t1 >= min_t {
        Some(t1)
    } else {
        None
    }
}
