//! Bounded domains in one and two dimensions: containment, distance to the
//! boundary, first boundary hit along a ray, and star-shaped visibility.
//!
//! One-dimensional domains (intervals) use the `x` component of [`Vec2`] and
//! ignore `y`; their only directions are ±e₁.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Point on the real line.
    pub fn on_line(x: T) -> Self {
        Self::new(x, T::zero())
    }

    pub fn from_angle(theta: T) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("interval requires a < b (got a={a}, b={b})")]
    EmptyInterval { a: f64, b: f64 },
    #[error("disk radius must be positive (got {0})")]
    NonPositiveRadius(f64),
    #[error("polygon needs at least 3 vertices (got {0})")]
    TooFewVertices(usize),
    #[error("polygon edge {0} has zero length")]
    ZeroLengthEdge(usize),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("polygon vertices must be in counterclockwise order")]
    Clockwise,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point is not in the open interior of the domain")]
    NotInterior,
    #[error("direction or velocity must be nonzero")]
    ZeroDirection,
    #[error("ray from an interior point found no boundary crossing")]
    NoExit,
}

#[derive(Debug, Error)]
pub enum PolygonFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid polygon: {0}")]
    Invalid(#[from] GeometryError),
    #[error("cannot read polygon file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind<T> {
    Interval { a: T, b: T },
    Disk { center: Vec2<T>, radius: T },
    Polygon { vertices: Vec<Vec2<T>> },
}

/// First boundary point hit along a ray and its distance from the origin of the ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit<T> {
    pub point: Vec2<T>,
    pub distance: T,
}

/// A validated bounded domain Ω. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec<T> {
    kind: DomainKind<T>,
}

impl<T: Scalar> DomainSpec<T> {
    pub fn interval(a: T, b: T) -> Result<Self, GeometryError> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if a >= b {
            return Err(GeometryError::EmptyInterval {
                a: a.to_f64().unwrap(),
                b: b.to_f64().unwrap(),
            });
        }
        Ok(Self {
            kind: DomainKind::Interval { a, b },
        })
    }

    pub fn disk(center: Vec2<T>, radius: T) -> Result<Self, GeometryError> {
        if !(center.is_finite() && radius.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if radius <= T::zero() {
            return Err(GeometryError::NonPositiveRadius(radius.to_f64().unwrap()));
        }
        Ok(Self {
            kind: DomainKind::Disk { center, radius },
        })
    }

    pub fn unit_disk() -> Self {
        Self::disk(Vec2::zero(), T::one()).unwrap()
    }

    /// Simple, counterclockwise polygon without holes.
    pub fn polygon(vertices: Vec<Vec2<T>>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let tol = T::geo_tol();
        for i in 0..n {
            if (vertices[(i + 1) % n] - vertices[i]).norm() <= tol {
                return Err(GeometryError::ZeroLengthEdge(i));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        if signed_area(&vertices) <= T::zero() {
            return Err(GeometryError::Clockwise);
        }
        Ok(Self {
            kind: DomainKind::Polygon { vertices },
        })
    }

    /// The L-shaped hexagon (0,0),(2,0),(2,1),(1,1),(1,2),(0,2) with its reflex corner at (1,1).
    pub fn l_shape() -> Self {
        let v = |x: f64, y: f64| Vec2::new(lit(x), lit(y));
        Self::polygon(vec![
            v(0.0, 0.0),
            v(2.0, 0.0),
            v(2.0, 1.0),
            v(1.0, 1.0),
            v(1.0, 2.0),
            v(0.0, 2.0),
        ])
        .unwrap()
    }

    pub fn kind(&self) -> &DomainKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn is_convex(&self) -> bool {
        match &self.kind {
            DomainKind::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    (b - a).cross(c - b) >= T::zero()
                })
            }
            _ => true,
        }
    }

    /// Axis-aligned bounding box as (lower corner, upper corner). In 1D the y-extent is zero.
    pub fn bounding_box(&self) -> (Vec2<T>, Vec2<T>) {
        match &self.kind {
            DomainKind::Interval { a, b } => (Vec2::on_line(*a), Vec2::on_line(*b)),
            DomainKind::Disk { center, radius } => (
                *center - Vec2::new(*radius, *radius),
                *center + Vec2::new(*radius, *radius),
            ),
            DomainKind::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> T {
        match &self.kind {
            DomainKind::Interval { a, b } => *b - *a,
            DomainKind::Disk { radius, .. } => *radius + *radius,
            DomainKind::Polygon { vertices } => {
                let mut d = T::zero();
                for p in vertices {
                    for q in vertices {
                        d = d.max((*p - *q).norm());
                    }
                }
                d
            }
        }
    }

    /// Lebesgue measure of Ω (length or area).
    pub fn measure(&self) -> T {
        match &self.kind {
            DomainKind::Interval { a, b } => *b - *a,
            DomainKind::Disk { radius, .. } => T::PI() * *radius * *radius,
            DomainKind::Polygon { vertices } => signed_area(vertices),
        }
    }

    /// Radius of the largest inscribed ball; exact for intervals and disks,
    /// a 128×128 grid search for polygons.
    pub fn inradius(&self) -> T {
        match &self.kind {
            DomainKind::Interval { a, b } => (*b - *a) * lit(0.5),
            DomainKind::Disk { radius, .. } => *radius,
            DomainKind::Polygon { .. } => {
                let (lo, hi) = self.bounding_box();
                let n = 128;
                let mut best = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        let fx = lit::<T>((i as f64 + 0.5) / n as f64);
                        let fy = lit::<T>((j as f64 + 0.5) / n as f64);
                        let p = Vec2::new(lo.x + (hi.x - lo.x) * fx, lo.y + (hi.y - lo.y) * fy);
                        if let Ok(d) = self.boundary_distance(p) {
                            best = best.max(d);
                        }
                    }
                }
                best
            }
        }
    }

    /// True iff `x` lies in the open interior at distance more than the
    /// geometric tolerance from ∂Ω.
    pub fn contains(&self, x: Vec2<T>) -> bool {
        if !x.is_finite() {
            return false;
        }
        let tol = T::geo_tol();
        match &self.kind {
            DomainKind::Interval { a, b } => x.x > *a + tol && x.x < *b - tol,
            DomainKind::Disk { center, radius } => (x - *center).norm() < *radius - tol,
            DomainKind::Polygon { vertices } => {
                crossing_number_inside(vertices, x) && polygon_edge_distance(vertices, x) > tol
            }
        }
    }

    /// Unsigned distance from `x` to ∂Ω, for any `x`.
    pub fn boundary_gap(&self, x: Vec2<T>) -> T {
        match &self.kind {
            DomainKind::Interval { a, b } => (x.x - *a).abs().min((*b - x.x).abs()),
            DomainKind::Disk { center, radius } => ((x - *center).norm() - *radius).abs(),
            DomainKind::Polygon { vertices } => polygon_edge_distance(vertices, x),
        }
    }

    /// δ(x): Euclidean distance from an interior point to ∂Ω.
    pub fn boundary_distance(&self, x: Vec2<T>) -> Result<T, GeometryError> {
        if !self.contains(x) {
            return Err(GeometryError::NotInterior);
        }
        Ok(self.boundary_gap(x))
    }

    /// Normalizes a direction for this domain's dimension.
    fn unit_direction(&self, sigma: Vec2<T>) -> Result<Vec2<T>, GeometryError> {
        if self.dim() == 1 {
            if sigma.x == T::zero() || !sigma.x.is_finite() {
                return Err(GeometryError::ZeroDirection);
            }
            return Ok(Vec2::on_line(sigma.x.signum()));
        }
        let n = sigma.norm();
        if n == T::zero() || !n.is_finite() {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(sigma * (T::one() / n))
    }

    /// Speed |v| as seen by this domain (|v_x| in 1D).
    pub fn speed(&self, v: Vec2<T>) -> T {
        if self.dim() == 1 {
            v.x.abs()
        } else {
            v.norm()
        }
    }

    /// First intersection of the ray {x + tσ : t > 0} with ∂Ω.
    ///
    /// `sigma` is normalized internally. Hits with t below the geometric
    /// tolerance are ignored; among polygon edges the smallest positive t wins,
    /// which also settles grazing hits at vertices.
    pub fn ray_exit(&self, x: Vec2<T>, sigma: Vec2<T>) -> Result<RayHit<T>, GeometryError> {
        if !self.contains(x) {
            return Err(GeometryError::NotInterior);
        }
        let s = self.unit_direction(sigma)?;
        let distance = match &self.kind {
            DomainKind::Interval { a, b } => {
                if s.x > T::zero() {
                    *b - x.x
                } else {
                    x.x - *a
                }
            }
            DomainKind::Disk { center, radius } => {
                let rel = x - *center;
                let b = rel.dot(s);
                let c = rel.norm_sq() - *radius * *radius;
                // c < 0 for interior points, so the larger root is positive.
                let disc = (b * b - c).max(T::zero()).sqrt();
                if b > T::zero() {
                    -c / (b + disc)
                } else {
                    disc - b
                }
            }
            DomainKind::Polygon { vertices } => polygon_crossings(vertices, x, s)
                .into_iter()
                .next()
                .ok_or(GeometryError::NoExit)?,
        };
        Ok(RayHit {
            point: x + s * distance,
            distance,
        })
    }

    /// Per-direction visibility distance d(x, σ) = |x − x₀(x, σ)|.
    pub fn exit_distance(&self, x: Vec2<T>, sigma: Vec2<T>) -> Result<T, GeometryError> {
        self.ray_exit(x, sigma).map(|h| h.distance)
    }

    /// r(x, v) = d(x, v/|v|) / |v|: time to reach ∂Ω moving at velocity v.
    pub fn free_path(&self, x: Vec2<T>, v: Vec2<T>) -> Result<T, GeometryError> {
        let speed = self.speed(v);
        if speed == T::zero() {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(self.exit_distance(x, v)? / speed)
    }

    /// Membership y ∈ S_Ω(x), i.e. the closed segment [x, y] stays inside Ω.
    /// Points on ∂Ω count as outside; `x` itself is inside.
    pub fn segment_inside(&self, x: Vec2<T>, y: Vec2<T>) -> bool {
        if !self.contains(x) {
            return false;
        }
        let delta = y - x;
        let len = self.speed(delta);
        if len == T::zero() {
            return true;
        }
        match self.exit_distance(x, delta) {
            Ok(d) => len < d - T::geo_tol(),
            Err(_) => false,
        }
    }

    /// Sub-intervals (t₀, t₁) of the ray {x + tσ : t > 0} that lie inside Ω,
    /// ordered by t. The first one always starts at 0 and ends at d(x, σ);
    /// nonconvex polygons may add further components after the ray re-enters.
    pub fn ray_inside_intervals(&self, x: Vec2<T>, sigma: Vec2<T>) -> Result<Vec<(T, T)>, GeometryError> {
        let first = self.exit_distance(x, sigma)?;
        let mut out = vec![(T::zero(), first)];
        if let DomainKind::Polygon { vertices } = &self.kind {
            if self.is_convex() {
                return Ok(out);
            }
            let s = self.unit_direction(sigma)?;
            let ts = polygon_crossings(vertices, x, s);
            let half = lit::<T>(0.5);
            for w in ts.windows(2) {
                let (t0, t1) = (w[0], w[1]);
                if t0 < first + T::geo_tol() || t1 - t0 <= T::geo_tol() {
                    continue;
                }
                if self.contains(x + s * (half * (t0 + t1))) {
                    match out.last_mut() {
                        Some(last) if (last.1 - t0).abs() <= T::geo_tol() => last.1 = t1,
                        _ => out.push((t0, t1)),
                    }
                }
            }
        }
        Ok(out)
    }

    /// Interior membership of an arbitrary point, rejection-sampling helper.
    pub fn sample_uniform<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec2<T> {
        let (lo, hi) = self.bounding_box();
        loop {
            let ux = lit::<T>(rng.random::<f64>());
            let p = if self.dim() == 1 {
                Vec2::on_line(lo.x + (hi.x - lo.x) * ux)
            } else {
                let uy = lit::<T>(rng.random::<f64>());
                Vec2::new(lo.x + (hi.x - lo.x) * ux, lo.y + (hi.y - lo.y) * uy)
            };
            if self.contains(p) {
                return p;
            }
        }
    }
}

/// Sorted positive parameters t at which the ray x + tσ meets polygon edges.
fn polygon_crossings<T: Scalar>(vertices: &[Vec2<T>], x: Vec2<T>, s: Vec2<T>) -> Vec<T> {
    let tol = T::geo_tol();
    let n = vertices.len();
    let mut ts = Vec::new();
    for i in 0..n {
        let p = vertices[i];
        let e = vertices[(i + 1) % n] - p;
        let denom = s.cross(e);
        let elen = e.norm();
        if denom.abs() <= tol * elen {
            // parallel: collinear contact is picked up at the adjacent edges' endpoints
            continue;
        }
        let w = p - x;
        let t = w.cross(e) / denom;
        let u = w.cross(s) / denom;
        let utol = tol / elen;
        if t > tol && u >= -utol && u <= T::one() + utol {
            ts.push(t);
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    ts
}

fn signed_area<T: Scalar>(v: &[Vec2<T>]) -> T {
    let n = v.len();
    let mut s = T::zero();
    for i in 0..n {
        s += v[i].cross(v[(i + 1) % n]);
    }
    s * lit(0.5)
}

fn crossing_number_inside<T: Scalar>(v: &[Vec2<T>], p: Vec2<T>) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub(crate) fn point_segment_distance<T: Scalar>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    let e = b - a;
    let len2 = e.norm_sq();
    let t = if len2 > T::zero() {
        ((p - a).dot(e) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    (p - (a + e * t)).norm()
}

fn polygon_edge_distance<T: Scalar>(v: &[Vec2<T>], p: Vec2<T>) -> T {
    let n = v.len();
    (0..n)
        .map(|i| point_segment_distance(p, v[i], v[(i + 1) % n]))
        .fold(T::infinity(), T::min)
}

fn orientation<T: Scalar>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> T {
    (b - a).cross(c - a)
}

fn segments_intersect<T: Scalar>(p1: Vec2<T>, p2: Vec2<T>, q1: Vec2<T>, q2: Vec2<T>) -> bool {
    let tol = T::geo_tol();
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol)) {
        return true;
    }
    // touching or collinear overlap
    point_segment_distance(p1, q1, q2) <= tol
        || point_segment_distance(p2, q1, q2) <= tol
        || point_segment_distance(q1, p1, p2) <= tol
        || point_segment_distance(q2, p1, p2) <= tol
}

/// Parses the plain-text polygon format: one `x y` vertex per line,
/// counterclockwise, with blank lines and `#` comments ignored.
pub fn parse_polygon<T: Scalar>(text: &str) -> Result<DomainSpec<T>, PolygonFileError> {
    let mut vertices = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(PolygonFileError::Parse {
                line: line_no,
                message: format!("expected two numbers, found {} field(s)", fields.len()),
            });
        }
        let mut xy = [T::zero(); 2];
        for (k, f) in fields.iter().enumerate() {
            let val: f64 = f.parse().map_err(|_| PolygonFileError::Parse {
                line: line_no,
                message: format!("cannot parse '{f}' as a number"),
            })?;
            if !val.is_finite() {
                return Err(PolygonFileError::Parse {
                    line: line_no,
                    message: format!("non-finite coordinate '{f}'"),
                });
            }
            xy[k] = lit(val);
        }
        vertices.push(Vec2::new(xy[0], xy[1]));
    }
    Ok(DomainSpec::polygon(vertices)?)
}

pub fn read_polygon_file<T: Scalar>(path: &Path) -> Result<DomainSpec<T>, PolygonFileError> {
    let text = std::fs::read_to_string(path)?;
    parse_polygon(&text)
}

/// Uniform angular rule on S^{d-1}: ±e₁ with unit weights in 1D, `n_dir`
/// equally spaced directions (half-step offset) with weight 2π/n in 2D.
/// Direction k + n/2 is always the antipode of direction k.
pub fn angular_rule<T: Scalar>(dim: usize, n_dir: usize) -> Vec<(Vec2<T>, T)> {
    if dim == 1 {
        return vec![
            (Vec2::on_line(T::one()), T::one()),
            (Vec2::on_line(-T::one()), T::one()),
        ];
    }
    assert!(n_dir >= 2 && n_dir % 2 == 0, "n_dir must be even");
    let n = n_dir as f64;
    let w = lit::<T>(std::f64::consts::TAU / n);
    let half = n_dir / 2;
    let mut dirs: Vec<(Vec2<T>, T)> = (0..half)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5) / n;
            (Vec2::new(lit(theta.cos()), lit(theta.sin())), w)
        })
        .collect();
    let antipodes: Vec<_> = dirs.iter().map(|(s, w)| (-*s, *w)).collect();
    dirs.extend(antipodes);
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    /// Independent crossing-number oracle (Jordan test on the raw vertex list).
    fn oracle_inside(v: &[(f64, f64)], q: (f64, f64)) -> bool {
        let mut c = false;
        let n = v.len();
        for i in 0..n {
            let (x1, y1) = v[i];
            let (x2, y2) = v[(i + 1) % n];
            if (y1 > q.1) != (y2 > q.1) && q.0 < x1 + (q.1 - y1) * (x2 - x1) / (y2 - y1) {
                c = !c;
            }
        }
        c
    }

    const L: [(f64, f64); 6] = [(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)];

    #[test]
    fn contains_examples() {
        let disk = DomainSpec::<f64>::unit_disk();
        assert!(disk.contains(p(0.0, 0.0)));
        assert!(!disk.contains(p(2.0, 0.0)));
        let l = DomainSpec::<f64>::l_shape();
        assert!(!l.contains(p(1.5, 1.5)));
        assert_eq!(oracle_inside(&L, (1.5, 1.5)), false);
        assert!(l.contains(p(0.5, 1.5)));
        // boundary points are not interior
        assert!(!l.contains(p(1.0, 1.5)));
        assert!(!disk.contains(p(1.0, 0.0)));
    }

    #[test]
    fn boundary_distance_examples() {
        let disk = DomainSpec::<f64>::unit_disk();
        assert!((disk.boundary_distance(p(0.5, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        assert!((iv.boundary_distance(Vec2::on_line(0.25)).unwrap() - 0.75).abs() < 1e-15);
        let l = DomainSpec::<f64>::l_shape();
        // brute-force oracle: min over the 6 edges
        let q = p(1.5, 0.5);
        let brute = (0..6)
            .map(|i| {
                let a = p(L[i].0, L[i].1);
                let b = p(L[(i + 1) % 6].0, L[(i + 1) % 6].1);
                let mut best = f64::INFINITY;
                for k in 0..=10_000 {
                    let t = k as f64 / 10_000.0;
                    best = best.min((q - (a + (b - a) * t)).norm());
                }
                best
            })
            .fold(f64::INFINITY, f64::min);
        let d = l.boundary_distance(q).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!((d - brute).abs() < 1e-6);
        assert_eq!(l.boundary_distance(p(1.5, 1.5)), Err(GeometryError::NotInterior));
    }

    #[test]
    fn ray_exit_examples() {
        let disk = DomainSpec::<f64>::unit_disk();
        for k in 0..16 {
            let s = Vec2::from_angle(k as f64 * 0.4);
            let h = disk.ray_exit(p(0.0, 0.0), s).unwrap();
            assert!((h.distance - 1.0).abs() < 1e-15);
        }
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        let h = iv.ray_exit(Vec2::on_line(0.2), Vec2::on_line(1.0)).unwrap();
        assert!((h.point.x - 1.0).abs() < 1e-15 && (h.distance - 0.8).abs() < 1e-15);

        // L-shape: from (1.8,0.5) toward (0.5,1.8); first hit is on y=1, 1≤x≤2.
        let l = DomainSpec::<f64>::l_shape();
        let x = p(1.8, 0.5);
        let s = p(-1.3, 1.3);
        let h = l.ray_exit(x, s).unwrap();
        // oracle: edge-by-edge, the ray reaches y=1 after Δy=0.5 at 45°
        let expected = 0.5 * 2f64.sqrt();
        assert!((h.distance - expected).abs() < 1e-14);
        assert!((h.point.y - 1.0).abs() < 1e-14);
        assert!(h.point.x > 1.0 && h.point.x < 2.0);
        assert!(!l.contains(h.point));
    }

    #[test]
    fn free_path_examples() {
        let disk = DomainSpec::<f64>::unit_disk();
        assert!((disk.free_path(p(0.0, 0.0), p(2.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        let iv = DomainSpec::<f64>::interval(-1.0, 1.0).unwrap();
        assert!((iv.free_path(Vec2::on_line(0.0), Vec2::on_line(-4.0)).unwrap() - 0.25).abs() < 1e-15);
        let eps = 0.01;
        let v = p(0.3, -0.7);
        let x = p(0.2, 0.1);
        let a = disk.free_path(x, v * (1.0 / eps)).unwrap();
        let b = eps * disk.free_path(x, v).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(disk.free_path(x, Vec2::zero()), Err(GeometryError::ZeroDirection));
    }

    #[test]
    fn segment_inside_examples() {
        let l = DomainSpec::<f64>::l_shape();
        assert!(!l.segment_inside(p(1.8, 0.5), p(0.5, 1.8)));
        assert!(l.segment_inside(p(1.5, 0.5), p(0.2, 1.5)));
        // dense-sampling oracle for the second case
        let (a, b) = (p(1.5, 0.5), p(0.2, 1.5));
        assert!((1..1000).all(|k| oracle_inside(&L, {
            let q = a + (b - a) * (k as f64 / 1000.0);
            (q.x, q.y)
        })));
        let disk = DomainSpec::<f64>::unit_disk();
        assert!(disk.segment_inside(p(0.5, 0.5), p(-0.6, -0.1)));
        assert!(disk.segment_inside(p(0.5, 0.5), p(0.5, 0.5)));
        // boundary target is outside S_Ω(x)
        assert!(!disk.segment_inside(p(0.0, 0.0), p(1.0, 0.0)));
    }

    #[test]
    fn ray_intervals_on_l_shape() {
        let l = DomainSpec::<f64>::l_shape();
        let iv = l.ray_inside_intervals(p(1.8, 0.5), p(-1.0, 1.0)).unwrap();
        assert_eq!(iv.len(), 2);
        // re-enters through x=1 at y=1.3
        let reenter = (0.8f64).hypot(0.8);
        assert!((iv[1].0 - reenter).abs() < 1e-12);
        // leaves through y=2 at x=0.3
        assert!((iv[1].1 - (1.5f64).hypot(1.5)).abs() < 1e-12);
        let disk = DomainSpec::<f64>::unit_disk();
        assert_eq!(disk.ray_inside_intervals(p(0.0, 0.0), p(1.0, 0.0)).unwrap().len(), 1);
    }

    #[test]
    fn polygon_validation() {
        assert_eq!(
            DomainSpec::polygon(vec![p(0., 0.), p(1., 0.)]),
            Err(GeometryError::TooFewVertices(2))
        );
        assert_eq!(
            DomainSpec::polygon(vec![p(0., 0.), p(0., 1.), p(1., 0.)]),
            Err(GeometryError::Clockwise)
        );
        assert_eq!(
            DomainSpec::polygon(vec![p(0., 0.), p(1., 1.), p(1., 0.), p(0., 1.)]),
            Err(GeometryError::SelfIntersecting(0, 2))
        );
        assert_eq!(
            DomainSpec::polygon(vec![p(0., 0.), p(1., 0.), p(1., 0.), p(0., 1.)]),
            Err(GeometryError::ZeroLengthEdge(1))
        );
        assert!(!DomainSpec::<f64>::l_shape().is_convex());
        assert!(DomainSpec::polygon(vec![p(0., 0.), p(1., 0.), p(0., 1.)])
            .unwrap()
            .is_convex());
    }

    #[test]
    fn polygon_file_format() {
        let text = "# L-shape\n0 0\n2 0\n\n2 1   # reflex next\n1 1\n1 2\n0 2\n";
        let d: DomainSpec<f64> = parse_polygon(text).unwrap();
        assert_eq!(d, DomainSpec::l_shape());
        match parse_polygon::<f64>("0 0\n1 zero\n0 1\n") {
            Err(PolygonFileError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_polygon::<f64>("0 0\n1 0 3\n0 1\n") {
            Err(PolygonFileError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn angular_rule_is_antipodal() {
        let r = angular_rule::<f64>(2, 16);
        for k in 0..8 {
            let s = r[k].0 + r[k + 8].0;
            assert!(s.norm() < 1e-15);
        }
        let total: f64 = r.iter().map(|d| d.1).sum();
        assert!((total - std::f64::consts::TAU).abs() < 1e-13);
    }
}
