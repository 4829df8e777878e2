//! Polygonal model of doubly connected domains, real-affine maps, and the planar
//! predicates used by the attainability criteria.
//!
//! A domain is described by its two complement components: a bounded one (a
//! polygon, a segment, or a single point for degenerate domains) and an unbounded
//! one (the exterior of a polygon, or one or two rays). Smooth boundaries enter as
//! dense polygon samplings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalRing;
use crate::error::{invalid, Error, Result};
use crate::Point;

/// Points closer than this to a slit or ray are treated as lying on it.
pub const ON_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryComponent {
    /// A single point; the domain is degenerate.
    Point(Point),
    /// A closed segment (a slit).
    Segment(Point, Point),
    /// A closed Jordan polygon, vertices in order, last edge implied.
    Polygon(Vec<Point>),
}

/// Half-line `{from + t·dir : t ≥ 0}` with `|dir| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub from: Point,
    pub dir: Point,
}

impl Ray {
    pub fn new(from: Point, dir: Point) -> Result<Self> {
        let n = dir.norm();
        if !(n > 0.0) || !n.is_finite() || !from.re.is_finite() || !from.im.is_finite() {
            return Err(invalid("ray needs a finite origin and a nonzero direction"));
        }
        Ok(Ray { from, dir: dir / n })
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.from + self.dir * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnboundedComponent {
    /// Closed exterior of a Jordan polygon.
    ExteriorOf(Vec<Point>),
    /// Union of one or two rays (joined through the point at infinity).
    Rays(Vec<Ray>),
}

/// Which part of the plane a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Domain,
    Bounded,
    Unbounded,
}

/// A boundary segment tagged with the complement component it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSegment {
    pub a: Point,
    pub b: Point,
    /// `false` for the bounded component, `true` for the unbounded one.
    pub outer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublyConnectedDomain {
    pub bounded: BoundaryComponent,
    pub unbounded: UnboundedComponent,
    /// A canonical ring conformally equivalent to this domain, when known.
    pub canonical: Option<CanonicalRing>,
}

fn finite(z: Point) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a.re * b.im - a.im * b.re
}

#[inline]
fn dot(a: Point, b: Point) -> f64 {
    a.re * b.re + a.im * b.im
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    point_segment_distance_sqr(p, a, b).sqrt()
}

/// Squared distance from `p` to the closed segment `a–b`.
#[inline]
pub fn point_segment_distance_sqr(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm_sqr();
    }
    let t = (dot(p - a, ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_sqr()
}

/// Whether `p` lies on the edge `a–b` up to [`ON_BOUNDARY_TOL`], relative to the
/// size of the edge's coordinates.
#[inline]
fn on_edge(p: Point, a: Point, b: Point) -> bool {
    let tol = ON_BOUNDARY_TOL * (1.0 + a.norm_sqr().max(b.norm_sqr()).sqrt());
    point_segment_distance_sqr(p, a, b) <= tol * tol
}

pub fn point_ray_distance(p: Point, ray: &Ray) -> f64 {
    let t = dot(p - ray.from, ray.dir).max(0.0);
    (p - ray.point_at(t)).norm()
}

/// Closed-segment intersection test, collinear overlaps included.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| {
        d == 0.0 && p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

pub fn segment_segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

pub fn segment_ray_distance(p1: Point, p2: Point, ray: &Ray) -> f64 {
    // Beyond this length the ray is farther from the segment than its endpoints are.
    let reach = (p1 - ray.from).norm().max((p2 - ray.from).norm()) * 2.0 + 1.0;
    segment_segment_distance(p1, p2, ray.from, ray.point_at(reach))
}

/// Even–odd point-in-polygon test; points on an edge count as inside.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if on_edge(p, a, b) {
            return true;
        }
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) / (b.im - a.im) * (b.re - a.re);
            if p.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Point-in-polygon queries against a polygon with many edges: edges are binned
/// by their vertical extent so a query only visits edges near its height.
#[derive(Debug, Clone)]
pub struct PolygonIndex {
    poly: Vec<Point>,
    y0: f64,
    bin_height: f64,
    bins: Vec<Vec<u32>>,
}

impl PolygonIndex {
    pub fn new(poly: &[Point]) -> Self {
        let (lo, hi) = bbox(poly);
        let nbins = (poly.len() / 2).clamp(1, 4096);
        let bin_height = ((hi.im - lo.im) / nbins as f64).max(f64::MIN_POSITIVE);
        let mut bins = vec![Vec::new(); nbins];
        for (k, (a, b)) in polygon_edges(poly).enumerate() {
            let (ya, yb) = (a.im.min(b.im), a.im.max(b.im));
            let i0 = (((ya - lo.im) / bin_height).floor() as isize).clamp(0, nbins as isize - 1) as usize;
            let i1 = (((yb - lo.im) / bin_height).floor() as isize).clamp(0, nbins as isize - 1) as usize;
            for bin in &mut bins[i0..=i1] {
                bin.push(k as u32);
            }
        }
        PolygonIndex { poly: poly.to_vec(), y0: lo.im, bin_height, bins }
    }

    /// Same answer as [`point_in_polygon`].
    pub fn contains(&self, p: Point) -> bool {
        let n = self.poly.len();
        let fi = ((p.im - self.y0) / self.bin_height).floor();
        // Tolerance band: a point just outside the y-range can still sit on an edge.
        let near = |k: usize| on_edge(p, self.poly[k], self.poly[(k + 1) % n]);
        if fi < -1.0 || fi > self.bins.len() as f64 {
            return false;
        }
        let bin = (fi.max(0.0) as usize).min(self.bins.len() - 1);
        let mut inside = false;
        for &k in &self.bins[bin] {
            let k = k as usize;
            if near(k) {
                return true;
            }
            let (a, b) = (self.poly[(k + 1) % n], self.poly[k]);
            if (a.im > p.im) != (b.im > p.im) {
                let x = a.re + (p.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if p.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Whether any edge of `first` meets any edge of `second` (closed segments).
/// Edges of `second` are bucketed on a uniform grid over the joint bounding box.
fn any_edges_touch(first: &[(Point, Point)], second: &[(Point, Point)]) -> bool {
    if first.is_empty() || second.is_empty() {
        return false;
    }
    let pts: Vec<Point> = first.iter().chain(second).flat_map(|&(a, b)| [a, b]).collect();
    let (lo, hi) = bbox(&pts);
    let side = ((first.len() + second.len()) as f64).sqrt().ceil().clamp(1.0, 1024.0) as usize;
    let cw = ((hi.re - lo.re) / side as f64).max(f64::MIN_POSITIVE);
    let ch = ((hi.im - lo.im) / side as f64).max(f64::MIN_POSITIVE);
    let cells = |a: Point, b: Point| {
        let ix = |x: f64| (((x - lo.re) / cw).floor() as isize).clamp(0, side as isize - 1) as usize;
        let iy = |y: f64| (((y - lo.im) / ch).floor() as isize).clamp(0, side as isize - 1) as usize;
        // One cell of padding absorbs rounding at cell borders.
        let (x0, x1) = (ix(a.re.min(b.re)).saturating_sub(1), (ix(a.re.max(b.re)) + 1).min(side - 1));
        let (y0, y1) = (iy(a.im.min(b.im)).saturating_sub(1), (iy(a.im.max(b.im)) + 1).min(side - 1));
        (x0..=x1).flat_map(move |x| (y0..=y1).map(move |y| y * side + x))
    };
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); side * side];
    for (k, &(a, b)) in second.iter().enumerate() {
        for c in cells(a, b) {
            buckets[c].push(k as u32);
        }
    }
    first.iter().any(|&(p, q)| {
        cells(p, q).any(|c| {
            buckets[c].iter().any(|&k| {
                let (a, b) = second[k as usize];
                segments_intersect(p, q, a, b)
            })
        })
    })
}

fn polygon_edges(poly: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

impl BoundaryComponent {
    /// Builds a component from a vertex list: one vertex is a point, two a segment,
    /// three or more a polygon.
    pub fn from_vertices(vertices: Vec<Point>) -> Result<Self> {
        match vertices.len() {
            0 => Err(invalid("empty vertex list")),
            1 => Ok(BoundaryComponent::Point(vertices[0])),
            2 => Ok(BoundaryComponent::Segment(vertices[0], vertices[1])),
            _ => Ok(BoundaryComponent::Polygon(vertices)),
        }
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            BoundaryComponent::Point(p) => vec![*p],
            BoundaryComponent::Segment(a, b) => vec![*a, *b],
            BoundaryComponent::Polygon(v) => v.clone(),
        }
    }

    pub fn edges(&self) -> Vec<(Point, Point)> {
        match self {
            BoundaryComponent::Point(p) => vec![(*p, *p)],
            BoundaryComponent::Segment(a, b) => vec![(*a, *b)],
            BoundaryComponent::Polygon(v) => polygon_edges(v).collect(),
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, z: Point) -> bool {
        match self {
            BoundaryComponent::Point(p) => (z - p).norm() <= ON_BOUNDARY_TOL,
            BoundaryComponent::Segment(a, b) => {
                point_segment_distance(z, *a, *b) <= ON_BOUNDARY_TOL * (1.0 + a.norm().max(b.norm()))
            }
            BoundaryComponent::Polygon(v) => point_in_polygon(z, v),
        }
    }

    /// A single point, or a segment/polygon of zero extent.
    pub fn is_point(&self) -> bool {
        let v = self.vertices();
        v.iter().all(|p| (*p - v[0]).norm() == 0.0)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        match self {
            BoundaryComponent::Point(p) => BoundaryComponent::Point(f(*p)),
            BoundaryComponent::Segment(a, b) => BoundaryComponent::Segment(f(*a), f(*b)),
            BoundaryComponent::Polygon(v) => BoundaryComponent::Polygon(v.iter().map(|p| f(*p)).collect()),
        }
    }
}

impl UnboundedComponent {
    pub fn contains(&self, z: Point) -> bool {
        match self {
            UnboundedComponent::ExteriorOf(poly) => {
                !point_in_polygon(z, poly) || polygon_edges(poly).any(|(a, b)| point_segment_distance(z, a, b) <= ON_BOUNDARY_TOL)
            }
            UnboundedComponent::Rays(rays) => rays
                .iter()
                .any(|r| point_ray_distance(z, r) <= ON_BOUNDARY_TOL * (1.0 + r.from.norm().max(z.norm()))),
        }
    }

    /// Finite points: polygon vertices or ray origins.
    pub fn anchor_points(&self) -> Vec<Point> {
        match self {
            UnboundedComponent::ExteriorOf(poly) => poly.clone(),
            UnboundedComponent::Rays(rays) => rays.iter().map(|r| r.from).collect(),
        }
    }
}

impl DoublyConnectedDomain {
    /// Validates the components: finite coordinates, polygons with at least three
    /// vertices, one or two rays, and disjoint components.
    pub fn new(
        bounded: BoundaryComponent,
        unbounded: UnboundedComponent,
        canonical: Option<CanonicalRing>,
    ) -> Result<Self> {
        if !bounded.vertices().into_iter().all(finite) {
            return Err(invalid("non-finite vertex in bounded component"));
        }
        match &unbounded {
            UnboundedComponent::ExteriorOf(poly) => {
                if poly.len() < 3 {
                    return Err(invalid("exterior polygon needs at least 3 vertices"));
                }
                if !poly.iter().copied().all(finite) {
                    return Err(invalid("non-finite vertex in unbounded component"));
                }
            }
            UnboundedComponent::Rays(rays) => {
                if rays.is_empty() || rays.len() > 2 {
                    return Err(invalid("unbounded component must be one or two rays"));
                }
                if rays.len() == 2 && segment_ray_distance(rays[0].from, rays[0].point_at(1.0), &rays[1]) == 0.0 {
                    // Overlapping rays are allowed only when one contains the other's origin; reject for simplicity.
                    return Err(invalid("the two rays intersect"));
                }
            }
        }
        let dom = DoublyConnectedDomain { bounded, unbounded, canonical };
        if !dom.components_disjoint() {
            return Err(invalid("complement components intersect"));
        }
        Ok(dom)
    }

    fn components_disjoint(&self) -> bool {
        let edges = self.bounded.edges();
        match &self.unbounded {
            UnboundedComponent::ExteriorOf(poly) => {
                // With no boundary contact, one bounded vertex inside puts the whole component inside.
                let outer: Vec<(Point, Point)> = polygon_edges(poly).collect();
                point_in_polygon(self.bounded.vertices()[0], poly) && !any_edges_touch(&edges, &outer)
            }
            UnboundedComponent::Rays(rays) => {
                let no_cross = edges.iter().all(|(p, q)| rays.iter().all(|r| segment_ray_distance(*p, *q, r) > 0.0));
                let origin_outside = match &self.bounded {
                    BoundaryComponent::Polygon(v) => rays.iter().all(|r| !point_in_polygon(r.from, v)),
                    _ => true,
                };
                no_cross && origin_outside
            }
        }
    }

    /// Degenerate when the bounded complement component is a single point.
    pub fn is_degenerate(&self) -> bool {
        self.bounded.is_point()
    }

    pub fn classify(&self, z: Point) -> Region {
        if self.bounded.contains(z) {
            Region::Bounded
        } else if self.unbounded.contains(z) {
            Region::Unbounded
        } else {
            Region::Domain
        }
    }

    /// All boundary pieces as labelled segments; rays are truncated at `ray_length`
    /// from their origin.
    pub fn boundary_segments(&self, ray_length: f64) -> Vec<LabeledSegment> {
        let mut out: Vec<LabeledSegment> =
            self.bounded.edges().into_iter().map(|(a, b)| LabeledSegment { a, b, outer: false }).collect();
        match &self.unbounded {
            UnboundedComponent::ExteriorOf(poly) => {
                out.extend(polygon_edges(poly).map(|(a, b)| LabeledSegment { a, b, outer: true }))
            }
            UnboundedComponent::Rays(rays) => {
                out.extend(rays.iter().map(|r| LabeledSegment { a: r.from, b: r.point_at(ray_length), outer: true }))
            }
        }
        out
    }

    /// Distance from `z` to the nearer complement component.
    pub fn boundary_distance(&self, z: Point) -> f64 {
        let db = self.bounded.edges().iter().map(|(a, b)| point_segment_distance(z, *a, *b)).fold(f64::INFINITY, f64::min);
        let du = match &self.unbounded {
            UnboundedComponent::ExteriorOf(poly) => {
                polygon_edges(poly).map(|(a, b)| point_segment_distance(z, a, b)).fold(f64::INFINITY, f64::min)
            }
            UnboundedComponent::Rays(rays) => rays.iter().map(|r| point_ray_distance(z, r)).fold(f64::INFINITY, f64::min),
        };
        db.min(du)
    }

    /// Largest distance of any finite defining point from the origin.
    pub fn extent(&self) -> f64 {
        self.bounded
            .vertices()
            .into_iter()
            .chain(self.unbounded.anchor_points())
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }

    /// A point of the bounded component far from its boundary: the centre of a
    /// slit, or an approximate pole of inaccessibility of a polygon.
    pub fn bounded_anchor(&self) -> Point {
        match &self.bounded {
            BoundaryComponent::Point(p) => *p,
            BoundaryComponent::Segment(a, b) => (*a + *b) * 0.5,
            BoundaryComponent::Polygon(v) => {
                let (lo, hi) = bbox(v);
                // Squared distance to the boundary, or anything at most `floor` once it is known to be below it.
                let index = PolygonIndex::new(v);
                let clearance = |p: Point, floor: f64| -> f64 {
                    if !index.contains(p) {
                        return f64::NEG_INFINITY;
                    }
                    let mut d = f64::INFINITY;
                    for (a, b) in polygon_edges(v) {
                        d = d.min(point_segment_distance_sqr(p, a, b));
                        if d <= floor {
                            break;
                        }
                    }
                    d
                };
                let centroid = v.iter().sum::<Point>() / v.len() as f64;
                let mut best = (clearance(centroid, f64::NEG_INFINITY), centroid);
                let n = 24;
                for i in 0..=n {
                    for j in 0..=n {
                        let p = Point::new(
                            lo.re + (hi.re - lo.re) * i as f64 / n as f64,
                            lo.im + (hi.im - lo.im) * j as f64 / n as f64,
                        );
                        let d = clearance(p, best.0);
                        if d > best.0 {
                            best = (d, p);
                        }
                    }
                }
                // Local refinement around the best grid point.
                let mut step = (hi - lo).norm() / n as f64;
                for _ in 0..30 {
                    let c = best.1;
                    for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                        let p = c + Point::new(dx, dy) * step;
                        let d = clearance(p, best.0);
                        if d > best.0 {
                            best = (d, p);
                        }
                    }
                    if best.1 == c {
                        step *= 0.5;
                    }
                }
                best.1
            }
        }
    }
}

pub(crate) fn bbox(pts: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

// ---------------------------------------------------------------------------
// Width, projections, separation

/// Convex hull, counter-clockwise, without collinear points (Andrew's monotone chain).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 1] - lower[lower.len() - 2], p - lower[lower.len() - 2]) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 1] - upper[upper.len() - 2], p - upper[upper.len() - 2]) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Width of a set and the projection direction achieving it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Width {
    pub width: f64,
    /// `θ ∈ [0, π)` such that `π_θ(z) = Re(e^{−iθ} z)` has the shortest image.
    pub theta: f64,
}

fn canonical_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI - 1e-15 {
        0.0
    } else {
        t
    }
}

/// Smallest distance between two parallel lines enclosing the component,
/// by rotating calipers over the convex hull. Ties go to the smallest angle.
pub fn width(component: &BoundaryComponent) -> Result<Width> {
    width_of_points(&component.vertices())
}

pub fn width_of_points(points: &[Point]) -> Result<Width> {
    if points.is_empty() {
        return Err(invalid("width of an empty vertex list"));
    }
    let hull = convex_hull(points);
    match hull.len() {
        0 | 1 => return Ok(Width { width: 0.0, theta: 0.0 }),
        2 => {
            let d = hull[1] - hull[0];
            return Ok(Width { width: 0.0, theta: canonical_angle(d.arg() + PI / 2.0) });
        }
        _ => {}
    }
    let n = hull.len();
    let mut best = Width { width: f64::INFINITY, theta: 0.0 };
    let mut j = 1;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let e = b - a;
        let len = e.norm();
        let dist = |k: usize| cross(e, hull[k % n] - a) / len;
        // Advance the antipodal pointer while the distance grows.
        while dist(j + 1) >= dist(j) {
            j += 1;
            if j > 3 * n {
                break;
            }
        }
        let w = dist(j);
        let theta = canonical_angle(e.arg() + PI / 2.0);
        let tol = 1e-12 * (1.0 + w.abs());
        if w < best.width - tol || ((w - best.width).abs() <= tol && theta < best.theta) {
            best = Width { width: w, theta };
        }
    }
    Ok(best)
}

/// `[min, max]` of `Re(e^{−iθ} v)` over the component's vertices.
pub fn projection_interval(component: &BoundaryComponent, theta: f64) -> Result<(f64, f64)> {
    let v = component.vertices();
    if v.is_empty() {
        return Err(invalid("projection of an empty vertex list"));
    }
    Ok(project_points(&v, theta))
}

fn project_points(v: &[Point], theta: f64) -> (f64, f64) {
    let rot = Point::from_polar(1.0, -theta);
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let x = (rot * p).re;
        (lo.min(x), hi.max(x))
    })
}

/// Projection of the unbounded component as a union of (possibly infinite) intervals.
pub fn unbounded_projection(component: &UnboundedComponent, theta: f64) -> Vec<(f64, f64)> {
    match component {
        UnboundedComponent::ExteriorOf(_) => vec![(f64::NEG_INFINITY, f64::INFINITY)],
        UnboundedComponent::Rays(rays) => {
            let rot = Point::from_polar(1.0, -theta);
            rays.iter()
                .map(|r| {
                    let x0 = (rot * r.from).re;
                    let dx = (rot * r.dir).re;
                    if dx.abs() <= 1e-14 {
                        (x0, x0)
                    } else if dx > 0.0 {
                        (x0, f64::INFINITY)
                    } else {
                        (f64::NEG_INFINITY, x0)
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapCheck {
    pub holds: bool,
    /// Smallest sampled angle at which the projections are disjoint.
    pub witness_theta: Option<f64>,
}

pub const DEFAULT_THETA_SAMPLES: usize = 720;

/// Checks `π_θ(Ω_b) ∩ π_θ(Ω_u) ≠ ∅` on a uniform grid of `samples` angles in
/// `[0, π)` plus the critical directions (hull edge normals, ray normals).
pub fn projections_overlap_all_theta(domain: &DoublyConnectedDomain, samples: usize) -> Result<OverlapCheck> {
    if domain.is_degenerate() {
        return Err(Error::DegenerateDomain("overlap predicate needs a non-degenerate domain".into()));
    }
    let samples = samples.max(1);
    let mut thetas: Vec<f64> = (0..samples).map(|k| PI * k as f64 / samples as f64).collect();
    let hull = convex_hull(&domain.bounded.vertices());
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        thetas.push(canonical_angle(e.arg() + PI / 2.0));
    }
    if let UnboundedComponent::Rays(rays) = &domain.unbounded {
        for r in rays {
            thetas.push(canonical_angle(r.dir.arg() + PI / 2.0));
            thetas.push(canonical_angle(r.dir.arg()));
        }
    }
    thetas.sort_by(f64::total_cmp);
    let bverts = domain.bounded.vertices();
    for &theta in &thetas {
        let (lo, hi) = project_points(&bverts, theta);
        let overlaps = unbounded_projection(&domain.unbounded, theta)
            .iter()
            .any(|&(a, b)| a <= hi && lo <= b);
        if !overlaps {
            return Ok(OverlapCheck { holds: false, witness_theta: Some(theta) });
        }
    }
    Ok(OverlapCheck { holds: true, witness_theta: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationDiameter {
    /// Distance between the two complement components.
    pub d: f64,
    /// Diameter of the bounded component.
    pub d0: f64,
}

pub fn separation_and_diameter(domain: &DoublyConnectedDomain) -> Result<SeparationDiameter> {
    if domain.is_degenerate() {
        return Err(Error::DegenerateDomain("bounded component is a point".into()));
    }
    let hull = convex_hull(&domain.bounded.vertices());
    let mut d0: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            d0 = d0.max((hull[i] - hull[j]).norm());
        }
    }
    let edges = domain.bounded.edges();
    let d = match &domain.unbounded {
        UnboundedComponent::ExteriorOf(poly) => edges
            .iter()
            .flat_map(|(p, q)| polygon_edges(poly).map(move |(a, b)| segment_segment_distance(*p, *q, a, b)))
            .fold(f64::INFINITY, f64::min),
        UnboundedComponent::Rays(rays) => edges
            .iter()
            .flat_map(|(p, q)| rays.iter().map(move |r| segment_ray_distance(*p, *q, r)))
            .fold(f64::INFINITY, f64::min),
    };
    Ok(SeparationDiameter { d, d0 })
}

// ---------------------------------------------------------------------------
// Affine maps

/// `z ↦ a z + b z̄ + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: Point,
    pub b: Point,
    pub c: Point,
}

impl AffineMap {
    pub fn new(a: Point, b: Point, c: Point) -> Result<Self> {
        let m = AffineMap { a, b, c };
        if m.det() == 0.0 || !m.det().is_finite() {
            return Err(invalid("singular affine map (|a| = |b|)"));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        AffineMap { a: Point::new(1.0, 0.0), b: Point::new(0.0, 0.0), c: Point::new(0.0, 0.0) }
    }

    /// `z ↦ λ e^{iψ} z + c`.
    pub fn similarity(scale: f64, rotation: f64, shift: Point) -> Self {
        AffineMap { a: Point::from_polar(scale, rotation), b: Point::new(0.0, 0.0), c: shift }
    }

    /// Squeeze by `alpha` perpendicular to the direction `e^{iθ}`:
    /// `z ↦ e^{iθ} φ_α(e^{−iθ} z)` with `φ_α(x, y) = (x, α y)`.
    pub fn shear(theta: f64, alpha: f64) -> Self {
        AffineMap {
            a: Point::new(0.5 * (1.0 + alpha), 0.0),
            b: Point::from_polar(0.5 * (1.0 - alpha), 2.0 * theta),
            c: Point::new(0.0, 0.0),
        }
    }

    /// `|a|² − |b|²`, the Jacobian determinant.
    pub fn det(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn orientation_preserving(&self) -> bool {
        self.det() > 0.0
    }

    pub fn apply(&self, z: Point) -> Point {
        self.a * z + self.b * z.conj() + self.c
    }

    pub fn apply_linear(&self, z: Point) -> Point {
        self.a * z + self.b * z.conj()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
            c: self.apply(other.c),
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let det = self.det();
        if det == 0.0 {
            return Err(invalid("singular affine map has no inverse"));
        }
        let lin = AffineMap { a: self.a.conj() / det, b: -self.b / det, c: Point::new(0.0, 0.0) };
        Ok(AffineMap { c: -lin.apply_linear(self.c), ..lin })
    }

    /// Conformal or anticonformal: preserves the conformal modulus of every domain.
    pub fn is_similarity(&self) -> bool {
        let (na, nb) = (self.a.norm(), self.b.norm());
        nb <= 1e-14 * na || na <= 1e-14 * nb
    }
}

/// `z ↦ shift + scale · e^{i·rotation} · S_{θ,α}(z or z̄)` where `S_{θ,α}` is the
/// squeeze [`AffineMap::shear`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearNormalForm {
    pub theta: f64,
    pub alpha: f64,
    pub scale: f64,
    pub rotation: f64,
    /// Conjugate before squeezing (orientation-reversing maps).
    pub reflect: bool,
    pub shift: Point,
}

impl ShearNormalForm {
    pub fn to_affine(&self) -> AffineMap {
        let sq = AffineMap::shear(self.theta, self.alpha);
        let post = AffineMap::similarity(self.scale, self.rotation, self.shift);
        let pre = if self.reflect {
            AffineMap { a: Point::new(0.0, 0.0), b: Point::new(1.0, 0.0), c: Point::new(0.0, 0.0) }
        } else {
            AffineMap::identity()
        };
        post.compose(&sq).compose(&pre)
    }
}

/// Factors an affine map into a similarity, a squeeze `φ_α` along a direction
/// `θ`, and an optional reflection. `alpha = σ_min / σ_max`.
pub fn decompose_affine(map: &AffineMap) -> Result<ShearNormalForm> {
    let (a, b, reflect) = if map.a.norm() > map.b.norm() {
        (map.a, map.b, false)
    } else if map.b.norm() > map.a.norm() {
        // a z + b z̄ = g(z̄) with g(w) = b w + a w̄.
        (map.b, map.a, true)
    } else {
        return Err(invalid("singular affine map (|a| = |b|)"));
    };
    // a z + b z̄ = a (1+|k|) · S_{θ,α}(z) with k = b/a, θ = arg(k)/2.
    let k = b / a;
    let kn = k.norm();
    let alpha = (1.0 - kn) / (1.0 + kn);
    let theta = if kn == 0.0 { 0.0 } else { canonical_angle(0.5 * k.arg()) };
    Ok(ShearNormalForm {
        theta,
        alpha,
        scale: a.norm() * (1.0 + kn),
        rotation: a.arg(),
        reflect,
        shift: map.c,
    })
}

/// Vertex-wise image of a domain. The canonical tag survives when the map is a
/// similarity, or when the complement lies on a line (affine maps preserve ratios
/// along lines, so the image is conformally the same ring).
pub fn apply_affine(map: &AffineMap, domain: &DoublyConnectedDomain) -> Result<DoublyConnectedDomain> {
    let f = |z: Point| map.apply(z);
    let bounded = domain.bounded.map(f);
    let unbounded = match &domain.unbounded {
        UnboundedComponent::ExteriorOf(poly) => UnboundedComponent::ExteriorOf(poly.iter().map(|p| f(*p)).collect()),
        UnboundedComponent::Rays(rays) => UnboundedComponent::Rays(
            rays.iter()
                .map(|r| Ray::new(f(r.from), map.apply_linear(r.dir)))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let canonical = domain.canonical.filter(|ring| map.is_similarity() || ring.is_collinear());
    // Orientation reversal flips polygon vertex order; membership tests do not care.
    Ok(DoublyConnectedDomain { bounded, unbounded, canonical })
}

/// Whether both complement components lie on a common line (within `tol`, relative).
pub fn complement_on_a_line(domain: &DoublyConnectedDomain, tol: f64) -> Option<(Point, Point)> {
    let rays = match &domain.unbounded {
        UnboundedComponent::Rays(r) => r,
        UnboundedComponent::ExteriorOf(_) => return None,
    };
    let pts: Vec<Point> = match &domain.bounded {
        BoundaryComponent::Segment(a, b) => vec![*a, *b],
        BoundaryComponent::Point(p) => vec![*p],
        BoundaryComponent::Polygon(v) => {
            // A polygon of positive area is not on a line.
            if width_of_points(v).map(|w| w.width).unwrap_or(0.0) > tol * (1.0 + domain.extent()) {
                return None;
            }
            v.clone()
        }
    };
    let origin = rays[0].from;
    let dir = rays[0].dir;
    let scale = 1.0 + domain.extent();
    let on_line = |p: Point| cross(dir, p - origin).abs() <= tol * scale;
    let dirs_ok = rays.iter().all(|r| cross(dir, r.dir).abs() <= tol);
    if dirs_ok && rays.iter().all(|r| on_line(r.from)) && pts.iter().all(|p| on_line(*p)) {
        Some((origin, dir))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Domain file format

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical: Option<CanonicalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounded: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unbounded: Option<UnboundedSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalSpec {
    pub ring: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnboundedSpec {
    Polygon { polygon: Vec<[f64; 2]> },
    Rays { rays: Vec<RaySpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaySpec {
    pub from: [f64; 2],
    pub dir: [f64; 2],
}

fn pt(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

fn arr(p: Point) -> [f64; 2] {
    [p.re, p.im]
}

impl DomainFile {
    pub fn from_domain(domain: &DoublyConnectedDomain) -> Self {
        let unbounded = match &domain.unbounded {
            UnboundedComponent::ExteriorOf(poly) => UnboundedSpec::Polygon { polygon: poly.iter().map(|p| arr(*p)).collect() },
            UnboundedComponent::Rays(rays) => UnboundedSpec::Rays {
                rays: rays.iter().map(|r| RaySpec { from: arr(r.from), dir: arr(r.dir) }).collect(),
            },
        };
        DomainFile {
            kind: if domain.canonical.is_some() { "canonical" } else { "polygonal" }.into(),
            canonical: domain.canonical.map(|c| CanonicalSpec { ring: c.name().into(), params: c.params() }),
            bounded: Some(domain.bounded.vertices().into_iter().map(arr).collect()),
            unbounded: Some(unbounded),
        }
    }

    pub fn to_domain(&self) -> Result<DoublyConnectedDomain> {
        let ring = match &self.canonical {
            Some(spec) => Some(CanonicalRing::from_name(&spec.ring, &spec.params)?),
            None => None,
        };
        match self.kind.as_str() {
            "canonical" => {
                let ring = ring.ok_or_else(|| invalid("canonical domain without `canonical` block"))?;
                match (&self.bounded, &self.unbounded) {
                    (Some(_), Some(_)) => self.polygonal(Some(ring)),
                    _ => ring.realize(),
                }
            }
            "polygonal" => self.polygonal(ring),
            other => Err(invalid(format!("unknown domain kind `{other}`"))),
        }
    }

    fn polygonal(&self, ring: Option<CanonicalRing>) -> Result<DoublyConnectedDomain> {
        let bounded = self.bounded.as_ref().ok_or_else(|| invalid("missing `bounded`"))?;
        let bounded = BoundaryComponent::from_vertices(bounded.iter().copied().map(pt).collect())?;
        let unbounded = match self.unbounded.as_ref().ok_or_else(|| invalid("missing `unbounded`"))? {
            UnboundedSpec::Polygon { polygon } => UnboundedComponent::ExteriorOf(polygon.iter().copied().map(pt).collect()),
            UnboundedSpec::Rays { rays } => {
                UnboundedComponent::Rays(rays.iter().map(|r| Ray::new(pt(r.from), pt(r.dir))).collect::<Result<_>>()?)
            }
        };
        DoublyConnectedDomain::new(bounded, unbounded, ring)
    }
}

impl DoublyConnectedDomain {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DomainFile::from_domain(self)).expect("domain serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DomainFile = serde_json::from_str(text).map_err(|e| invalid(format!("domain JSON: {e}")))?;
        file.to_domain()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::circle_polygon;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn unit_square() -> BoundaryComponent {
        BoundaryComponent::Polygon(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)])
    }

    /// Brute-force width: minimum projection length over many directions.
    fn brute_width(v: &[Point], n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let (lo, hi) = project_points(v, PI * k as f64 / n as f64);
                hi - lo
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn width_examples() {
        let disk = BoundaryComponent::Polygon(circle_polygon(p(0.0, 0.0), 1.0, 64));
        assert!((width(&disk).unwrap().width - 2.0).abs() < 1e-2);
        let seg = BoundaryComponent::Segment(p(-1.0, 0.0), p(1.0, 0.0));
        assert_eq!(width(&seg).unwrap().width, 0.0);
        let sq = width(&unit_square()).unwrap();
        let brute = brute_width(&unit_square().vertices(), 100_000);
        assert_relative_eq!(sq.width, 1.0, max_relative = 1e-14);
        assert!((sq.width - brute).abs() < 1e-9);
        assert_eq!(sq.theta, 0.0);
        assert!(width_of_points(&[]).is_err());
    }

    #[test]
    fn projection_examples() {
        let seg = BoundaryComponent::Segment(p(-1.0, 0.0), p(1.0, 0.0));
        assert_eq!(projection_interval(&seg, 0.0).unwrap(), (-1.0, 1.0));
        let (lo, hi) = projection_interval(&seg, PI / 2.0).unwrap();
        assert!(lo.abs() < 1e-15 && hi.abs() < 1e-15);
        // Unit square at θ = π/4: vertex projections (x + y)/√2 ∈ {0, 1/√2, √2, 1/√2}.
        let (lo, hi) = projection_interval(&unit_square(), PI / 4.0).unwrap();
        assert!(lo.abs() < 1e-15);
        assert_relative_eq!(hi, 2.0_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn overlap_examples() {
        let grotzsch = CanonicalRing::Grotzsch { s: 2.0 }.realize_with(256).unwrap();
        let check = projections_overlap_all_theta(&grotzsch, DEFAULT_THETA_SAMPLES).unwrap();
        assert!(!check.holds);
        assert_eq!(check.witness_theta, Some(0.0));
        let annulus = CanonicalRing::Annulus { r: 1.0, big_r: 2.0 }.realize().unwrap();
        assert!(projections_overlap_all_theta(&annulus, DEFAULT_THETA_SAMPLES).unwrap().holds);
        // Bounded domains always pass.
        let odd = DoublyConnectedDomain::new(
            BoundaryComponent::Polygon(vec![p(0.0, 0.0), p(1.0, 0.2), p(0.3, 0.9)]),
            UnboundedComponent::ExteriorOf(vec![p(-5.0, -1.0), p(4.0, -2.0), p(3.0, 6.0), p(-2.0, 3.0)]),
            None,
        )
        .unwrap();
        assert!(projections_overlap_all_theta(&odd, 720).unwrap().holds);
    }

    #[test]
    fn separation_examples() {
        let ann = CanonicalRing::Annulus { r: 1.0, big_r: 2.0 }.realize().unwrap();
        let sd = separation_and_diameter(&ann).unwrap();
        assert!((sd.d - 1.0).abs() < 1e-5 && (sd.d0 - 2.0).abs() < 1e-5);
        let t = CanonicalRing::Teichmuller { s: 1.7 }.realize().unwrap();
        let sd = separation_and_diameter(&t).unwrap();
        assert_relative_eq!(sd.d, 1.7, max_relative = 1e-14);
        assert_relative_eq!(sd.d0, 1.0, max_relative = 1e-14);
        let f = CanonicalRing::DoubleTeich { s: 3.0, t: 3.0 }.realize().unwrap();
        let sd = separation_and_diameter(&f).unwrap();
        assert_relative_eq!(sd.d, 2.0, max_relative = 1e-14);
        assert_relative_eq!(sd.d0, 2.0, max_relative = 1e-14);
        let degenerate = DoublyConnectedDomain::new(
            BoundaryComponent::Point(p(0.0, 0.0)),
            UnboundedComponent::ExteriorOf(circle_polygon(p(0.0, 0.0), 1.0, 32)),
            None,
        )
        .unwrap();
        assert!(matches!(separation_and_diameter(&degenerate), Err(Error::DegenerateDomain(_))));
    }

    #[test]
    fn decompose_examples() {
        let id = decompose_affine(&AffineMap::identity()).unwrap();
        assert_eq!((id.alpha, id.theta), (1.0, 0.0));
        // (x, y) ↦ (x, y/2) is a = 3/4, b = 1/4.
        let half = decompose_affine(&AffineMap::new(p(0.75, 0.0), p(0.25, 0.0), p(0.0, 0.0)).unwrap()).unwrap();
        assert_relative_eq!(half.alpha, 0.5, max_relative = 1e-15);
        assert_eq!(half.theta, 0.0);
        let m = decompose_affine(&AffineMap::new(p(1.0, 0.0), p(0.3, 0.0), p(0.0, 0.0)).unwrap()).unwrap();
        assert_relative_eq!(m.alpha, 0.7 / 1.3, max_relative = 1e-15);
        assert_eq!(m.theta, 0.0);
        assert!(AffineMap::new(p(1.0, 0.0), p(0.0, 1.0), p(0.0, 0.0)).is_err());
    }

    #[test]
    fn apply_affine_examples() {
        let ann = CanonicalRing::Annulus { r: 1.0, big_r: 2.0 }.realize().unwrap();
        assert_eq!(apply_affine(&AffineMap::identity(), &ann).unwrap(), ann);
        let t = CanonicalRing::Teichmuller { s: 2.0 }.realize().unwrap();
        let squeezed = apply_affine(&AffineMap::shear(0.0, 0.5), &t).unwrap();
        assert_eq!(squeezed.canonical, t.canonical);
        let tilted = apply_affine(&AffineMap::shear(0.4, 0.5), &t).unwrap();
        assert_eq!(tilted.canonical, t.canonical);
        assert!(complement_on_a_line(&tilted, 1e-12).is_some());
        let sq_ann = apply_affine(&AffineMap::shear(0.0, 0.5), &ann).unwrap();
        assert!(sq_ann.canonical.is_none());
        let circle = circle_polygon(p(0.0, 0.0), 1.0, 64);
        let img: Vec<Point> = circle.iter().map(|z| AffineMap::shear(0.0, 0.5).apply(*z)).collect();
        for (z, w) in circle.iter().zip(&img) {
            assert_relative_eq!(w.re, z.re, max_relative = 1e-15);
            assert!((w.im - 0.5 * z.im).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_intersecting_components() {
        let r = DoublyConnectedDomain::new(
            BoundaryComponent::Segment(p(-1.0, 0.0), p(1.0, 0.0)),
            UnboundedComponent::Rays(vec![Ray::new(p(0.5, 0.0), p(1.0, 0.0)).unwrap()]),
            None,
        );
        assert!(r.is_err());
        let r = DoublyConnectedDomain::new(
            BoundaryComponent::Polygon(circle_polygon(p(0.0, 0.0), 2.0, 16)),
            UnboundedComponent::ExteriorOf(circle_polygon(p(0.0, 0.0), 1.0, 16)),
            None,
        );
        assert!(r.is_err());
        assert!(BoundaryComponent::from_vertices(vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = CanonicalRing::DoubleTeich { s: 2.0, t: 3.0 }.realize().unwrap();
        let back = DoublyConnectedDomain::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let minimal = r#"{"kind":"canonical","canonical":{"ring":"annulus","params":[1,2]}}"#;
        let d = DoublyConnectedDomain::from_json(minimal).unwrap();
        assert_eq!(d.canonical, Some(CanonicalRing::Annulus { r: 1.0, big_r: 2.0 }));
        let poly = r#"{"kind":"polygonal","bounded":[[0,0],[1,0],[0,1]],
            "unbounded":{"polygon":[[-3,-3],[3,-3],[3,3],[-3,3]]}}"#;
        let d = DoublyConnectedDomain::from_json(poly).unwrap();
        assert!(matches!(d.unbounded, UnboundedComponent::ExteriorOf(_)));
        assert!(DoublyConnectedDomain::from_json(r#"{"kind":"blob"}"#).is_err());
    }

    fn arb_polygon() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.2f64..2.0, 0.0f64..1.0), 3..12).prop_map(|v| {
            let n = v.len();
            v.iter()
                .enumerate()
                .map(|(k, (r, jitter))| Point::from_polar(*r, (k as f64 + 0.8 * jitter) * std::f64::consts::TAU / n as f64))
                .collect()
        })
    }

    #[test]
    fn polygon_index_agrees_with_direct_test() {
        let poly: Vec<Point> = (0..97)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 97.0;
                Point::from_polar(1.0 + 0.4 * (5.0 * t).sin(), t)
            })
            .collect();
        let idx = PolygonIndex::new(&poly);
        for i in 0..120 {
            for j in 0..120 {
                let z = p(-1.6 + i as f64 * 0.027, -1.6 + j as f64 * 0.027);
                assert_eq!(idx.contains(z), point_in_polygon(z, &poly), "{z}");
            }
        }
        for v in &poly {
            assert!(idx.contains(*v));
        }
    }

    proptest! {
        #[test]
        fn width_equals_hull_width(poly in arb_polygon()) {
            let w = width_of_points(&poly).unwrap().width;
            let h = width_of_points(&convex_hull(&poly)).unwrap().width;
            prop_assert!((w - h).abs() < 1e-12);
            prop_assert!((w - brute_width(&poly, 20_000)).abs() < 1e-3 * (1.0 + w));
        }

        #[test]
        fn width_rigid_invariance(poly in arb_polygon(), rot in 0.0f64..6.28, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
            let m = AffineMap::similarity(1.0, rot, p(dx, dy));
            let moved: Vec<Point> = poly.iter().map(|z| m.apply(*z)).collect();
            let (a, b) = (width_of_points(&poly).unwrap().width, width_of_points(&moved).unwrap().width);
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn projection_rotation_covariance(poly in arb_polygon(), rho in 0.0f64..3.0, theta in 0.0f64..3.14) {
            let comp = BoundaryComponent::Polygon(poly);
            let rotated = comp.map(|z| Point::from_polar(1.0, rho) * z);
            let (a0, a1) = projection_interval(&rotated, theta).unwrap();
            let (b0, b1) = projection_interval(&comp, theta - rho).unwrap();
            prop_assert!((a0 - b0).abs() < 1e-12 && (a1 - b1).abs() < 1e-12);
        }

        #[test]
        fn decompose_recompose(ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0,
                               cr in -3.0f64..3.0, ci in -3.0f64..3.0, seed in 0u64..1000) {
            let (a, b) = (p(ar, ai), p(br, bi));
            prop_assume!((a.norm() - b.norm()).abs() > 1e-3);
            let m = AffineMap::new(a, b, p(cr, ci)).unwrap();
            let nf = decompose_affine(&m).unwrap();
            prop_assert!(nf.alpha > 0.0 && nf.alpha <= 1.0);
            prop_assert!(nf.theta >= 0.0 && nf.theta < PI);
            let back = nf.to_affine();
            for k in 0..100u64 {
                let t = (seed * 100 + k) as f64;
                let z = p((t * 0.7).sin() * 3.0, (t * 1.3).cos() * 3.0);
                let (u, v) = (m.apply(z), back.apply(z));
                prop_assert!((u - v).norm() <= 1e-12 * (1.0 + u.norm()));
            }
        }

        #[test]
        fn separation_scales_linearly(lambda in 0.1f64..10.0) {
            let dom = DoublyConnectedDomain::new(
                BoundaryComponent::Polygon(vec![p(0.0, 0.0), p(1.0, 0.2), p(0.3, 0.9)]),
                UnboundedComponent::ExteriorOf(vec![p(-5.0, -1.0), p(4.0, -2.0), p(3.0, 6.0), p(-2.0, 3.0)]),
                None,
            ).unwrap();
            let scaled = apply_affine(&AffineMap::similarity(lambda, 0.0, p(0.0, 0.0)), &dom).unwrap();
            let (a, b) = (separation_and_diameter(&dom).unwrap(), separation_and_diameter(&scaled).unwrap());
            prop_assert!((b.d - lambda * a.d).abs() < 1e-12 * lambda);
            prop_assert!((b.d0 - lambda * a.d0).abs() < 1e-12 * lambda);
        }
    }
}
