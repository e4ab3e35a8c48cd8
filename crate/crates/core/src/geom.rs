//! Exact vector geometry: points, rectangles, simple polygons, linestrings and
//! the closed-set predicates used by rasterization and refinement.
//!
//! Every predicate treats geometries as closed point sets, so boundary contact
//! counts as intersection. Collinearity uses a relative tolerance of
//! [`EPSILON`] on the cross product, widened by the rounding error of the
//! coordinates' magnitude.

use crate::error::{Error, Result};

/// Relative tolerance for orientation and on-edge tests.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Axis-aligned minimum bounding rectangle (closed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mbr {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

/// Spatial predicate evaluated on MBRs during the filter step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MbrPredicate {
    Intersects,
    /// The first rectangle lies completely inside the second.
    Within,
}

impl Mbr {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite());
        if !finite || xmin > xmax || ymin > ymax {
            return Err(Error::InvalidMbr { xmin, ymin, xmax, ymax });
        }
        Ok(Mbr { xmin, ymin, xmax, ymax })
    }

    /// Tight bounding box of a non-empty point set.
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut mbr = Mbr { xmin: first.x, ymin: first.y, xmax: first.x, ymax: first.y };
        for p in it {
            mbr.xmin = mbr.xmin.min(p.x);
            mbr.ymin = mbr.ymin.min(p.y);
            mbr.xmax = mbr.xmax.max(p.x);
            mbr.ymax = mbr.ymax.max(p.y);
        }
        Some(mbr)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn intersects(&self, other: &Mbr) -> bool {
        self.xmin <= other.xmax
            && other.xmin <= self.xmax
            && self.ymin <= other.ymax
            && other.ymin <= self.ymax
    }

    /// `self` lies completely inside `other` (closed comparison).
    pub fn within(&self, other: &Mbr) -> bool {
        other.xmin <= self.xmin
            && self.xmax <= other.xmax
            && other.ymin <= self.ymin
            && self.ymax <= other.ymax
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.xmin <= p.x && p.x <= self.xmax && self.ymin <= p.y && p.y <= self.ymax
    }

    pub fn union(&self, other: &Mbr) -> Mbr {
        Mbr {
            xmin: self.xmin.min(other.xmin),
            ymin: self.ymin.min(other.ymin),
            xmax: self.xmax.max(other.xmax),
            ymax: self.ymax.max(other.ymax),
        }
    }

    /// Common region of two intersecting rectangles.
    pub fn intersection(&self, other: &Mbr) -> Option<Mbr> {
        if !self.intersects(other) {
            return None;
        }
        Some(Mbr {
            xmin: self.xmin.max(other.xmin),
            ymin: self.ymin.max(other.ymin),
            xmax: self.xmax.min(other.xmax),
            ymax: self.ymax.min(other.ymax),
        })
    }
}

pub fn mbr_relate(a: &Mbr, b: &Mbr, predicate: MbrPredicate) -> bool {
    match predicate {
        MbrPredicate::Intersects => a.intersects(b),
        MbrPredicate::Within => a.within(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Result<Self> {
        if a == b {
            return Err(Error::DegenerateGeometry("segment endpoints coincide".into()));
        }
        Ok(Segment { a, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

impl Location {
    /// Inside or on the boundary.
    pub fn is_covered(self) -> bool {
        self != Location::Outside
    }
}

/// Simple polygon without holes. The ring is stored open (the closing vertex is
/// implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct SimplePolygon {
    ring: Vec<Point>,
    mbr: Mbr,
}

impl SimplePolygon {
    /// Validates and normalizes a ring: an explicit closing vertex and repeated
    /// consecutive vertices are dropped. Rejects rings with fewer than three
    /// distinct vertices, zero area or self-intersections.
    pub fn new(ring: Vec<Point>) -> Result<Self> {
        let poly = Self::new_unchecked_simple(ring)?;
        if poly.ring.len() > 3 && has_self_intersection(&poly.ring) {
            return Err(Error::DegenerateGeometry("self-intersecting ring".into()));
        }
        Ok(poly)
    }

    /// Like [`SimplePolygon::new`] but skips the quadratic self-intersection
    /// check. For rings that are simple by construction.
    pub fn new_unchecked_simple(mut ring: Vec<Point>) -> Result<Self> {
        if ring.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite coordinate".into()));
        }
        ring.dedup();
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "polygon needs at least 3 distinct vertices, got {}",
                ring.len()
            )));
        }
        let mbr = Mbr::of_points(&ring).expect("non-empty ring");
        let area = signed_area(&ring).abs();
        if !(area > EPSILON * mbr.area()) || mbr.area() == 0.0 {
            return Err(Error::DegenerateGeometry("polygon has zero area".into()));
        }
        Ok(SimplePolygon { ring, mbr })
    }

    pub fn ring(&self) -> &[Point] {
        &self.ring
    }

    pub fn mbr(&self) -> &Mbr {
        &self.mbr
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        ring_edges(&self.ring)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.ring).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linestring {
    vertices: Vec<Point>,
    mbr: Mbr,
}

impl Linestring {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite coordinate".into()));
        }
        vertices.dedup();
        if vertices.len() < 2 {
            return Err(Error::DegenerateGeometry(
                "linestring needs at least 2 distinct vertices".into(),
            ));
        }
        let mbr = Mbr::of_points(&vertices).expect("non-empty");
        Ok(Linestring { vertices, mbr })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn mbr(&self) -> &Mbr {
        &self.mbr
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }
}

pub(crate) fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

pub(crate) fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

#[inline]
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sign of the turn o→a→b: 1 left, -1 right, 0 collinear within tolerance.
#[inline]
pub(crate) fn orientation(o: Point, a: Point, b: Point) -> i8 {
    let c = cross(o, a, b);
    let la = (a.x - o.x).hypot(a.y - o.y);
    let lb = (b.x - o.x).hypot(b.y - o.y);
    // The coordinate differences carry rounding error proportional to the
    // coordinate magnitude, which dominates for short edges far from 0.
    let m = o.x.abs().max(o.y.abs()).max(a.x.abs()).max(a.y.abs()).max(b.x.abs()).max(b.y.abs());
    if c.abs() <= EPSILON * la * lb + 4.0 * f64::EPSILON * m * (la + lb) {
        0
    } else if c > 0.0 {
        1
    } else {
        -1
    }
}

/// `p` is collinear with segment a–b and lies within its bounding box.
#[inline]
pub(crate) fn on_segment(p: Point, a: Point, b: Point) -> bool {
    within_box(p, a, b) && orientation(a, b, p) == 0
}

#[inline]
fn within_box(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segments share at least one point.
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> bool {
    seg_intersect(s1.a, s1.b, s2.a, s2.b)
}

pub(crate) fn seg_intersect(p1: Point, q1: Point, p2: Point, q2: Point) -> bool {
    if p1.x.max(q1.x) < p2.x.min(q2.x)
        || p2.x.max(q2.x) < p1.x.min(q1.x)
        || p1.y.max(q1.y) < p2.y.min(q2.y)
        || p2.y.max(q2.y) < p1.y.min(q1.y)
    {
        return false;
    }
    let o1 = orientation(p1, q1, p2);
    let o2 = orientation(p1, q1, q2);
    let o3 = orientation(p2, q2, p1);
    let o4 = orientation(p2, q2, q1);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && within_box(p2, p1, q1))
        || (o2 == 0 && within_box(q2, p1, q1))
        || (o3 == 0 && within_box(p1, p2, q2))
        || (o4 == 0 && within_box(q1, p2, q2))
}

/// Ray casting against a raw ring. A crossing is counted only when the edge's
/// lower endpoint is strictly below the ray.
pub(crate) fn locate_in_ring(p: Point, ring: &[Point]) -> Location {
    let mut inside = false;
    for (a, b) in ring_edges(ring) {
        if on_segment(p, a, b) {
            return Location::Boundary;
        }
        if (a.y < p.y) != (b.y < p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

pub fn point_in_polygon(p: &Point, poly: &SimplePolygon) -> Location {
    if !poly.mbr.contains_point(p) {
        return Location::Outside;
    }
    locate_in_ring(*p, &poly.ring)
}

fn has_self_intersection(ring: &[Point]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, b1) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let (a2, b2) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Neighbouring edges share a vertex; they are only a problem
                // when they fold back onto each other.
                let shared = if j == i + 1 { b1 } else { a1 };
                let (u, v) = if j == i + 1 { (a1, b2) } else { (b1, a2) };
                if orientation(shared, u, v) == 0 {
                    let du = (u.x - shared.x, u.y - shared.y);
                    let dv = (v.x - shared.x, v.y - shared.y);
                    if du.0 * dv.0 + du.1 * dv.1 > 0.0 {
                        return true;
                    }
                }
                continue;
            }
            if seg_intersect(a1, b1, a2, b2) {
                return true;
            }
        }
    }
    false
}

fn edges_cross(
    a: impl Iterator<Item = (Point, Point)>,
    b_edges: &[(Point, Point)],
    b_mbr: &Mbr,
) -> bool {
    for (p, q) in a {
        let emin_x = p.x.min(q.x);
        let emax_x = p.x.max(q.x);
        let emin_y = p.y.min(q.y);
        let emax_y = p.y.max(q.y);
        if emax_x < b_mbr.xmin || emin_x > b_mbr.xmax || emax_y < b_mbr.ymin || emin_y > b_mbr.ymax
        {
            continue;
        }
        if b_edges.iter().any(|&(r, s)| seg_intersect(p, q, r, s)) {
            return true;
        }
    }
    false
}

/// The polygons share at least one point.
pub fn polygons_intersect(r: &SimplePolygon, s: &SimplePolygon) -> bool {
    if !r.mbr.intersects(&s.mbr) {
        return false;
    }
    let s_edges: Vec<_> = s.edges().collect();
    if edges_cross(r.edges(), &s_edges, &s.mbr) {
        return true;
    }
    point_in_polygon(&r.ring[0], s).is_covered() || point_in_polygon(&s.ring[0], r).is_covered()
}

/// `r` is completely covered by `s`.
///
/// Every edge of `r` is split at its contact points with the boundary of `s`;
/// `r` lies within `s` iff all vertices and all piece midpoints are covered by
/// `s`. Since `s` has no holes, covering the boundary of `r` covers `r`.
pub fn polygon_within(r: &SimplePolygon, s: &SimplePolygon) -> bool {
    if !r.mbr.within(&s.mbr) {
        return false;
    }
    if r.ring.iter().any(|v| !point_in_polygon(v, s).is_covered()) {
        return false;
    }
    let s_edges: Vec<_> = s.edges().collect();
    let mut params: Vec<f64> = Vec::new();
    for (a, b) in r.edges() {
        params.clear();
        params.push(0.0);
        params.push(1.0);
        let d = (b.x - a.x, b.y - a.y);
        let len2 = d.0 * d.0 + d.1 * d.1;
        for &(c, e) in &s_edges {
            if !seg_intersect(a, b, c, e) {
                continue;
            }
            // Contact parameters: the endpoints of s-edge projected when
            // collinear/touching, plus the proper crossing point.
            for v in [c, e] {
                if on_segment(v, a, b) {
                    params.push(((v.x - a.x) * d.0 + (v.y - a.y) * d.1) / len2);
                }
            }
            let denom = d.0 * (e.y - c.y) - d.1 * (e.x - c.x);
            if denom != 0.0 {
                let t = ((c.x - a.x) * (e.y - c.y) - (c.y - a.y) * (e.x - c.x)) / denom;
                if (0.0..=1.0).contains(&t) {
                    params.push(t);
                }
            }
        }
        params.sort_by(|x, y| x.total_cmp(y));
        for w in params.windows(2) {
            if w[1] - w[0] <= 1e-15 {
                continue;
            }
            let t = 0.5 * (w[0] + w[1]);
            let m = Point::new(a.x + t * d.0, a.y + t * d.1);
            if !point_in_polygon(&m, s).is_covered() {
                return false;
            }
        }
    }
    true
}

pub fn polygon_linestring_intersect(poly: &SimplePolygon, ls: &Linestring) -> bool {
    if !poly.mbr.intersects(&ls.mbr) {
        return false;
    }
    let edges: Vec<_> = poly.edges().collect();
    if edges_cross(ls.segments(), &edges, &poly.mbr) {
        return true;
    }
    point_in_polygon(&ls.vertices[0], poly).is_covered()
}
