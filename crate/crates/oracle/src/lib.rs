//! Brute-force references and random workloads for testing `april-core`.
//!
//! Nothing here reuses the core rasterizer or geometry predicates: cells are
//! classified one by one with separating-axis tests, Sutherland–Hodgman
//! clipping and winding numbers, and joins are evaluated over all pairs.

use april_core::geom::{Linestring, Mbr, Point, SimplePolygon};
use april_core::grid::{CellCoord, CellId, GridConfig};
use april_core::intervals::IntervalList;
use april_core::pipeline::{Dataset, Geometry, Object, Predicate};
use rand::Rng;

pub const STRONG_THRESHOLD: f64 = 0.5 + 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellType {
    Full,
    Strong,
    Weak,
    Empty,
}

impl CellType {
    pub fn is_partial(self) -> bool {
        matches!(self, CellType::Strong | CellType::Weak)
    }
}

/// Hilbert id table built by recursive quadrant construction:
/// `table[row][col]`.
pub fn hilbert_reference(order: u8) -> Vec<Vec<u32>> {
    let side = 1u32 << order;
    (0..side).map(|r| (0..side).map(|c| hilbert_rec(order, c, r)).collect()).collect()
}

fn hilbert_rec(order: u8, c: u32, r: u32) -> u32 {
    if order == 0 {
        return 0;
    }
    let h = 1u32 << (order - 1);
    let q = h * h;
    match (c < h, r < h) {
        (true, true) => hilbert_rec(order - 1, r, c),
        (true, false) => q + hilbert_rec(order - 1, c, r - h),
        (false, false) => 2 * q + hilbert_rec(order - 1, c - h, r - h),
        (false, true) => 3 * q + hilbert_rec(order - 1, h - 1 - r, h - 1 - (c - h)),
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Segment vs axis-aligned box by separating axes. With `open`, the box
/// interior only.
fn seg_box(a: (f64, f64), b: (f64, f64), x0: f64, y0: f64, x1: f64, y1: f64, open: bool) -> bool {
    let (sx0, sx1) = (a.0.min(b.0), a.0.max(b.0));
    let (sy0, sy1) = (a.1.min(b.1), a.1.max(b.1));
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let sides: Vec<f64> = corners.iter().map(|&c| cross(a, b, c)).collect();
    let lo = sides.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sides.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if open {
        sx1 > x0 && sx0 < x1 && sy1 > y0 && sy0 < y1 && lo < 0.0 && hi > 0.0
    } else {
        sx1 >= x0 && sx0 <= x1 && sy1 >= y0 && sy0 <= y1 && lo <= 0.0 && hi >= 0.0
    }
}

/// Non-zero winding number test; `p` must not lie on the boundary.
pub fn winding_inside(p: (f64, f64), ring: &[(f64, f64)]) -> bool {
    let mut wn = 0i32;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        if a.1 <= p.1 {
            if b.1 > p.1 && cross(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.1 <= p.1 && cross(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

/// Area of `ring` inside the box, by clipping against its four sides.
pub fn clipped_area(ring: &[(f64, f64)], x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let mut poly: Vec<(f64, f64)> = ring.to_vec();
    let planes: [(usize, f64, bool); 4] = [(0, x0, true), (0, x1, false), (1, y0, true), (1, y1, false)];
    for (axis, v, keep_above) in planes {
        if poly.is_empty() {
            break;
        }
        let coord = |p: &(f64, f64)| if axis == 0 { p.0 } else { p.1 };
        let inside = |p: &(f64, f64)| if keep_above { coord(p) >= v } else { coord(p) <= v };
        let mut out = Vec::with_capacity(poly.len() + 4);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (v - coord(&prev)) / (coord(&cur) - coord(&prev));
                out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
            }
            if ci {
                out.push(cur);
            }
        }
        poly = out;
    }
    shoelace(&poly).abs()
}

pub fn shoelace(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s
}

fn grid_ring(poly: &SimplePolygon, g: &GridConfig) -> Vec<(f64, f64)> {
    poly.ring().iter().map(|p| g.to_grid_units(p)).collect()
}

fn classify_cell(ring: &[(f64, f64)], c: u32, r: u32) -> CellType {
    let (x0, y0, x1, y1) = (c as f64, r as f64, c as f64 + 1.0, r as f64 + 1.0);
    let n = ring.len();
    let mut touched = false;
    let mut crossed = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if seg_box(a, b, x0, y0, x1, y1, false) {
            touched = true;
            if seg_box(a, b, x0, y0, x1, y1, true) {
                crossed = true;
                break;
            }
        }
    }
    if crossed {
        let cov = clipped_area(ring, x0, y0, x1, y1);
        return if cov > STRONG_THRESHOLD { CellType::Strong } else { CellType::Weak };
    }
    let inside = winding_inside((x0 + 0.5, y0 + 0.5), ring);
    match (inside, touched) {
        (true, _) => CellType::Full,
        (false, true) => CellType::Weak,
        (false, false) => CellType::Empty,
    }
}

/// Type of every non-empty cell, sorted by Hilbert id. Cells are examined one
/// at a time over the polygon's bounding window.
pub fn brute_classify(poly: &SimplePolygon, g: &GridConfig) -> Vec<(CellId, CellType)> {
    let ring = grid_ring(poly, g);
    let side = g.side() as i64;
    let lo = |v: f64| ((v.floor() as i64) - 1).clamp(0, side - 1) as u32;
    let hi = |v: f64| ((v.floor() as i64) + 1).clamp(0, side - 1) as u32;
    let umin = ring.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let umax = ring.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let vmin = ring.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let vmax = ring.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    classify_window(&ring, g, (lo(umin), hi(umax)), (lo(vmin), hi(vmax)))
}

/// [`brute_classify`] over every cell of the grid, not just the polygon's
/// window.
pub fn brute_classify_all(poly: &SimplePolygon, g: &GridConfig) -> Vec<(CellId, CellType)> {
    let last = g.side() - 1;
    classify_window(&grid_ring(poly, g), g, (0, last), (0, last))
}

fn classify_window(
    ring: &[(f64, f64)],
    g: &GridConfig,
    cols: (u32, u32),
    rows: (u32, u32),
) -> Vec<(CellId, CellType)> {
    let mut out = Vec::new();
    for r in rows.0..=rows.1 {
        for c in cols.0..=cols.1 {
            let t = classify_cell(ring, c, r);
            if t != CellType::Empty {
                out.push((g.hilbert_index(CellCoord::new(c, r)).unwrap(), t));
            }
        }
    }
    out.sort_unstable_by_key(|&(id, _)| id);
    out
}

/// The A- and F-lists implied by [`brute_classify`].
pub fn brute_april(poly: &SimplePolygon, g: &GridConfig) -> (IntervalList, IntervalList) {
    let cells = brute_classify(poly, g);
    let all: Vec<CellId> = cells.iter().map(|&(c, _)| c).collect();
    let full: Vec<CellId> = cells.iter().filter(|(_, t)| *t == CellType::Full).map(|&(c, _)| c).collect();
    (runs(&all), runs(&full))
}

/// Sorted distinct ids to maximal half-open runs.
pub fn runs(cells: &[CellId]) -> IntervalList {
    let mut iv: Vec<(u32, u32)> = Vec::new();
    for &c in cells {
        match iv.last_mut() {
            Some(last) if last.1 == c => last.1 += 1,
            _ => iv.push((c, c + 1)),
        }
    }
    IntervalList::from_intervals(iv).unwrap()
}

/// Cells touched by a linestring (closed boxes), sorted.
pub fn brute_linestring_cells(ls: &Linestring, g: &GridConfig) -> Vec<CellId> {
    let pts: Vec<(f64, f64)> = ls.vertices().iter().map(|p| g.to_grid_units(p)).collect();
    let side = g.side() as i64;
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c0 = ((a.0.min(b.0).floor() as i64) - 1).clamp(0, side - 1);
        let c1 = ((a.0.max(b.0).floor() as i64) + 1).clamp(0, side - 1);
        let r0 = ((a.1.min(b.1).floor() as i64) - 1).clamp(0, side - 1);
        let r1 = ((a.1.max(b.1).floor() as i64) + 1).clamp(0, side - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (x, y) = (c as f64, r as f64);
                if seg_box(a, b, x, y, x + 1.0, y + 1.0, false) {
                    out.push(g.hilbert_index(CellCoord::new(c as u32, r as u32)).unwrap());
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

// ---------------------------------------------------------------------------
// Exact predicates

fn pt(p: &Point) -> (f64, f64) {
    (p.x, p.y)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn on_seg(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    cross(a, b, p) == 0.0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

fn near_seg(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    let ab = (b.0 - a.0).hypot(b.1 - a.1);
    let ap = (p.0 - a.0).hypot(p.1 - a.1);
    let tol = 1e-12 * ab.max(ap).max(1e-300);
    cross(a, b, p).abs() <= tol * ab
        && p.0 >= a.0.min(b.0) - tol
        && p.0 <= a.0.max(b.0) + tol
        && p.1 >= a.1.min(b.1) - tol
        && p.1 <= a.1.max(b.1) + tol
}

/// Closed segments share a point.
pub fn segments_meet(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = sign(cross(c, d, a));
    let d2 = sign(cross(c, d, b));
    let d3 = sign(cross(a, b, c));
    let d4 = sign(cross(a, b, d));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    on_seg(a, c, d) || on_seg(b, c, d) || on_seg(c, a, b) || on_seg(d, a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    Inside,
    Boundary,
    Outside,
}

/// Boundary membership uses a small relative tolerance so that points
/// computed on an edge (midpoints, crossings) still register as on it.
pub fn locate(p: (f64, f64), ring: &[(f64, f64)]) -> Loc {
    let n = ring.len();
    for i in 0..n {
        if near_seg(p, ring[i], ring[(i + 1) % n]) {
            return Loc::Boundary;
        }
    }
    if winding_inside(p, ring) {
        Loc::Inside
    } else {
        Loc::Outside
    }
}

fn ring_of(p: &SimplePolygon) -> Vec<(f64, f64)> {
    p.ring().iter().map(pt).collect()
}

fn edges(ring: &[(f64, f64)]) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

/// Closed polygons share a point.
pub fn exact_intersects(r: &SimplePolygon, s: &SimplePolygon) -> bool {
    let (a, b) = (ring_of(r), ring_of(s));
    for (p, q) in edges(&a) {
        for (u, v) in edges(&b) {
            if segments_meet(p, q, u, v) {
                return true;
            }
        }
    }
    locate(a[0], &b) != Loc::Outside || locate(b[0], &a) != Loc::Outside
}

/// `r` covered by `s`: vertices covered and every stretch of r's boundary
/// between contacts with s's boundary covered.
pub fn exact_within(r: &SimplePolygon, s: &SimplePolygon) -> bool {
    let (a, b) = (ring_of(r), ring_of(s));
    if a.iter().any(|&p| locate(p, &b) == Loc::Outside) {
        return false;
    }
    for (p, q) in edges(&a) {
        let mut ts = vec![0.0, 1.0];
        let d = (q.0 - p.0, q.1 - p.1);
        let len2 = d.0 * d.0 + d.1 * d.1;
        for (u, v) in edges(&b) {
            if !segments_meet(p, q, u, v) {
                continue;
            }
            for w in [u, v] {
                if on_seg(w, p, q) {
                    ts.push(((w.0 - p.0) * d.0 + (w.1 - p.1) * d.1) / len2);
                }
            }
            let e = (v.0 - u.0, v.1 - u.1);
            let den = d.0 * e.1 - d.1 * e.0;
            if den != 0.0 {
                let t = ((u.0 - p.0) * e.1 - (u.1 - p.1) * e.0) / den;
                ts.push(t.clamp(0.0, 1.0));
            }
        }
        ts.sort_by(f64::total_cmp);
        for w in ts.windows(2) {
            if w[1] > w[0] {
                let t = 0.5 * (w[0] + w[1]);
                if locate((p.0 + t * d.0, p.1 + t * d.1), &b) == Loc::Outside {
                    return false;
                }
            }
        }
    }
    true
}

pub fn exact_poly_line(r: &SimplePolygon, l: &Linestring) -> bool {
    let a = ring_of(r);
    let v: Vec<(f64, f64)> = l.vertices().iter().map(pt).collect();
    for w in v.windows(2) {
        for (p, q) in edges(&a) {
            if segments_meet(w[0], w[1], p, q) {
                return true;
            }
        }
    }
    locate(v[0], &a) != Loc::Outside
}

pub fn exact_predicate(a: &Geometry, b: &Geometry, predicate: Predicate) -> bool {
    match (predicate, a, b) {
        (Predicate::Intersects, Geometry::Polygon(x), Geometry::Polygon(y)) => exact_intersects(x, y),
        (Predicate::Within, Geometry::Polygon(x), Geometry::Polygon(y)) => exact_within(x, y),
        (Predicate::PolyLine, Geometry::Polygon(x), Geometry::Linestring(y)) => exact_poly_line(x, y),
        _ => false,
    }
}

/// All-pairs exact join, sorted by id pair.
pub fn naive_join(r: &Dataset, s: &Dataset, predicate: Predicate) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for a in r.objects() {
        for b in s.objects() {
            if exact_predicate(&a.geometry, &b.geometry, predicate) {
                out.push((a.id, b.id));
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn naive_selection(q: &SimplePolygon, d: &Dataset) -> Vec<u32> {
    let mut out: Vec<u32> = d
        .objects()
        .iter()
        .filter(|o| match &o.geometry {
            Geometry::Polygon(p) => exact_intersects(q, p),
            Geometry::Linestring(l) => exact_poly_line(q, l),
        })
        .map(|o| o.id)
        .collect();
    out.sort_unstable();
    out
}

// ---------------------------------------------------------------------------
// Random workloads

/// Star-shaped polygon: sorted random angles, radii in `[rmin, rmax]`.
/// Always simple.
pub fn star_polygon<R: Rng>(rng: &mut R, center: Point, rmin: f64, rmax: f64, max_vertices: usize) -> SimplePolygon {
    loop {
        let n = rng.random_range(3..=max_vertices.max(3));
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let ring: Vec<Point> = angles
            .iter()
            .map(|&a| {
                let rad = rng.random_range(rmin..=rmax);
                Point::new(center.x + rad * a.cos(), center.y + rad * a.sin())
            })
            .collect();
        if let Ok(p) = SimplePolygon::new(ring) {
            return p;
        }
    }
}

/// Star polygon kept inside `extent`.
pub fn polygon_in<R: Rng>(rng: &mut R, extent: &Mbr, rmin: f64, rmax: f64, max_vertices: usize) -> SimplePolygon {
    let cx = rng.random_range(extent.xmin + rmax..=extent.xmax - rmax);
    let cy = rng.random_range(extent.ymin + rmax..=extent.ymax - rmax);
    star_polygon(rng, Point::new(cx, cy), rmin, rmax, max_vertices)
}

/// Polygon whose vertices sit on integer or half-integer grid coordinates of
/// `g`, so edges run along cell borders, through cell corners and centers.
pub fn snapped_polygon<R: Rng>(rng: &mut R, g: &GridConfig, rmin_cells: f64, rmax_cells: f64) -> SimplePolygon {
    let side = g.side() as f64;
    loop {
        let cx = rng.random_range(rmax_cells + 1.0..=side - rmax_cells - 1.0);
        let cy = rng.random_range(rmax_cells + 1.0..=side - rmax_cells - 1.0);
        let n = rng.random_range(3..=10);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let ring: Vec<Point> = angles
            .iter()
            .map(|&a| {
                let rad = rng.random_range(rmin_cells..=rmax_cells);
                let u = ((cx + rad * a.cos()) * 2.0).round() / 2.0;
                let v = ((cy + rad * a.sin()) * 2.0).round() / 2.0;
                g.from_grid_units(u, v)
            })
            .collect();
        if let Ok(p) = SimplePolygon::new(ring) {
            return p;
        }
    }
}

pub fn polygon_dataset<R: Rng>(rng: &mut R, n: usize, extent: &Mbr, rmin: f64, rmax: f64) -> Dataset {
    Dataset::from_polygons((0..n).map(|_| polygon_in(rng, extent, rmin, rmax, 12)))
}

pub fn linestring_in<R: Rng>(rng: &mut R, extent: &Mbr, step: f64, max_vertices: usize) -> Linestring {
    loop {
        let n = rng.random_range(2..=max_vertices.max(2));
        let mut p = Point::new(
            rng.random_range(extent.xmin..=extent.xmax),
            rng.random_range(extent.ymin..=extent.ymax),
        );
        let mut v = vec![p];
        for _ in 1..n {
            p = Point::new(
                (p.x + rng.random_range(-step..=step)).clamp(extent.xmin, extent.xmax),
                (p.y + rng.random_range(-step..=step)).clamp(extent.ymin, extent.ymax),
            );
            v.push(p);
        }
        if let Ok(l) = Linestring::new(v) {
            return l;
        }
    }
}

pub fn linestring_dataset<R: Rng>(rng: &mut R, n: usize, extent: &Mbr, step: f64) -> Dataset {
    let objects = (0..n)
        .map(|i| Object { id: i as u32, geometry: Geometry::Linestring(linestring_in(rng, extent, step, 6)) })
        .collect();
    Dataset::new(objects).unwrap()
}

/// Random interval list below `max_id` with up to `max_len` intervals.
pub fn random_intervals<R: Rng>(rng: &mut R, max_id: u32, max_len: usize) -> IntervalList {
    let k = rng.random_range(0..=max_len) * 2;
    let mut v: Vec<u32> = (0..k).map(|_| rng.random_range(0..max_id)).collect();
    v.sort_unstable();
    v.dedup();
    if v.len() % 2 == 1 {
        v.pop();
    }
    IntervalList::from_flat(v).unwrap()
}

/// Interval list with the locality of a real approximation: runs of short
/// gaps and lengths starting somewhere in a large id space.
pub fn clustered_intervals<R: Rng>(rng: &mut R, max_len: usize) -> IntervalList {
    let n = rng.random_range(1..=max_len);
    let mut cur: u32 = rng.random_range(0..(1u32 << 30));
    let mut iv = Vec::with_capacity(n);
    for _ in 0..n {
        let s = cur + rng.random_range(1..200);
        let e = s + rng.random_range(1..100);
        iv.push((s, e));
        cur = e;
    }
    IntervalList::from_intervals(iv).unwrap()
}
