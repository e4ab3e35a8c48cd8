//! Cell classification of geometries on a [`GridConfig`].
//!
//! Partial cells come from a supercover DDA walk over every edge: a cell is
//! touched when its closed box meets the edge. A touched cell whose interior
//! is never entered by an edge can still be fully covered (an edge lying on a
//! grid line); those are resolved with one point-in-polygon probe at the cell
//! center and left to the fill stage when inside.
//!
//! Full cells come from either a scanline fill (no point-in-polygon tests) or
//! a flood fill seeded once per unlabeled region.
//!
//! All work happens in grid units, where cell (c, r) spans [c, c+1] x [r, r+1].

use crate::error::{Error, Result};
use crate::geom::{locate_in_ring, Linestring, Location, Point, SimplePolygon};
use crate::grid::{CellId, GridConfig};

/// Coverage above which a partial cell counts as Strong. Anything closer to
/// one half stays Weak, which is the conservative side.
pub const STRONG_THRESHOLD: f64 = 0.5 + 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Full,
    Partial,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriClass {
    Full,
    Strong,
    Weak,
}

impl TriClass {
    pub fn collapse(self) -> CellClass {
        match self {
            TriClass::Full => CellClass::Full,
            TriClass::Strong | TriClass::Weak => CellClass::Partial,
        }
    }
}

/// Non-empty cells of a polygon, split by class. Both lists are strictly
/// ascending and disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RasterCells {
    pub partial: Vec<CellId>,
    pub full: Vec<CellId>,
}

/// Full cells plus the number of point-in-polygon tests spent finding them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FillOutcome {
    pub full: Vec<CellId>,
    pub pip_tests: usize,
}

/// A polygon ring expressed in grid units.
#[derive(Debug, Clone)]
pub(crate) struct GridRing {
    pub(crate) pts: Vec<Point>,
    umin: f64,
    vmin: f64,
    umax: f64,
    vmax: f64,
}

impl GridRing {
    pub(crate) fn new(points: &[Point], grid: &GridConfig) -> Result<Self> {
        let ext = grid.extent();
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            if !ext.contains_point(p) {
                return Err(Error::OutsideExtent { x: p.x, y: p.y });
            }
            let (u, v) = grid.to_grid_units(p);
            pts.push(Point::new(u, v));
        }
        let mut r = GridRing { pts, umin: f64::MAX, vmin: f64::MAX, umax: f64::MIN, vmax: f64::MIN };
        for p in &r.pts {
            r.umin = r.umin.min(p.x);
            r.vmin = r.vmin.min(p.y);
            r.umax = r.umax.max(p.x);
            r.vmax = r.vmax.max(p.y);
        }
        Ok(r)
    }

    pub(crate) fn contains_center(&self, col: u32, row: u32) -> Location {
        locate_in_ring(Point::new(col as f64 + 0.5, row as f64 + 0.5), &self.pts)
    }

    /// The closed box of cell (col, row) lies inside the ring's bounding box.
    pub(crate) fn box_inside_bounds(&self, col: u32, row: u32) -> bool {
        let (c, r) = (col as f64, row as f64);
        self.umin <= c && c + 1.0 <= self.umax && self.vmin <= r && r + 1.0 <= self.vmax
    }

    /// Inclusive column/row window of cells meeting the ring's bounding box
    /// interior-side (floor convention).
    fn window(&self, side: u32) -> (u32, u32, u32, u32) {
        let max = (side - 1) as f64;
        let c0 = self.umin.floor().clamp(0.0, max) as u32;
        let c1 = self.umax.floor().clamp(0.0, max) as u32;
        let r0 = self.vmin.floor().clamp(0.0, max) as u32;
        let r1 = self.vmax.floor().clamp(0.0, max) as u32;
        (c0, c1, r0, r1)
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.pts.len();
        (0..n).map(move |i| (self.pts[i], self.pts[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, Copy)]
struct Touch {
    id: CellId,
    /// The edge enters the open interior of the cell.
    crossed: bool,
}

/// Visits every cell whose closed box meets the closed segment p–q, reporting
/// whether the open cell interior is entered.
fn walk_segment(p: Point, q: Point, side: u32, mut visit: impl FnMut(u32, u32, bool)) {
    let (p, q) = if p.x <= q.x { (p, q) } else { (q, p) };
    let max = side as i64 - 1;
    let clamp = |v: i64| v.clamp(0, max);
    let rows_of = |vlo: f64, vhi: f64| -> (i64, i64) {
        let r0 = vlo.ceil() as i64 - 1;
        let r1 = vhi.floor() as i64;
        (clamp(r0), clamp(r1))
    };

    if p.x == q.x {
        let u = p.x;
        let (vlo, vhi) = if p.y <= q.y { (p.y, q.y) } else { (q.y, p.y) };
        let (r0, r1) = rows_of(vlo, vhi);
        let (c0, c1) = (clamp(u.ceil() as i64 - 1), clamp(u.floor() as i64));
        for c in c0..=c1 {
            let inside_strip = (c as f64) < u && u < (c + 1) as f64;
            for r in r0..=r1 {
                let crossed = inside_strip && vlo < (r + 1) as f64 && vhi > r as f64;
                visit(c as u32, r as u32, crossed);
            }
        }
        return;
    }

    let (du, dv) = (q.x - p.x, q.y - p.y);
    let v_at = |u: f64| -> f64 {
        if u == p.x {
            p.y
        } else if u == q.x {
            q.y
        } else {
            p.y + (u - p.x) * dv / du
        }
    };
    let c0 = clamp(p.x.ceil() as i64 - 1);
    let c1 = clamp(q.x.floor() as i64);
    for c in c0..=c1 {
        let lo = (c as f64).max(p.x);
        let hi = ((c + 1) as f64).min(q.x);
        if lo > hi {
            continue;
        }
        let (va, vb) = (v_at(lo), v_at(hi));
        let (vlo, vhi) = if va <= vb { (va, vb) } else { (vb, va) };
        let (r0, r1) = rows_of(vlo, vhi);
        let open_u = lo < hi;
        for r in r0..=r1 {
            let (rf, rf1) = (r as f64, (r + 1) as f64);
            let crossed = open_u
                && if vlo < vhi { vlo < rf1 && vhi > rf } else { rf < vlo && vlo < rf1 };
            visit(c as u32, r as u32, crossed);
        }
    }
}

fn collect_touches(
    segments: impl Iterator<Item = (Point, Point)>,
    grid: &GridConfig,
) -> Vec<Touch> {
    let side = grid.side();
    let mut touches = Vec::new();
    for (p, q) in segments {
        walk_segment(p, q, side, |c, r, crossed| {
            touches.push(Touch { id: grid.id_of(c, r), crossed });
        });
    }
    touches.sort_unstable_by_key(|t| t.id);
    let mut merged: Vec<Touch> = Vec::with_capacity(touches.len());
    for t in touches {
        match merged.last_mut() {
            Some(last) if last.id == t.id => last.crossed |= t.crossed,
            _ => merged.push(t),
        }
    }
    merged
}

pub(crate) fn partial_cells_of_ring(ring: &GridRing, grid: &GridConfig) -> Vec<CellId> {
    collect_touches(ring.edges(), grid)
        .into_iter()
        .filter(|t| {
            if t.crossed {
                return true;
            }
            // Boundary-only contact: full coverage wins, otherwise Partial.
            let (c, r) = grid.coord_of(t.id);
            ring.contains_center(c, r) == Location::Outside
        })
        .map(|t| t.id)
        .collect()
}

/// Sorted Hilbert ids of the cells the polygon boundary passes through.
pub fn dda_partial_cells(poly: &SimplePolygon, grid: &GridConfig) -> Result<Vec<CellId>> {
    let ring = GridRing::new(poly.ring(), grid)?;
    Ok(partial_cells_of_ring(&ring, grid))
}

/// Sorted Hilbert ids of every cell a linestring touches.
pub fn rasterize_linestring(ls: &Linestring, grid: &GridConfig) -> Result<Vec<CellId>> {
    let ext = grid.extent();
    let mut pts = Vec::with_capacity(ls.vertices().len());
    for p in ls.vertices() {
        if !ext.contains_point(p) {
            return Err(Error::OutsideExtent { x: p.x, y: p.y });
        }
        let (u, v) = grid.to_grid_units(p);
        pts.push(Point::new(u, v));
    }
    let segs = pts.windows(2).map(|w| (w[0], w[1]));
    Ok(collect_touches(segs, grid).into_iter().map(|t| t.id).collect())
}

pub(crate) fn check_sorted(cells: &[CellId]) -> Result<()> {
    match cells.windows(2).position(|w| w[0] >= w[1]) {
        Some(i) => Err(Error::UnsortedCells(i + 1)),
        None => Ok(()),
    }
}

pub(crate) fn scanline_fill(ring: &GridRing, grid: &GridConfig, partials: &[CellId]) -> Vec<CellId> {
    let side = grid.side();
    let max = (side - 1) as f64;
    // (row, x) crossings of each row's center line, half-open in v.
    let mut events: Vec<(u32, f64)> = Vec::new();
    for (a, b) in ring.edges() {
        if a.y == b.y {
            continue;
        }
        let (lo, hi) = if a.y < b.y { (a.y, b.y) } else { (b.y, a.y) };
        let r0 = ((lo - 0.5).floor() + 1.0).max(0.0);
        let r1 = (hi - 0.5).floor().min(max);
        if r0 > r1 {
            continue;
        }
        let slope = (b.x - a.x) / (b.y - a.y);
        for r in (r0 as u32)..=(r1 as u32) {
            let y = r as f64 + 0.5;
            events.push((r, a.x + (y - a.y) * slope));
        }
    }
    events.sort_unstable_by(|l, r| l.0.cmp(&r.0).then(l.1.total_cmp(&r.1)));

    let mut full = Vec::new();
    for row_events in events.chunk_by(|l, r| l.0 == r.0) {
        let row = row_events[0].0;
        for pair in row_events.chunks_exact(2) {
            let c0 = (pair[0].1 - 0.5).ceil().clamp(0.0, max) as u32;
            let c1f = (pair[1].1 - 0.5).floor();
            if c1f < 0.0 {
                continue;
            }
            let c1 = c1f.min(max) as u32;
            for c in c0..=c1 {
                let id = grid.id_of(c, row);
                if partials.binary_search(&id).is_err() {
                    full.push(id);
                }
            }
        }
    }
    full.sort_unstable();
    full
}

/// Full cells by scanline: per grid row, crossings of the row's center line
/// with the polygon are sorted by x and every non-partial cell between an
/// entering and a leaving crossing is Full. Performs no point-in-polygon tests.
pub fn scanline_full_cells(
    poly: &SimplePolygon,
    grid: &GridConfig,
    partials: &[CellId],
) -> Result<Vec<CellId>> {
    check_sorted(partials)?;
    let ring = GridRing::new(poly.ring(), grid)?;
    Ok(scanline_fill(&ring, grid, partials))
}

const UNKNOWN: u8 = 0;
const PARTIAL: u8 = 1;
const FULL: u8 = 2;
const EMPTY: u8 = 3;

pub(crate) fn flood_fill(ring: &GridRing, grid: &GridConfig, partials: &[CellId]) -> FillOutcome {
    let (c0, c1, r0, r1) = ring.window(grid.side());
    let w = (c1 - c0 + 1) as usize;
    let h = (r1 - r0 + 1) as usize;
    let mut labels = vec![UNKNOWN; w * h];
    for &id in partials {
        let (c, r) = grid.coord_of(id);
        if (c0..=c1).contains(&c) && (r0..=r1).contains(&r) {
            labels[(r - r0) as usize * w + (c - c0) as usize] = PARTIAL;
        }
    }

    let mut pip_tests = 0;
    let mut full = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if labels[start] != UNKNOWN {
            continue;
        }
        let (sc, sr) = ((start % w) as u32 + c0, (start / w) as u32 + r0);
        pip_tests += 1;
        let label = match ring.contains_center(sc, sr) {
            Location::Outside => EMPTY,
            _ => FULL,
        };
        labels[start] = label;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            if label == FULL {
                full.push(grid.id_of(x as u32 + c0, y as u32 + r0));
            }
            let mut push = |n: usize| {
                if labels[n] == UNKNOWN {
                    labels[n] = label;
                    stack.push(n);
                }
            };
            if x > 0 {
                push(idx - 1);
            }
            if x + 1 < w {
                push(idx + 1);
            }
            if y > 0 {
                push(idx - w);
            }
            if y + 1 < h {
                push(idx + w);
            }
        }
    }
    full.sort_unstable();
    FillOutcome { full, pip_tests }
}

/// Full cells by flood fill over the polygon's MBR window: each unlabeled cell
/// gets one point-in-polygon test at its center and its 4-connected unlabeled
/// region inherits the result.
pub fn floodfill_full_cells(
    poly: &SimplePolygon,
    grid: &GridConfig,
    partials: &[CellId],
) -> Result<FillOutcome> {
    check_sorted(partials)?;
    let ring = GridRing::new(poly.ring(), grid)?;
    Ok(flood_fill(&ring, grid, partials))
}

/// Partial and Full cells via DDA + scanline.
pub fn rasterize_polygon(poly: &SimplePolygon, grid: &GridConfig) -> Result<RasterCells> {
    let ring = GridRing::new(poly.ring(), grid)?;
    let partial = partial_cells_of_ring(&ring, grid);
    let full = scanline_fill(&ring, grid, &partial);
    Ok(RasterCells { partial, full })
}

/// Every non-empty cell with its Full/Strong/Weak class, sorted by id.
/// Partial cells are split by their exact coverage fraction, computed by
/// clipping the polygon to the cell.
pub fn classify_tri(poly: &SimplePolygon, grid: &GridConfig) -> Result<Vec<(CellId, TriClass)>> {
    let ring = GridRing::new(poly.ring(), grid)?;
    let partial = partial_cells_of_ring(&ring, grid);
    let full = scanline_fill(&ring, grid, &partial);
    let mut out = Vec::with_capacity(partial.len() + full.len());
    let mut scratch = ClipScratch::default();
    let (mut i, mut j) = (0, 0);
    while i < partial.len() || j < full.len() {
        let take_partial = j == full.len() || (i < partial.len() && partial[i] < full[j]);
        if take_partial {
            let id = partial[i];
            let (c, r) = grid.coord_of(id);
            let cov = scratch.coverage(&ring.pts, c as f64, r as f64);
            let class = if cov > STRONG_THRESHOLD { TriClass::Strong } else { TriClass::Weak };
            out.push((id, class));
            i += 1;
        } else {
            out.push((full[j], TriClass::Full));
            j += 1;
        }
    }
    Ok(out)
}

#[derive(Default)]
struct ClipScratch {
    a: Vec<Point>,
    b: Vec<Point>,
}

impl ClipScratch {
    /// Area fraction of the unit cell at (c, r) covered by the ring
    /// (Sutherland-Hodgman against the four cell sides, then shoelace).
    fn coverage(&mut self, ring: &[Point], c: f64, r: f64) -> f64 {
        self.a.clear();
        self.a.extend(ring.iter().map(|p| Point::new(p.x - c, p.y - r)));
        for side in 0..4 {
            self.b.clear();
            let n = self.a.len();
            if n == 0 {
                return 0.0;
            }
            let inside = |p: &Point| match side {
                0 => p.x >= 0.0,
                1 => p.x <= 1.0,
                2 => p.y >= 0.0,
                _ => p.y <= 1.0,
            };
            let cut = |p: &Point, q: &Point| -> Point {
                let (k, t) = match side {
                    0 => (0.0, (0.0 - p.x) / (q.x - p.x)),
                    1 => (1.0, (1.0 - p.x) / (q.x - p.x)),
                    2 => (0.0, (0.0 - p.y) / (q.y - p.y)),
                    _ => (1.0, (1.0 - p.y) / (q.y - p.y)),
                };
                if side < 2 {
                    Point::new(k, p.y + t * (q.y - p.y))
                } else {
                    Point::new(p.x + t * (q.x - p.x), k)
                }
            };
            for i in 0..n {
                let cur = self.a[i];
                let prev = self.a[(i + n - 1) % n];
                match (inside(&prev), inside(&cur)) {
                    (true, true) => self.b.push(cur),
                    (true, false) => self.b.push(cut(&prev, &cur)),
                    (false, true) => {
                        self.b.push(cut(&prev, &cur));
                        self.b.push(cur);
                    }
                    (false, false) => {}
                }
            }
            std::mem::swap(&mut self.a, &mut self.b);
        }
        crate::geom::signed_area(&self.a).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Mbr;
    use crate::grid::CellCoord;

    fn grid(order: u8, size: f64) -> GridConfig {
        GridConfig::new(Mbr::new(0.0, 0.0, size, size).unwrap(), order).unwrap()
    }

    fn poly(pts: &[(f64, f64)]) -> SimplePolygon {
        SimplePolygon::new(pts.iter().map(|&p| p.into()).collect()).unwrap()
    }

    fn ids(g: &GridConfig, coords: &[(u32, u32)]) -> Vec<CellId> {
        let mut v: Vec<_> = coords.iter().map(|&(c, r)| g.hilbert_index(CellCoord::new(c, r)).unwrap()).collect();
        v.sort();
        v
    }

    #[test]
    fn horizontal_linestring_row() {
        let g = grid(3, 8.0);
        let ls = Linestring::new(vec![Point::new(0.2, 0.5), Point::new(3.7, 0.5)]).unwrap();
        assert_eq!(rasterize_linestring(&ls, &g).unwrap(), ids(&g, &[(0, 0), (1, 0), (2, 0), (3, 0)]));
    }

    #[test]
    fn corner_crossing_takes_all_four_cells() {
        let g = grid(3, 8.0);
        let ls = Linestring::new(vec![Point::new(0.5, 0.5), Point::new(1.5, 1.5)]).unwrap();
        assert_eq!(rasterize_linestring(&ls, &g).unwrap(), ids(&g, &[(0, 0), (0, 1), (1, 0), (1, 1)]));
    }

    #[test]
    fn ring_linestring_has_no_interior() {
        let g = grid(3, 8.0);
        let ls = Linestring::new(vec![
            Point::new(0.5, 0.5),
            Point::new(3.5, 0.5),
            Point::new(3.5, 3.5),
            Point::new(0.5, 3.5),
            Point::new(0.5, 0.5),
        ])
        .unwrap();
        let cells = rasterize_linestring(&ls, &g).unwrap();
        assert_eq!(cells.len(), 12);
        assert!(!cells.contains(&g.hilbert_index(CellCoord::new(1, 1)).unwrap()));
    }

    #[test]
    fn grid_aligned_rectangle_is_full_inside() {
        // Rectangle covering exactly cells [1..2] x [1..2].
        let g = grid(2, 4.0);
        let rect = poly(&[(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)]);
        let cells = rasterize_polygon(&rect, &g).unwrap();
        assert_eq!(cells.full, ids(&g, &[(1, 1), (1, 2), (2, 1), (2, 2)]));
        // The 12 surrounding cells only touch the boundary.
        assert_eq!(cells.partial.len(), 12);
        let flood = floodfill_full_cells(&rect, &g, &cells.partial).unwrap();
        assert_eq!(flood.full, cells.full);
    }

    #[test]
    fn thin_triangle_has_no_full_cells() {
        let g = grid(4, 16.0);
        let tri = poly(&[(0.5, 0.5), (12.5, 1.0), (0.5, 1.2)]);
        let cells = rasterize_polygon(&tri, &g).unwrap();
        assert!(cells.full.is_empty());
        assert!(!cells.partial.is_empty());
    }

    #[test]
    fn sub_cell_polygon() {
        let g = grid(4, 16.0);
        let tiny = poly(&[(3.2, 3.2), (3.6, 3.3), (3.4, 3.7)]);
        let cells = rasterize_polygon(&tiny, &g).unwrap();
        assert_eq!(cells.partial, ids(&g, &[(3, 3)]));
        assert!(cells.full.is_empty());
    }

    #[test]
    fn flood_fill_whole_window() {
        let g = grid(3, 8.0);
        let sq = poly(&[(1.5, 1.5), (6.5, 1.5), (6.5, 6.5), (1.5, 6.5)]);
        let partial = dda_partial_cells(&sq, &g).unwrap();
        let out = floodfill_full_cells(&sq, &g, &partial).unwrap();
        assert_eq!(out.full.len(), 16);
        assert!(out.pip_tests <= 2);
    }

    #[test]
    fn flood_fill_three_regions() {
        // Apex-up triangle: one inner region plus the two upper outer corners.
        let g = grid(4, 16.0);
        let tri = poly(&[(0.5, 0.5), (15.5, 0.5), (8.0, 15.5)]);
        let partial = dda_partial_cells(&tri, &g).unwrap();
        let out = floodfill_full_cells(&tri, &g, &partial).unwrap();
        assert_eq!(out.pip_tests, 3);
        assert_eq!(out.full, scanline_full_cells(&tri, &g, &partial).unwrap());
    }

    #[test]
    fn unsorted_partials_rejected() {
        let g = grid(3, 8.0);
        let sq = poly(&[(1.5, 1.5), (6.5, 1.5), (6.5, 6.5), (1.5, 6.5)]);
        assert_eq!(scanline_full_cells(&sq, &g, &[5, 3]), Err(Error::UnsortedCells(1)));
        assert!(floodfill_full_cells(&sq, &g, &[3, 3]).is_err());
    }

    #[test]
    fn outside_extent_rejected() {
        let g = grid(3, 8.0);
        let sq = poly(&[(1.5, 1.5), (9.5, 1.5), (6.5, 6.5)]);
        assert!(matches!(dda_partial_cells(&sq, &g), Err(Error::OutsideExtent { .. })));
    }

    #[test]
    fn half_covered_cell_is_weak() {
        let g = grid(2, 4.0);
        // Covers the left half of cell (1, 1) and nothing else.
        let half = poly(&[(1.0, 1.0), (1.5, 1.0), (1.5, 2.0), (1.0, 2.0)]);
        let classes = classify_tri(&half, &g).unwrap();
        let target = g.hilbert_index(CellCoord::new(1, 1)).unwrap();
        let class = classes.iter().find(|(id, _)| *id == target).unwrap().1;
        assert_eq!(class, TriClass::Weak);
        let more = poly(&[(1.0, 1.0), (1.6, 1.0), (1.6, 2.0), (1.0, 2.0)]);
        let classes = classify_tri(&more, &g).unwrap();
        assert!(classes.contains(&(target, TriClass::Strong)));
    }

    #[test]
    fn tri_collapse_matches_two_class() {
        let g = grid(4, 16.0);
        let p = poly(&[(1.3, 2.1), (13.7, 0.9), (14.2, 12.8), (7.1, 6.6), (2.2, 14.4)]);
        let tri = classify_tri(&p, &g).unwrap();
        let cells = rasterize_polygon(&p, &g).unwrap();
        let full: Vec<_> = tri.iter().filter(|(_, c)| *c == TriClass::Full).map(|(id, _)| *id).collect();
        let partial: Vec<_> = tri.iter().filter(|(_, c)| *c != TriClass::Full).map(|(id, _)| *id).collect();
        assert_eq!(full, cells.full);
        assert_eq!(partial, cells.partial);
    }
}
