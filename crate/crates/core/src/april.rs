//! APRIL approximations: an A-list over all non-empty cells and an F-list over
//! fully covered cells, and the interval-join filters built on them.

use crate::codec::CompressedIntervals;
use crate::error::{Error, Result};
use crate::geom::SimplePolygon;
use crate::grid::{CellId, GridConfig};
use crate::intervals::{
    cells_to_intervals, join_containment, join_overlap, one_step_on_ring, IntervalList,
    IntervalSource, UnitCells,
};
use crate::raster::{flood_fill, partial_cells_of_ring, scanline_fill, GridRing};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AprilApprox {
    pub order: u8,
    pub a: IntervalList,
    pub f: IntervalList,
}

/// APRIL lists held compressed; filters decode them lazily.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompressedApril {
    pub order: u8,
    pub a: CompressedIntervals,
    pub f: CompressedIntervals,
}

impl AprilApprox {
    pub fn compress(&self) -> CompressedApril {
        CompressedApril {
            order: self.order,
            a: CompressedIntervals::new(&self.a),
            f: CompressedIntervals::new(&self.f),
        }
    }
}

impl CompressedApril {
    pub fn decompress(&self) -> AprilApprox {
        AprilApprox { order: self.order, a: self.a.decompress(), f: self.f.decompress() }
    }
}

/// Access to the two lists, compressed or not.
pub trait AprilLists {
    type List: IntervalSource;
    fn order(&self) -> u8;
    fn a_list(&self) -> &Self::List;
    fn f_list(&self) -> &Self::List;
}

impl AprilLists for AprilApprox {
    type List = IntervalList;
    fn order(&self) -> u8 {
        self.order
    }
    fn a_list(&self) -> &IntervalList {
        &self.a
    }
    fn f_list(&self) -> &IntervalList {
        &self.f
    }
}

impl AprilLists for CompressedApril {
    type List = CompressedIntervals;
    fn order(&self) -> u8 {
        self.order
    }
    fn a_list(&self) -> &CompressedIntervals {
        &self.a
    }
    fn f_list(&self) -> &CompressedIntervals {
        &self.f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    TrueHit,
    TrueNegative,
    Indecisive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    AA,
    AF,
    FA,
}

/// Order in which the three interval joins run. The verdict does not depend
/// on it, only the work done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JoinOrder([Phase; 3]);

impl Default for JoinOrder {
    fn default() -> Self {
        JoinOrder([Phase::AA, Phase::AF, Phase::FA])
    }
}

impl JoinOrder {
    pub fn new(phases: [Phase; 3]) -> Result<Self> {
        for p in [Phase::AA, Phase::AF, Phase::FA] {
            if phases.iter().filter(|&&q| q == p).count() != 1 {
                return Err(Error::Config(format!("join order {phases:?} is not a permutation")));
            }
        }
        Ok(JoinOrder(phases))
    }

    pub fn phases(&self) -> [Phase; 3] {
        self.0
    }

    pub fn all() -> [JoinOrder; 6] {
        use Phase::*;
        [
            JoinOrder([AA, AF, FA]),
            JoinOrder([AA, FA, AF]),
            JoinOrder([AF, AA, FA]),
            JoinOrder([AF, FA, AA]),
            JoinOrder([FA, AA, AF]),
            JoinOrder([FA, AF, AA]),
        ]
    }
}

impl std::str::FromStr for JoinOrder {
    type Err = Error;

    /// Parses e.g. `"AA,AF,FA"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<Phase> = s
            .split(',')
            .map(|p| match p.trim().to_ascii_uppercase().as_str() {
                "AA" => Ok(Phase::AA),
                "AF" => Ok(Phase::AF),
                "FA" => Ok(Phase::FA),
                other => Err(Error::Config(format!("unknown join phase {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let phases: [Phase; 3] = parts
            .try_into()
            .map_err(|_| Error::Config(format!("join order {s:?} needs three phases")))?;
        JoinOrder::new(phases)
    }
}

/// How Full cells are found while building an approximation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Backend {
    Scanline,
    FloodFill,
    #[default]
    OneStep,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scanline" => Ok(Backend::Scanline),
            "floodfill" | "flood-fill" | "flood" => Ok(Backend::FloodFill),
            "onestep" | "one-step" => Ok(Backend::OneStep),
            _ => Err(Error::Config(format!("unknown backend {s:?}"))),
        }
    }
}

fn merge_sorted(a: &[CellId], b: &[CellId]) -> Vec<CellId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub fn build_april(poly: &SimplePolygon, grid: &GridConfig, backend: Backend) -> Result<AprilApprox> {
    build_april_counted(poly, grid, backend).map(|(a, _)| a)
}

/// Like [`build_april`], also returning the number of point-in-polygon tests
/// the backend spent.
pub fn build_april_counted(
    poly: &SimplePolygon,
    grid: &GridConfig,
    backend: Backend,
) -> Result<(AprilApprox, usize)> {
    let ring = GridRing::new(poly.ring(), grid)?;
    let partials = partial_cells_of_ring(&ring, grid);
    if partials.is_empty() {
        // Boundary runs along cell borders only: every touched cell is Full.
        let full = scanline_fill(&ring, grid, &partials);
        if full.is_empty() {
            return Err(Error::DegenerateGeometry("polygon covers no cells".into()));
        }
        let f = cells_to_intervals(&full)?;
        return Ok((AprilApprox { order: grid.order(), a: f.clone(), f }, 0));
    }
    let (a, f, pip) = match backend {
        Backend::Scanline => {
            let full = scanline_fill(&ring, grid, &partials);
            (cells_to_intervals(&merge_sorted(&partials, &full))?, cells_to_intervals(&full)?, 0)
        }
        Backend::FloodFill => {
            let out = flood_fill(&ring, grid, &partials);
            let a = cells_to_intervals(&merge_sorted(&partials, &out.full))?;
            (a, cells_to_intervals(&out.full)?, out.pip_tests)
        }
        Backend::OneStep => {
            let out = one_step_on_ring(&partials, &ring, grid, true)?;
            (out.all, out.full, out.pip_tests)
        }
    };
    Ok((AprilApprox { order: grid.order(), a, f }, pip))
}

/// Approximation of a linestring: its sorted touched cells.
pub fn build_linestring_cells(
    ls: &crate::geom::Linestring,
    grid: &GridConfig,
) -> Result<Vec<CellId>> {
    crate::raster::rasterize_linestring(ls, grid)
}

fn check_orders(a: u8, b: u8) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch { left: a, right: b });
    }
    Ok(())
}

/// Three-phase filter over raw interval sources.
pub fn filter_sources(
    ar: &impl IntervalSource,
    fr: &impl IntervalSource,
    as_: &impl IntervalSource,
    fs: &impl IntervalSource,
    order: JoinOrder,
) -> Verdict {
    for phase in order.phases() {
        match phase {
            Phase::AA => {
                if !join_overlap(ar.intervals(), as_.intervals()) {
                    return Verdict::TrueNegative;
                }
            }
            Phase::AF => {
                if join_overlap(ar.intervals(), fs.intervals()) {
                    return Verdict::TrueHit;
                }
            }
            Phase::FA => {
                if join_overlap(fr.intervals(), as_.intervals()) {
                    return Verdict::TrueHit;
                }
            }
        }
    }
    Verdict::Indecisive
}

pub fn intersect_filter<T: AprilLists>(r: &T, s: &T, order: JoinOrder) -> Result<Verdict> {
    check_orders(r.order(), s.order())?;
    Ok(filter_sources(r.a_list(), r.f_list(), s.a_list(), s.f_list(), order))
}

/// Filter for "r within s": no FA step, and the hit test is containment of
/// A(r) in F(s).
pub fn within_filter<T: AprilLists>(r: &T, s: &T) -> Result<Verdict> {
    check_orders(r.order(), s.order())?;
    if !join_overlap(r.a_list().intervals(), s.a_list().intervals()) {
        return Ok(Verdict::TrueNegative);
    }
    if join_containment(r.a_list().intervals(), s.f_list().intervals()) {
        return Ok(Verdict::TrueHit);
    }
    Ok(Verdict::Indecisive)
}

fn linestring_sources(a: &impl IntervalSource, f: &impl IntervalSource, ls: &impl IntervalSource) -> Verdict {
    if !join_overlap(a.intervals(), ls.intervals()) {
        Verdict::TrueNegative
    } else if join_overlap(f.intervals(), ls.intervals()) {
        Verdict::TrueHit
    } else {
        Verdict::Indecisive
    }
}

/// Polygon vs linestring. `ls_cells` must be sorted ascending.
pub fn linestring_filter<T: AprilLists>(poly: &T, ls_cells: &[CellId]) -> Verdict {
    linestring_sources(poly.a_list(), poly.f_list(), &UnitCells(ls_cells))
}

/// Same as [`linestring_filter`] over any cell source, e.g. compressed cells.
pub fn linestring_filter_source<T: AprilLists>(poly: &T, ls: &impl IntervalSource) -> Verdict {
    linestring_sources(poly.a_list(), poly.f_list(), ls)
}

/// Projects intervals at order `from` onto the coarser order `to` by dropping
/// the low `2 (from - to)` bits of every id; adjacent results are merged.
pub fn scale_down(list: &IntervalList, from: u8, to: u8) -> Result<IntervalList> {
    if from <= to {
        return Err(Error::InvalidScale { from, to });
    }
    let shift = 2 * (from - to) as u32;
    let mut out = IntervalList::new();
    for (s, e) in list.iter() {
        out.push_merge(s >> shift, ((e - 1) >> shift) + 1);
    }
    Ok(out)
}

/// Filter between approximations of different orders on the same extent.
/// The finer A-list is scaled to the coarser order; only the coarse F-list
/// still guarantees full coverage, so a single F-join runs.
pub fn mixed_order_filter(r: &AprilApprox, s: &AprilApprox) -> Result<Verdict> {
    if r.order == s.order {
        return intersect_filter(r, s, JoinOrder::default());
    }
    let (fine, coarse) = if r.order > s.order { (r, s) } else { (s, r) };
    let scaled = scale_down(&fine.a, fine.order, coarse.order)?;
    if !join_overlap(scaled.iter(), coarse.a.iter()) {
        return Ok(Verdict::TrueNegative);
    }
    if join_overlap(scaled.iter(), coarse.f.iter()) {
        return Ok(Verdict::TrueHit);
    }
    Ok(Verdict::Indecisive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Mbr, Point};
    use crate::grid::{hilbert_coords, hilbert_index, CellCoord};

    fn list(iv: &[(u32, u32)]) -> IntervalList {
        IntervalList::from_intervals(iv.iter().copied()).unwrap()
    }

    fn approx(a: &[(u32, u32)], f: &[(u32, u32)]) -> AprilApprox {
        AprilApprox { order: 4, a: list(a), f: list(f) }
    }

    #[test]
    fn intersect_rules() {
        let r = approx(&[(0, 10)], &[]);
        let s = approx(&[(20, 30)], &[(22, 24)]);
        assert_eq!(intersect_filter(&r, &s, JoinOrder::default()).unwrap(), Verdict::TrueNegative);
        let s = approx(&[(2, 8)], &[(4, 6)]);
        assert_eq!(intersect_filter(&r, &s, JoinOrder::default()).unwrap(), Verdict::TrueHit);
        let s = approx(&[(2, 8)], &[]);
        assert_eq!(intersect_filter(&r, &s, JoinOrder::default()).unwrap(), Verdict::Indecisive);
        for order in JoinOrder::all() {
            assert_eq!(intersect_filter(&r, &s, order).unwrap(), Verdict::Indecisive);
        }
    }

    #[test]
    fn mismatched_orders_rejected() {
        let r = approx(&[(0, 10)], &[]);
        let mut s = r.clone();
        s.order = 5;
        assert!(intersect_filter(&r, &s, JoinOrder::default()).is_err());
        assert!(within_filter(&r, &s).is_err());
    }

    #[test]
    fn within_rules() {
        let r = approx(&[(3, 5)], &[]);
        assert_eq!(within_filter(&r, &approx(&[(0, 8)], &[(0, 8)])).unwrap(), Verdict::TrueHit);
        assert_eq!(within_filter(&r, &approx(&[(9, 12)], &[])).unwrap(), Verdict::TrueNegative);
        assert_eq!(within_filter(&r, &approx(&[(0, 8)], &[(4, 8)])).unwrap(), Verdict::Indecisive);
    }

    #[test]
    fn linestring_rules() {
        let p = approx(&[(0, 10)], &[(4, 6)]);
        assert_eq!(linestring_filter(&p, &[5, 20]), Verdict::TrueHit);
        assert_eq!(linestring_filter(&p, &[11, 20]), Verdict::TrueNegative);
        assert_eq!(linestring_filter(&p, &[1, 9]), Verdict::Indecisive);
    }

    #[test]
    fn scale_down_examples() {
        assert_eq!(scale_down(&list(&[(52, 55)]), 5, 4).unwrap(), list(&[(13, 14)]));
        assert_eq!(scale_down(&list(&[(0, 4)]), 5, 4).unwrap(), list(&[(0, 1)]));
        assert_eq!(scale_down(&list(&[(0, 5), (6, 9)]), 5, 4).unwrap(), list(&[(0, 3)]));
        assert!(scale_down(&list(&[(0, 4)]), 4, 4).is_err());
    }

    #[test]
    fn shifted_id_is_parent_cell() {
        for id in 0..(1u32 << 12) {
            let c = hilbert_coords(id, 6).unwrap();
            for k in 1..6u8 {
                let parent = hilbert_index(CellCoord::new(c.col >> k, c.row >> k), 6 - k).unwrap();
                assert_eq!(id >> (2 * k), parent);
            }
        }
    }

    #[test]
    fn mixed_rules() {
        let fine = AprilApprox { order: 5, a: list(&[(52, 53)]), f: list(&[]) };
        let coarse = AprilApprox { order: 4, a: list(&[(10, 14)]), f: list(&[(13, 14)]) };
        assert_eq!(mixed_order_filter(&fine, &coarse).unwrap(), Verdict::TrueHit);
        assert_eq!(mixed_order_filter(&coarse, &fine).unwrap(), Verdict::TrueHit);
        let coarse = AprilApprox { order: 4, a: list(&[(0, 12)]), f: list(&[]) };
        assert_eq!(mixed_order_filter(&fine, &coarse).unwrap(), Verdict::TrueNegative);
    }

    #[test]
    fn join_order_parsing() {
        assert_eq!("aa,af,fa".parse::<JoinOrder>().unwrap(), JoinOrder::default());
        assert!("AA,AA,FA".parse::<JoinOrder>().is_err());
        assert!("AA,AF".parse::<JoinOrder>().is_err());
    }

    #[test]
    fn sliver_has_no_full_cells() {
        let g = GridConfig::new(Mbr::new(0.0, 0.0, 16.0, 16.0).unwrap(), 4).unwrap();
        let p = SimplePolygon::new(vec![
            Point::new(0.2, 0.2),
            Point::new(15.7, 0.4),
            Point::new(15.7, 0.5),
        ])
        .unwrap();
        for b in [Backend::Scanline, Backend::FloodFill, Backend::OneStep] {
            let a = build_april(&p, &g, b).unwrap();
            assert!(a.f.is_empty());
            assert!(!a.a.is_empty());
        }
    }

    #[test]
    fn backends_agree_on_square() {
        let g = GridConfig::new(Mbr::new(0.0, 0.0, 16.0, 16.0).unwrap(), 4).unwrap();
        let p = SimplePolygon::new(vec![
            Point::new(2.5, 3.5),
            Point::new(13.2, 2.1),
            Point::new(12.0, 14.9),
            Point::new(6.0, 9.0),
            Point::new(1.1, 12.0),
        ])
        .unwrap();
        let a = build_april(&p, &g, Backend::Scanline).unwrap();
        assert_eq!(build_april(&p, &g, Backend::FloodFill).unwrap(), a);
        assert_eq!(build_april(&p, &g, Backend::OneStep).unwrap(), a);
        assert!(!a.f.is_empty());
        let c = a.compress();
        assert_eq!(c.decompress(), a);
        assert_eq!(intersect_filter(&c, &c, JoinOrder::default()).unwrap(), Verdict::TrueHit);
    }
}
