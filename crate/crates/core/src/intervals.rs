//! Sorted, disjoint, half-open runs of Hilbert cell ids and the linear merge
//! joins over them.

use crate::error::{Error, Result};
use crate::geom::{Location, SimplePolygon};
use crate::grid::{CellId, GridConfig};
use crate::raster::{check_sorted, partial_cells_of_ring, GridRing};

/// Intervals stored flat: entry `2i` is the start of interval `i`, entry
/// `2i + 1` its (exclusive) end. The sequence is strictly increasing and
/// adjacent runs are always merged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct IntervalList(Vec<CellId>);

impl IntervalList {
    pub fn new() -> Self {
        IntervalList(Vec::new())
    }

    /// Checks the flat layout invariants.
    pub fn from_flat(flat: Vec<CellId>) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::Codec(format!("odd interval endpoint count {}", flat.len())));
        }
        check_sorted(&flat)?;
        Ok(IntervalList(flat))
    }

    /// Caller guarantees the flat invariants.
    pub(crate) fn from_flat_unchecked(flat: Vec<CellId>) -> Self {
        debug_assert!(flat.len().is_multiple_of(2) && flat.windows(2).all(|w| w[0] < w[1]));
        IntervalList(flat)
    }

    pub fn from_intervals(intervals: impl IntoIterator<Item = (CellId, CellId)>) -> Result<Self> {
        let flat: Vec<CellId> = intervals.into_iter().flat_map(|(s, e)| [s, e]).collect();
        Self::from_flat(flat)
    }

    pub fn as_flat(&self) -> &[CellId] {
        &self.0
    }

    pub fn into_flat(self) -> Vec<CellId> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, CellId)> + Clone + '_ {
        self.0.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    /// Number of cells covered.
    pub fn cell_count(&self) -> u64 {
        self.iter().map(|(s, e)| (e - s) as u64).sum()
    }

    /// Does any interval contain `cell`?
    pub fn contains_cell(&self, cell: CellId) -> bool {
        // First endpoint strictly greater than `cell`; an odd index means we
        // are between a start and its end.
        let pos = self.0.partition_point(|&v| v <= cell);
        pos % 2 == 1
    }

    pub(crate) fn push(&mut self, start: CellId, end: CellId) {
        debug_assert!(start < end);
        match self.0.last_mut() {
            Some(last) if *last == start => *last = end,
            _ => {
                debug_assert!(self.0.last().is_none_or(|&l| l < start));
                self.0.push(start);
                self.0.push(end);
            }
        }
    }
}

impl IntervalList {
    /// Appends `[start, end)` where `start` may fall inside or right after the
    /// last interval; overlapping or adjacent runs are merged.
    pub(crate) fn push_merge(&mut self, start: CellId, end: CellId) {
        match self.0.last_mut() {
            Some(last) if start <= *last => *last = (*last).max(end),
            _ => {
                self.0.push(start);
                self.0.push(end);
            }
        }
    }
}

/// Anything that can stream its intervals in ascending order.
pub trait IntervalSource {
    fn intervals(&self) -> impl Iterator<Item = (CellId, CellId)> + '_;
}

impl IntervalSource for IntervalList {
    fn intervals(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.iter()
    }
}

/// A plain sorted id list, seen as unit intervals `[c, c+1)`.
pub struct UnitCells<'a>(pub &'a [CellId]);

impl IntervalSource for UnitCells<'_> {
    fn intervals(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.0.iter().map(|&c| (c, c + 1))
    }
}

/// Merges a strictly ascending cell list into maximal runs.
pub fn cells_to_intervals(cells: &[CellId]) -> Result<IntervalList> {
    check_sorted(cells)?;
    let mut out = IntervalList::new();
    let mut iter = cells.iter().copied();
    let Some(first) = iter.next() else {
        return Ok(out);
    };
    let (mut start, mut end) = (first, first + 1);
    for c in iter {
        if c == end {
            end += 1;
        } else {
            out.0.push(start);
            out.0.push(end);
            start = c;
            end = c + 1;
        }
    }
    out.0.push(start);
    out.0.push(end);
    Ok(out)
}

/// True iff some interval of `x` shares a cell with some interval of `y`.
/// One merge pass; stops at the first overlap.
pub fn join_overlap(
    x: impl IntoIterator<Item = (CellId, CellId)>,
    y: impl IntoIterator<Item = (CellId, CellId)>,
) -> bool {
    let mut x = x.into_iter();
    let mut y = y.into_iter();
    let (Some(mut xi), Some(mut yj)) = (x.next(), y.next()) else {
        return false;
    };
    loop {
        if xi.0 < yj.1 && yj.0 < xi.1 {
            return true;
        }
        if xi.1 <= yj.1 {
            match x.next() {
                Some(n) => xi = n,
                None => return false,
            }
        } else {
            match y.next() {
                Some(n) => yj = n,
                None => return false,
            }
        }
    }
}

/// True iff every interval of `x` lies inside a single interval of `y`.
pub fn join_containment(
    x: impl IntoIterator<Item = (CellId, CellId)>,
    y: impl IntoIterator<Item = (CellId, CellId)>,
) -> bool {
    let mut y = y.into_iter();
    let mut cur = y.next();
    for (xs, xe) in x {
        while let Some((_, ye)) = cur {
            if ye <= xs {
                cur = y.next();
            } else {
                break;
            }
        }
        match cur {
            Some((ys, ye)) if ys <= xs && xe <= ye => {}
            _ => return false,
        }
    }
    true
}

/// Label of a gap's first cell derived from already-typed neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapType {
    Full,
    Empty,
    Unknown,
}

/// Types cell `c` from its 4-neighbours with smaller Hilbert ids. A
/// non-partial lower neighbour has already been typed: inside `full_so_far`
/// means Full, otherwise Empty.
pub fn check_neighbors(
    c: CellId,
    partials: &[CellId],
    full_so_far: &IntervalList,
    grid: &GridConfig,
) -> GapType {
    let (col, row) = grid.coord_of(c);
    let side = grid.side();
    let neighbours = [
        (col > 0).then(|| (col - 1, row)),
        (col + 1 < side).then(|| (col + 1, row)),
        (row > 0).then(|| (col, row - 1)),
        (row + 1 < side).then(|| (col, row + 1)),
    ];
    for (nc, nr) in neighbours.into_iter().flatten() {
        let n = grid.id_of(nc, nr);
        if n >= c || partials.binary_search(&n).is_ok() {
            continue;
        }
        return if full_so_far.contains_cell(n) { GapType::Full } else { GapType::Empty };
    }
    GapType::Unknown
}

/// Output of [`one_step_intervalization`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneStepOutcome {
    pub all: IntervalList,
    pub full: IntervalList,
    pub pip_tests: usize,
}

/// Builds the A- and F-lists directly from the sorted partial cells. Each gap
/// between non-consecutive partial ids is a homogeneous run of Full or Empty
/// cells (consecutive Hilbert cells are 4-neighbours, and a Full cell is never
/// 4-adjacent to an Empty one), so typing its first cell types the whole gap.
pub fn one_step_intervalization(
    partials: &[CellId],
    poly: &SimplePolygon,
    grid: &GridConfig,
) -> Result<OneStepOutcome> {
    check_sorted(partials)?;
    let ring = GridRing::new(poly.ring(), grid)?;
    one_step_on_ring(partials, &ring, grid, true)
}

/// Same as [`one_step_intervalization`] with neighbour inheritance switchable,
/// so the saving in point-in-polygon tests can be measured.
pub fn one_step_intervalization_with(
    partials: &[CellId],
    poly: &SimplePolygon,
    grid: &GridConfig,
    neighbor_check: bool,
) -> Result<OneStepOutcome> {
    check_sorted(partials)?;
    let ring = GridRing::new(poly.ring(), grid)?;
    one_step_on_ring(partials, &ring, grid, neighbor_check)
}

pub(crate) fn one_step_on_ring(
    partials: &[CellId],
    ring: &GridRing,
    grid: &GridConfig,
    neighbor_check: bool,
) -> Result<OneStepOutcome> {
    let mut pip_tests = 0;
    let may_be_full = |c: CellId| {
        let (col, row) = grid.coord_of(c);
        ring.box_inside_bounds(col, row)
    };
    let outcome = intervalize_gaps(partials, grid, neighbor_check, may_be_full, |c| {
        pip_tests += 1;
        let (col, row) = grid.coord_of(c);
        ring.contains_center(col, row) != Location::Outside
    });
    let (all, full) = outcome?;
    Ok(OneStepOutcome { all, full, pip_tests })
}

/// Core gap walk, with the Full/Empty probe for undecided gaps injected.
///
/// The leading gap `[0, P_0)` and trailing gap `[P_last + 1, 4^N)` can only
/// hold Full cells when the polygon covers the first or last curve cell.
/// `may_be_full` screens those cells (box inside the polygon's bounds) so
/// ordinary inputs spend no tests there.
pub(crate) fn intervalize_gaps(
    partials: &[CellId],
    grid: &GridConfig,
    neighbor_check: bool,
    may_be_full: impl Fn(CellId) -> bool,
    mut probe: impl FnMut(CellId) -> bool,
) -> Result<(IntervalList, IntervalList)> {
    let Some(&first) = partials.first() else {
        return Err(Error::DegenerateGeometry("no boundary cells".into()));
    };
    let last = *partials.last().expect("non-empty");
    let mut all = IntervalList::new();
    let mut full = IntervalList::new();

    let mut a_start = first;
    if first > 0 && may_be_full(0) && probe(0) {
        full.push(0, first);
        a_start = 0;
    }

    let mut i = 0;
    loop {
        while i + 1 < partials.len() && partials[i + 1] == partials[i] + 1 {
            i += 1;
        }
        if i + 1 == partials.len() {
            break;
        }
        let gap_start = partials[i] + 1;
        let next = partials[i + 1];
        let kind = if neighbor_check {
            check_neighbors(gap_start, partials, &full, grid)
        } else {
            GapType::Unknown
        };
        let is_full = match kind {
            GapType::Full => true,
            GapType::Empty => false,
            GapType::Unknown => probe(gap_start),
        };
        if is_full {
            full.push(gap_start, next);
        } else {
            all.push(a_start, gap_start);
            a_start = next;
        }
        i += 1;
    }

    let mut a_end = last + 1;
    let total = grid.cell_count();
    if (a_end as u64) < total && may_be_full(a_end) {
        let is_full = match check_neighbors(a_end, partials, &full, grid) {
            GapType::Full => true,
            GapType::Empty => false,
            GapType::Unknown => probe(a_end),
        };
        if is_full {
            let end = CellId::try_from(total)
                .map_err(|_| Error::Config("polygon covers the last cell of an order-16 grid".into()))?;
            full.push(a_end, end);
            a_end = end;
        }
    }
    all.push(a_start, a_end);
    Ok((all, full))
}

/// Builds the A- and F-lists by one-step intervalization straight from a
/// polygon.
pub fn one_step_from_polygon(poly: &SimplePolygon, grid: &GridConfig) -> Result<OneStepOutcome> {
    let ring = GridRing::new(poly.ring(), grid)?;
    let partials = partial_cells_of_ring(&ring, grid);
    one_step_on_ring(&partials, &ring, grid, true)
}
