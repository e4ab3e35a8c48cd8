//! The global raster: a 2^N x 2^N grid over a rectangular extent, with cells
//! enumerated along a Hilbert curve.
//!
//! Curve orientation: id 0 sits at cell (0, 0) and the order-1 curve visits
//! (0,0), (0,1), (1,1), (1,0). Both sides of a join must share the same
//! [`GridConfig`], which is what keeps the orientation consistent.

use crate::error::{Error, Result};
use crate::geom::{Mbr, Point};

/// Hilbert index of a cell. Always below `4^order`.
pub type CellId = u32;

pub const MAX_ORDER: u8 = 16;

/// Relative slack added to the max side of an extent so that points on the
/// max boundary fall into the last row/column.
pub const EXTENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub col: u32,
    pub row: u32,
}

impl CellCoord {
    pub const fn new(col: u32, row: u32) -> Self {
        CellCoord { col, row }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    order: u8,
    extent: Mbr,
    cell_w: f64,
    cell_h: f64,
}

impl GridConfig {
    /// Grid over exactly `extent`, without slack.
    pub fn new(extent: Mbr, order: u8) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        let side = (1u64 << order) as f64;
        let cell_w = extent.width() / side;
        let cell_h = extent.height() / side;
        if !(cell_w > 0.0 && cell_h > 0.0) {
            return Err(Error::DegenerateGeometry("raster extent has zero width or height".into()));
        }
        Ok(GridConfig { order, extent, cell_w, cell_h })
    }

    /// Grid whose extent is `objects_mbr` with its max sides pushed out by
    /// [`EXTENT_SLACK`] (relative).
    pub fn for_extent(objects_mbr: &Mbr, order: u8) -> Result<Self> {
        let w = objects_mbr.width();
        let h = objects_mbr.height();
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::DegenerateGeometry("raster extent has zero width or height".into()));
        }
        let extent = Mbr {
            xmax: objects_mbr.xmax + w * EXTENT_SLACK,
            ymax: objects_mbr.ymax + h * EXTENT_SLACK,
            ..*objects_mbr
        };
        Self::new(extent, order)
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn extent(&self) -> &Mbr {
        &self.extent
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_w
    }

    pub fn cell_height(&self) -> f64 {
        self.cell_h
    }

    /// Cells per side, `2^order`.
    pub fn side(&self) -> u32 {
        1u32 << self.order
    }

    /// Total number of cells, `4^order`.
    pub fn cell_count(&self) -> u64 {
        1u64 << (2 * self.order as u32)
    }

    /// Maps a point to continuous grid units, where cell (c, r) spans
    /// [c, c+1] x [r, r+1].
    #[inline]
    pub fn to_grid_units(&self, p: &Point) -> (f64, f64) {
        ((p.x - self.extent.xmin) / self.cell_w, (p.y - self.extent.ymin) / self.cell_h)
    }

    #[inline]
    pub fn from_grid_units(&self, u: f64, v: f64) -> Point {
        Point::new(self.extent.xmin + u * self.cell_w, self.extent.ymin + v * self.cell_h)
    }

    pub fn point_to_cell(&self, p: &Point) -> Result<CellCoord> {
        if !self.extent.contains_point(p) {
            return Err(Error::OutsideExtent { x: p.x, y: p.y });
        }
        let (u, v) = self.to_grid_units(p);
        let max = (self.side() - 1) as f64;
        Ok(CellCoord::new(u.floor().clamp(0.0, max) as u32, v.floor().clamp(0.0, max) as u32))
    }

    pub fn cell_box(&self, c: CellCoord) -> Mbr {
        let lo = self.from_grid_units(c.col as f64, c.row as f64);
        let hi = self.from_grid_units(c.col as f64 + 1.0, c.row as f64 + 1.0);
        Mbr { xmin: lo.x, ymin: lo.y, xmax: hi.x, ymax: hi.y }
    }

    pub fn cell_center(&self, c: CellCoord) -> Point {
        self.from_grid_units(c.col as f64 + 0.5, c.row as f64 + 0.5)
    }

    pub fn hilbert_index(&self, c: CellCoord) -> Result<CellId> {
        hilbert_index(c, self.order)
    }

    pub fn hilbert_coords(&self, id: CellId) -> Result<CellCoord> {
        hilbert_coords(id, self.order)
    }

    /// Unchecked conversion for callers that already clamped the coordinate.
    #[inline]
    pub(crate) fn id_of(&self, col: u32, row: u32) -> CellId {
        xy_to_d(self.order, col, row)
    }

    #[inline]
    pub(crate) fn coord_of(&self, id: CellId) -> (u32, u32) {
        d_to_xy(self.order, id)
    }
}

pub fn grid_for_extent(objects_mbr: &Mbr, order: u8) -> Result<GridConfig> {
    GridConfig::for_extent(objects_mbr, order)
}

fn check_order(order: u8) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        Err(Error::InvalidOrder(order))
    } else {
        Ok(())
    }
}

pub fn hilbert_index(c: CellCoord, order: u8) -> Result<CellId> {
    check_order(order)?;
    let side = 1u32 << order;
    if c.col >= side || c.row >= side {
        return Err(Error::CellOutOfRange { col: c.col, row: c.row, order });
    }
    Ok(xy_to_d(order, c.col, c.row))
}

pub fn hilbert_coords(id: CellId, order: u8) -> Result<CellCoord> {
    check_order(order)?;
    if (id as u64) >= (1u64 << (2 * order as u32)) {
        return Err(Error::CellIdOutOfRange { id: id as u64, order });
    }
    let (col, row) = d_to_xy(order, id);
    Ok(CellCoord::new(col, row))
}

#[inline]
fn xy_to_d(order: u8, mut x: u32, mut y: u32) -> CellId {
    let n = 1u32 << order;
    let mut d: u64 = 0;
    let mut s = n >> 1;
    while s > 0 {
        let rx = ((x & s) > 0) as u32;
        let ry = ((y & s) > 0) as u32;
        d += (s as u64) * (s as u64) * ((3 * rx) ^ ry) as u64;
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d as CellId
}

#[inline]
fn d_to_xy(order: u8, d: CellId) -> (u32, u32) {
    let n = 1u32 << order;
    let mut t = d as u64;
    let (mut x, mut y) = (0u32, 0u32);
    let mut s = 1u32;
    while s < n {
        let rx = (1 & (t / 2)) as u32;
        let ry = (1 & (t ^ rx as u64)) as u32;
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s <<= 1;
    }
    (x, y)
}
