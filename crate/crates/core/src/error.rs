use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rectangle [{xmin}, {ymin}, {xmax}, {ymax}]")]
    InvalidMbr { xmin: f64, ymin: f64, xmax: f64, ymax: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("grid order {0} out of range 1..=16")]
    InvalidOrder(u8),

    #[error("cell coordinate ({col}, {row}) out of range for order {order}")]
    CellOutOfRange { col: u32, row: u32, order: u8 },

    #[error("cell id {id} out of range for order {order}")]
    CellIdOutOfRange { id: u64, order: u8 },

    #[error("point ({x}, {y}) lies outside the raster extent")]
    OutsideExtent { x: f64, y: f64 },

    #[error("cell list is not strictly ascending at position {0}")]
    UnsortedCells(usize),

    #[error("approximations use different grids (orders {left} and {right})")]
    GridMismatch { left: u8, right: u8 },

    #[error("intervals do not overlap")]
    NoOverlap,

    #[error("cannot scale order {from} down to order {to}")]
    InvalidScale { from: u8, to: u8 },

    #[error("malformed compressed list: {0}")]
    Codec(String),

    #[error("unsupported configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
