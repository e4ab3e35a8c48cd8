//! Raster-interval approximations for spatial intersection joins.
//!
//! Polygons are rasterized on a Hilbert-ordered grid and summarised as sorted
//! interval lists ([`april`]) or as intervals with per-cell type codes
//! ([`ri`]). Filters over those summaries decide most candidate pairs without
//! touching the exact geometry; [`pipeline`] ties the pieces into a join.

pub mod april;
pub mod codec;
pub mod error;
pub mod geom;
pub mod grid;
pub mod intervals;
pub mod par;
pub mod pipeline;
pub mod raster;
pub mod ri;

pub use april::{AprilApprox, Backend, JoinOrder, Phase, Verdict};
pub use error::{Error, Result};
pub use geom::{Linestring, Mbr, Point, SimplePolygon};
pub use grid::{grid_for_extent, CellCoord, CellId, GridConfig};
pub use intervals::IntervalList;
pub use par::Execution;
pub use ri::{RiApprox, Side};
