//! WKT ingestion, one geometry per line.
//!
//! A line is `WKT` or `id;WKT`. Without an explicit id the zero-based line
//! number is used. Blank lines and lines starting with `#` are ignored.
//! Polygons keep their outer ring only. Multi-geometries and other types are
//! skipped and counted, as are geometries that fail validation.

use std::path::Path;
use std::str::FromStr;

use april_core::geom::{Linestring, Point, SimplePolygon};
use april_core::pipeline::{Dataset, Geometry, Object};
use thiserror::Error;
use wkt::Wkt;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Core(#[from] april_core::Error),
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub dataset: Dataset,
    /// Geometry types other than POLYGON and LINESTRING.
    pub skipped_unsupported: usize,
    /// Empty, zero-area or self-intersecting geometries.
    pub skipped_degenerate: usize,
    /// Polygons whose holes were dropped.
    pub holes_dropped: usize,
}

enum Parsed {
    Geometry(Geometry),
    Unsupported,
    Degenerate,
}

fn points(coords: &[wkt::types::Coord<f64>]) -> Vec<Point> {
    coords.iter().map(|c| Point::new(c.x, c.y)).collect()
}

fn convert(w: &Wkt<f64>, holes: &mut usize) -> Parsed {
    match w {
        Wkt::Polygon(p) => {
            let Some(outer) = p.rings().first() else {
                return Parsed::Degenerate;
            };
            if p.rings().len() > 1 {
                *holes += 1;
            }
            match SimplePolygon::new(points(outer.coords())) {
                Ok(poly) => Parsed::Geometry(Geometry::Polygon(poly)),
                Err(_) => Parsed::Degenerate,
            }
        }
        Wkt::LineString(l) => match Linestring::new(points(l.coords())) {
            Ok(ls) => Parsed::Geometry(Geometry::Linestring(ls)),
            Err(_) => Parsed::Degenerate,
        },
        _ => Parsed::Unsupported,
    }
}

/// Splits an optional `id;` prefix off a line.
fn split_id(line: &str) -> (Option<&str>, &str) {
    match line.split_once(';') {
        Some((id, rest)) if !id.trim().is_empty() && !id.contains('(') => (Some(id.trim()), rest.trim()),
        _ => (None, line),
    }
}

pub fn parse_wkt_lines(text: &str) -> Result<Ingested, IngestError> {
    let mut out = Ingested::default();
    let mut objects = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = n + 1;
        let (id, body) = split_id(line);
        let id = match id {
            Some(s) => s
                .parse::<u32>()
                .map_err(|_| IngestError::Parse { line: lineno, msg: format!("bad object id {s:?}") })?,
            None => n as u32,
        };
        let w = Wkt::<f64>::from_str(body)
            .map_err(|e| IngestError::Parse { line: lineno, msg: e.to_string() })?;
        match convert(&w, &mut out.holes_dropped) {
            Parsed::Geometry(geometry) => objects.push(Object { id, geometry }),
            Parsed::Unsupported => out.skipped_unsupported += 1,
            Parsed::Degenerate => out.skipped_degenerate += 1,
        }
    }
    if out.skipped_unsupported > 0 {
        log::warn!("skipped {} geometries of unsupported type", out.skipped_unsupported);
    }
    if out.skipped_degenerate > 0 {
        log::warn!("skipped {} degenerate geometries", out.skipped_degenerate);
    }
    if out.holes_dropped > 0 {
        log::warn!("dropped holes of {} polygons", out.holes_dropped);
    }
    out.dataset = Dataset::new(objects)?;
    Ok(out)
}

pub fn read_wkt_file(path: &Path) -> Result<Ingested, IngestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    parse_wkt_lines(&text)
}

/// A single polygon, e.g. a selection query.
pub fn parse_polygon(text: &str) -> Result<SimplePolygon, IngestError> {
    let err = |msg: String| IngestError::Parse { line: 1, msg };
    let w = Wkt::<f64>::from_str(text.trim()).map_err(|e| err(e.to_string()))?;
    match w {
        Wkt::Polygon(p) => {
            let outer = p.rings().first().ok_or_else(|| err("empty polygon".into()))?;
            Ok(SimplePolygon::new(points(outer.coords()))?)
        }
        _ => Err(err("query must be a POLYGON".into())),
    }
}
