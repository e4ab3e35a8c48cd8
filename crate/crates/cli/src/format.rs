//! Binary approximation files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   "APRL" | version u8 | kind u8 | order u8 | flags u8
//!          partitions u32 | map xmin ymin xmax ymax (f64 x 4)
//! tiles    partitions^2 times, row-major:
//!          extent (f64 x 4, NaN when the tile is empty) | record count u32
//!          records
//! ```
//!
//! `kind` is 0 for APRIL, 1 for RI, 2 for linestring cells. Flag bit 0 marks
//! VByte-compressed lists, bit 1 marks RI codes written for the S side.
//!
//! An APRIL record is `id u32 | A bytes u32 | F bytes u32 | A | F`, where an
//! uncompressed list is its flat start/end sequence as u32 values. A
//! linestring record has the same layout with the cell ids in A and an empty
//! F. An RI record is `id u32 | chunk count u32` followed by chunks
//! `start u32 | end u32 | code bytes u16 | code`. Intervals longer than
//! [`RI_CHUNK_CELLS`] are split into byte-aligned chunks and rejoined on read.

use std::collections::BTreeMap;
use std::path::Path;

use april_core::april::{AprilApprox, CompressedApril};
use april_core::codec::{CompressedCells, CompressedIntervals, CompressedList};
use april_core::geom::Mbr;
use april_core::intervals::IntervalList;
use april_core::pipeline::{Approx, ApproxStore, FilterKind, StoreTile};
use april_core::ri::{RiApprox, RiInterval, Side};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"APRL";
pub const VERSION: u8 = 1;

const KIND_APRIL: u8 = 0;
const KIND_RI: u8 = 1;
const KIND_CELLS: u8 = 2;

const FLAG_COMPRESSED: u8 = 1;
const FLAG_SIDE_S: u8 = 2;

/// Largest RI chunk: 65535 code bytes, a multiple of 8 cells.
pub const RI_CHUNK_CELLS: u32 = 174_760;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("not an approximation file")]
    BadMagic,

    #[error("unsupported file version {0}")]
    Version(u8),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("cannot write: {0}")]
    Unwritable(String),

    #[error(transparent)]
    Core(#[from] april_core::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

fn corrupt(msg: impl Into<String>) -> FormatError {
    FormatError::Corrupt(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    April,
    Ri,
    Cells,
}

fn kind_of(a: &Approx) -> (Kind, bool) {
    match a {
        Approx::April(_) => (Kind::April, false),
        Approx::AprilCompressed(_) => (Kind::April, true),
        Approx::Ri(_) => (Kind::Ri, false),
        Approx::Cells(_) => (Kind::Cells, false),
        Approx::CellsCompressed(_) => (Kind::Cells, true),
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_mbr(out: &mut Vec<u8>, m: Option<&Mbr>) {
    let v = m.map_or([f64::NAN; 4], |m| [m.xmin, m.ymin, m.xmax, m.ymax]);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn flat_bytes(flat: &[u32]) -> Vec<u8> {
    flat.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| FormatError::Unwritable(format!("length {n} exceeds 32 bits")))
}

fn put_lists(out: &mut Vec<u8>, a: &[u8], f: &[u8]) -> Result<()> {
    put_u32(out, len_u32(a.len())?);
    put_u32(out, len_u32(f.len())?);
    out.extend_from_slice(a);
    out.extend_from_slice(f);
    Ok(())
}

fn put_ri(out: &mut Vec<u8>, ri: &RiApprox) -> Result<()> {
    let mut chunks = Vec::new();
    for iv in &ri.intervals {
        let mut start = iv.start;
        while start < iv.end {
            let end = iv.end.min(start + RI_CHUNK_CELLS);
            let off = (start - iv.start) as usize * 3 / 8;
            let len = ((end - start) as usize * 3).div_ceil(8);
            chunks.push((start, end, &iv.code[off..off + len]));
            start = end;
        }
    }
    put_u32(out, len_u32(chunks.len())?);
    for (start, end, code) in chunks {
        put_u32(out, start);
        put_u32(out, end);
        out.extend_from_slice(&(code.len() as u16).to_le_bytes());
        out.extend_from_slice(code);
    }
    Ok(())
}

/// Serializes a store. All approximations must be of one kind, and RI
/// approximations of one side.
pub fn to_bytes(store: &ApproxStore) -> Result<Vec<u8>> {
    let all = || store.tiles.iter().flat_map(|t| t.approx.values());
    let (kind, compressed) = match all().next() {
        Some(a) => kind_of(a),
        None => match store.filter {
            FilterKind::Ri => (Kind::Ri, false),
            FilterKind::AprilCompressed => (Kind::April, true),
            FilterKind::April => (Kind::April, false),
            FilterKind::None => return Err(FormatError::Unwritable("no approximation kind".into())),
        },
    };
    if all().any(|a| kind_of(a) != (kind, compressed)) {
        return Err(FormatError::Unwritable("approximations of mixed kinds".into()));
    }
    let side = match all().next() {
        Some(Approx::Ri(r)) => r.side,
        _ => Side::R,
    };
    if all().any(|a| matches!(a, Approx::Ri(r) if r.side != side)) {
        return Err(FormatError::Unwritable("RI approximations of mixed sides".into()));
    }
    if store.tiles.len() != (store.partitions as usize).pow(2) {
        return Err(FormatError::Unwritable("tile table does not match the partition count".into()));
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(match kind {
        Kind::April => KIND_APRIL,
        Kind::Ri => KIND_RI,
        Kind::Cells => KIND_CELLS,
    });
    out.push(store.order);
    let mut flags = 0;
    if compressed {
        flags |= FLAG_COMPRESSED;
    }
    if side == Side::S {
        flags |= FLAG_SIDE_S;
    }
    out.push(flags);
    put_u32(&mut out, store.partitions);
    put_mbr(&mut out, Some(&store.map));
    for tile in &store.tiles {
        put_mbr(&mut out, tile.extent.as_ref());
        put_u32(&mut out, len_u32(tile.approx.len())?);
        for (&id, a) in &tile.approx {
            put_u32(&mut out, id);
            match a {
                Approx::April(x) => put_lists(&mut out, &flat_bytes(x.a.as_flat()), &flat_bytes(x.f.as_flat()))?,
                Approx::AprilCompressed(x) => {
                    put_lists(&mut out, x.a.list().as_bytes(), x.f.list().as_bytes())?
                }
                Approx::Cells(c) => put_lists(&mut out, &flat_bytes(c), &[])?,
                Approx::CellsCompressed(c) => put_lists(&mut out, c.list().as_bytes(), &[])?,
                Approx::Ri(r) => put_ri(&mut out, r)?,
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt(format!("unexpected end of file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn mbr(&mut self) -> Result<Option<Mbr>> {
        let v = [self.f64()?, self.f64()?, self.f64()?, self.f64()?];
        if v.iter().all(|x| x.is_nan()) {
            return Ok(None);
        }
        Ok(Some(Mbr::new(v[0], v[1], v[2], v[3])?))
    }

    fn compressed_intervals(&mut self, bytes: usize) -> Result<CompressedIntervals> {
        let l = CompressedList::from_bytes(self.take(bytes)?.to_vec())?;
        Ok(CompressedIntervals::from_compressed(l)?)
    }

    fn flat(&mut self, bytes: usize) -> Result<Vec<u32>> {
        if !bytes.is_multiple_of(4) {
            return Err(corrupt("list length is not a multiple of 4"));
        }
        Ok(self.take(bytes)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn read_ri(rd: &mut Reader, order: u8, side: Side) -> Result<RiApprox> {
    let n = rd.u32()?;
    let mut intervals: Vec<RiInterval> = Vec::new();
    for _ in 0..n {
        let start = rd.u32()?;
        let end = rd.u32()?;
        let len = rd.u16()? as usize;
        let chunk = RiInterval::new(start, end, rd.take(len)?.to_vec())?;
        match intervals.last_mut() {
            Some(prev) if prev.end == start && prev.len() % RI_CHUNK_CELLS == 0 => {
                prev.end = end;
                prev.code.extend_from_slice(&chunk.code);
            }
            Some(prev) if prev.end >= start => {
                return Err(corrupt(format!("RI intervals out of order at cell {start}")));
            }
            _ => intervals.push(chunk),
        }
    }
    Ok(RiApprox { order, intervals, side })
}

pub fn from_bytes(buf: &[u8]) -> Result<ApproxStore> {
    let mut rd = Reader { buf, pos: 0 };
    if rd.take(4).map_err(|_| FormatError::BadMagic)? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = rd.u8()?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let kind = match rd.u8()? {
        KIND_APRIL => Kind::April,
        KIND_RI => Kind::Ri,
        KIND_CELLS => Kind::Cells,
        k => return Err(corrupt(format!("unknown kind {k}"))),
    };
    let order = rd.u8()?;
    april_core::grid::GridConfig::new(Mbr { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 }, order)?;
    let flags = rd.u8()?;
    if flags & !(FLAG_COMPRESSED | FLAG_SIDE_S) != 0 {
        return Err(corrupt(format!("unknown flags {flags:#04x}")));
    }
    let compressed = flags & FLAG_COMPRESSED != 0;
    let side = if flags & FLAG_SIDE_S != 0 { Side::S } else { Side::R };
    if kind == Kind::Ri && compressed {
        return Err(corrupt("RI approximations cannot be compressed"));
    }
    let partitions = rd.u32()?;
    if partitions == 0 || partitions > 1 << 12 {
        return Err(corrupt(format!("bad partition count {partitions}")));
    }
    let map = rd.mbr()?.ok_or_else(|| corrupt("missing map extent"))?;
    let filter = match (kind, compressed) {
        (Kind::Ri, _) => FilterKind::Ri,
        (_, true) => FilterKind::AprilCompressed,
        (_, false) => FilterKind::April,
    };

    let mut tiles = Vec::new();
    for _ in 0..partitions * partitions {
        let extent = rd.mbr()?;
        let count = rd.u32()?;
        let mut approx = BTreeMap::new();
        for _ in 0..count {
            let id = rd.u32()?;
            let a = if kind == Kind::Ri {
                Approx::Ri(read_ri(&mut rd, order, side)?)
            } else {
                let (alen, flen) = (rd.u32()? as usize, rd.u32()? as usize);
                match (kind, compressed) {
                    (Kind::April, false) => Approx::April(AprilApprox {
                        order,
                        a: IntervalList::from_flat(rd.flat(alen)?)?,
                        f: IntervalList::from_flat(rd.flat(flen)?)?,
                    }),
                    (Kind::April, true) => {
                        let a = rd.compressed_intervals(alen)?;
                        let f = rd.compressed_intervals(flen)?;
                        Approx::AprilCompressed(CompressedApril { order, a, f })
                    }
                    (_, false) => {
                        let cells = rd.flat(alen)?;
                        if cells.windows(2).any(|w| w[0] >= w[1]) {
                            return Err(corrupt(format!("cells of object {id} not ascending")));
                        }
                        expect_empty(flen, id)?;
                        Approx::Cells(cells)
                    }
                    (_, true) => {
                        let l = CompressedList::from_bytes(rd.take(alen)?.to_vec())?;
                        expect_empty(flen, id)?;
                        Approx::CellsCompressed(CompressedCells::from_compressed(l))
                    }
                }
            };
            if approx.insert(id, a).is_some() {
                return Err(corrupt(format!("object {id} repeated in a tile")));
            }
        }
        tiles.push(StoreTile { extent, approx });
    }
    if rd.pos != buf.len() {
        return Err(corrupt(format!("{} trailing bytes", buf.len() - rd.pos)));
    }
    Ok(ApproxStore { order, filter, map, partitions, tiles })
}

fn expect_empty(flen: usize, id: u32) -> Result<()> {
    if flen != 0 {
        return Err(corrupt(format!("linestring record {id} has an F-list")));
    }
    Ok(())
}

pub fn write_file(path: &Path, store: &ApproxStore) -> Result<usize> {
    let bytes = to_bytes(store)?;
    std::fs::write(path, &bytes).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    Ok(bytes.len())
}

pub fn read_file(path: &Path) -> Result<ApproxStore> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use april_core::raster::TriClass;

    fn unit() -> Mbr {
        Mbr::new(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    fn store_of(filter: FilterKind, items: Vec<(u32, Approx)>) -> ApproxStore {
        ApproxStore {
            order: 10,
            filter,
            map: unit(),
            partitions: 1,
            tiles: vec![StoreTile { extent: Some(unit()), approx: items.into_iter().collect() }],
        }
    }

    fn april() -> AprilApprox {
        AprilApprox {
            order: 10,
            a: IntervalList::from_intervals([(3, 9), (20, 300)]).unwrap(),
            f: IntervalList::from_intervals([(5, 6), (40, 200)]).unwrap(),
        }
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&store_of(FilterKind::April, vec![(7, Approx::April(april()))])).unwrap();
        assert_eq!(&bytes[..8], &[b'A', b'P', b'R', b'L', 1, 0, 10, 0]);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        // map, tile extent, count, then the record id
        assert_eq!(&bytes[12 + 64..12 + 68], &1u32.to_le_bytes());
        assert_eq!(&bytes[12 + 68..12 + 72], &7u32.to_le_bytes());
        assert_eq!(&bytes[12 + 72..12 + 76], &16u32.to_le_bytes());
    }

    #[test]
    fn roundtrip_every_kind() {
        let stores = [
            store_of(FilterKind::April, vec![(1, Approx::April(april())), (9, Approx::Cells(vec![2, 3, 90]))]),
            store_of(FilterKind::AprilCompressed, vec![(4, Approx::AprilCompressed(april().compress()))]),
            store_of(FilterKind::AprilCompressed, vec![(4, Approx::CellsCompressed(CompressedCells::new(&[1, 5])))]),
        ];
        // Mixed polygon and linestring records are rejected.
        assert!(to_bytes(&stores[0]).is_err());
        for s in &stores[1..] {
            let b = to_bytes(s).unwrap();
            assert_eq!(&from_bytes(&b).unwrap(), s);
            assert_eq!(to_bytes(&from_bytes(&b).unwrap()).unwrap(), b);
        }
    }

    #[test]
    fn long_ri_interval_is_chunked() {
        let n = 2 * RI_CHUNK_CELLS + 5;
        let classes: Vec<TriClass> =
            (0..n).map(|i| [TriClass::Full, TriClass::Weak, TriClass::Strong][(i % 3) as usize]).collect();
        let iv = RiInterval::from_classes(11, &classes, Side::S).unwrap();
        let short = RiInterval::from_classes(n + 20, &classes[..4], Side::S).unwrap();
        let ri = RiApprox { order: 16, intervals: vec![iv, short], side: Side::S };
        let mut s = store_of(FilterKind::Ri, vec![(3, Approx::Ri(ri))]);
        s.order = 16;
        let b = to_bytes(&s).unwrap();
        assert_eq!(b[7], FLAG_SIDE_S);
        assert_eq!(from_bytes(&b).unwrap(), s);
    }

    #[test]
    fn rejects_damage() {
        let b = to_bytes(&store_of(FilterKind::April, vec![(1, Approx::April(april()))])).unwrap();
        assert!(matches!(from_bytes(&b[..3]), Err(FormatError::BadMagic)));
        assert!(matches!(from_bytes(&b[..b.len() - 1]), Err(FormatError::Corrupt(_))));
        let mut extra = b.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
        let mut v = b.clone();
        v[4] = 9;
        assert!(matches!(from_bytes(&v), Err(FormatError::Version(9))));
        // Swap two interval endpoints: no longer increasing.
        let mut bad = b.clone();
        let at = bad.len() - 32;
        bad[at..at + 4].copy_from_slice(&500u32.to_le_bytes());
        assert!(from_bytes(&bad).is_err());
    }
}
