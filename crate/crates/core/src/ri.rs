//! Raster intervals with per-cell 3-bit type codes.
//!
//! Codes are chosen so that a bitwise AND of an R-coded and an S-coded cell is
//! non-zero exactly when the pair of cell types guarantees an intersection.
//! XOR with `110` turns one encoding into the other, so two approximations
//! built on the same side can still be compared.

use crate::april::Verdict;
use crate::error::{Error, Result};
use crate::geom::SimplePolygon;
use crate::grid::{CellId, GridConfig};
use crate::raster::{classify_tri, TriClass};

/// XOR mask turning an R code into an S code and back.
pub const SIDE_MASK: u8 = 0b110;

/// `110` repeated; the byte starting at bit `8k` of the pattern is
/// `MASK_BYTES[(2k) % 3]`.
const MASK_BYTES: [u8; 3] = [0xDB, 0xB6, 0x6D];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Side {
    #[default]
    R,
    S,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::R => Side::S,
            Side::S => Side::R,
        }
    }
}

pub fn encode_cell(t: TriClass, side: Side) -> u8 {
    let r = match t {
        TriClass::Full => 0b011,
        TriClass::Strong => 0b101,
        TriClass::Weak => 0b100,
    };
    match side {
        Side::R => r,
        Side::S => r ^ SIDE_MASK,
    }
}

pub fn decode_cell(code: u8, side: Side) -> Option<TriClass> {
    let r = match side {
        Side::R => code,
        Side::S => code ^ SIDE_MASK,
    };
    match r {
        0b011 => Some(TriClass::Full),
        0b101 => Some(TriClass::Strong),
        0b100 => Some(TriClass::Weak),
        _ => None,
    }
}

fn code_bytes(cells: u32) -> usize {
    (cells as usize * 3).div_ceil(8)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RiInterval {
    pub start: CellId,
    pub end: CellId,
    /// 3 bits per cell, MSB-first, zero padded.
    pub code: Vec<u8>,
}

impl RiInterval {
    pub fn from_classes(start: CellId, classes: &[TriClass], side: Side) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::DegenerateGeometry("empty raster interval".into()));
        }
        let mut w = BitWriter::with_cells(classes.len());
        for &t in classes {
            w.put3(encode_cell(t, side));
        }
        Ok(RiInterval { start, end: start + classes.len() as u32, code: w.bytes })
    }

    /// Checks the code length and the zero padding.
    pub fn new(start: CellId, end: CellId, code: Vec<u8>) -> Result<Self> {
        if start >= end {
            return Err(Error::Codec(format!("empty interval [{start}, {end})")));
        }
        let n = end - start;
        if code.len() != code_bytes(n) {
            return Err(Error::Codec(format!(
                "interval [{start}, {end}) needs {} code bytes, got {}",
                code_bytes(n),
                code.len()
            )));
        }
        let used = (n as usize * 3) % 8;
        if used != 0 && code[code.len() - 1] & (0xFF >> used) != 0 {
            return Err(Error::Codec("non-zero padding bits".into()));
        }
        Ok(RiInterval { start, end, code })
    }

    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// 3-bit code of the `i`-th cell of the interval.
    pub fn cell_code(&self, i: u32) -> u8 {
        let bit = i as usize * 3;
        let word = ((self.code[bit / 8] as u16) << 8) | *self.code.get(bit / 8 + 1).unwrap_or(&0) as u16;
        ((word >> (13 - bit % 8)) & 0b111) as u8
    }

    fn xor_side(&mut self) {
        let n = self.len();
        for (k, b) in self.code.iter_mut().enumerate() {
            *b ^= MASK_BYTES[(2 * k) % 3];
        }
        mask_tail(&mut self.code, n as usize * 3);
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    bit: usize,
}

impl BitWriter {
    fn with_cells(cells: usize) -> Self {
        BitWriter { bytes: vec![0; (cells * 3).div_ceil(8)], bit: 0 }
    }

    fn put3(&mut self, code: u8) {
        for k in (0..3).rev() {
            if code >> k & 1 == 1 {
                self.bytes[self.bit / 8] |= 0x80 >> (self.bit % 8);
            }
            self.bit += 1;
        }
    }
}

fn mask_tail(bytes: &mut [u8], nbits: usize) {
    let used = nbits % 8;
    if used != 0 {
        if let Some(last) = bytes.last_mut() {
            *last &= 0xFFu8 << (8 - used);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RiApprox {
    pub order: u8,
    pub intervals: Vec<RiInterval>,
    pub side: Side,
}

impl RiApprox {
    /// Re-encodes every code for the other side.
    pub fn to_side(&self, side: Side) -> RiApprox {
        let mut out = self.clone();
        if side != self.side {
            for iv in &mut out.intervals {
                iv.xor_side();
            }
            out.side = side;
        }
        out
    }

    /// Cell spans of the intervals, i.e. the non-empty cell runs.
    pub fn spans(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.intervals.iter().map(|iv| (iv.start, iv.end))
    }
}

pub fn build_ri(poly: &SimplePolygon, grid: &GridConfig, side: Side) -> Result<RiApprox> {
    let cells = classify_tri(poly, grid)?;
    if cells.is_empty() {
        return Err(Error::DegenerateGeometry("polygon covers no cells".into()));
    }
    let mut intervals = Vec::new();
    let mut run: Vec<TriClass> = Vec::new();
    let mut start = cells[0].0;
    for (k, &(id, class)) in cells.iter().enumerate() {
        if k > 0 && id != cells[k - 1].0 + 1 {
            intervals.push(RiInterval::from_classes(start, &run, side)?);
            run.clear();
            start = id;
        }
        run.push(class);
    }
    intervals.push(RiInterval::from_classes(start, &run, side)?);
    Ok(RiApprox { order: grid.order(), intervals, side })
}

/// Copies `nbits` bits of `code` starting at bit `offset` into a fresh
/// MSB-first buffer: leading whole bytes are dropped and the rest shifted
/// left, pulling carry bits from the following byte.
fn aligned_bits(code: &[u8], offset: usize, nbits: usize) -> Vec<u8> {
    let src = &code[offset / 8..];
    let shift = offset % 8;
    let n = nbits.div_ceil(8);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let hi = src[k];
        let b = if shift == 0 {
            hi
        } else {
            (hi << shift) | (src.get(k + 1).copied().unwrap_or(0) >> (8 - shift))
        };
        out.push(b);
    }
    mask_tail(&mut out, nbits);
    out
}

/// Does some cell in the common part of `x` and `y` carry codes that AND to
/// a non-zero value? With `same_encoding`, `y` is flipped to the opposite
/// encoding on the fly.
pub fn aligned_and(x: &RiInterval, y: &RiInterval, same_encoding: bool) -> Result<bool> {
    let s = x.start.max(y.start);
    let e = x.end.min(y.end);
    if s >= e {
        return Err(Error::NoOverlap);
    }
    let nbits = (e - s) as usize * 3;
    let xs = aligned_bits(&x.code, (s - x.start) as usize * 3, nbits);
    let ys = aligned_bits(&y.code, (s - y.start) as usize * 3, nbits);
    let last = xs.len() - 1;
    for k in 0..xs.len() {
        let mut yb = ys[k];
        if same_encoding {
            yb ^= MASK_BYTES[(2 * k) % 3];
            if k == last && !nbits.is_multiple_of(8) {
                yb &= 0xFFu8 << (8 - nbits % 8);
            }
        }
        if xs[k] & yb != 0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Merge join of two RI approximations.
pub fn ri_join(x: &RiApprox, y: &RiApprox) -> Result<Verdict> {
    if x.order != y.order {
        return Err(Error::GridMismatch { left: x.order, right: y.order });
    }
    let same = x.side == y.side;
    let (mut i, mut j) = (0, 0);
    let mut overlapped = false;
    while i < x.intervals.len() && j < y.intervals.len() {
        let (a, b) = (&x.intervals[i], &y.intervals[j]);
        if a.start < b.end && b.start < a.end {
            overlapped = true;
            if aligned_and(a, b, same)? {
                return Ok(Verdict::TrueHit);
            }
        }
        if a.end <= b.end {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(if overlapped { Verdict::Indecisive } else { Verdict::TrueNegative })
}
