//! Delta + variable-byte compression of strictly increasing id sequences.
//!
//! The first value is stored as-is, every later one as the gap to its
//! predecessor. Each integer is written in 7-bit groups, least significant
//! first; the high bit of a byte is set when more bytes follow.
//!
//! Decoding is incremental so a merge join can stop as soon as it has an
//! answer without touching the rest of the buffer.

use crate::error::{Error, Result};
use crate::grid::CellId;
use crate::intervals::{IntervalList, IntervalSource, UnitCells};

const CONTINUE: u8 = 0x80;
const MAX_BYTES: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CompressedList {
    bytes: Vec<u8>,
    count: usize,
}

pub fn encode_values(values: &[CellId]) -> CompressedList {
    let mut bytes = Vec::with_capacity(values.len() + 4);
    let mut prev = 0u32;
    for (i, &v) in values.iter().enumerate() {
        debug_assert!(i == 0 || v > prev, "values must be strictly increasing");
        let mut gap = if i == 0 { v } else { v - prev };
        prev = v;
        while gap >= 0x80 {
            bytes.push((gap as u8 & 0x7f) | CONTINUE);
            gap >>= 7;
        }
        bytes.push(gap as u8);
    }
    CompressedList { bytes, count: values.len() }
}

/// Compresses the flattened start/end sequence of an interval list.
pub fn encode(list: &IntervalList) -> CompressedList {
    encode_values(list.as_flat())
}

impl CompressedList {
    /// Validates a raw buffer: every integer well formed, no zero gaps, no
    /// overflow. The count is the number of encoded integers.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let mut dec = VByteDecoder::new(&bytes);
        let mut count = 0;
        let mut prev: Option<u32> = None;
        while !dec.is_exhausted() {
            let v = dec.next_value(prev)?;
            prev = Some(v);
            count += 1;
        }
        Ok(CompressedList { bytes, count })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn byte_len(&self) -> usize {
        self.bytes.len()
    }

    /// Streaming decoder over the values. The buffer was validated on
    /// construction, so the stream cannot fail.
    pub fn decode_stream(&self) -> DecodeStream<'_> {
        DecodeStream { dec: VByteDecoder::new(&self.bytes), prev: None, remaining: self.count }
    }

    pub fn decode(&self) -> Vec<CellId> {
        self.decode_stream().collect()
    }

    pub fn decode_intervals(&self) -> Result<IntervalList> {
        IntervalList::from_flat(self.decode())
    }
}

/// Fallible decoder over an arbitrary buffer.
#[derive(Debug, Clone)]
pub struct VByteDecoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> VByteDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        VByteDecoder { bytes, pos: 0 }
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub fn bytes_read(&self) -> usize {
        self.pos
    }

    fn next_raw(&mut self) -> Result<u32> {
        let mut value: u64 = 0;
        for k in 0..MAX_BYTES {
            let Some(&b) = self.bytes.get(self.pos) else {
                return Err(Error::Codec(format!("truncated integer at byte {}", self.pos)));
            };
            self.pos += 1;
            value |= ((b & 0x7f) as u64) << (7 * k);
            if b & CONTINUE == 0 {
                return u32::try_from(value)
                    .map_err(|_| Error::Codec(format!("value overflows 32 bits at byte {}", self.pos)));
            }
        }
        Err(Error::Codec(format!("overlong integer ending at byte {}", self.pos)))
    }

    /// Next absolute value given the previous one.
    pub fn next_value(&mut self, prev: Option<u32>) -> Result<u32> {
        let raw = self.next_raw()?;
        match prev {
            None => Ok(raw),
            Some(_) if raw == 0 => Err(Error::Codec("zero gap in increasing sequence".into())),
            Some(p) => p
                .checked_add(raw)
                .ok_or_else(|| Error::Codec("running sum overflows 32 bits".into())),
        }
    }
}

/// Infallible value stream over a validated [`CompressedList`].
#[derive(Debug, Clone)]
pub struct DecodeStream<'a> {
    dec: VByteDecoder<'a>,
    prev: Option<u32>,
    remaining: usize,
}

impl DecodeStream<'_> {
    /// Bytes consumed so far.
    pub fn bytes_read(&self) -> usize {
        self.dec.bytes_read()
    }
}

impl Iterator for DecodeStream<'_> {
    type Item = CellId;

    fn next(&mut self) -> Option<CellId> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let v = self.dec.next_value(self.prev).expect("validated buffer");
        self.prev = Some(v);
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// Pairs consecutive decoded values into `(start, end)` intervals.
#[derive(Debug, Clone)]
pub struct IntervalStream<'a>(DecodeStream<'a>);

impl IntervalStream<'_> {
    pub fn bytes_read(&self) -> usize {
        self.0.bytes_read()
    }
}

impl Iterator for IntervalStream<'_> {
    type Item = (CellId, CellId);

    fn next(&mut self) -> Option<(CellId, CellId)> {
        let s = self.0.next()?;
        let e = self.0.next()?;
        Some((s, e))
    }
}

/// A compressed interval list; joins consume it through [`IntervalSource`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CompressedIntervals(CompressedList);

impl CompressedIntervals {
    pub fn new(list: &IntervalList) -> Self {
        CompressedIntervals(encode(list))
    }

    pub fn from_compressed(list: CompressedList) -> Result<Self> {
        if !list.len().is_multiple_of(2) {
            return Err(Error::Codec(format!("odd interval endpoint count {}", list.len())));
        }
        Ok(CompressedIntervals(list))
    }

    pub fn list(&self) -> &CompressedList {
        &self.0
    }

    pub fn stream(&self) -> IntervalStream<'_> {
        IntervalStream(self.0.decode_stream())
    }

    pub fn len(&self) -> usize {
        self.0.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn decompress(&self) -> IntervalList {
        IntervalList::from_flat_unchecked(self.0.decode())
    }
}

impl IntervalSource for CompressedIntervals {
    fn intervals(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.stream()
    }
}

/// A compressed sorted cell list (linestring approximation), read as unit
/// intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CompressedCells(CompressedList);

impl CompressedCells {
    pub fn new(cells: &[CellId]) -> Self {
        CompressedCells(encode_values(cells))
    }

    pub fn from_compressed(list: CompressedList) -> Self {
        CompressedCells(list)
    }

    pub fn list(&self) -> &CompressedList {
        &self.0
    }

    pub fn decompress(&self) -> Vec<CellId> {
        self.0.decode()
    }
}

impl IntervalSource for CompressedCells {
    fn intervals(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.0.decode_stream().map(|c| (c, c + 1))
    }
}

impl<'a> From<&'a [CellId]> for UnitCells<'a> {
    fn from(cells: &'a [CellId]) -> Self {
        UnitCells(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::join_overlap;

    #[test]
    fn byte_layout() {
        assert_eq!(encode_values(&[0]).as_bytes(), &[0x00]);
        assert_eq!(encode_values(&[128]).as_bytes(), &[0x80, 0x01]);
        assert_eq!(encode_values(&[9, 13, 32, 35]).as_bytes(), &[0x09, 0x04, 0x13, 0x03]);
        assert_eq!(encode_values(&[u32::MAX]).as_bytes(), &[0xff, 0xff, 0xff, 0xff, 0x0f]);
    }

    #[test]
    fn empty_list() {
        let c = encode_values(&[]);
        assert!(c.as_bytes().is_empty());
        assert_eq!(c.decode_stream().count(), 0);
        assert_eq!(CompressedList::from_bytes(vec![]).unwrap().len(), 0);
    }

    #[test]
    fn malformed_buffers() {
        assert!(CompressedList::from_bytes(vec![0x80]).is_err());
        assert!(CompressedList::from_bytes(vec![0xff, 0xff, 0xff, 0xff, 0xff, 0x01]).is_err());
        assert!(CompressedList::from_bytes(vec![0xff, 0xff, 0xff, 0xff, 0x1f]).is_err());
        // Second value has a zero gap.
        assert!(CompressedList::from_bytes(vec![0x05, 0x00]).is_err());
        assert_eq!(CompressedList::from_bytes(vec![0x09, 0x04]).unwrap().decode(), vec![9, 13]);
    }

    #[test]
    fn early_exit_reads_prefix_only() {
        let flat: Vec<u32> = (0..200).map(|i| i * 10).collect();
        let c = CompressedIntervals::from_compressed(encode_values(&flat)).unwrap();
        let probe = IntervalList::from_intervals([(3, 4)]).unwrap();
        let mut stream = c.stream();
        assert!(join_overlap(&mut stream, probe.iter()));
        assert_eq!(stream.bytes_read(), 2);
        assert_eq!(c.list().byte_len(), 200);
    }

    #[test]
    fn interval_roundtrip() {
        let l = IntervalList::from_intervals([(1, 5), (9, 200), (70000, 70001)]).unwrap();
        let c = CompressedIntervals::new(&l);
        assert_eq!(c.decompress(), l);
        assert_eq!(c.stream().collect::<Vec<_>>(), l.iter().collect::<Vec<_>>());
    }
}
