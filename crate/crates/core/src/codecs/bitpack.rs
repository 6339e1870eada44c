//! Bit-packing with frame of reference.
//!
//! Values are stored as `v - for_base` in `bit_width`-bit fields, LSB-first,
//! little-endian, contiguous across byte boundaries. `bit_width` is the
//! minimum width covering `max - min`; an all-equal column packs to width 0
//! and an empty packed stream.

use super::CodecError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BitPackParams {
    pub bit_width: u8,
    pub for_base: i64,
}

/// Packed stream length in bytes for `count` fields of `bit_width` bits.
pub fn packed_len(count: usize, bit_width: u8) -> usize {
    (count * bit_width as usize).div_ceil(8)
}

/// Minimum bits needed to represent `span` distinct offsets (0 for span 0).
fn width_for_span(span: u64) -> u8 {
    (64 - span.leading_zeros()) as u8
}

pub fn bitpack_encode(values: &[i64]) -> Result<(Vec<u8>, BitPackParams), CodecError> {
    if values.is_empty() {
        return Err(CodecError::EmptyColumn);
    }
    let min = *values.iter().min().unwrap();
    let max = *values.iter().max().unwrap();
    let span = max.wrapping_sub(min) as u64;
    let width = width_for_span(span);
    let mut packed = vec![0u8; packed_len(values.len(), width)];
    if width > 0 {
        for (i, &v) in values.iter().enumerate() {
            write_field(&mut packed, i, width, v.wrapping_sub(min) as u64);
        }
    }
    Ok((
        packed,
        BitPackParams {
            bit_width: width,
            for_base: min,
        },
    ))
}

fn write_field(packed: &mut [u8], index: usize, width: u8, value: u64) {
    let mut bitpos = index * width as usize;
    let mut remaining = width as u32;
    let mut val = value;
    while remaining > 0 {
        let byte = bitpos / 8;
        let off = (bitpos % 8) as u32;
        let take = (8 - off).min(remaining);
        let mask = if take == 64 {
            u64::MAX
        } else {
            (1u64 << take) - 1
        };
        packed[byte] |= ((val & mask) as u8) << off;
        val >>= take;
        bitpos += take as usize;
        remaining -= take;
    }
}

/// Reads field `index` from a packed stream. Width 0 always yields 0.
pub fn read_field(packed: &[u8], index: usize, width: u8) -> u64 {
    if width == 0 {
        return 0;
    }
    let mut bitpos = index * width as usize;
    let mut got = 0u32;
    let mut val = 0u64;
    while got < width as u32 {
        let byte = packed[bitpos / 8] as u64;
        let off = (bitpos % 8) as u32;
        let take = (8 - off).min(width as u32 - got);
        val |= ((byte >> off) & ((1u64 << take) - 1)) << got;
        got += take;
        bitpos += take as usize;
    }
    val
}

/// Validates that `packed` holds at least `count` fields.
pub fn check_packed_len(packed: &[u8], count: usize, width: u8) -> Result<(), CodecError> {
    let needed = packed_len(count, width);
    if packed.len() < needed {
        return Err(CodecError::TruncatedStream {
            needed,
            have: packed.len(),
        });
    }
    Ok(())
}

/// Sequential full decode; the elementwise kernel path lives in the plan
/// compiler, this is its oracle and the host-side convenience.
pub fn bitpack_decode_all(
    packed: &[u8],
    params: BitPackParams,
    count: usize,
) -> Result<Vec<i64>, CodecError> {
    check_packed_len(packed, count, params.bit_width)?;
    Ok((0..count)
        .map(|i| {
            params
                .for_base
                .wrapping_add(read_field(packed, i, params.bit_width) as i64)
        })
        .collect())
}
