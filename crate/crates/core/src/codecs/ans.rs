//! Chunked range-ANS entropy coder.
//!
//! One frequency table is computed over the whole input and normalized to
//! `2^table_log`; each `chunk_size` chunk is then encoded independently with
//! a 32-bit state renormalized through 16-bit words, so chunks decode in
//! parallel while the decode state inside a chunk stays strictly sequential.
//!
//! Chunk payload layout: final encoder state (u32 LE) followed by the
//! renormalization words (u16 LE) in decode order.

use super::CodecError;
use crate::pattern::KernelFault;
use serde::Serialize;

pub const ANS_DEFAULT_CHUNK: u32 = 4096;
pub const ANS_DEFAULT_TABLE_LOG: u8 = 12;
pub const ANS_MIN_TABLE_LOG: u8 = 8;
pub const ANS_MAX_TABLE_LOG: u8 = 14;

/// Lower bound of the normalized state interval `[L, L * 2^16)`.
const RANS_L: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnsParams {
    pub chunk_size: u32,
    pub table_log: u8,
}

impl Default for AnsParams {
    fn default() -> Self {
        AnsParams {
            chunk_size: ANS_DEFAULT_CHUNK,
            table_log: ANS_DEFAULT_TABLE_LOG,
        }
    }
}

impl AnsParams {
    pub fn validate(&self) -> Result<(), CodecError> {
        if !self.chunk_size.is_power_of_two() {
            return Err(CodecError::BadParams("chunk_size must be a power of two"));
        }
        if self.table_log < ANS_MIN_TABLE_LOG || self.table_log > ANS_MAX_TABLE_LOG {
            return Err(CodecError::BadParams("table_log must be in 8..=14"));
        }
        Ok(())
    }
}

/// Normalized frequency table: sums to `2^table_log` with every symbol
/// present in the input given a frequency of at least 1.
pub fn build_freq_table(data: &[u8], table_log: u8) -> Vec<u16> {
    let m = 1u32 << table_log;
    let mut hist = [0u64; 256];
    for &b in data {
        hist[b as usize] += 1;
    }
    let total = data.len() as u64;
    let mut freqs = vec![0u16; 256];
    if total == 0 {
        return freqs;
    }
    let mut sum: u64 = 0;
    for i in 0..256 {
        if hist[i] > 0 {
            let share = (hist[i] as u128 * m as u128 / total as u128) as u64;
            let f = share.clamp(1, m as u64 - 1);
            freqs[i] = f as u16;
            sum += f;
        }
    }
    while sum > m as u64 {
        // shave the largest frequency (> 1), lowest symbol on ties
        let mut best = usize::MAX;
        let mut best_f = 1u16;
        for (i, &f) in freqs.iter().enumerate() {
            if f > best_f {
                best_f = f;
                best = i;
            }
        }
        freqs[best] -= 1;
        sum -= 1;
    }
    if sum < m as u64 {
        // grant the remainder to the most frequent symbol
        let mut best = 0usize;
        let mut best_h = 0u64;
        for (i, &h) in hist.iter().enumerate() {
            if h > best_h {
                best_h = h;
                best = i;
            }
        }
        freqs[best] += (m as u64 - sum) as u16;
    }
    freqs
}

/// Cumulative table plus slot-to-symbol map for O(1) decoding.
pub struct AnsDecodeTable {
    pub table_log: u8,
    pub freqs: Vec<u16>,
    pub cum: Vec<u32>,
    slot_to_sym: Vec<u8>,
}

impl AnsDecodeTable {
    pub fn new(freqs: &[u16], table_log: u8) -> Result<Self, CodecError> {
        if freqs.len() != 256 {
            return Err(CodecError::BadParams(
                "frequency table must have 256 entries",
            ));
        }
        if !(ANS_MIN_TABLE_LOG..=ANS_MAX_TABLE_LOG).contains(&table_log) {
            return Err(CodecError::BadParams("table_log must be in 8..=14"));
        }
        let m = 1u32 << table_log;
        let mut cum = Vec::with_capacity(257);
        cum.push(0u32);
        let mut acc = 0u32;
        for &f in freqs {
            acc += f as u32;
            cum.push(acc);
        }
        if acc != m {
            return Err(CodecError::BadParams("frequencies must sum to 2^table_log"));
        }
        let mut slot_to_sym = vec![0u8; m as usize];
        for sym in 0..256 {
            for slot in cum[sym]..cum[sym + 1] {
                slot_to_sym[slot as usize] = sym as u8;
            }
        }
        Ok(AnsDecodeTable {
            table_log,
            freqs: freqs.to_vec(),
            cum,
            slot_to_sym,
        })
    }
}

fn encode_chunk(chunk: &[u8], table: &AnsDecodeTable, out: &mut Vec<u8>) {
    let tl = table.table_log as u32;
    let mut x: u32 = RANS_L;
    let mut words: Vec<u16> = Vec::new();
    for &sym in chunk.iter().rev() {
        let f = table.freqs[sym as usize] as u32;
        debug_assert!(f > 0, "symbol {sym} absent from the frequency table");
        let x_max = ((RANS_L as u64) >> tl << 16) * f as u64;
        while (x as u64) >= x_max {
            words.push(x as u16);
            x >>= 16;
        }
        x = ((x / f) << tl) + (x % f) + table.cum[sym as usize];
    }
    out.extend_from_slice(&x.to_le_bytes());
    for w in words.iter().rev() {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

/// (payload bytes, chunk byte offsets, normalized frequency table)
pub type AnsEncoded = (Vec<u8>, Vec<u64>, Vec<u16>);

/// Encodes `data` with one shared table; returns the concatenated chunk
/// payloads, the `n_chunks + 1` byte offset table, and the frequency table.
/// Empty input produces zero chunks.
pub fn ans_encode(data: &[u8], params: &AnsParams) -> Result<AnsEncoded, CodecError> {
    params.validate()?;
    let freqs = build_freq_table(data, params.table_log);
    let mut offsets = vec![0u64];
    let mut payload = Vec::new();
    if data.is_empty() {
        return Ok((payload, offsets, freqs));
    }
    let table = AnsDecodeTable::new(&freqs, params.table_log)?;
    for chunk in data.chunks(params.chunk_size as usize) {
        encode_chunk(chunk, &table, &mut payload);
        offsets.push(payload.len() as u64);
    }
    Ok((payload, offsets, freqs))
}

/// Decodes one chunk payload into `out` (whose length is the plain chunk
/// length). The final state and word count are integrity-checked.
pub fn ans_decode_chunk(
    payload: &[u8],
    table: &AnsDecodeTable,
    out: &mut [u8],
) -> Result<(), KernelFault> {
    if out.is_empty() {
        return if payload.is_empty() {
            Ok(())
        } else {
            Err(KernelFault::BadState("payload for empty chunk"))
        };
    }
    if payload.len() < 4 {
        return Err(KernelFault::TruncatedStream);
    }
    let tl = table.table_log as u32;
    let mask = (1u32 << tl) - 1;
    let mut x = u32::from_le_bytes(payload[..4].try_into().unwrap());
    let mut pos = 4usize;
    for slot_out in out.iter_mut() {
        let slot = x & mask;
        let sym = table.slot_to_sym[slot as usize];
        let f = table.freqs[sym as usize] as u64;
        x = (f * (x >> tl) as u64 + slot as u64 - table.cum[sym as usize] as u64) as u32;
        while x < RANS_L {
            if pos + 2 > payload.len() {
                return Err(KernelFault::BadState("renormalization words exhausted"));
            }
            let w = u16::from_le_bytes(payload[pos..pos + 2].try_into().unwrap());
            x = (x << 16) | w as u32;
            pos += 2;
        }
        *slot_out = sym;
    }
    if x != RANS_L {
        return Err(KernelFault::BadState("final decode state mismatch"));
    }
    if pos != payload.len() {
        return Err(KernelFault::BadState("unconsumed renormalization words"));
    }
    Ok(())
}

/// Sequential whole-input decode; the oracle for the non-parallel kernel.
pub fn ans_decode_all(
    payload: &[u8],
    offsets: &[u64],
    freqs: &[u16],
    params: &AnsParams,
    plain_len: usize,
) -> Result<Vec<u8>, CodecError> {
    if plain_len == 0 && offsets.len() <= 1 {
        return Ok(Vec::new());
    }
    let table = AnsDecodeTable::new(freqs, params.table_log)?;
    let mut out = vec![0u8; plain_len];
    let chunk_size = params.chunk_size as usize;
    for (i, w) in offsets.windows(2).enumerate() {
        let chunk_payload =
            payload
                .get(w[0] as usize..w[1] as usize)
                .ok_or(CodecError::TruncatedStream {
                    needed: w[1] as usize,
                    have: payload.len(),
                })?;
        let start = i * chunk_size;
        let end = (start + chunk_size).min(plain_len);
        ans_decode_chunk(chunk_payload, &table, &mut out[start..end])
            .map_err(|_| CodecError::BadParams("chunk decode failed"))?;
    }
    Ok(out)
}
