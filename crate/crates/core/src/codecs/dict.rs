//! Dictionary encoding for fixed-width values.
//!
//! The dictionary keeps unique values in first-appearance order, which is
//! deterministic and streaming-friendly; indices are Int64 positions.

use super::CodecError;
use std::collections::HashMap;

/// Encodes a fixed-width column given as raw bytes. Returns the dictionary
/// payload (unique entries, same width) and one index per input element.
pub fn dict_encode(entry_width: usize, payload: &[u8]) -> (Vec<u8>, Vec<i64>) {
    assert!(entry_width > 0, "entry width must be positive");
    assert_eq!(payload.len() % entry_width, 0);
    let mut ids: HashMap<&[u8], i64> = HashMap::new();
    let mut dict = Vec::new();
    let mut indices = Vec::with_capacity(payload.len() / entry_width);
    for entry in payload.chunks_exact(entry_width) {
        let next_id = ids.len() as i64;
        let id = *ids.entry(entry).or_insert_with(|| {
            dict.extend_from_slice(entry);
            next_id
        });
        indices.push(id);
    }
    (dict, indices)
}

/// Sequential lookup oracle for the fully-parallel decode kernel.
pub fn dict_decode_all(
    dict: &[u8],
    entry_width: usize,
    indices: &[i64],
) -> Result<Vec<u8>, CodecError> {
    let entry_count = (dict.len() / entry_width) as u64;
    let mut out = Vec::with_capacity(indices.len() * entry_width);
    for &idx in indices {
        if idx < 0 || idx as u64 >= entry_count {
            return Err(CodecError::IndexOutOfDictionary {
                index: idx,
                dict_len: entry_count,
            });
        }
        let at = idx as usize * entry_width;
        out.extend_from_slice(&dict[at..at + entry_width]);
    }
    Ok(out)
}
