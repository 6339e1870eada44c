//! String dictionary: tokenizes on spaces and periods, de-duplicates the
//! tokens, and replaces each occurrence with a dictionary index.
//!
//! A token is a maximal run of non-delimiter bytes together with its
//! trailing delimiter bytes, so decoding is pure concatenation. The
//! dictionary keeps tokens in first-appearance order.

use super::CodecError;
use std::collections::HashMap;
use std::ops::Range;

const DELIMS: &[u8] = b" .";

fn is_delim(b: u8) -> bool {
    DELIMS.contains(&b)
}

/// Token boundaries of one string. Concatenating the ranges reproduces it.
pub fn tokenize_ranges(s: &[u8]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < s.len() {
        let start = pos;
        while pos < s.len() && !is_delim(s[pos]) {
            pos += 1;
        }
        while pos < s.len() && is_delim(s[pos]) {
            pos += 1;
        }
        out.push(start..pos);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrDictEncoded {
    /// Unique tokens in first-appearance order.
    pub tokens: Vec<Vec<u8>>,
    /// One dictionary index per token occurrence, across all strings.
    pub indices: Vec<i64>,
    /// Tokens per input string.
    pub string_token_counts: Vec<u32>,
}

impl StrDictEncoded {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Encodes a VarBytes column (`offsets` has count+1 entries into `payload`).
pub fn strdict_encode(offsets: &[u64], payload: &[u8]) -> StrDictEncoded {
    let mut ids: HashMap<&[u8], i64> = HashMap::new();
    let mut tokens: Vec<Vec<u8>> = Vec::new();
    let mut indices = Vec::new();
    let mut string_token_counts = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let s = &payload[w[0] as usize..w[1] as usize];
        let ranges = tokenize_ranges(s);
        string_token_counts.push(ranges.len() as u32);
        for r in ranges {
            let tok = &s[r];
            let next_id = ids.len() as i64;
            let id = *ids.entry(tok).or_insert_with(|| {
                tokens.push(tok.to_vec());
                next_id
            });
            indices.push(id);
        }
    }
    StrDictEncoded {
        tokens,
        indices,
        string_token_counts,
    }
}

/// Dictionary-blob stream layout:
///
/// ```text
/// token_count u32 | per token: len u32 + bytes |
/// string_count u64 | per string: token count u32
/// ```
pub fn encode_token_blob(tokens: &[Vec<u8>], string_token_counts: &[u32]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(tokens.len() as u32).to_le_bytes());
    for t in tokens {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        out.extend_from_slice(t);
    }
    out.extend_from_slice(&(string_token_counts.len() as u64).to_le_bytes());
    for &c in string_token_counts {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

/// (token byte offsets, concatenated token bytes, per-string token counts)
pub type TokenBlob = (Vec<u64>, Vec<u8>, Vec<u64>);

/// Parses a dictionary blob into token byte offsets (token_count + 1), the
/// concatenated token bytes, and per-string token counts.
pub fn decode_token_blob(blob: &[u8]) -> Result<TokenBlob, CodecError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], CodecError> {
        if *pos + n > blob.len() {
            return Err(CodecError::TruncatedStream {
                needed: *pos + n,
                have: blob.len(),
            });
        }
        let s = &blob[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let token_count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    // each token needs at least its 4-byte length field
    if token_count > blob.len() / 4 {
        return Err(CodecError::TruncatedStream {
            needed: token_count * 4,
            have: blob.len(),
        });
    }
    let mut token_offsets = Vec::with_capacity(token_count + 1);
    let mut token_bytes = Vec::new();
    token_offsets.push(0u64);
    for _ in 0..token_count {
        let len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        token_bytes.extend_from_slice(take(&mut pos, len)?);
        token_offsets.push(token_bytes.len() as u64);
    }
    let string_count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    if string_count > (blob.len() - pos) / 4 {
        return Err(CodecError::TruncatedStream {
            needed: pos + string_count * 4,
            have: blob.len(),
        });
    }
    let mut string_token_counts = Vec::with_capacity(string_count);
    for _ in 0..string_count {
        let c = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        string_token_counts.push(c as u64);
    }
    if pos != blob.len() {
        return Err(CodecError::BadParams("trailing bytes in dictionary blob"));
    }
    Ok((token_offsets, token_bytes, string_token_counts))
}
