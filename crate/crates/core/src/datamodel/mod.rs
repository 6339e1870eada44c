//! Core typed-buffer and compressed-container data model.
//!
//! A [`TypedColumn`] is the plain, uncompressed unit of data. A
//! [`CompressedArtifact`] is the unit that travels: a codec tree whose `Raw`
//! leaves pair 1:1 (depth-first) with the stored [`ByteStream`]s, plus enough
//! provenance to decode and verify. The container wire format lives in
//! [`container`].

mod container;

pub use container::{deserialize_artifact, serialize_artifact, FormatError, FORMAT_VERSION, MAGIC};

use thiserror::Error;

/// Element type of a plain column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementType {
    Int64,
    Float64,
    /// Fixed-width binary values, `width` bytes each (width >= 1).
    FixedBytes(u32),
    /// Variable-width binary values addressed through an offsets array.
    VarBytes,
}

impl ElementType {
    /// Bytes per element for fixed-width types, `None` for VarBytes.
    pub fn fixed_width(&self) -> Option<usize> {
        match self {
            ElementType::Int64 | ElementType::Float64 => Some(8),
            ElementType::FixedBytes(w) => Some(*w as usize),
            ElementType::VarBytes => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColumnError {
    #[error("payload length {payload} does not match {count} elements of {expected} bytes")]
    PayloadSize {
        payload: usize,
        count: usize,
        expected: usize,
    },
    #[error("FixedBytes width must be positive")]
    ZeroWidth,
    #[error("VarBytes offsets are invalid: {0}")]
    BadOffsets(&'static str),
}

/// A typed flat array of elements: the plain side of every pipeline.
///
/// Fixed-width types store elements little-endian, back to back, in `payload`.
/// VarBytes columns carry `count + 1` exclusive-end byte offsets, so element
/// `i` is `payload[offsets[i]..offsets[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedColumn {
    element_type: ElementType,
    count: usize,
    payload: Vec<u8>,
    offsets: Option<Vec<u64>>,
}

impl TypedColumn {
    pub fn from_i64(values: &[i64]) -> Self {
        let mut payload = Vec::with_capacity(values.len() * 8);
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        TypedColumn {
            element_type: ElementType::Int64,
            count: values.len(),
            payload,
            offsets: None,
        }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        let mut payload = Vec::with_capacity(values.len() * 8);
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        TypedColumn {
            element_type: ElementType::Float64,
            count: values.len(),
            payload,
            offsets: None,
        }
    }

    pub fn from_fixed(width: u32, payload: Vec<u8>) -> Result<Self, ColumnError> {
        if width == 0 {
            return Err(ColumnError::ZeroWidth);
        }
        if !payload.len().is_multiple_of(width as usize) {
            return Err(ColumnError::PayloadSize {
                payload: payload.len(),
                count: payload.len() / width as usize,
                expected: width as usize,
            });
        }
        let count = payload.len() / width as usize;
        Ok(TypedColumn {
            element_type: ElementType::FixedBytes(width),
            count,
            payload,
            offsets: None,
        })
    }

    pub fn from_var(offsets: Vec<u64>, payload: Vec<u8>) -> Result<Self, ColumnError> {
        if offsets.is_empty() {
            return Err(ColumnError::BadOffsets("offsets must have count+1 entries"));
        }
        if offsets[0] != 0 {
            return Err(ColumnError::BadOffsets("offsets[0] must be 0"));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(ColumnError::BadOffsets("offsets must be non-decreasing"));
        }
        if *offsets.last().unwrap() != payload.len() as u64 {
            return Err(ColumnError::BadOffsets(
                "last offset must equal payload length",
            ));
        }
        Ok(TypedColumn {
            element_type: ElementType::VarBytes,
            count: offsets.len() - 1,
            payload,
            offsets: Some(offsets),
        })
    }

    /// Builds a VarBytes column from individual byte strings.
    pub fn from_strings<S: AsRef<[u8]>>(items: &[S]) -> Self {
        let mut offsets = Vec::with_capacity(items.len() + 1);
        let mut payload = Vec::new();
        offsets.push(0u64);
        for it in items {
            payload.extend_from_slice(it.as_ref());
            offsets.push(payload.len() as u64);
        }
        TypedColumn {
            element_type: ElementType::VarBytes,
            count: items.len(),
            payload,
            offsets: Some(offsets),
        }
    }

    /// Validated constructor from raw parts (used by the container reader and CLI).
    pub fn from_parts(
        element_type: ElementType,
        payload: Vec<u8>,
        offsets: Option<Vec<u64>>,
    ) -> Result<Self, ColumnError> {
        match element_type {
            ElementType::Int64 | ElementType::Float64 => {
                if !payload.len().is_multiple_of(8) {
                    return Err(ColumnError::PayloadSize {
                        payload: payload.len(),
                        count: payload.len() / 8,
                        expected: 8,
                    });
                }
                let count = payload.len() / 8;
                Ok(TypedColumn {
                    element_type,
                    count,
                    payload,
                    offsets: None,
                })
            }
            ElementType::FixedBytes(w) => TypedColumn::from_fixed(w, payload),
            ElementType::VarBytes => {
                let offsets =
                    offsets.ok_or(ColumnError::BadOffsets("VarBytes requires offsets"))?;
                TypedColumn::from_var(offsets, payload)
            }
        }
    }

    pub fn element_type(&self) -> ElementType {
        self.element_type
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn offsets(&self) -> Option<&[u64]> {
        self.offsets.as_deref()
    }

    /// Total bytes this column occupies in plain form (offsets included for
    /// VarBytes): the "plain size" operand of the throughput bound.
    pub fn plain_size(&self) -> usize {
        self.payload.len() + self.offsets.as_ref().map_or(0, |o| o.len() * 8)
    }

    /// Decodes the payload as little-endian i64 values.
    pub fn as_i64(&self) -> Option<Vec<i64>> {
        if self.element_type != ElementType::Int64 {
            return None;
        }
        Some(
            self.payload
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }

    /// Decodes the payload as little-endian f64 values.
    pub fn as_f64(&self) -> Option<Vec<f64>> {
        if self.element_type != ElementType::Float64 {
            return None;
        }
        Some(
            self.payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }
}

/// What a stored byte stream holds, as produced by some codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Values,
    Counts,
    Indices,
    Dictionary,
    Packed,
    EntropyPayload,
    Offsets,
    Aux,
}

/// One stored leaf stream of a compressed artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ByteStream {
    pub role: StreamRole,
    pub bytes: Vec<u8>,
}

impl ByteStream {
    pub fn new(role: StreamRole, bytes: Vec<u8>) -> Self {
        ByteStream { role, bytes }
    }
}

/// Codec identifiers appearing in artifact trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodecId {
    BitPack,
    Delta,
    Rle,
    DeltaStride,
    Dict,
    Float2Int,
    StrDict,
    Ans,
    Raw,
}

impl CodecId {
    /// Number of output streams (= children of a non-leaf node). Raw is the
    /// leaf: it owns one stored stream and has no children.
    pub fn stream_arity(&self) -> usize {
        match self {
            CodecId::BitPack | CodecId::Delta | CodecId::Float2Int | CodecId::Ans => 1,
            CodecId::Rle | CodecId::Dict | CodecId::StrDict => 2,
            CodecId::DeltaStride => 3,
            CodecId::Raw => 0,
        }
    }
}

/// Element type of dictionary entries (fixed-width only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictEntryType {
    Int64,
    Float64,
    FixedBytes(u32),
}

impl DictEntryType {
    pub fn width(&self) -> usize {
        match self {
            DictEntryType::Int64 | DictEntryType::Float64 => 8,
            DictEntryType::FixedBytes(w) => *w as usize,
        }
    }
}

/// Codec-specific parameter record stored with each tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum CodecParams {
    BitPack {
        bit_width: u8,
        for_base: i64,
        count: u64,
    },
    Delta {
        base: i64,
        count: u64,
    },
    Rle {
        run_count: u64,
        total: u64,
    },
    DeltaStride {
        run_count: u64,
        total: u64,
    },
    Dict {
        entry_type: DictEntryType,
        entry_count: u64,
        index_count: u64,
    },
    Float2Int {
        decimal_scale: u8,
        count: u64,
    },
    StrDict {
        token_count: u32,
        occurrence_count: u64,
        string_count: u64,
    },
    Ans {
        chunk_size: u32,
        table_log: u8,
        plain_len: u64,
        freqs: Vec<u16>,
        /// n_chunks + 1 byte offsets into the payload stream.
        chunk_offsets: Vec<u64>,
    },
    Raw,
}

impl CodecParams {
    pub fn codec_id(&self) -> CodecId {
        match self {
            CodecParams::BitPack { .. } => CodecId::BitPack,
            CodecParams::Delta { .. } => CodecId::Delta,
            CodecParams::Rle { .. } => CodecId::Rle,
            CodecParams::DeltaStride { .. } => CodecId::DeltaStride,
            CodecParams::Dict { .. } => CodecId::Dict,
            CodecParams::Float2Int { .. } => CodecId::Float2Int,
            CodecParams::StrDict { .. } => CodecId::StrDict,
            CodecParams::Ans { .. } => CodecId::Ans,
            CodecParams::Raw => CodecId::Raw,
        }
    }
}

/// One node of the codec tree. Children are ordered, one per output stream
/// of this codec; leaves are `Raw` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecNode {
    pub params: CodecParams,
    pub children: Vec<CodecNode>,
}

impl CodecNode {
    pub fn new(params: CodecParams, children: Vec<CodecNode>) -> Self {
        CodecNode { params, children }
    }

    pub fn raw() -> Self {
        CodecNode {
            params: CodecParams::Raw,
            children: Vec::new(),
        }
    }

    pub fn codec_id(&self) -> CodecId {
        self.params.codec_id()
    }

    /// Does arity match the codec for this node and all descendants?
    pub fn arity_ok(&self) -> bool {
        self.children.len() == self.codec_id().stream_arity()
            && self.children.iter().all(CodecNode::arity_ok)
    }

    /// Number of Raw leaves (= stored streams) under this node.
    pub fn leaf_count(&self) -> usize {
        if self.codec_id() == CodecId::Raw {
            1
        } else {
            self.children.iter().map(CodecNode::leaf_count).sum()
        }
    }
}

/// A compressed column: codec tree, leaf streams in depth-first order, and
/// enough provenance to decode and verify the plain data.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedArtifact {
    pub root: CodecNode,
    pub streams: Vec<ByteStream>,
    pub original_type: ElementType,
    pub original_count: u64,
    pub checksum: u64,
}

impl CompressedArtifact {
    /// Serialized size in bytes: header + tree + streams. Deterministic and
    /// equal to `serialize_artifact(self).len()`.
    pub fn compressed_size(&self) -> usize {
        container::serialized_size(self)
    }

    /// Sum of the stored stream byte lengths (excludes header/tree overhead).
    pub fn stream_bytes(&self) -> usize {
        self.streams.iter().map(|s| s.bytes.len()).sum()
    }
}

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

/// FNV-1a 64-bit hash of a byte sequence. Guards round trips, not security.
pub fn checksum64(payload: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in payload {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_empty_is_offset_basis() {
        assert_eq!(checksum64(b""), 14695981039346656037);
    }

    #[test]
    fn checksum_single_a() {
        assert_eq!(checksum64(b"a"), 12638187200555641996);
    }

    #[test]
    fn int64_column_payload_is_8x_count() {
        let col = TypedColumn::from_i64(&[1, 2, 3]);
        assert_eq!(col.count(), 3);
        assert_eq!(col.payload().len(), 24);
        assert_eq!(col.as_i64().unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn var_column_rejects_bad_offsets() {
        assert!(TypedColumn::from_var(vec![0, 5, 3], vec![0; 5]).is_err());
        assert!(TypedColumn::from_var(vec![1, 5], vec![0; 5]).is_err());
        assert!(TypedColumn::from_var(vec![0, 4], vec![0; 5]).is_err());
        assert!(TypedColumn::from_var(vec![0, 2, 5], vec![0; 5]).is_ok());
    }

    #[test]
    fn fixed_column_checks_width() {
        assert!(TypedColumn::from_fixed(0, vec![]).is_err());
        assert!(TypedColumn::from_fixed(4, vec![0; 10]).is_err());
        let col = TypedColumn::from_fixed(4, vec![0; 12]).unwrap();
        assert_eq!(col.count(), 3);
    }

    #[test]
    fn strings_round_trip_through_offsets() {
        let col = TypedColumn::from_strings(&["ab", "", "cde"]);
        assert_eq!(col.count(), 3);
        assert_eq!(col.offsets().unwrap(), &[0, 2, 2, 5]);
        assert_eq!(col.payload(), b"abcde");
    }
}
