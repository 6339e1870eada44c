//! The ZDMV container: bit-exact serialization of [`CompressedArtifact`].
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic "ZDMV" (4) | version u16 | original_type tag u8 | fixed width u32 |
//! original_count u64 | checksum u64 |
//! codec tree, depth-first preorder:
//!     node tag u8 | params length u32 | params bytes | child count u8
//! stream count u32 | per stream: role tag u8 | length u64 | raw bytes
//! ```
//!
//! The fixed-width field is 0 unless the type tag is FixedBytes. Equal
//! artifacts serialize to identical bytes.

use super::{
    ByteStream, CodecId, CodecNode, CodecParams, CompressedArtifact, DictEntryType, ElementType,
    StreamRole,
};
use thiserror::Error;

pub const MAGIC: [u8; 4] = [0x5A, 0x44, 0x4D, 0x56]; // "ZDMV"
pub const FORMAT_VERSION: u16 = 1;

/// Hard ceiling on tree size so corrupt input cannot balloon decoding.
const MAX_NODES: usize = 1 << 16;
const MAX_DEPTH: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected \"ZDMV\"")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("input truncated while reading {0}")]
    TruncatedInput(&'static str),
    #[error("codec {codec:?} expects {expected} children, found {got}")]
    ArityMismatch {
        codec: CodecId,
        expected: usize,
        got: usize,
    },
    #[error("invalid {field} tag {value}")]
    InvalidTag { field: &'static str, value: u8 },
    #[error("invalid params for {codec:?}: {reason}")]
    InvalidParams {
        codec: CodecId,
        reason: &'static str,
    },
    #[error("stream count {streams} does not match {leaves} Raw leaves")]
    StreamCountMismatch { leaves: usize, streams: usize },
    #[error("codec tree exceeds size limits")]
    TreeTooLarge,
    #[error("{0} trailing bytes after artifact")]
    TrailingBytes(usize),
}

fn element_type_tag(t: ElementType) -> (u8, u32) {
    match t {
        ElementType::Int64 => (0, 0),
        ElementType::Float64 => (1, 0),
        ElementType::FixedBytes(w) => (2, w),
        ElementType::VarBytes => (3, 0),
    }
}

fn element_type_from(tag: u8, width: u32) -> Result<ElementType, FormatError> {
    match tag {
        0 => Ok(ElementType::Int64),
        1 => Ok(ElementType::Float64),
        2 if width > 0 => Ok(ElementType::FixedBytes(width)),
        3 => Ok(ElementType::VarBytes),
        _ => Err(FormatError::InvalidTag {
            field: "element type",
            value: tag,
        }),
    }
}

fn codec_tag(id: CodecId) -> u8 {
    match id {
        CodecId::BitPack => 0,
        CodecId::Delta => 1,
        CodecId::Rle => 2,
        CodecId::DeltaStride => 3,
        CodecId::Dict => 4,
        CodecId::Float2Int => 5,
        CodecId::StrDict => 6,
        CodecId::Ans => 7,
        CodecId::Raw => 8,
    }
}

fn codec_from(tag: u8) -> Result<CodecId, FormatError> {
    Ok(match tag {
        0 => CodecId::BitPack,
        1 => CodecId::Delta,
        2 => CodecId::Rle,
        3 => CodecId::DeltaStride,
        4 => CodecId::Dict,
        5 => CodecId::Float2Int,
        6 => CodecId::StrDict,
        7 => CodecId::Ans,
        8 => CodecId::Raw,
        _ => {
            return Err(FormatError::InvalidTag {
                field: "codec",
                value: tag,
            })
        }
    })
}

fn role_tag(role: StreamRole) -> u8 {
    match role {
        StreamRole::Values => 0,
        StreamRole::Counts => 1,
        StreamRole::Indices => 2,
        StreamRole::Dictionary => 3,
        StreamRole::Packed => 4,
        StreamRole::EntropyPayload => 5,
        StreamRole::Offsets => 6,
        StreamRole::Aux => 7,
    }
}

fn role_from(tag: u8) -> Result<StreamRole, FormatError> {
    Ok(match tag {
        0 => StreamRole::Values,
        1 => StreamRole::Counts,
        2 => StreamRole::Indices,
        3 => StreamRole::Dictionary,
        4 => StreamRole::Packed,
        5 => StreamRole::EntropyPayload,
        6 => StreamRole::Offsets,
        7 => StreamRole::Aux,
        _ => {
            return Err(FormatError::InvalidTag {
                field: "stream role",
                value: tag,
            })
        }
    })
}

fn dict_entry_tag(t: DictEntryType) -> (u8, u32) {
    match t {
        DictEntryType::Int64 => (0, 0),
        DictEntryType::Float64 => (1, 0),
        DictEntryType::FixedBytes(w) => (2, w),
    }
}

fn dict_entry_from(tag: u8, width: u32) -> Result<DictEntryType, FormatError> {
    match tag {
        0 => Ok(DictEntryType::Int64),
        1 => Ok(DictEntryType::Float64),
        2 if width > 0 => Ok(DictEntryType::FixedBytes(width)),
        _ => Err(FormatError::InvalidTag {
            field: "dict entry type",
            value: tag,
        }),
    }
}

fn encode_params(params: &CodecParams) -> Vec<u8> {
    let mut out = Vec::new();
    match params {
        CodecParams::BitPack {
            bit_width,
            for_base,
            count,
        } => {
            out.push(*bit_width);
            out.extend_from_slice(&for_base.to_le_bytes());
            out.extend_from_slice(&count.to_le_bytes());
        }
        CodecParams::Delta { base, count } => {
            out.extend_from_slice(&base.to_le_bytes());
            out.extend_from_slice(&count.to_le_bytes());
        }
        CodecParams::Rle { run_count, total } | CodecParams::DeltaStride { run_count, total } => {
            out.extend_from_slice(&run_count.to_le_bytes());
            out.extend_from_slice(&total.to_le_bytes());
        }
        CodecParams::Dict {
            entry_type,
            entry_count,
            index_count,
        } => {
            let (tag, width) = dict_entry_tag(*entry_type);
            out.push(tag);
            out.extend_from_slice(&width.to_le_bytes());
            out.extend_from_slice(&entry_count.to_le_bytes());
            out.extend_from_slice(&index_count.to_le_bytes());
        }
        CodecParams::Float2Int {
            decimal_scale,
            count,
        } => {
            out.push(*decimal_scale);
            out.extend_from_slice(&count.to_le_bytes());
        }
        CodecParams::StrDict {
            token_count,
            occurrence_count,
            string_count,
        } => {
            out.extend_from_slice(&token_count.to_le_bytes());
            out.extend_from_slice(&occurrence_count.to_le_bytes());
            out.extend_from_slice(&string_count.to_le_bytes());
        }
        CodecParams::Ans {
            chunk_size,
            table_log,
            plain_len,
            freqs,
            chunk_offsets,
        } => {
            out.extend_from_slice(&chunk_size.to_le_bytes());
            out.push(*table_log);
            out.extend_from_slice(&plain_len.to_le_bytes());
            for f in freqs {
                out.extend_from_slice(&f.to_le_bytes());
            }
            out.extend_from_slice(&(chunk_offsets.len() as u32).to_le_bytes());
            for o in chunk_offsets {
                out.extend_from_slice(&o.to_le_bytes());
            }
        }
        CodecParams::Raw => {}
    }
    out
}

fn params_size(params: &CodecParams) -> usize {
    match params {
        CodecParams::BitPack { .. } => 17,
        CodecParams::Delta { .. } => 16,
        CodecParams::Rle { .. } | CodecParams::DeltaStride { .. } => 16,
        CodecParams::Dict { .. } => 21,
        CodecParams::Float2Int { .. } => 9,
        CodecParams::StrDict { .. } => 20,
        CodecParams::Ans {
            freqs,
            chunk_offsets,
            ..
        } => 13 + freqs.len() * 2 + 4 + chunk_offsets.len() * 8,
        CodecParams::Raw => 0,
    }
}

struct ParamsReader<'a> {
    buf: &'a [u8],
    pos: usize,
    codec: CodecId,
}

impl<'a> ParamsReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.buf.len() {
            return Err(FormatError::InvalidParams {
                codec: self.codec,
                reason: "record too short",
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, FormatError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::InvalidParams {
                codec: self.codec,
                reason: "record too long",
            });
        }
        Ok(())
    }
}

fn decode_params(codec: CodecId, buf: &[u8]) -> Result<CodecParams, FormatError> {
    let mut r = ParamsReader { buf, pos: 0, codec };
    let params = match codec {
        CodecId::BitPack => CodecParams::BitPack {
            bit_width: r.u8()?,
            for_base: r.i64()?,
            count: r.u64()?,
        },
        CodecId::Delta => CodecParams::Delta {
            base: r.i64()?,
            count: r.u64()?,
        },
        CodecId::Rle => CodecParams::Rle {
            run_count: r.u64()?,
            total: r.u64()?,
        },
        CodecId::DeltaStride => CodecParams::DeltaStride {
            run_count: r.u64()?,
            total: r.u64()?,
        },
        CodecId::Dict => {
            let tag = r.u8()?;
            let width = r.u32()?;
            CodecParams::Dict {
                entry_type: dict_entry_from(tag, width)?,
                entry_count: r.u64()?,
                index_count: r.u64()?,
            }
        }
        CodecId::Float2Int => CodecParams::Float2Int {
            decimal_scale: r.u8()?,
            count: r.u64()?,
        },
        CodecId::StrDict => CodecParams::StrDict {
            token_count: r.u32()?,
            occurrence_count: r.u64()?,
            string_count: r.u64()?,
        },
        CodecId::Ans => {
            let chunk_size = r.u32()?;
            let table_log = r.u8()?;
            let plain_len = r.u64()?;
            let mut freqs = Vec::with_capacity(256);
            for _ in 0..256 {
                freqs.push(r.u16()?);
            }
            let n_offsets = r.u32()? as usize;
            if n_offsets > (buf.len() - r.pos) / 8 + 1 {
                return Err(FormatError::InvalidParams {
                    codec,
                    reason: "offset table larger than record",
                });
            }
            let mut chunk_offsets = Vec::with_capacity(n_offsets);
            for _ in 0..n_offsets {
                chunk_offsets.push(r.u64()?);
            }
            CodecParams::Ans {
                chunk_size,
                table_log,
                plain_len,
                freqs,
                chunk_offsets,
            }
        }
        CodecId::Raw => CodecParams::Raw,
    };
    r.finish()?;
    Ok(params)
}

fn write_node(out: &mut Vec<u8>, node: &CodecNode) {
    out.push(codec_tag(node.codec_id()));
    let params = encode_params(&node.params);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    out.extend_from_slice(&params);
    out.push(node.children.len() as u8);
    for child in &node.children {
        write_node(out, child);
    }
}

fn node_size(node: &CodecNode) -> usize {
    1 + 4 + params_size(&node.params) + 1 + node.children.iter().map(node_size).sum::<usize>()
}

pub(super) fn serialized_size(a: &CompressedArtifact) -> usize {
    // header: magic 4 + version 2 + type tag 1 + width 4 + count 8 + checksum 8
    let mut size = 4 + 2 + 1 + 4 + 8 + 8;
    size += node_size(&a.root);
    size += 4;
    for s in &a.streams {
        size += 1 + 8 + s.bytes.len();
    }
    size
}

/// Serializes an artifact into the ZDMV container. Total on valid input;
/// equal inputs produce identical bytes.
pub fn serialize_artifact(a: &CompressedArtifact) -> Vec<u8> {
    debug_assert!(a.root.arity_ok());
    debug_assert_eq!(a.root.leaf_count(), a.streams.len());
    let mut out = Vec::with_capacity(serialized_size(a));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let (tag, width) = element_type_tag(a.original_type);
    out.push(tag);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&a.original_count.to_le_bytes());
    out.extend_from_slice(&a.checksum.to_le_bytes());
    write_node(&mut out, &a.root);
    out.extend_from_slice(&(a.streams.len() as u32).to_le_bytes());
    for s in &a.streams {
        out.push(role_tag(s.role));
        out.extend_from_slice(&(s.bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&s.bytes);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], FormatError> {
        if self
            .pos
            .checked_add(n)
            .is_none_or(|end| end > self.buf.len())
        {
            return Err(FormatError::TruncatedInput(field));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().unwrap()))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}

fn read_node(
    r: &mut Reader<'_>,
    depth: usize,
    nodes_seen: &mut usize,
) -> Result<CodecNode, FormatError> {
    if depth > MAX_DEPTH || *nodes_seen > MAX_NODES {
        return Err(FormatError::TreeTooLarge);
    }
    *nodes_seen += 1;
    let codec = codec_from(r.u8("node tag")?)?;
    let params_len = r.u32("params length")? as usize;
    let params_buf = r.take(params_len, "params record")?;
    let params = decode_params(codec, params_buf)?;
    let child_count = r.u8("child count")? as usize;
    let expected = codec.stream_arity();
    if child_count != expected {
        return Err(FormatError::ArityMismatch {
            codec,
            expected,
            got: child_count,
        });
    }
    let mut children = Vec::with_capacity(child_count);
    for _ in 0..child_count {
        children.push(read_node(r, depth + 1, nodes_seen)?);
    }
    Ok(CodecNode { params, children })
}

/// Parses a ZDMV container; inverse of [`serialize_artifact`] on its image.
/// Errors identify the earliest violated field.
pub fn deserialize_artifact(bytes: &[u8]) -> Result<CompressedArtifact, FormatError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let type_tag = r.u8("element type tag")?;
    let width = r.u32("element width")?;
    let original_type = element_type_from(type_tag, width)?;
    let original_count = r.u64("original count")?;
    let checksum = r.u64("checksum")?;
    let mut nodes_seen = 0;
    let root = read_node(&mut r, 0, &mut nodes_seen)?;
    let stream_count = r.u32("stream count")? as usize;
    let leaves = root.leaf_count();
    if stream_count != leaves {
        return Err(FormatError::StreamCountMismatch {
            leaves,
            streams: stream_count,
        });
    }
    let mut streams = Vec::with_capacity(stream_count);
    for _ in 0..stream_count {
        let role = role_from(r.u8("stream role")?)?;
        let len = r.u64("stream length")? as usize;
        let bytes = r.take(len, "stream bytes")?.to_vec();
        streams.push(ByteStream { role, bytes });
    }
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(CompressedArtifact {
        root,
        streams,
        original_type,
        original_count,
        checksum,
    })
}
