//! Composable nested codecs: the pipeline mini-language, the encode
//! compiler, and fused decode plans.
//!
//! A pipeline is written in the `|`/`[,]` notation, e.g.
//! `"DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing]"`.
//! `A | B` continues into `A`'s primary output stream (indices for the
//! dictionary codecs, the first stream otherwise); remaining outputs are
//! stored raw. `A | [..]` binds each listed child to one bindable output.
//! DeltaStride exposes its (starts, counts) streams for nesting and always
//! stores strides raw.

mod encode;
mod parse;
mod plan;

pub use encode::compile_encode;
pub use parse::{parse_pipeline, pipeline_of_tree, render_pipeline};
pub use plan::{
    compile_decode, decode_artifact, execute_plan, fuse, traffic_model, DecodePlan, ExecOptions,
    Step, TrafficEstimate,
};

use crate::codecs::CodecError;
use crate::datamodel::{CodecId, ElementType};
use crate::pattern::PatternError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("parse error at byte {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("unknown codec \"{0}\"")]
    UnknownCodec(String),
    #[error("{codec:?} takes {expected} nested children, got {got}")]
    Arity {
        codec: CodecId,
        expected: usize,
        got: usize,
    },
    #[error("option \"{key}\" is not valid for {codec:?}")]
    UnknownOption { codec: CodecId, key: String },
    #[error("bad option \"{key}\": {reason}")]
    BadOption { key: String, reason: String },
    #[error("{codec:?} cannot encode {found} data (expected {expected})")]
    TypeMismatch {
        codec: CodecId,
        expected: &'static str,
        found: &'static str,
    },
    #[error("codec error: {0}")]
    Codec(#[from] CodecError),
    #[error("plan step {step} failed: {source}")]
    StepFailed { step: usize, source: PatternError },
    #[error("decoded payload checksum {actual:#x} does not match artifact {expected:#x}")]
    ChecksumMismatch { expected: u64, actual: u64 },
    #[error("malformed artifact: {0}")]
    MalformedArtifact(&'static str),
}

/// AST of a parsed pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum PipeNode {
    Leaf(CodecSpec),
    Seq(CodecSpec, Box<PipeNode>),
    Fanout(CodecSpec, Vec<PipeNode>),
}

impl PipeNode {
    pub fn codec(&self) -> CodecId {
        match self {
            PipeNode::Leaf(s) | PipeNode::Seq(s, _) | PipeNode::Fanout(s, _) => s.codec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecSpec {
    pub codec: CodecId,
    /// Codec options in sorted key order, e.g. `chunk_size=8192` for ANS.
    pub options: Vec<(String, String)>,
}

impl CodecSpec {
    pub fn bare(codec: CodecId) -> Self {
        CodecSpec {
            codec,
            options: Vec::new(),
        }
    }
}

/// How a codec participates in the nesting notation.
pub(crate) struct NestingSig {
    /// Stream indices a bracket list binds, in order.
    pub bindable: &'static [usize],
    /// Stream index a `| node` continuation flows into.
    pub primary: usize,
}

pub(crate) fn nesting_sig(codec: CodecId) -> NestingSig {
    match codec {
        CodecId::BitPack | CodecId::Delta | CodecId::Float2Int | CodecId::Ans => NestingSig {
            bindable: &[0],
            primary: 0,
        },
        CodecId::Rle => NestingSig {
            bindable: &[0, 1],
            primary: 0,
        },
        // (starts, counts) are bindable; strides always store raw
        CodecId::DeltaStride => NestingSig {
            bindable: &[0, 2],
            primary: 0,
        },
        CodecId::Dict | CodecId::StrDict => NestingSig {
            bindable: &[0, 1],
            primary: 1,
        },
        CodecId::Raw => NestingSig {
            bindable: &[],
            primary: 0,
        },
    }
}

pub(crate) fn allowed_options(codec: CodecId) -> &'static [&'static str] {
    match codec {
        CodecId::Ans => &["chunk_size", "table_log"],
        _ => &[],
    }
}

/// Logical type of a stream flowing between codecs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StreamTy {
    I64,
    F64,
    Fixed(u32),
    Var,
    Bytes,
}

impl StreamTy {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            StreamTy::I64 => "Int64",
            StreamTy::F64 => "Float64",
            StreamTy::Fixed(_) => "FixedBytes",
            StreamTy::Var => "VarBytes",
            StreamTy::Bytes => "bytes",
        }
    }

    pub(crate) fn of(t: ElementType) -> StreamTy {
        match t {
            ElementType::Int64 => StreamTy::I64,
            ElementType::Float64 => StreamTy::F64,
            ElementType::FixedBytes(w) => StreamTy::Fixed(w),
            ElementType::VarBytes => StreamTy::Var,
        }
    }
}
