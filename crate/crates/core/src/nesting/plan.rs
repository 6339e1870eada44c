//! Decode plans: topologically ordered steps over buffer slots, compiled
//! from an artifact tree, optionally fused, then executed on the pattern
//! engine.
//!
//! A freshly compiled plan materializes every intermediate (the non-fused
//! baseline). [`fuse`] then applies three rules: consecutive elementwise
//! steps compose; an elementwise producer feeding a group-parallel value
//! stream is absorbed into the emit function; an elementwise producer
//! feeding a prefix-sum input is absorbed into the scan. Fused and unfused
//! plans produce bit-identical output.

use super::{PipelineError, StreamTy};
use crate::codecs::{
    ans_decode_chunk, decode_token_blob, packed_len, pow10, read_field, AnsDecodeTable, CodecError,
};
use crate::datamodel::{
    checksum64, ByteStream, CodecNode, CodecParams, CompressedArtifact, DictEntryType, ElementType,
    TypedColumn,
};
use crate::pattern::{
    run_fully_parallel, run_group_parallel, run_non_parallel, EmitFn, FullyParallelKernel,
    GroupParallelKernel, KernelFault, LaunchConfig, NonParallelKernel, PatternError, PatternKind,
    VirtualDevice,
};
use serde::Serialize;

pub type SlotId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufKind {
    I64,
    F64,
    U64,
    Byte,
    Fixed(u32),
}

impl BufKind {
    fn elem_bytes(&self) -> usize {
        match self {
            BufKind::I64 | BufKind::F64 | BufKind::U64 => 8,
            BufKind::Byte => 1,
            BufKind::Fixed(w) => *w as usize,
        }
    }
}

/// Reads the value of element `i` straight from a slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Accessor {
    I64Slot(SlotId),
    U64Slot(SlotId),
    F64Slot(SlotId),
    /// Frame-of-reference bit-field extraction over a packed slot.
    BitUnpack {
        slot: SlotId,
        width: u8,
        base: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupKind {
    I64,
    F64,
    Bytes(u32),
}

/// Elementwise transform applied after the accessor.
#[derive(Debug, Clone, PartialEq)]
pub enum Unary {
    AddBase(i64),
    /// Index into a dictionary slot.
    DictLookup {
        slot: SlotId,
        kind: LookupKind,
    },
    /// Decimal rescale to f64.
    F2IDecode {
        scale: u8,
    },
    /// Token byte length via a token-offset slot.
    TokenLen {
        offsets_slot: SlotId,
    },
    /// Read `slot` (u64 entries) at the current value.
    GatherU64 {
        slot: SlotId,
    },
}

/// A fusable per-element value chain: accessor plus transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSource {
    pub acc: Accessor,
    pub ops: Vec<Unary>,
}

impl ElementSource {
    fn read(acc: Accessor) -> Self {
        ElementSource {
            acc,
            ops: Vec::new(),
        }
    }

    fn then(mut self, op: Unary) -> Self {
        self.ops.push(op);
        self
    }
}

/// Group-parallel emit function shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum GpEmit {
    /// Every item of group `g` is `value(g)` (RLE expansion).
    Broadcast { value: ElementSource },
    /// Item `j` of group `g` is `start(g) + j * stride(g)`.
    Affine {
        start: ElementSource,
        stride: ElementSource,
    },
    /// Item `j` of group `g` is byte `j` of token `token_id(g)`.
    TokenBytes {
        token_id: ElementSource,
        token_offsets: SlotId,
        token_bytes: SlotId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Fully-parallel elementwise kernel.
    Map {
        n_out: usize,
        out_kind: BufKind,
        src: ElementSource,
        out: SlotId,
    },
    /// Exclusive prefix sum producing a u64 offsets buffer of n+1 entries.
    ScanOffsets {
        src: ElementSource,
        n: usize,
        out: SlotId,
    },
    /// Inclusive wrapping scan plus base (delta decode).
    ScanDelta {
        src: ElementSource,
        n: usize,
        base: i64,
        out: SlotId,
    },
    /// Group-parallel expansion.
    Expand {
        n_groups: usize,
        offsets: SlotId,
        emit: GpEmit,
        out_kind: BufKind,
        out: SlotId,
    },
    /// Non-parallel chunked entropy decode.
    AnsChunks {
        payload: SlotId,
        table_log: u8,
        freqs: Vec<u16>,
        chunk_size: u32,
        chunk_offsets: Vec<u64>,
        plain_len: usize,
        out: SlotId,
    },
    /// Splits a string-dictionary blob into token offsets, token bytes and
    /// per-string token counts.
    ParseTokenBlob {
        blob: SlotId,
        token_offsets: SlotId,
        token_bytes: SlotId,
        string_token_counts: SlotId,
    },
    /// Splits a framed VarBytes image into offsets and payload.
    UnframeVar {
        src: SlotId,
        count: usize,
        offsets_out: SlotId,
        payload_out: SlotId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputBinding {
    Fixed { payload: SlotId },
    Var { offsets: SlotId, payload: SlotId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodePlan {
    pub steps: Vec<Step>,
    pub(crate) n_streams: usize,
    pub(crate) n_slots: usize,
    pub(crate) output: OutputBinding,
    pub(crate) out_type: ElementType,
    pub(crate) out_count: usize,
}

impl DecodePlan {
    /// Steps that materialize a buffer; fusion strictly reduces this.
    pub fn materialized_steps(&self) -> usize {
        self.steps.len()
    }

    /// True if any step runs under the given pattern.
    pub fn uses_pattern(&self, pattern: PatternKind) -> bool {
        self.steps.iter().any(|s| step_pattern(s) == Some(pattern))
    }
}

fn step_pattern(step: &Step) -> Option<PatternKind> {
    match step {
        Step::Map { .. } => Some(PatternKind::FullyParallel),
        Step::Expand { .. } => Some(PatternKind::GroupParallel),
        Step::AnsChunks { .. } => Some(PatternKind::NonParallel),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// plan compilation
// ---------------------------------------------------------------------------

struct PlanBuilder {
    steps: Vec<Step>,
    next_slot: SlotId,
    next_stream: usize,
}

impl PlanBuilder {
    fn slot(&mut self) -> SlotId {
        let s = self.next_slot;
        self.next_slot += 1;
        s
    }
}

#[derive(Debug, Clone, Copy)]
enum Decoded {
    Buf(SlotId),
    Var { offsets: SlotId, payload: SlotId },
}

impl Decoded {
    fn buf(self) -> Result<SlotId, PipelineError> {
        match self {
            Decoded::Buf(s) => Ok(s),
            Decoded::Var { .. } => Err(PipelineError::MalformedArtifact(
                "VarBytes data where a flat stream was expected",
            )),
        }
    }
}

fn scalar_kind(ty: StreamTy) -> BufKind {
    match ty {
        StreamTy::I64 => BufKind::I64,
        StreamTy::F64 => BufKind::F64,
        StreamTy::Fixed(w) => BufKind::Fixed(w),
        StreamTy::Bytes => BufKind::Byte,
        StreamTy::Var => unreachable!("var handled separately"),
    }
}

fn ensure(cond: bool, what: &'static str) -> Result<(), PipelineError> {
    if cond {
        Ok(())
    } else {
        Err(PipelineError::MalformedArtifact(what))
    }
}

fn walk(
    b: &mut PlanBuilder,
    node: &CodecNode,
    ctx_ty: StreamTy,
    ctx_count: usize,
) -> Result<Decoded, PipelineError> {
    match &node.params {
        CodecParams::Raw => {
            let slot = b.next_stream;
            b.next_stream += 1;
            if ctx_ty == StreamTy::Var {
                let offsets_out = b.slot();
                let payload_out = b.slot();
                b.steps.push(Step::UnframeVar {
                    src: slot,
                    count: ctx_count,
                    offsets_out,
                    payload_out,
                });
                Ok(Decoded::Var {
                    offsets: offsets_out,
                    payload: payload_out,
                })
            } else {
                Ok(Decoded::Buf(slot))
            }
        }
        CodecParams::BitPack {
            bit_width,
            for_base,
            count,
        } => {
            ensure(
                ctx_ty == StreamTy::I64,
                "bit-packed stream in non-Int64 context",
            )?;
            ensure(*count as usize == ctx_count, "bit-pack count mismatch")?;
            ctx_count
                .checked_mul(*bit_width as usize)
                .ok_or(PipelineError::MalformedArtifact("bit-pack size overflow"))?;
            let packed_bytes = packed_len(ctx_count, *bit_width);
            let packed = walk(b, &node.children[0], StreamTy::Bytes, packed_bytes)?.buf()?;
            let out = b.slot();
            b.steps.push(Step::Map {
                n_out: ctx_count,
                out_kind: BufKind::I64,
                src: ElementSource::read(Accessor::BitUnpack {
                    slot: packed,
                    width: *bit_width,
                    base: *for_base,
                }),
                out,
            });
            Ok(Decoded::Buf(out))
        }
        CodecParams::Delta { base, count } => {
            ensure(ctx_ty == StreamTy::I64, "delta stream in non-Int64 context")?;
            ensure(*count as usize == ctx_count, "delta count mismatch")?;
            let deltas = walk(b, &node.children[0], StreamTy::I64, ctx_count)?.buf()?;
            let out = b.slot();
            b.steps.push(Step::ScanDelta {
                src: ElementSource::read(Accessor::I64Slot(deltas)),
                n: ctx_count,
                base: *base,
                out,
            });
            Ok(Decoded::Buf(out))
        }
        CodecParams::Rle { run_count, total } => {
            ensure(ctx_ty == StreamTy::I64, "RLE stream in non-Int64 context")?;
            ensure(*total as usize == ctx_count, "RLE total mismatch")?;
            let runs = *run_count as usize;
            let values = walk(b, &node.children[0], StreamTy::I64, runs)?.buf()?;
            let counts = walk(b, &node.children[1], StreamTy::I64, runs)?.buf()?;
            let offsets = b.slot();
            b.steps.push(Step::ScanOffsets {
                src: ElementSource::read(Accessor::I64Slot(counts)),
                n: runs,
                out: offsets,
            });
            let out = b.slot();
            b.steps.push(Step::Expand {
                n_groups: runs,
                offsets,
                emit: GpEmit::Broadcast {
                    value: ElementSource::read(Accessor::I64Slot(values)),
                },
                out_kind: BufKind::I64,
                out,
            });
            Ok(Decoded::Buf(out))
        }
        CodecParams::DeltaStride { run_count, total } => {
            ensure(
                ctx_ty == StreamTy::I64,
                "stride stream in non-Int64 context",
            )?;
            ensure(*total as usize == ctx_count, "delta-stride total mismatch")?;
            let runs = *run_count as usize;
            let starts = walk(b, &node.children[0], StreamTy::I64, runs)?.buf()?;
            let strides = walk(b, &node.children[1], StreamTy::I64, runs)?.buf()?;
            let counts = walk(b, &node.children[2], StreamTy::I64, runs)?.buf()?;
            let offsets = b.slot();
            b.steps.push(Step::ScanOffsets {
                src: ElementSource::read(Accessor::I64Slot(counts)),
                n: runs,
                out: offsets,
            });
            let out = b.slot();
            b.steps.push(Step::Expand {
                n_groups: runs,
                offsets,
                emit: GpEmit::Affine {
                    start: ElementSource::read(Accessor::I64Slot(starts)),
                    stride: ElementSource::read(Accessor::I64Slot(strides)),
                },
                out_kind: BufKind::I64,
                out,
            });
            Ok(Decoded::Buf(out))
        }
        CodecParams::Dict {
            entry_type,
            entry_count,
            index_count,
        } => {
            let (entry_ty, lookup) = match entry_type {
                DictEntryType::Int64 => (StreamTy::I64, LookupKind::I64),
                DictEntryType::Float64 => (StreamTy::F64, LookupKind::F64),
                DictEntryType::FixedBytes(w) => (StreamTy::Fixed(*w), LookupKind::Bytes(*w)),
            };
            let ctx_ok = match (ctx_ty, entry_type) {
                (StreamTy::Bytes, DictEntryType::FixedBytes(1)) => true,
                (t, _) => t == entry_ty,
            };
            ensure(ctx_ok, "dictionary entry type does not fit context")?;
            ensure(
                *index_count as usize == ctx_count,
                "dictionary index count mismatch",
            )?;
            let dict = walk(b, &node.children[0], entry_ty, *entry_count as usize)?.buf()?;
            let indices = walk(b, &node.children[1], StreamTy::I64, ctx_count)?.buf()?;
            let out = b.slot();
            b.steps.push(Step::Map {
                n_out: ctx_count,
                out_kind: if ctx_ty == StreamTy::Bytes {
                    BufKind::Byte
                } else {
                    scalar_kind(entry_ty)
                },
                src: ElementSource::read(Accessor::I64Slot(indices)).then(Unary::DictLookup {
                    slot: dict,
                    kind: lookup,
                }),
                out,
            });
            Ok(Decoded::Buf(out))
        }
        CodecParams::Float2Int {
            decimal_scale,
            count,
        } => {
            ensure(
                ctx_ty == StreamTy::F64,
                "Float2Int stream in non-Float64 context",
            )?;
            ensure(*count as usize == ctx_count, "Float2Int count mismatch")?;
            let ints = walk(b, &node.children[0], StreamTy::I64, ctx_count)?.buf()?;
            let out = b.slot();
            b.steps.push(Step::Map {
                n_out: ctx_count,
                out_kind: BufKind::F64,
                src: ElementSource::read(Accessor::I64Slot(ints)).then(Unary::F2IDecode {
                    scale: *decimal_scale,
                }),
                out,
            });
            Ok(Decoded::Buf(out))
        }
        CodecParams::StrDict {
            token_count: _,
            occurrence_count,
            string_count,
        } => {
            ensure(
                ctx_ty == StreamTy::Var,
                "string dictionary in non-VarBytes context",
            )?;
            ensure(*string_count as usize == ctx_count, "string count mismatch")?;
            let occ = *occurrence_count as usize;
            let blob = walk(b, &node.children[0], StreamTy::Bytes, 0)?.buf()?;
            let indices = walk(b, &node.children[1], StreamTy::I64, occ)?.buf()?;
            let token_offsets = b.slot();
            let token_bytes = b.slot();
            let string_token_counts = b.slot();
            b.steps.push(Step::ParseTokenBlob {
                blob,
                token_offsets,
                token_bytes,
                string_token_counts,
            });
            let lens = b.slot();
            b.steps.push(Step::Map {
                n_out: occ,
                out_kind: BufKind::U64,
                src: ElementSource::read(Accessor::I64Slot(indices)).then(Unary::TokenLen {
                    offsets_slot: token_offsets,
                }),
                out: lens,
            });
            let occ_offsets = b.slot();
            b.steps.push(Step::ScanOffsets {
                src: ElementSource::read(Accessor::U64Slot(lens)),
                n: occ,
                out: occ_offsets,
            });
            let payload = b.slot();
            b.steps.push(Step::Expand {
                n_groups: occ,
                offsets: occ_offsets,
                emit: GpEmit::TokenBytes {
                    token_id: ElementSource::read(Accessor::I64Slot(indices)),
                    token_offsets,
                    token_bytes,
                },
                out_kind: BufKind::Byte,
                out: payload,
            });
            let string_token_starts = b.slot();
            b.steps.push(Step::ScanOffsets {
                src: ElementSource::read(Accessor::U64Slot(string_token_counts)),
                n: ctx_count,
                out: string_token_starts,
            });
            let string_offsets = b.slot();
            b.steps.push(Step::Map {
                n_out: ctx_count + 1,
                out_kind: BufKind::U64,
                src: ElementSource::read(Accessor::U64Slot(string_token_starts))
                    .then(Unary::GatherU64 { slot: occ_offsets }),
                out: string_offsets,
            });
            Ok(Decoded::Var {
                offsets: string_offsets,
                payload,
            })
        }
        CodecParams::Ans {
            chunk_size,
            table_log,
            plain_len,
            freqs,
            chunk_offsets,
        } => {
            ensure(
                chunk_offsets.windows(2).all(|w| w[0] <= w[1]),
                "ANS chunk offsets must be non-decreasing",
            )?;
            let plain = *plain_len as usize;
            let fits = match ctx_ty {
                StreamTy::I64 | StreamTy::F64 => plain == ctx_count * 8,
                StreamTy::Fixed(w) => plain == ctx_count * w as usize,
                StreamTy::Bytes => plain == ctx_count,
                // framed VarBytes: offsets plus however much payload
                StreamTy::Var => plain >= (ctx_count + 1) * 8,
            };
            ensure(fits, "ANS plain length mismatch")?;
            let payload_len = *chunk_offsets.last().unwrap_or(&0) as usize;
            let payload = walk(b, &node.children[0], StreamTy::Bytes, payload_len)?.buf()?;
            let out = b.slot();
            b.steps.push(Step::AnsChunks {
                payload,
                table_log: *table_log,
                freqs: freqs.clone(),
                chunk_size: *chunk_size,
                chunk_offsets: chunk_offsets.clone(),
                plain_len: plain,
                out,
            });
            if ctx_ty == StreamTy::Var {
                let offsets_out = b.slot();
                let payload_out = b.slot();
                b.steps.push(Step::UnframeVar {
                    src: out,
                    count: ctx_count,
                    offsets_out,
                    payload_out,
                });
                Ok(Decoded::Var {
                    offsets: offsets_out,
                    payload: payload_out,
                })
            } else {
                Ok(Decoded::Buf(out))
            }
        }
    }
}

/// Builds the unfused decode plan: innermost (Raw) streams first, every
/// intermediate materialized.
pub fn compile_decode(artifact: &CompressedArtifact) -> Result<DecodePlan, PipelineError> {
    if !artifact.root.arity_ok() {
        return Err(PipelineError::MalformedArtifact("codec tree arity"));
    }
    let n_streams = artifact.streams.len();
    if artifact.root.leaf_count() != n_streams {
        return Err(PipelineError::MalformedArtifact(
            "stream count does not match Raw leaves",
        ));
    }
    let mut b = PlanBuilder {
        steps: Vec::new(),
        next_slot: n_streams,
        next_stream: 0,
    };
    let out_ty = StreamTy::of(artifact.original_type);
    let count = artifact.original_count as usize;
    let decoded = walk(&mut b, &artifact.root, out_ty, count)?;
    let output = match decoded {
        Decoded::Buf(payload) => OutputBinding::Fixed { payload },
        Decoded::Var { offsets, payload } => OutputBinding::Var { offsets, payload },
    };
    Ok(DecodePlan {
        steps: b.steps,
        n_streams,
        n_slots: b.next_slot,
        output,
        out_type: artifact.original_type,
        out_count: count,
    })
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

/// Geometry and device selection for plan execution. Absent or structurally
/// invalid configs fall back to pattern defaults derived from the device.
#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub device: VirtualDevice,
    pub fp: Option<LaunchConfig>,
    pub gp: Option<LaunchConfig>,
    pub np: Option<LaunchConfig>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            device: VirtualDevice::host_warp32(),
            fp: None,
            gp: None,
            np: None,
        }
    }
}

impl ExecOptions {
    fn fp_config(&self, elem_bytes: usize) -> LaunchConfig {
        if let Some(cfg) = self.fp {
            if cfg.pattern == PatternKind::FullyParallel && cfg.check_structure().is_ok() {
                return cfg;
            }
        }
        let c = 4usize.div_ceil(elem_bytes.max(1)).next_power_of_two() as u64;
        LaunchConfig::fully_parallel(4, (self.device.warp_size as u64 * 8).min(1024), c)
    }

    fn gp_config(&self) -> LaunchConfig {
        if let Some(cfg) = self.gp {
            if cfg.pattern == PatternKind::GroupParallel && cfg.check_structure().is_ok() {
                return cfg;
            }
        }
        let s = (self.device.warp_size as u64 * 8).min(1024);
        LaunchConfig::group_parallel(self.device.num_cus as u64, s, s)
    }

    fn np_config(&self) -> LaunchConfig {
        if let Some(cfg) = self.np {
            if cfg.pattern == PatternKind::NonParallel && cfg.check_structure().is_ok() {
                return LaunchConfig::non_parallel(cfg.s, cfg.c);
            }
        }
        LaunchConfig::non_parallel(self.device.warp_size as u64, 4)
    }
}

struct Buffer {
    bytes: Vec<u8>,
}

struct Slots {
    bufs: Vec<Option<Buffer>>,
}

impl Slots {
    fn bytes(&self, slot: SlotId) -> Result<&[u8], KernelFault> {
        self.bufs
            .get(slot)
            .and_then(|b| b.as_ref())
            .map(|b| b.bytes.as_slice())
            .ok_or(KernelFault::BadState("read of unmaterialized slot"))
    }

    fn read_i64(&self, slot: SlotId, i: usize) -> Result<i64, KernelFault> {
        let bytes = self.bytes(slot)?;
        let at = i * 8;
        bytes
            .get(at..at + 8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .ok_or(KernelFault::TruncatedStream)
    }

    fn read_u64(&self, slot: SlotId, i: usize) -> Result<u64, KernelFault> {
        Ok(self.read_i64(slot, i)? as u64)
    }

    fn read_f64(&self, slot: SlotId, i: usize) -> Result<f64, KernelFault> {
        Ok(f64::from_bits(self.read_i64(slot, i)? as u64))
    }

    fn u64_vec(&self, slot: SlotId) -> Result<Vec<u64>, PipelineError> {
        let bytes = self
            .bytes(slot)
            .map_err(|_| PipelineError::MalformedArtifact("missing offsets buffer"))?;
        if !bytes.len().is_multiple_of(8) {
            return Err(PipelineError::MalformedArtifact(
                "offsets buffer not u64-aligned",
            ));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[derive(Clone, Copy)]
enum Scalar {
    I(i64),
    F(f64),
}

impl Scalar {
    fn as_i64(self) -> Result<i64, KernelFault> {
        match self {
            Scalar::I(v) => Ok(v),
            Scalar::F(_) => Err(KernelFault::BadState("expected integer value")),
        }
    }
}

fn eval_scalar(
    slots: &Slots,
    acc: &Accessor,
    ops: &[Unary],
    i: usize,
) -> Result<Scalar, KernelFault> {
    let mut value = match acc {
        Accessor::I64Slot(slot) => Scalar::I(slots.read_i64(*slot, i)?),
        Accessor::U64Slot(slot) => Scalar::I(slots.read_u64(*slot, i)? as i64),
        Accessor::F64Slot(slot) => Scalar::F(slots.read_f64(*slot, i)?),
        Accessor::BitUnpack { slot, width, base } => {
            let packed = slots.bytes(*slot)?;
            if packed.len() < packed_len(i + 1, *width) {
                return Err(KernelFault::TruncatedStream);
            }
            Scalar::I(base.wrapping_add(read_field(packed, i, *width) as i64))
        }
    };
    for op in ops {
        value = match op {
            Unary::AddBase(b) => Scalar::I(value.as_i64()?.wrapping_add(*b)),
            Unary::DictLookup { slot, kind } => {
                let idx = value.as_i64()?;
                let width = match kind {
                    LookupKind::I64 | LookupKind::F64 => 8,
                    LookupKind::Bytes(w) => *w as usize,
                };
                let entries = (slots.bytes(*slot)?.len() / width) as i64;
                if idx < 0 || idx >= entries {
                    return Err(KernelFault::IndexOutOfBounds {
                        index: idx as u64,
                        bound: entries as u64,
                    });
                }
                match kind {
                    LookupKind::I64 => Scalar::I(slots.read_i64(*slot, idx as usize)?),
                    LookupKind::F64 => Scalar::F(slots.read_f64(*slot, idx as usize)?),
                    LookupKind::Bytes(_) => {
                        return Err(KernelFault::BadState("byte lookup is terminal"))
                    }
                }
            }
            Unary::F2IDecode { scale } => Scalar::F(value.as_i64()? as f64 / pow10(*scale)),
            Unary::TokenLen { offsets_slot } => {
                let idx = value.as_i64()?;
                let entries = (slots.bytes(*offsets_slot)?.len() / 8) as i64;
                if idx < 0 || idx + 1 >= entries {
                    return Err(KernelFault::IndexOutOfBounds {
                        index: idx as u64,
                        bound: entries.saturating_sub(1) as u64,
                    });
                }
                let a = slots.read_u64(*offsets_slot, idx as usize)?;
                let z = slots.read_u64(*offsets_slot, idx as usize + 1)?;
                Scalar::I((z - a) as i64)
            }
            Unary::GatherU64 { slot } => {
                let idx = value.as_i64()?;
                let entries = (slots.bytes(*slot)?.len() / 8) as i64;
                if idx < 0 || idx >= entries {
                    return Err(KernelFault::IndexOutOfBounds {
                        index: idx as u64,
                        bound: entries as u64,
                    });
                }
                Scalar::I(slots.read_u64(*slot, idx as usize)? as i64)
            }
        };
    }
    Ok(value)
}

/// Writes element `i` of `src` into `out` (whose length is the element width).
fn write_element(
    slots: &Slots,
    src: &ElementSource,
    i: usize,
    out: &mut [u8],
) -> Result<(), KernelFault> {
    if let Some(Unary::DictLookup {
        slot,
        kind: LookupKind::Bytes(w),
    }) = src.ops.last()
    {
        let idx = eval_scalar(slots, &src.acc, &src.ops[..src.ops.len() - 1], i)?.as_i64()?;
        let bytes = slots.bytes(*slot)?;
        let width = *w as usize;
        let entries = (bytes.len() / width) as i64;
        if idx < 0 || idx >= entries {
            return Err(KernelFault::IndexOutOfBounds {
                index: idx as u64,
                bound: entries as u64,
            });
        }
        let at = idx as usize * width;
        out.copy_from_slice(&bytes[at..at + width]);
        return Ok(());
    }
    match eval_scalar(slots, &src.acc, &src.ops, i)? {
        Scalar::I(v) => match out.len() {
            8 => out.copy_from_slice(&v.to_le_bytes()),
            1 => out[0] = v as u8,
            _ => return Err(KernelFault::BadState("scalar into odd element width")),
        },
        Scalar::F(v) => {
            if out.len() != 8 {
                return Err(KernelFault::BadState("float into non-8-byte element"));
            }
            out.copy_from_slice(&v.to_le_bytes());
        }
    }
    Ok(())
}

/// Runs the plan over the artifact's streams. Geometry choices never change
/// the produced bytes.
pub fn execute_plan(
    plan: &DecodePlan,
    streams: &[ByteStream],
    opts: &ExecOptions,
) -> Result<TypedColumn, PipelineError> {
    if streams.len() != plan.n_streams {
        return Err(PipelineError::MalformedArtifact("stream count changed"));
    }
    let mut slots = Slots {
        bufs: Vec::with_capacity(plan.n_slots),
    };
    for s in streams {
        slots.bufs.push(Some(Buffer {
            bytes: s.bytes.clone(),
        }));
    }
    slots.bufs.resize_with(plan.n_slots, || None);

    for (step_idx, step) in plan.steps.iter().enumerate() {
        let fail = |source: PatternError| PipelineError::StepFailed {
            step: step_idx,
            source,
        };
        let scan_fail = |i: usize, fault: KernelFault| PipelineError::StepFailed {
            step: step_idx,
            source: PatternError::Decode {
                output_index: i as u64,
                fault,
            },
        };
        match step {
            Step::Map {
                n_out,
                out_kind,
                src,
                out,
            } => {
                let eb = out_kind.elem_bytes();
                let cfg = opts.fp_config(eb);
                let bytes = {
                    let slots_ref = &slots;
                    let kernel = FullyParallelKernel {
                        n_out: *n_out,
                        out_elem_bytes: eb,
                        map_fn: Box::new(move |i, out_slice| {
                            write_element(slots_ref, src, i, out_slice)
                        }),
                    };
                    run_fully_parallel(&kernel, &cfg, &opts.device).map_err(fail)?
                };
                slots.bufs[*out] = Some(Buffer { bytes });
            }
            Step::ScanOffsets { src, n, out } => {
                // lazily sized: a hostile count faults at the first read
                let mut bytes = Vec::with_capacity(n.saturating_add(1).saturating_mul(8).min(1 << 20));
                let mut acc: u64 = 0;
                bytes.extend_from_slice(&0u64.to_le_bytes());
                for i in 0..*n {
                    let v = eval_scalar(&slots, &src.acc, &src.ops, i)
                        .and_then(Scalar::as_i64)
                        .map_err(|fault| scan_fail(i, fault))?;
                    if v < 0 {
                        return Err(PipelineError::Codec(CodecError::CountOverflow));
                    }
                    acc = acc
                        .checked_add(v as u64)
                        .ok_or(PipelineError::Codec(CodecError::CountOverflow))?;
                    bytes.extend_from_slice(&acc.to_le_bytes());
                }
                slots.bufs[*out] = Some(Buffer { bytes });
            }
            Step::ScanDelta { src, n, base, out } => {
                let mut bytes = Vec::with_capacity(n.saturating_mul(8).min(1 << 20));
                let mut acc = *base;
                for i in 0..*n {
                    let v = eval_scalar(&slots, &src.acc, &src.ops, i)
                        .and_then(Scalar::as_i64)
                        .map_err(|fault| scan_fail(i, fault))?;
                    acc = acc.wrapping_add(v);
                    bytes.extend_from_slice(&acc.to_le_bytes());
                }
                slots.bufs[*out] = Some(Buffer { bytes });
            }
            Step::Expand {
                n_groups,
                offsets,
                emit,
                out_kind,
                out,
            } => {
                let group_out_offsets = slots.u64_vec(*offsets)?;
                if group_out_offsets.len() != n_groups + 1 {
                    return Err(PipelineError::MalformedArtifact("group offsets length"));
                }
                let eb = out_kind.elem_bytes();
                let cfg = opts.gp_config();
                let bytes = {
                    let slots_ref = &slots;
                    let emit_fn: EmitFn<'_> = match emit {
                        GpEmit::Broadcast { value } => Box::new(move |g, _j, out_slice| {
                            write_element(slots_ref, value, g, out_slice)
                        }),
                        GpEmit::Affine { start, stride } => Box::new(move |g, j, out_slice| {
                            let s = eval_scalar(slots_ref, &start.acc, &start.ops, g)?.as_i64()?;
                            let t =
                                eval_scalar(slots_ref, &stride.acc, &stride.ops, g)?.as_i64()?;
                            let v = s.wrapping_add(t.wrapping_mul(j as i64));
                            out_slice.copy_from_slice(&v.to_le_bytes());
                            Ok(())
                        }),
                        GpEmit::TokenBytes {
                            token_id,
                            token_offsets,
                            token_bytes,
                        } => Box::new(move |g, j, out_slice| {
                            let id = eval_scalar(slots_ref, &token_id.acc, &token_id.ops, g)?
                                .as_i64()?;
                            let offs_len = (slots_ref.bytes(*token_offsets)?.len() / 8) as i64;
                            if id < 0 || id + 1 >= offs_len {
                                return Err(KernelFault::IndexOutOfBounds {
                                    index: id as u64,
                                    bound: offs_len.saturating_sub(1) as u64,
                                });
                            }
                            let a = slots_ref.read_u64(*token_offsets, id as usize)? as usize;
                            let bytes = slots_ref.bytes(*token_bytes)?;
                            let at = a + j as usize;
                            out_slice[0] = *bytes.get(at).ok_or(KernelFault::TruncatedStream)?;
                            Ok(())
                        }),
                    };
                    let kernel = GroupParallelKernel {
                        n_groups: *n_groups,
                        group_out_offsets,
                        out_elem_bytes: eb,
                        emit_fn,
                    };
                    run_group_parallel(&kernel, &cfg, &opts.device).map_err(fail)?
                };
                slots.bufs[*out] = Some(Buffer { bytes });
            }
            Step::AnsChunks {
                payload,
                table_log,
                freqs,
                chunk_size,
                chunk_offsets,
                plain_len,
                out,
            } => {
                if *plain_len == 0 {
                    slots.bufs[*out] = Some(Buffer { bytes: Vec::new() });
                    continue;
                }
                let table = AnsDecodeTable::new(freqs, *table_log)?;
                let n_chunks = chunk_offsets.len().saturating_sub(1);
                let chunk = *chunk_size as usize;
                let cfg = opts.np_config();
                let bytes = {
                    let input = slots
                        .bytes(*payload)
                        .map_err(|_| PipelineError::MalformedArtifact("missing ANS payload"))?;
                    let out_offsets: Vec<u64> = (0..=n_chunks)
                        .map(|i| ((i * chunk).min(*plain_len)) as u64)
                        .collect();
                    let kernel = NonParallelKernel {
                        n_chunks,
                        input,
                        chunk_in_offsets: chunk_offsets.clone(),
                        chunk_out_offsets: out_offsets,
                        decode_chunk_fn: Box::new(|_chunk, inp, out_slice| {
                            ans_decode_chunk(inp, &table, out_slice)
                        }),
                    };
                    run_non_parallel(&kernel, &cfg, &opts.device).map_err(fail)?
                };
                slots.bufs[*out] = Some(Buffer { bytes });
            }
            Step::ParseTokenBlob {
                blob,
                token_offsets,
                token_bytes,
                string_token_counts,
            } => {
                let (offs, bytes, counts) = {
                    let blob_bytes = slots
                        .bytes(*blob)
                        .map_err(|_| PipelineError::MalformedArtifact("missing dictionary blob"))?;
                    decode_token_blob(blob_bytes)?
                };
                slots.bufs[*token_offsets] = Some(Buffer {
                    bytes: offs.iter().flat_map(|v| v.to_le_bytes()).collect(),
                });
                slots.bufs[*token_bytes] = Some(Buffer { bytes });
                slots.bufs[*string_token_counts] = Some(Buffer {
                    bytes: counts.iter().flat_map(|v| v.to_le_bytes()).collect(),
                });
            }
            Step::UnframeVar {
                src,
                count,
                offsets_out,
                payload_out,
            } => {
                let (offsets_bytes, payload_bytes) = {
                    let bytes = slots
                        .bytes(*src)
                        .map_err(|_| PipelineError::MalformedArtifact("missing framed VarBytes"))?;
                    let header = count
                        .checked_add(1)
                        .and_then(|c| c.checked_mul(8))
                        .ok_or(PipelineError::MalformedArtifact("VarBytes count overflow"))?;
                    if bytes.len() < header {
                        return Err(PipelineError::MalformedArtifact(
                            "framed VarBytes too short",
                        ));
                    }
                    let offsets: Vec<u64> = bytes[..header]
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    let payload = &bytes[header..];
                    if offsets[0] != 0
                        || offsets.windows(2).any(|w| w[0] > w[1])
                        || *offsets.last().unwrap() != payload.len() as u64
                    {
                        return Err(PipelineError::MalformedArtifact("framed VarBytes offsets"));
                    }
                    (bytes[..header].to_vec(), payload.to_vec())
                };
                slots.bufs[*offsets_out] = Some(Buffer {
                    bytes: offsets_bytes,
                });
                slots.bufs[*payload_out] = Some(Buffer {
                    bytes: payload_bytes,
                });
            }
        }
    }

    let column = match plan.output {
        OutputBinding::Fixed { payload } => {
            let bytes = slots
                .bytes(payload)
                .map_err(|_| PipelineError::MalformedArtifact("missing output buffer"))?
                .to_vec();
            TypedColumn::from_parts(plan.out_type, bytes, None)
                .map_err(|_| PipelineError::MalformedArtifact("output payload shape"))?
        }
        OutputBinding::Var { offsets, payload } => {
            let offsets = slots.u64_vec(offsets)?;
            let bytes = slots
                .bytes(payload)
                .map_err(|_| PipelineError::MalformedArtifact("missing output payload"))?
                .to_vec();
            TypedColumn::from_var(offsets, bytes)
                .map_err(|_| PipelineError::MalformedArtifact("output offsets shape"))?
        }
    };
    if column.count() != plan.out_count {
        return Err(PipelineError::MalformedArtifact("decoded count mismatch"));
    }
    Ok(column)
}

/// Decode with checksum verification; the standard read path.
pub fn decode_artifact(
    artifact: &CompressedArtifact,
    opts: &ExecOptions,
    fused: bool,
) -> Result<TypedColumn, PipelineError> {
    let mut plan = compile_decode(artifact)?;
    if fused {
        plan = fuse(plan);
    }
    let column = execute_plan(&plan, &artifact.streams, opts)?;
    let actual = checksum64(column.payload());
    if actual != artifact.checksum {
        return Err(PipelineError::ChecksumMismatch {
            expected: artifact.checksum,
            actual,
        });
    }
    Ok(column)
}

// ---------------------------------------------------------------------------
// fusion
// ---------------------------------------------------------------------------

#[derive(Default)]
struct SlotUses {
    accessor_reads: usize,
    operand_reads: usize,
}

fn accessor_slot(acc: &Accessor) -> (SlotId, bool) {
    match acc {
        Accessor::I64Slot(s) | Accessor::U64Slot(s) | Accessor::F64Slot(s) => (*s, true),
        // bit extraction straddles element boundaries; the packed slot is a
        // whole-buffer operand, not an elementwise read
        Accessor::BitUnpack { slot, .. } => (*slot, false),
    }
}

fn source_uses(src: &ElementSource, uses: &mut [SlotUses]) {
    let (slot, plain) = accessor_slot(&src.acc);
    if plain {
        uses[slot].accessor_reads += 1;
    } else {
        uses[slot].operand_reads += 1;
    }
    for op in &src.ops {
        match op {
            Unary::DictLookup { slot, .. }
            | Unary::TokenLen { offsets_slot: slot }
            | Unary::GatherU64 { slot } => uses[*slot].operand_reads += 1,
            Unary::AddBase(_) | Unary::F2IDecode { .. } => {}
        }
    }
}

fn collect_uses(plan: &DecodePlan) -> Vec<SlotUses> {
    let mut uses: Vec<SlotUses> = (0..plan.n_slots).map(|_| SlotUses::default()).collect();
    for step in &plan.steps {
        match step {
            Step::Map { src, .. } | Step::ScanOffsets { src, .. } | Step::ScanDelta { src, .. } => {
                source_uses(src, &mut uses)
            }
            Step::Expand { offsets, emit, .. } => {
                uses[*offsets].operand_reads += 1;
                match emit {
                    GpEmit::Broadcast { value } => source_uses(value, &mut uses),
                    GpEmit::Affine { start, stride } => {
                        source_uses(start, &mut uses);
                        source_uses(stride, &mut uses);
                    }
                    GpEmit::TokenBytes {
                        token_id,
                        token_offsets,
                        token_bytes,
                    } => {
                        source_uses(token_id, &mut uses);
                        uses[*token_offsets].operand_reads += 1;
                        uses[*token_bytes].operand_reads += 1;
                    }
                }
            }
            Step::AnsChunks { payload, .. } => uses[*payload].operand_reads += 1,
            Step::ParseTokenBlob { blob, .. } => uses[*blob].operand_reads += 1,
            Step::UnframeVar { src, .. } => uses[*src].operand_reads += 1,
        }
    }
    match plan.output {
        OutputBinding::Fixed { payload } => uses[payload].operand_reads += 1,
        OutputBinding::Var { offsets, payload } => {
            uses[offsets].operand_reads += 1;
            uses[payload].operand_reads += 1;
        }
    }
    uses
}

/// Does this accessor read `slot` elementwise with the kind the producer
/// wrote? Matching kinds make inlining a pure identity.
fn accessor_matches(acc: &Accessor, slot: SlotId, kind: BufKind) -> bool {
    match (acc, kind) {
        (Accessor::I64Slot(s), BufKind::I64) => *s == slot,
        (Accessor::U64Slot(s), BufKind::U64) => *s == slot,
        (Accessor::F64Slot(s), BufKind::F64) => *s == slot,
        _ => false,
    }
}

fn try_inline(
    src: &mut ElementSource,
    slot: SlotId,
    kind: BufKind,
    producer: &ElementSource,
) -> bool {
    if accessor_matches(&src.acc, slot, kind) {
        let mut ops = producer.ops.clone();
        ops.append(&mut src.ops);
        src.acc = producer.acc.clone();
        src.ops = ops;
        true
    } else {
        false
    }
}

/// Applies the fusion rules until fixpoint. Output is bit-identical to the
/// unfused plan; when any fusion fired the plan has strictly fewer
/// materialized steps.
pub fn fuse(mut plan: DecodePlan) -> DecodePlan {
    'retry: loop {
        let uses = collect_uses(&plan);
        for idx in 0..plan.steps.len() {
            let (slot, kind, producer_src) = match &plan.steps[idx] {
                Step::Map {
                    out_kind, src, out, ..
                } => {
                    let u = &uses[*out];
                    if u.accessor_reads == 1 && u.operand_reads == 0 {
                        (*out, *out_kind, src.clone())
                    } else {
                        continue;
                    }
                }
                _ => continue,
            };
            for j in idx + 1..plan.steps.len() {
                let hit = match &mut plan.steps[j] {
                    Step::Map { src, .. }
                    | Step::ScanOffsets { src, .. }
                    | Step::ScanDelta { src, .. } => try_inline(src, slot, kind, &producer_src),
                    Step::Expand { emit, .. } => match emit {
                        GpEmit::Broadcast { value } => try_inline(value, slot, kind, &producer_src),
                        GpEmit::Affine { start, stride } => {
                            try_inline(start, slot, kind, &producer_src)
                                || try_inline(stride, slot, kind, &producer_src)
                        }
                        GpEmit::TokenBytes { token_id, .. } => {
                            try_inline(token_id, slot, kind, &producer_src)
                        }
                    },
                    _ => false,
                };
                if hit {
                    plan.steps.remove(idx);
                    continue 'retry;
                }
            }
        }
        return plan;
    }
}

// ---------------------------------------------------------------------------
// traffic model
// ---------------------------------------------------------------------------

/// Memory-traffic estimate for decoding: a fused single pass moves
/// compressed + plain bytes; every boundary a fusion pass would remove costs
/// one extra write + read of its intermediate buffer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrafficEstimate {
    pub fused_bytes: u64,
    pub unfused_bytes: u64,
    pub ratio: f64,
}

pub fn traffic_model(plan: &DecodePlan, compressed_size: u64, plain_size: u64) -> TrafficEstimate {
    let uses = collect_uses(plan);
    let mut intermediate: u64 = 0;
    for step in &plan.steps {
        if let Step::Map {
            n_out,
            out_kind,
            out,
            ..
        } = step
        {
            let u = &uses[*out];
            if u.accessor_reads == 1 && u.operand_reads == 0 {
                intermediate += (*n_out as u64) * out_kind.elem_bytes() as u64;
            }
        }
    }
    let fused_bytes = compressed_size + plain_size;
    let unfused_bytes = fused_bytes + 2 * intermediate;
    TrafficEstimate {
        fused_bytes,
        unfused_bytes,
        ratio: unfused_bytes as f64 / fused_bytes as f64,
    }
}
