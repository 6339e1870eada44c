//! Compiles a pipeline against a column: codecs apply outer-to-inner, each
//! output stream is recursively encoded by its child, and Raw leaves capture
//! the final bytes.

use super::{nesting_sig, CodecSpec, PipeNode, PipelineError, StreamTy};
use crate::codecs::{
    ans_encode, bitpack_encode, delta_encode, deltastride_encode, dict_encode, encode_token_blob,
    float2int_encode, rle_encode, strdict_encode, AnsParams, CodecError,
};
use crate::datamodel::{
    checksum64, ByteStream, CodecId, CodecNode, CodecParams, CompressedArtifact, DictEntryType,
    StreamRole, TypedColumn,
};

/// Typed data flowing between codecs while encoding.
#[derive(Debug, Clone)]
enum StreamData {
    I64(Vec<i64>),
    F64(Vec<f64>),
    Fixed { width: u32, payload: Vec<u8> },
    Var { offsets: Vec<u64>, payload: Vec<u8> },
    Bytes(Vec<u8>),
}

impl StreamData {
    fn ty(&self) -> StreamTy {
        match self {
            StreamData::I64(_) => StreamTy::I64,
            StreamData::F64(_) => StreamTy::F64,
            StreamData::Fixed { width, .. } => StreamTy::Fixed(*width),
            StreamData::Var { .. } => StreamTy::Var,
            StreamData::Bytes(_) => StreamTy::Bytes,
        }
    }

    /// Raw byte image used by Raw leaves and as ANS input. VarBytes data is
    /// framed as `offsets ++ payload` so decoding can rebuild boundaries.
    fn into_raw_bytes(self) -> Vec<u8> {
        match self {
            StreamData::I64(values) => values.iter().flat_map(|v| v.to_le_bytes()).collect(),
            StreamData::F64(values) => values.iter().flat_map(|v| v.to_le_bytes()).collect(),
            StreamData::Fixed { payload, .. } | StreamData::Bytes(payload) => payload,
            StreamData::Var { offsets, payload } => {
                let mut out = Vec::with_capacity(offsets.len() * 8 + payload.len());
                for o in &offsets {
                    out.extend_from_slice(&o.to_le_bytes());
                }
                out.extend_from_slice(&payload);
                out
            }
        }
    }

    fn from_column(col: &TypedColumn) -> StreamData {
        match col.element_type() {
            crate::datamodel::ElementType::Int64 => StreamData::I64(col.as_i64().unwrap()),
            crate::datamodel::ElementType::Float64 => StreamData::F64(col.as_f64().unwrap()),
            crate::datamodel::ElementType::FixedBytes(w) => StreamData::Fixed {
                width: w,
                payload: col.payload().to_vec(),
            },
            crate::datamodel::ElementType::VarBytes => StreamData::Var {
                offsets: col.offsets().unwrap().to_vec(),
                payload: col.payload().to_vec(),
            },
        }
    }
}

fn type_mismatch(codec: CodecId, expected: &'static str, data: &StreamData) -> PipelineError {
    PipelineError::TypeMismatch {
        codec,
        expected,
        found: data.ty().name(),
    }
}

fn as_i64(codec: CodecId, data: StreamData) -> Result<Vec<i64>, PipelineError> {
    match data {
        StreamData::I64(v) => Ok(v),
        other => Err(type_mismatch(codec, "Int64", &other)),
    }
}

/// Resolves a pipeline node into its codec spec plus one optional child
/// pipeline per output stream; unbound streams store raw.
fn node_parts(node: &PipeNode) -> (&CodecSpec, Vec<Option<&PipeNode>>) {
    let spec = match node {
        PipeNode::Leaf(s) | PipeNode::Seq(s, _) | PipeNode::Fanout(s, _) => s,
    };
    let sig = nesting_sig(spec.codec);
    let arity = spec.codec.stream_arity();
    let mut slots: Vec<Option<&PipeNode>> = vec![None; arity];
    match node {
        PipeNode::Leaf(_) => {}
        PipeNode::Seq(_, next) => slots[sig.primary] = Some(next),
        PipeNode::Fanout(_, kids) => {
            for (i, kid) in kids.iter().enumerate() {
                slots[sig.bindable[i]] = Some(kid);
            }
        }
    }
    (spec, slots)
}

fn parse_ans_options(spec: &CodecSpec) -> Result<AnsParams, PipelineError> {
    let mut params = AnsParams::default();
    for (key, value) in &spec.options {
        match key.as_str() {
            "chunk_size" => {
                params.chunk_size = value.parse().map_err(|_| PipelineError::BadOption {
                    key: key.clone(),
                    reason: format!("\"{value}\" is not a u32"),
                })?;
            }
            "table_log" => {
                params.table_log = value.parse().map_err(|_| PipelineError::BadOption {
                    key: key.clone(),
                    reason: format!("\"{value}\" is not a u8"),
                })?;
            }
            _ => unreachable!("parser rejects unknown options"),
        }
    }
    params.validate().map_err(|e| PipelineError::BadOption {
        key: "chunk_size/table_log".into(),
        reason: e.to_string(),
    })?;
    Ok(params)
}

struct Encoded {
    node: CodecNode,
    streams: Vec<ByteStream>,
}

/// Encodes `data` with the child pipeline if bound, else stores it raw under
/// `role`.
fn encode_child(
    child: Option<&PipeNode>,
    data: StreamData,
    role: StreamRole,
) -> Result<Encoded, PipelineError> {
    match child {
        Some(node) => encode_node(node, data, role),
        None => Ok(Encoded {
            node: CodecNode::raw(),
            streams: vec![ByteStream::new(role, data.into_raw_bytes())],
        }),
    }
}

fn encode_node(
    node: &PipeNode,
    data: StreamData,
    role_if_raw: StreamRole,
) -> Result<Encoded, PipelineError> {
    let (spec, children) = node_parts(node);
    let codec = spec.codec;
    if codec != CodecId::Ans && !spec.options.is_empty() {
        // parser already filters; defensive for hand-built ASTs
        return Err(PipelineError::UnknownOption {
            codec,
            key: spec.options[0].0.clone(),
        });
    }
    match codec {
        CodecId::Raw => Ok(Encoded {
            node: CodecNode::raw(),
            streams: vec![ByteStream::new(role_if_raw, data.into_raw_bytes())],
        }),
        CodecId::BitPack => {
            let values = as_i64(codec, data)?;
            let count = values.len() as u64;
            let (packed, p) = bitpack_encode(&values)?;
            let child = encode_child(children[0], StreamData::Bytes(packed), StreamRole::Packed)?;
            Ok(join(
                CodecParams::BitPack {
                    bit_width: p.bit_width,
                    for_base: p.for_base,
                    count,
                },
                vec![child],
            ))
        }
        CodecId::Delta => {
            let values = as_i64(codec, data)?;
            let count = values.len() as u64;
            let (deltas, base) = delta_encode(&values)?;
            let child = encode_child(children[0], StreamData::I64(deltas), StreamRole::Values)?;
            Ok(join(CodecParams::Delta { base, count }, vec![child]))
        }
        CodecId::Rle => {
            let values = as_i64(codec, data)?;
            let total = values.len() as u64;
            let (run_values, run_counts) = rle_encode(&values);
            let run_count = run_values.len() as u64;
            let v = encode_child(children[0], StreamData::I64(run_values), StreamRole::Values)?;
            let c = encode_child(children[1], StreamData::I64(run_counts), StreamRole::Counts)?;
            Ok(join(CodecParams::Rle { run_count, total }, vec![v, c]))
        }
        CodecId::DeltaStride => {
            let values = as_i64(codec, data)?;
            let total = values.len() as u64;
            let runs = deltastride_encode(&values);
            let run_count = runs.starts.len() as u64;
            let s = encode_child(
                children[0],
                StreamData::I64(runs.starts),
                StreamRole::Values,
            )?;
            let st = encode_child(children[1], StreamData::I64(runs.strides), StreamRole::Aux)?;
            let c = encode_child(
                children[2],
                StreamData::I64(runs.counts),
                StreamRole::Counts,
            )?;
            Ok(join(
                CodecParams::DeltaStride { run_count, total },
                vec![s, st, c],
            ))
        }
        CodecId::Dict => {
            let (entry_type, entry_payload) = match data {
                StreamData::I64(v) => (
                    DictEntryType::Int64,
                    v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>(),
                ),
                StreamData::F64(v) => (
                    DictEntryType::Float64,
                    v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>(),
                ),
                StreamData::Fixed { width, payload } => (DictEntryType::FixedBytes(width), payload),
                StreamData::Bytes(payload) => (DictEntryType::FixedBytes(1), payload),
                other @ StreamData::Var { .. } => {
                    return Err(type_mismatch(codec, "fixed-width values", &other))
                }
            };
            let width = entry_type.width();
            let (dict_payload, indices) = dict_encode(width, &entry_payload);
            let entry_count = (dict_payload.len() / width) as u64;
            let index_count = indices.len() as u64;
            let dict_data = match entry_type {
                DictEntryType::Int64 => StreamData::I64(
                    dict_payload
                        .chunks_exact(8)
                        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                DictEntryType::Float64 => StreamData::F64(
                    dict_payload
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                DictEntryType::FixedBytes(w) => StreamData::Fixed {
                    width: w,
                    payload: dict_payload,
                },
            };
            let d = encode_child(children[0], dict_data, StreamRole::Dictionary)?;
            let i = encode_child(children[1], StreamData::I64(indices), StreamRole::Indices)?;
            Ok(join(
                CodecParams::Dict {
                    entry_type,
                    entry_count,
                    index_count,
                },
                vec![d, i],
            ))
        }
        CodecId::Float2Int => {
            let values = match data {
                StreamData::F64(v) => v,
                other => return Err(type_mismatch(codec, "Float64", &other)),
            };
            let count = values.len() as u64;
            match float2int_encode(&values) {
                Ok((ints, p)) => {
                    let child =
                        encode_child(children[0], StreamData::I64(ints), StreamRole::Values)?;
                    Ok(join(
                        CodecParams::Float2Int {
                            decimal_scale: p.decimal_scale,
                            count,
                        },
                        vec![child],
                    ))
                }
                // encoder contract: fall back to storing the floats raw
                Err(CodecError::NotDecimalRepresentable) => Ok(Encoded {
                    node: CodecNode::raw(),
                    streams: vec![ByteStream::new(
                        role_if_raw,
                        StreamData::F64(values).into_raw_bytes(),
                    )],
                }),
                Err(e) => Err(e.into()),
            }
        }
        CodecId::StrDict => {
            let (offsets, payload) = match data {
                StreamData::Var { offsets, payload } => (offsets, payload),
                other => return Err(type_mismatch(codec, "VarBytes", &other)),
            };
            let enc = strdict_encode(&offsets, &payload);
            let blob = encode_token_blob(&enc.tokens, &enc.string_token_counts);
            let params = CodecParams::StrDict {
                token_count: enc.tokens.len() as u32,
                occurrence_count: enc.indices.len() as u64,
                string_count: (offsets.len() - 1) as u64,
            };
            let d = encode_child(children[0], StreamData::Bytes(blob), StreamRole::Dictionary)?;
            let i = encode_child(
                children[1],
                StreamData::I64(enc.indices),
                StreamRole::Indices,
            )?;
            Ok(join(params, vec![d, i]))
        }
        CodecId::Ans => {
            let ans_params = parse_ans_options(spec)?;
            let plain = data.into_raw_bytes();
            let plain_len = plain.len() as u64;
            let (payload, chunk_offsets, freqs) = ans_encode(&plain, &ans_params)?;
            let child = encode_child(
                children[0],
                StreamData::Bytes(payload),
                StreamRole::EntropyPayload,
            )?;
            Ok(join(
                CodecParams::Ans {
                    chunk_size: ans_params.chunk_size,
                    table_log: ans_params.table_log,
                    plain_len,
                    freqs,
                    chunk_offsets,
                },
                vec![child],
            ))
        }
    }
}

fn join(params: CodecParams, children: Vec<Encoded>) -> Encoded {
    let mut nodes = Vec::with_capacity(children.len());
    let mut streams = Vec::new();
    for c in children {
        nodes.push(c.node);
        streams.extend(c.streams);
    }
    Encoded {
        node: CodecNode::new(params, nodes),
        streams,
    }
}

/// Applies the pipeline to a column and packages the result.
pub fn compile_encode(
    spec: &PipeNode,
    col: &TypedColumn,
) -> Result<CompressedArtifact, PipelineError> {
    let data = StreamData::from_column(col);
    let encoded = encode_node(spec, data, StreamRole::Values)?;
    debug_assert!(encoded.node.arity_ok());
    debug_assert_eq!(encoded.node.leaf_count(), encoded.streams.len());
    Ok(CompressedArtifact {
        root: encoded.node,
        streams: encoded.streams,
        original_type: col.element_type(),
        original_count: col.count() as u64,
        checksum: checksum64(col.payload()),
    })
}
