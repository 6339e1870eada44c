//! Property tests: container bijection, codec round trips, scan oracle.

use patternpress::codecs::{
    ans_decode_all, ans_encode, bitpack_decode_all, bitpack_encode, delta_decode, delta_encode,
    deltastride_decode, deltastride_encode, dict_decode_all, dict_encode, float2int_decode_value,
    float2int_encode, rle_decode, rle_encode, strdict_encode, AnsParams,
};
use patternpress::datamodel::{
    checksum64, deserialize_artifact, serialize_artifact, ByteStream, CodecNode, CodecParams,
    CompressedArtifact, DictEntryType, ElementType, StreamRole, TypedColumn,
};
use patternpress::nesting::{compile_encode, decode_artifact, parse_pipeline, ExecOptions};
use patternpress::pattern::{prefix_sum, ScanMode};
use proptest::collection::vec;
use proptest::prelude::*;

fn role_strategy() -> impl Strategy<Value = StreamRole> {
    prop_oneof![
        Just(StreamRole::Values),
        Just(StreamRole::Counts),
        Just(StreamRole::Indices),
        Just(StreamRole::Dictionary),
        Just(StreamRole::Packed),
        Just(StreamRole::EntropyPayload),
        Just(StreamRole::Offsets),
        Just(StreamRole::Aux),
    ]
}

fn params_strategy() -> impl Strategy<Value = CodecParams> {
    prop_oneof![
        (any::<u8>(), any::<i64>(), any::<u64>()).prop_map(|(w, b, c)| CodecParams::BitPack {
            bit_width: w % 65,
            for_base: b,
            count: c,
        }),
        (any::<i64>(), any::<u64>()).prop_map(|(b, c)| CodecParams::Delta { base: b, count: c }),
        (any::<u64>(), any::<u64>()).prop_map(|(r, t)| CodecParams::Rle {
            run_count: r,
            total: t,
        }),
        (any::<u64>(), any::<u64>()).prop_map(|(r, t)| CodecParams::DeltaStride {
            run_count: r,
            total: t,
        }),
        (0u8..3, 1u32..64, any::<u64>(), any::<u64>()).prop_map(|(k, w, e, i)| {
            CodecParams::Dict {
                entry_type: match k {
                    0 => DictEntryType::Int64,
                    1 => DictEntryType::Float64,
                    _ => DictEntryType::FixedBytes(w),
                },
                entry_count: e,
                index_count: i,
            }
        }),
        (0u8..19, any::<u64>()).prop_map(|(d, c)| CodecParams::Float2Int {
            decimal_scale: d,
            count: c,
        }),
        (any::<u32>(), any::<u64>(), any::<u64>()).prop_map(|(t, o, s)| CodecParams::StrDict {
            token_count: t,
            occurrence_count: o,
            string_count: s,
        }),
        (
            8u8..=14,
            any::<u64>(),
            vec(any::<u16>(), 256),
            vec(any::<u64>(), 0..5)
        )
            .prop_map(|(tl, pl, freqs, offs)| CodecParams::Ans {
                chunk_size: 4096,
                table_log: tl,
                plain_len: pl,
                freqs,
                chunk_offsets: offs,
            }),
    ]
}

/// Arity-correct random codec trees, Raw leaves at the frontier.
fn tree_strategy(depth: u32) -> BoxedStrategy<CodecNode> {
    if depth == 0 {
        return Just(CodecNode::raw()).boxed();
    }
    params_strategy()
        .prop_flat_map(move |params| {
            let arity = params.codec_id().stream_arity();
            vec(
                prop_oneof![
                    3 => Just(None),
                    2 => tree_strategy(depth - 1).prop_map(Some)
                ],
                arity,
            )
            .prop_map(move |children| {
                if params.codec_id() == patternpress::datamodel::CodecId::Raw {
                    CodecNode::raw()
                } else {
                    CodecNode::new(
                        params.clone(),
                        children
                            .into_iter()
                            .map(|c| c.unwrap_or_else(CodecNode::raw))
                            .collect(),
                    )
                }
            })
        })
        .boxed()
}

fn element_type_strategy() -> impl Strategy<Value = ElementType> {
    prop_oneof![
        Just(ElementType::Int64),
        Just(ElementType::Float64),
        (1u32..16).prop_map(ElementType::FixedBytes),
        Just(ElementType::VarBytes),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// serialize . deserialize is the identity on structurally valid
    /// artifacts, field for field.
    #[test]
    fn container_round_trip(
        root in tree_strategy(3),
        ty in element_type_strategy(),
        count in any::<u64>(),
        roles in vec(role_strategy(), 16),
        payloads in vec(vec(any::<u8>(), 0..48), 16),
    ) {
        let leaves = root.leaf_count();
        prop_assume!(leaves <= 16);
        let streams: Vec<ByteStream> = (0..leaves)
            .map(|i| ByteStream::new(roles[i], payloads[i].clone()))
            .collect();
        let artifact = CompressedArtifact {
            root,
            streams,
            original_type: ty,
            original_count: count,
            checksum: 7,
        };
        let bytes = serialize_artifact(&artifact);
        prop_assert_eq!(&bytes[..4], b"ZDMV");
        let back = deserialize_artifact(&bytes).unwrap();
        prop_assert_eq!(&back, &artifact);
        // determinism: equal inputs give identical bytes
        prop_assert_eq!(serialize_artifact(&back), bytes);
    }

    #[test]
    fn checksum_is_pure(payload in vec(any::<u8>(), 0..256)) {
        prop_assert_eq!(checksum64(&payload), checksum64(&payload.clone()));
    }

    #[test]
    fn bitpack_round_trip_and_minimality(values in vec(any::<i64>(), 1..500)) {
        let (packed, params) = bitpack_encode(&values).unwrap();
        let back = bitpack_decode_all(&packed, params, values.len()).unwrap();
        prop_assert_eq!(&back, &values);
        // minimal width: one bit less cannot span max - min
        if params.bit_width > 0 {
            let min = *values.iter().min().unwrap();
            let max = *values.iter().max().unwrap();
            let span = max.wrapping_sub(min) as u64;
            if params.bit_width < 64 {
                prop_assert!(span >= (1 << (params.bit_width - 1)));
                prop_assert!(span < (1u64 << params.bit_width));
            }
        }
    }

    #[test]
    fn delta_round_trip(values in vec(-1_000_000i64..1_000_000, 1..500)) {
        let (deltas, base) = delta_encode(&values).unwrap();
        prop_assert_eq!(deltas[0], 0);
        prop_assert_eq!(delta_decode(&deltas, base), values);
    }

    #[test]
    fn rle_round_trip_and_maximality(values in vec(0i64..6, 0..600)) {
        let (run_values, run_counts) = rle_encode(&values);
        prop_assert!(run_counts.iter().all(|&c| c >= 1));
        prop_assert!(run_values.windows(2).all(|w| w[0] != w[1]));
        prop_assert_eq!(rle_decode(&run_values, &run_counts).unwrap(), values);
    }

    #[test]
    fn deltastride_round_trip_and_run_shape(values in vec(-1_000i64..1_000, 0..400)) {
        let runs = deltastride_encode(&values);
        prop_assert_eq!(&deltastride_decode(&runs).unwrap(), &values);
        // every multi-element run really is arithmetic
        let mut at = 0usize;
        for g in 0..runs.starts.len() {
            let count = runs.counts[g] as usize;
            for j in 1..count {
                prop_assert_eq!(values[at + j] - values[at + j - 1], runs.strides[g]);
            }
            at += count;
        }
    }

    #[test]
    fn dict_round_trip(values in vec(0i64..50, 0..400)) {
        let payload: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let (dict, indices) = dict_encode(8, &payload);
        prop_assert!(indices.iter().all(|&i| (i as usize) < dict.len() / 8));
        prop_assert_eq!(dict_decode_all(&dict, 8, &indices).unwrap(), payload);
    }

    #[test]
    fn float2int_round_trip_on_decimals(cents in vec(-100_000i64..100_000, 1..300)) {
        let values: Vec<f64> = cents.iter().map(|&c| c as f64 / 100.0).collect();
        let (ints, params) = float2int_encode(&values).unwrap();
        prop_assert!(params.decimal_scale <= 2);
        for (i, &x) in values.iter().enumerate() {
            prop_assert_eq!(
                float2int_decode_value(ints[i], params.decimal_scale).to_bits(),
                x.to_bits()
            );
        }
    }

    #[test]
    fn strdict_reconstruction(words in vec(vec(prop_oneof![Just(b'a'), Just(b'b'), Just(b' '), Just(b'.')], 0..12), 0..40)) {
        let col = TypedColumn::from_strings(&words);
        let enc = strdict_encode(col.offsets().unwrap(), col.payload());
        prop_assert!(enc.indices.iter().all(|&i| (i as usize) < enc.tokens.len()));
        // concatenating looked-up tokens per string reproduces each string
        let mut occ = 0usize;
        for (s, &tok_count) in enc.string_token_counts.iter().enumerate() {
            let mut rebuilt = Vec::new();
            for _ in 0..tok_count {
                rebuilt.extend_from_slice(&enc.tokens[enc.indices[occ] as usize]);
                occ += 1;
            }
            prop_assert_eq!(rebuilt.as_slice(), &words[s][..]);
        }
    }

    #[test]
    fn ans_round_trip(data in vec(any::<u8>(), 0..20_000)) {
        let params = AnsParams { chunk_size: 1024, table_log: 10 };
        let (payload, offsets, freqs) = ans_encode(&data, &params).unwrap();
        let back = ans_decode_all(&payload, &offsets, &freqs, &params, data.len()).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn prefix_sum_matches_fold(values in vec(0u64..1_000_000, 0..500)) {
        let inclusive = prefix_sum(&values, ScanMode::Inclusive).unwrap();
        let exclusive = prefix_sum(&values, ScanMode::Exclusive).unwrap();
        // fold oracle
        let mut acc = 0u64;
        let oracle: Vec<u64> = values
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect();
        prop_assert_eq!(&inclusive, &oracle);
        prop_assert_eq!(exclusive.len(), values.len() + 1);
        prop_assert_eq!(exclusive[0], 0);
        for (i, item) in oracle.iter().enumerate() {
            prop_assert_eq!(&exclusive[i + 1], item);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// End-to-end: random integer columns survive a nested pipeline.
    #[test]
    fn nested_pipeline_round_trip(values in vec(0i64..500, 1..2_000)) {
        let col = TypedColumn::from_i64(&values);
        let opts = ExecOptions::default();
        for pipeline in [
            "Dictionary encoding | Bit-packing",
            "RLE | [Bit-packing, Bit-packing]",
            "DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing]",
        ] {
            let spec = parse_pipeline(pipeline).unwrap();
            let artifact = compile_encode(&spec, &col).unwrap();
            for fused in [false, true] {
                let back = decode_artifact(&artifact, &opts, fused).unwrap();
                prop_assert_eq!(&back, &col);
            }
        }
    }
}
