//! The primitive algorithm pool.
//!
//! Encoders are pure host functions; each decoder is expressed as one or
//! more pattern kernels (or the element readers the nesting layer builds
//! kernels from). Every codec round-trips bit-exactly.

mod ans;
mod bitpack;
mod delta;
mod deltastride;
mod dict;
mod float2int;
mod rle;
mod strdict;

pub use ans::{
    ans_decode_all, ans_decode_chunk, ans_encode, build_freq_table, AnsDecodeTable, AnsParams,
    ANS_DEFAULT_CHUNK, ANS_DEFAULT_TABLE_LOG,
};
pub use bitpack::{bitpack_decode_all, bitpack_encode, packed_len, read_field, BitPackParams};
pub use delta::{delta_decode, delta_encode};
pub use deltastride::{deltastride_decode, deltastride_encode, StrideRuns};
pub use dict::{dict_decode_all, dict_encode};
pub use float2int::{float2int_decode_value, float2int_encode, pow10, Float2IntParams};
pub use rle::{rle_decode, rle_encode};
pub use strdict::{
    decode_token_blob, encode_token_blob, strdict_encode, tokenize_ranges, StrDictEncoded,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("operation requires a non-empty column")]
    EmptyColumn,
    #[error("input stream truncated: need {needed} bytes, have {have}")]
    TruncatedStream { needed: usize, have: usize },
    #[error("index {index} out of dictionary of {dict_len} entries")]
    IndexOutOfDictionary { index: i64, dict_len: u64 },
    #[error("values are not decimal-representable within 18 digits")]
    NotDecimalRepresentable,
    #[error("run count does not fit the output space")]
    CountOverflow,
    #[error("64-bit arithmetic overflow")]
    ArithmeticOverflow,
    #[error("bad codec parameters: {0}")]
    BadParams(&'static str),
}
