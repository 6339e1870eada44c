//! patternpress: pattern-based parallel compression pipelines.
//!
//! Columns are compressed through composable nested codecs, decoded by
//! kernels expressed in three parallel patterns (fully-parallel,
//! group-parallel, non-parallel) under explicit `<L, S, C>` launch geometry
//! on a deterministic virtual device, with kernel fusion, launch-config
//! tuning, and Johnson's-rule pipelining of transfer against decompression.
//!
//! The crate is organized by layer:
//!
//! * [`datamodel`] — typed columns, codec trees, the ZDMV container format.
//! * [`pattern`] — launch geometry, index math, and the virtual device.
//! * [`codecs`] — the primitive algorithm pool (bit-packing, delta, RLE,
//!   delta-stride, dictionary, Float2Int, string dictionary, rANS).
//! * [`nesting`] — the pipeline mini-language, encode compiler, and fused
//!   decode plans.
//! * [`scheduler`] — two-machine flow-shop ordering and overlapped
//!   transfer/decode execution.
//! * [`tuner`] — brute-force and pruned launch-config search.
//! * [`datagen`] — deterministic benchmark data generators.

pub mod codecs;
pub mod datagen;
pub mod datamodel;
pub mod nesting;
pub mod pattern;
pub mod scheduler;
pub mod tuner;
