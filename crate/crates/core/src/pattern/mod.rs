//! The three parallel patterns and their launch geometry on a virtual device.
//!
//! Geometry is a `<L, S, C>` tuple whose meaning depends on the pattern:
//!
//! * Fully-Parallel: `L` loop iterations per block, `S` lanes per block, `C`
//!   contiguous elements per lane per iteration. A block owns a tile of
//!   `L*S*C` output elements.
//! * Group-Parallel: `L` issued blocks, `S` lanes per block, `C` lanes
//!   cooperating on one group (blocks gang up when `C > S`, one block spans
//!   `S/C` groups in lockstep when `S > C`).
//! * Non-Parallel: `L` blocks of `S*C` lanes, one chunk per lane, decoded
//!   sequentially inside the lane. `L` is derived from the chunk count.
//!
//! Every valid geometry produces bit-identical output; geometry only moves
//! work between lanes. The index math is exposed separately from the engine
//! so coverage/partition properties can be tested exhaustively.

mod engine;
mod index;

pub use engine::{
    run_fully_parallel, run_group_parallel, run_non_parallel, ChunkFn, EmitFn, FullyParallelKernel,
    GroupParallelKernel, MapFn, NonParallelKernel,
};
pub use index::{fp_grid_blocks, fp_index_range, gp_assignment, gp_group_stride, np_chunk_id};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// SIMT-style execution profile emulated on host threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualDevice {
    /// Lanes per SIMT unit; 32 or 64.
    pub warp_size: u32,
    /// Compute-unit count; the Group-Parallel block count.
    pub num_cus: u32,
    /// Host threads used to emulate blocks.
    pub worker_count: u32,
}

impl VirtualDevice {
    pub fn new(warp_size: u32, num_cus: u32, worker_count: u32) -> Self {
        assert!(
            warp_size == 32 || warp_size == 64,
            "warp size must be 32 or 64"
        );
        assert!(num_cus >= 1 && worker_count >= 1);
        VirtualDevice {
            warp_size,
            num_cus,
            worker_count,
        }
    }

    /// Warp-32 profile with a worker per host core.
    pub fn host_warp32() -> Self {
        VirtualDevice::new(32, 64, host_workers())
    }

    /// Warp-64 profile with a worker per host core.
    pub fn host_warp64() -> Self {
        VirtualDevice::new(64, 64, host_workers())
    }
}

fn host_workers() -> u32 {
    std::thread::available_parallelism()
        .map(|n| n.get() as u32)
        .unwrap_or(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    FullyParallel,
    GroupParallel,
    NonParallel,
}

/// The `<L, S, C>` geometry tuple steering kernel execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaunchConfig {
    pub pattern: PatternKind,
    /// Loop count (FP) or issued block count (GP/NP). 0 means "derive from
    /// the workload", which only Non-Parallel supports.
    pub l: u64,
    /// Lanes per block.
    pub s: u64,
    /// Elements per lane per iteration (FP), cooperating lanes per group
    /// (GP), or chunks-per-lane multiplier (NP).
    pub c: u64,
}

impl LaunchConfig {
    pub fn fully_parallel(l: u64, s: u64, c: u64) -> Self {
        LaunchConfig {
            pattern: PatternKind::FullyParallel,
            l,
            s,
            c,
        }
    }

    pub fn group_parallel(l: u64, s: u64, c: u64) -> Self {
        LaunchConfig {
            pattern: PatternKind::GroupParallel,
            l,
            s,
            c,
        }
    }

    pub fn non_parallel(s: u64, c: u64) -> Self {
        LaunchConfig {
            pattern: PatternKind::NonParallel,
            l: 0,
            s,
            c,
        }
    }

    /// Structural validity: the constraints the engine itself needs. Lattice
    /// membership against a device profile is the tuner's concern.
    pub fn check_structure(&self) -> Result<(), PatternError> {
        let pow2 = |v: u64| v > 0 && v.is_power_of_two();
        match self.pattern {
            PatternKind::FullyParallel => {
                if !pow2(self.l) || !pow2(self.s) || !pow2(self.c) {
                    return Err(PatternError::InvalidConfig(
                        "fully-parallel L, S, C must be positive powers of two",
                    ));
                }
            }
            PatternKind::GroupParallel => {
                if self.l == 0 || !pow2(self.s) || !pow2(self.c) {
                    return Err(PatternError::InvalidConfig(
                        "group-parallel needs L >= 1 and power-of-two S, C",
                    ));
                }
                if !self.s.is_multiple_of(self.c) && !self.c.is_multiple_of(self.s) {
                    return Err(PatternError::InvalidConfig(
                        "group-parallel cooperation ratio must be integral",
                    ));
                }
                if self.c > self.l * self.s || !(self.l * self.s).is_multiple_of(self.c) {
                    return Err(PatternError::InvalidConfig(
                        "group-parallel C must divide L*S",
                    ));
                }
            }
            PatternKind::NonParallel => {
                if !pow2(self.s) || !pow2(self.c) {
                    return Err(PatternError::InvalidConfig(
                        "non-parallel needs power-of-two S and C",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Faults raised by kernel lane functions; the engine attaches position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelFault {
    #[error("index {index} out of bounds (limit {bound})")]
    IndexOutOfBounds { index: u64, bound: u64 },
    #[error("input stream truncated")]
    TruncatedStream,
    #[error("corrupt coder state: {0}")]
    BadState(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("{coordinate} {value} outside geometry limit {limit}")]
    OutOfGeometry {
        coordinate: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("decode failed at output element {output_index}: {fault}")]
    Decode {
        output_index: u64,
        fault: KernelFault,
    },
    #[error("chunk {chunk} failed to decode: {fault}")]
    ChunkDecode { chunk: u64, fault: KernelFault },
    #[error("64-bit arithmetic overflow in scan")]
    ArithmeticOverflow,
    #[error("invalid launch config: {0}")]
    InvalidConfig(&'static str),
    #[error("cannot allocate {bytes}-byte output buffer")]
    AllocationFailed { bytes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Inclusive,
    Exclusive,
}

/// Sequential scan. Exclusive output has length `n + 1` with a leading 0 and
/// a trailing total, so `out[i+1] - out[i]` recovers the input.
pub fn prefix_sum(values: &[u64], mode: ScanMode) -> Result<Vec<u64>, PatternError> {
    match mode {
        ScanMode::Inclusive => {
            let mut out = Vec::with_capacity(values.len());
            let mut acc: u64 = 0;
            for &v in values {
                acc = acc.checked_add(v).ok_or(PatternError::ArithmeticOverflow)?;
                out.push(acc);
            }
            Ok(out)
        }
        ScanMode::Exclusive => {
            let mut out = Vec::with_capacity(values.len() + 1);
            let mut acc: u64 = 0;
            out.push(0);
            for &v in values {
                acc = acc.checked_add(v).ok_or(PatternError::ArithmeticOverflow)?;
                out.push(acc);
            }
            Ok(out)
        }
    }
}

/// Theoretical decompression throughput ceiling for a memory-bound kernel
/// that reads compressed bytes and writes plain bytes.
pub fn throughput_bound(mem_bandwidth: f64, compressed_size: f64, plain_size: f64) -> f64 {
    mem_bandwidth * plain_size / (compressed_size + plain_size)
}
