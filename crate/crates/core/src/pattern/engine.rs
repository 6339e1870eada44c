//! Executes pattern kernels under explicit geometry on host worker threads.
//!
//! Blocks map to tasks on a scoped thread pool; lanes within a block run as
//! a sequential loop emulating lockstep. Output buffers are written through
//! a raw pointer wrapper whose soundness rests on the index-math partition
//! property: no two coordinates ever own the same output element.

use super::index::{fp_grid_blocks, fp_index_range, gp_assignment, gp_group_stride, np_chunk_id};
use super::{KernelFault, LaunchConfig, PatternError, PatternKind, VirtualDevice};

/// Writes output element `i` into the provided element slice.
pub type MapFn<'a> = Box<dyn Fn(usize, &mut [u8]) -> Result<(), KernelFault> + Sync + 'a>;
/// Writes item `j` of group `g` into the provided element slice.
pub type EmitFn<'a> = Box<dyn Fn(usize, u64, &mut [u8]) -> Result<(), KernelFault> + Sync + 'a>;
/// Decodes one chunk from its input slice into its output slice.
pub type ChunkFn<'a> = Box<dyn Fn(usize, &[u8], &mut [u8]) -> Result<(), KernelFault> + Sync + 'a>;

/// Elementwise kernel: output element `i` is a pure function of the inputs.
/// Inputs and codec parameters are captured by the closure.
pub struct FullyParallelKernel<'a> {
    pub n_out: usize,
    pub out_elem_bytes: usize,
    pub map_fn: MapFn<'a>,
}

/// Variable-sized group expansion kernel. Group `g` owns output elements
/// `[group_out_offsets[g], group_out_offsets[g+1])`.
pub struct GroupParallelKernel<'a> {
    pub n_groups: usize,
    /// Exclusive prefix sum of group sizes, `n_groups + 1` entries.
    pub group_out_offsets: Vec<u64>,
    pub out_elem_bytes: usize,
    pub emit_fn: EmitFn<'a>,
}

/// Chunked sequential kernel: each chunk is decoded by one lane, start to
/// finish. Chunks are disjoint in both input and output.
pub struct NonParallelKernel<'a> {
    pub n_chunks: usize,
    pub input: &'a [u8],
    /// `n_chunks + 1` byte offsets into `input`.
    pub chunk_in_offsets: Vec<u64>,
    /// `n_chunks + 1` byte offsets into the output.
    pub chunk_out_offsets: Vec<u64>,
    pub decode_chunk_fn: ChunkFn<'a>,
}

/// Output buffer shared across workers. Writes go to provably disjoint byte
/// ranges (the partition property of the pattern index math), so no
/// synchronization is needed.
struct SharedOut {
    ptr: *mut u8,
    len: usize,
}

unsafe impl Sync for SharedOut {}

impl SharedOut {
    fn new(buf: &mut [u8]) -> Self {
        SharedOut {
            ptr: buf.as_mut_ptr(),
            len: buf.len(),
        }
    }

    /// Safety: callers must never pass overlapping ranges from different
    /// threads. The engine guarantees this via the index partition.
    #[allow(clippy::mut_from_ref)]
    unsafe fn slice_mut(&self, offset: usize, len: usize) -> &mut [u8] {
        debug_assert!(offset + len <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(offset), len)
    }
}

/// Runs `body(block)` for every block id, distributing blocks over the
/// device's workers. Returns the error with the smallest position if any
/// lane faulted, keeping failures deterministic.
fn run_blocks<F>(dev: &VirtualDevice, n_blocks: u64, body: F) -> Result<(), PatternError>
where
    F: Fn(u64) -> Result<(), PatternError> + Sync,
{
    if n_blocks == 0 {
        return Ok(());
    }
    let workers = (dev.worker_count as u64).min(n_blocks).max(1) as usize;
    if workers == 1 {
        for block in 0..n_blocks {
            body(block)?;
        }
        return Ok(());
    }
    let results: Vec<Result<(), PatternError>> = std::thread::scope(|scope| {
        let body = &body;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut block = w as u64;
                    while block < n_blocks {
                        body(block)?;
                        block += workers as u64;
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut first: Option<PatternError> = None;
    for r in results {
        if let Err(e) = r {
            let replace = match (&first, &e) {
                (None, _) => true,
                (
                    Some(PatternError::Decode {
                        output_index: a, ..
                    }),
                    PatternError::Decode {
                        output_index: b, ..
                    },
                ) => b < a,
                (
                    Some(PatternError::ChunkDecode { chunk: a, .. }),
                    PatternError::ChunkDecode { chunk: b, .. },
                ) => b < a,
                _ => false,
            };
            if replace {
                first = Some(e);
            }
        }
    }
    match first {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Zero-filled output buffer with overflow- and allocation-checked sizing,
/// so hostile element counts fail cleanly instead of aborting.
fn alloc_output(elems: usize, elem_bytes: usize) -> Result<Vec<u8>, PatternError> {
    let bytes = elems
        .checked_mul(elem_bytes)
        .ok_or(PatternError::AllocationFailed { bytes: u64::MAX })?;
    let mut out = Vec::new();
    out.try_reserve_exact(bytes)
        .map_err(|_| PatternError::AllocationFailed {
            bytes: bytes as u64,
        })?;
    out.resize(bytes, 0);
    Ok(out)
}

/// Evaluates the map over every output element under the given geometry.
/// The result is bit-identical for every valid config and device.
pub fn run_fully_parallel(
    kernel: &FullyParallelKernel<'_>,
    cfg: &LaunchConfig,
    dev: &VirtualDevice,
) -> Result<Vec<u8>, PatternError> {
    if cfg.pattern != PatternKind::FullyParallel {
        return Err(PatternError::InvalidConfig(
            "expected a fully-parallel config",
        ));
    }
    cfg.check_structure()?;
    let n_out = kernel.n_out as u64;
    let eb = kernel.out_elem_bytes;
    let mut out = alloc_output(kernel.n_out, eb)?;
    let shared = SharedOut::new(&mut out);
    let blocks = fp_grid_blocks(n_out, cfg);
    run_blocks(dev, blocks, |block| {
        for iter in 0..cfg.l {
            for thread in 0..cfg.s {
                let range = fp_index_range(block, thread, iter, cfg, n_out)?;
                for i in range {
                    let slice = unsafe { shared.slice_mut(i as usize * eb, eb) };
                    (kernel.map_fn)(i as usize, slice).map_err(|fault| PatternError::Decode {
                        output_index: i,
                        fault,
                    })?;
                }
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Expands every (group, item) pair under the given geometry. Requires only
/// the one offsets array (a prior prefix-sum pass over the group sizes).
pub fn run_group_parallel(
    kernel: &GroupParallelKernel<'_>,
    cfg: &LaunchConfig,
    dev: &VirtualDevice,
) -> Result<Vec<u8>, PatternError> {
    if cfg.pattern != PatternKind::GroupParallel {
        return Err(PatternError::InvalidConfig(
            "expected a group-parallel config",
        ));
    }
    cfg.check_structure()?;
    let offsets = &kernel.group_out_offsets;
    if offsets.len() != kernel.n_groups + 1 {
        return Err(PatternError::InvalidConfig(
            "group_out_offsets must have n_groups + 1 entries",
        ));
    }
    if offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(PatternError::InvalidConfig(
            "group_out_offsets must be non-decreasing",
        ));
    }
    let n_groups = kernel.n_groups as u64;
    let eb = kernel.out_elem_bytes;
    let total = *offsets.last().unwrap() as usize;
    let mut out = alloc_output(total, eb)?;
    let shared = SharedOut::new(&mut out);
    let stride = gp_group_stride(cfg);
    let h_iters = n_groups.div_ceil(stride);
    run_blocks(dev, cfg.l, |block| {
        for h_iter in 0..h_iters {
            for thread in 0..cfg.s {
                let (group, lane) = gp_assignment(block, thread, h_iter, cfg)?;
                if group >= n_groups {
                    continue;
                }
                let g = group as usize;
                let group_len = offsets[g + 1] - offsets[g];
                let mut item = lane;
                while item < group_len {
                    let elem = (offsets[g] + item) as usize;
                    let slice = unsafe { shared.slice_mut(elem * eb, eb) };
                    (kernel.emit_fn)(g, item, slice).map_err(|fault| PatternError::Decode {
                        output_index: elem as u64,
                        fault,
                    })?;
                    item += cfg.c;
                }
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Decodes every chunk exactly once; chunk `block*(S*C) + lane` runs
/// sequentially inside its lane. `cfg.l` may be 0 to derive the block count
/// from the chunk count.
pub fn run_non_parallel(
    kernel: &NonParallelKernel<'_>,
    cfg: &LaunchConfig,
    dev: &VirtualDevice,
) -> Result<Vec<u8>, PatternError> {
    if cfg.pattern != PatternKind::NonParallel {
        return Err(PatternError::InvalidConfig(
            "expected a non-parallel config",
        ));
    }
    cfg.check_structure()?;
    let n_chunks = kernel.n_chunks as u64;
    if kernel.chunk_in_offsets.len() != kernel.n_chunks + 1
        || kernel.chunk_out_offsets.len() != kernel.n_chunks + 1
    {
        return Err(PatternError::InvalidConfig(
            "chunk offset tables must have n_chunks + 1 entries",
        ));
    }
    let lanes = cfg.s * cfg.c;
    let blocks_needed = n_chunks.div_ceil(lanes);
    if cfg.l != 0 && cfg.l != blocks_needed && n_chunks > 0 {
        return Err(PatternError::InvalidConfig(
            "non-parallel L must be ceil(n_chunks / (S*C)) or 0 to derive",
        ));
    }
    if kernel.chunk_out_offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(PatternError::InvalidConfig(
            "chunk_out_offsets must be non-decreasing",
        ));
    }
    let total = *kernel.chunk_out_offsets.last().unwrap() as usize;
    let mut out = alloc_output(total, 1)?;
    let shared = SharedOut::new(&mut out);
    run_blocks(dev, blocks_needed, |block| {
        for lane in 0..lanes {
            let chunk = np_chunk_id(block, lane, cfg);
            if chunk >= n_chunks {
                continue;
            }
            let ci = chunk as usize;
            let in_start = kernel.chunk_in_offsets[ci] as usize;
            let in_end = kernel.chunk_in_offsets[ci + 1] as usize;
            if in_end < in_start || in_end > kernel.input.len() {
                return Err(PatternError::ChunkDecode {
                    chunk,
                    fault: KernelFault::TruncatedStream,
                });
            }
            let out_start = kernel.chunk_out_offsets[ci] as usize;
            let out_end = kernel.chunk_out_offsets[ci + 1] as usize;
            let out_slice = unsafe { shared.slice_mut(out_start, out_end - out_start) };
            (kernel.decode_chunk_fn)(ci, &kernel.input[in_start..in_end], out_slice)
                .map_err(|fault| PatternError::ChunkDecode { chunk, fault })?;
        }
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(workers: u32) -> VirtualDevice {
        VirtualDevice::new(32, 8, workers)
    }

    fn i64_out(bytes: &[u8]) -> Vec<i64> {
        bytes
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    }

    #[test]
    fn fp_identity_map() {
        let values = [1i64, 2, 3];
        let kernel = FullyParallelKernel {
            n_out: 3,
            out_elem_bytes: 8,
            map_fn: Box::new(move |i, out| {
                out.copy_from_slice(&values[i].to_le_bytes());
                Ok(())
            }),
        };
        for cfg in [
            LaunchConfig::fully_parallel(1, 1, 1),
            LaunchConfig::fully_parallel(2, 2, 4),
            LaunchConfig::fully_parallel(16, 1024, 1),
        ] {
            let out = run_fully_parallel(&kernel, &cfg, &dev(4)).unwrap();
            assert_eq!(i64_out(&out), vec![1, 2, 3]);
        }
    }

    #[test]
    fn fp_dictionary_lookup_map() {
        let dict = [10i64, 20];
        let indices = [1usize, 0, 1];
        let kernel = FullyParallelKernel {
            n_out: 3,
            out_elem_bytes: 8,
            map_fn: Box::new(move |i, out| {
                let idx = indices[i];
                let v = *dict.get(idx).ok_or(KernelFault::IndexOutOfBounds {
                    index: idx as u64,
                    bound: dict.len() as u64,
                })?;
                out.copy_from_slice(&v.to_le_bytes());
                Ok(())
            }),
        };
        let cfg = LaunchConfig::fully_parallel(1, 32, 1);
        let out = run_fully_parallel(&kernel, &cfg, &dev(2)).unwrap();
        assert_eq!(i64_out(&out), vec![20, 10, 20]);
    }

    #[test]
    fn fp_reports_smallest_faulting_index() {
        let kernel = FullyParallelKernel {
            n_out: 100,
            out_elem_bytes: 1,
            map_fn: Box::new(|i, _out| {
                if i >= 40 {
                    Err(KernelFault::IndexOutOfBounds {
                        index: i as u64,
                        bound: 40,
                    })
                } else {
                    Ok(())
                }
            }),
        };
        let cfg = LaunchConfig::fully_parallel(1, 2, 1);
        let err = run_fully_parallel(&kernel, &cfg, &dev(4)).unwrap_err();
        match err {
            PatternError::Decode { output_index, .. } => assert_eq!(output_index, 40),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn gp_rle_expansion() {
        let values = [5i64, 2];
        let kernel = GroupParallelKernel {
            n_groups: 2,
            group_out_offsets: vec![0, 3, 5],
            out_elem_bytes: 8,
            emit_fn: Box::new(move |g, _j, out| {
                out.copy_from_slice(&values[g].to_le_bytes());
                Ok(())
            }),
        };
        let cfg = LaunchConfig::group_parallel(8, 32, 32);
        let out = run_group_parallel(&kernel, &cfg, &dev(4)).unwrap();
        assert_eq!(i64_out(&out), vec![5, 5, 5, 2, 2]);
    }

    #[test]
    fn gp_single_huge_group_matches_sequential() {
        let n: u64 = 1_000_000;
        let kernel = GroupParallelKernel {
            n_groups: 1,
            group_out_offsets: vec![0, n],
            out_elem_bytes: 1,
            emit_fn: Box::new(|_g, j, out| {
                out[0] = (j % 251) as u8;
                Ok(())
            }),
        };
        let cfg = LaunchConfig::group_parallel(8, 64, 256);
        let out = run_group_parallel(&kernel, &cfg, &dev(8)).unwrap();
        let expected: Vec<u8> = (0..n).map(|j| (j % 251) as u8).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn np_chunks_decode_once_each() {
        // 257 chunks of 3 input bytes each; output doubles every byte.
        let n_chunks = 257usize;
        let input: Vec<u8> = (0..n_chunks * 3).map(|i| (i % 256) as u8).collect();
        let in_offsets: Vec<u64> = (0..=n_chunks).map(|i| (i * 3) as u64).collect();
        let out_offsets: Vec<u64> = (0..=n_chunks).map(|i| (i * 6) as u64).collect();
        let kernel = NonParallelKernel {
            n_chunks,
            input: &input,
            chunk_in_offsets: in_offsets,
            chunk_out_offsets: out_offsets,
            decode_chunk_fn: Box::new(|_chunk, inp, out| {
                for (k, &b) in inp.iter().enumerate() {
                    out[2 * k] = b;
                    out[2 * k + 1] = b;
                }
                Ok(())
            }),
        };
        let mut expected = Vec::new();
        for &b in &input {
            expected.push(b);
            expected.push(b);
        }
        for cfg in [
            LaunchConfig::non_parallel(32, 1),
            LaunchConfig::non_parallel(4, 2),
            LaunchConfig::non_parallel(64, 16),
        ] {
            let out = run_non_parallel(&kernel, &cfg, &dev(4)).unwrap();
            assert_eq!(out, expected);
        }
    }

    #[test]
    fn single_chunk_decodes_whole_input_sequentially() {
        let input: Vec<u8> = (0..100).collect();
        let kernel = NonParallelKernel {
            n_chunks: 1,
            input: &input,
            chunk_in_offsets: vec![0, 100],
            chunk_out_offsets: vec![0, 100],
            decode_chunk_fn: Box::new(|_c, inp, out| {
                out.copy_from_slice(inp);
                Ok(())
            }),
        };
        let cfg = LaunchConfig::non_parallel(32, 1);
        let out = run_non_parallel(&kernel, &cfg, &dev(4)).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let kernel = FullyParallelKernel {
            n_out: 4096,
            out_elem_bytes: 8,
            map_fn: Box::new(|i, out| {
                out.copy_from_slice(&((i as i64) * 7 - 3).to_le_bytes());
                Ok(())
            }),
        };
        let cfg = LaunchConfig::fully_parallel(2, 32, 2);
        let reference = run_fully_parallel(&kernel, &cfg, &dev(1)).unwrap();
        for workers in [2, 3, 8, 16] {
            assert_eq!(
                run_fully_parallel(&kernel, &cfg, &dev(workers)).unwrap(),
                reference
            );
        }
    }
}
