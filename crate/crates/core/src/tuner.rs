//! Offline launch-geometry search: full enumeration of the per-pattern
//! config lattice, brute-force timing, and a monotonicity-pruned coordinate
//! search that stays within a fixed evaluation budget.

use crate::codecs::{ans_encode, bitpack_encode, AnsDecodeTable, AnsParams};
use crate::datagen::{gen_rle_groups, gen_uniform_bits, Rng, RunDist};
use crate::pattern::{
    prefix_sum, run_fully_parallel, run_group_parallel, run_non_parallel, FullyParallelKernel,
    GroupParallelKernel, LaunchConfig, NonParallelKernel, PatternError, PatternKind, ScanMode,
    VirtualDevice,
};
use serde::Serialize;
use std::collections::HashMap;
use std::time::Instant;

/// The power-of-two lattice a pattern explores.
#[derive(Debug, Clone, Copy)]
pub struct ConfigSpace {
    pub pattern: PatternKind,
    pub device: VirtualDevice,
    /// Output element byte size; fixes the Fully-Parallel C value.
    pub elem_bytes: usize,
}

fn pow2_range(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = lo.next_power_of_two();
    while v <= hi {
        out.push(v);
        v *= 2;
    }
    out
}

/// Per-dimension lattices (L, S, C). A singleton lattice is a fixed
/// dimension; the Non-Parallel L is derived from the workload (encoded 0).
fn lattices(space: &ConfigSpace) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let warp = space.device.warp_size as u64;
    match space.pattern {
        PatternKind::FullyParallel => (
            pow2_range(1, 16),
            pow2_range(warp, 1024),
            vec![4usize.div_ceil(space.elem_bytes.max(1)).next_power_of_two() as u64],
        ),
        PatternKind::GroupParallel => (
            vec![space.device.num_cus as u64],
            pow2_range(warp, 1024),
            pow2_range(1, 1024),
        ),
        PatternKind::NonParallel => (vec![0], vec![warp], pow2_range(1, 1024)),
    }
}

fn make_config(space: &ConfigSpace, l: u64, s: u64, c: u64) -> LaunchConfig {
    LaunchConfig {
        pattern: space.pattern,
        l,
        s,
        c,
    }
}

fn config_valid(space: &ConfigSpace, cfg: &LaunchConfig) -> bool {
    match space.pattern {
        PatternKind::NonParallel => cfg.check_structure().is_ok(),
        _ => cfg.check_structure().is_ok(),
    }
}

/// Full cross product of valid lattice points.
pub fn enumerate_space(space: &ConfigSpace) -> Vec<LaunchConfig> {
    let (ls, ss, cs) = lattices(space);
    let mut out = Vec::new();
    for &l in &ls {
        for &s in &ss {
            for &c in &cs {
                let cfg = make_config(space, l, s, c);
                if config_valid(space, &cfg) {
                    out.push(cfg);
                }
            }
        }
    }
    out
}

/// A timeable kernel workload: one run decodes `bytes_per_run` plain bytes
/// under the given geometry.
pub trait BenchKernel: Sync {
    fn bytes_per_run(&self) -> u64;
    fn run(&self, cfg: &LaunchConfig, dev: &VirtualDevice) -> Result<(), PatternError>;
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub config: LaunchConfig,
    /// Median throughput in bytes/sec.
    pub metric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub best_config: LaunchConfig,
    pub best_metric: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

/// Median wall-clock throughput over `reps` runs, after one untimed
/// warm-up run.
fn measure(
    kernel: &dyn BenchKernel,
    cfg: &LaunchConfig,
    dev: &VirtualDevice,
    reps: usize,
) -> Result<f64, PatternError> {
    kernel.run(cfg, dev)?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        kernel.run(cfg, dev)?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2].max(1e-9);
    Ok(kernel.bytes_per_run() as f64 / median)
}

fn report_from_trace(trace: Vec<TraceEntry>) -> SearchReport {
    let best = trace
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.metric.total_cmp(&b.1.metric))
        .map(|(i, _)| i)
        .expect("search evaluated no configs");
    SearchReport {
        best_config: trace[best].config,
        best_metric: trace[best].metric,
        evaluations: trace.len(),
        trace,
    }
}

/// Times every config in the space; the exhaustive baseline.
pub fn brute_force_search(
    kernel: &dyn BenchKernel,
    space: &ConfigSpace,
    reps: usize,
) -> Result<SearchReport, PatternError> {
    assert!(reps >= 3, "need at least 3 repetitions for a stable median");
    let mut trace = Vec::new();
    for cfg in enumerate_space(space) {
        let metric = measure(kernel, &cfg, &space.device, reps)?;
        trace.push(TraceEntry {
            config: cfg,
            metric,
        });
    }
    Ok(report_from_trace(trace))
}

/// New-evaluation budget per swept dimension, chosen to keep worst-case
/// totals within the exploration targets (FP <= 10, GP <= 12, NP <= 7).
fn dim_budget(dim: usize) -> usize {
    match dim {
        1 => 6, // S
        2 => 6, // C
        _ => 4, // L
    }
}

/// Greedy coordinate descent over (S, then C, then L): sweep each free
/// dimension's lattice ascending while the metric improves, stop after the
/// first decline, fix the best point, move on. Fixed dimensions cost no
/// evaluations, already-timed points are cached, and each sweep stops at its
/// evaluation budget.
pub fn pruned_search(
    kernel: &dyn BenchKernel,
    space: &ConfigSpace,
    reps: usize,
) -> Result<SearchReport, PatternError> {
    assert!(reps >= 3, "need at least 3 repetitions for a stable median");
    let (ls, ss, cs) = lattices(space);
    let dims = [&ls, &ss, &cs];
    let mut current = [ls[0], ss[0], cs[0]];
    let mut cache: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut trace = Vec::new();

    // sweep order S, C, L
    for &dim in &[1usize, 2, 0] {
        let lattice = dims[dim];
        if lattice.len() <= 1 {
            continue;
        }
        let mut best_point = current[dim];
        let mut best_metric = f64::NEG_INFINITY;
        let mut new_evals = 0usize;
        for &point in lattice.iter() {
            let mut probe = current;
            probe[dim] = point;
            let cfg = make_config(space, probe[0], probe[1], probe[2]);
            if !config_valid(space, &cfg) {
                continue;
            }
            let key = (probe[0], probe[1], probe[2]);
            let metric = match cache.get(&key) {
                Some(&m) => m,
                None => {
                    if new_evals >= dim_budget(dim) {
                        break;
                    }
                    new_evals += 1;
                    let m = measure(kernel, &cfg, &space.device, reps)?;
                    cache.insert(key, m);
                    trace.push(TraceEntry {
                        config: cfg,
                        metric: m,
                    });
                    m
                }
            };
            if metric > best_metric {
                best_metric = metric;
                best_point = point;
            } else {
                // first decline under the unimodality assumption
                break;
            }
        }
        current[dim] = best_point;
    }
    if trace.is_empty() {
        // every dimension was fixed; time the single point
        let cfg = make_config(space, current[0], current[1], current[2]);
        let metric = measure(kernel, &cfg, &space.device, reps)?;
        trace.push(TraceEntry {
            config: cfg,
            metric,
        });
    }
    Ok(report_from_trace(trace))
}

/// Normalized efficiency of running each profile's native config on every
/// other profile. Row i, column j holds throughput(device i, config j)
/// divided by throughput(device i, config i); the diagonal is 1 by
/// construction.
#[derive(Debug, Clone, Serialize)]
pub struct CrossDeviceReport {
    pub devices: Vec<String>,
    pub native_configs: Vec<LaunchConfig>,
    pub efficiency: Vec<Vec<f64>>,
}

pub fn cross_device_report(
    entries: &[(String, VirtualDevice, LaunchConfig)],
    kernel: &dyn BenchKernel,
    reps: usize,
) -> Result<CrossDeviceReport, PatternError> {
    assert!(entries.len() >= 2, "need at least two device profiles");
    let mut efficiency = Vec::with_capacity(entries.len());
    for (_, device, native_cfg) in entries {
        let native = measure(kernel, native_cfg, device, reps)?;
        let mut row = Vec::with_capacity(entries.len());
        for (j, (_, _, cfg)) in entries.iter().enumerate() {
            if cfg == native_cfg && entries[j].1 == *device {
                row.push(1.0);
            } else {
                let shared = measure(kernel, cfg, device, reps)?;
                row.push(shared / native);
            }
        }
        efficiency.push(row);
    }
    Ok(CrossDeviceReport {
        devices: entries.iter().map(|(n, _, _)| n.clone()).collect(),
        native_configs: entries.iter().map(|(_, _, c)| *c).collect(),
        efficiency,
    })
}

// ---------------------------------------------------------------------------
// shipped benchmark kernels
// ---------------------------------------------------------------------------

/// Fully-parallel benchmark: frame-of-reference bit unpacking.
pub struct BitUnpackBench {
    packed: Vec<u8>,
    width: u8,
    base: i64,
    n: usize,
}

impl BitUnpackBench {
    pub fn generate(rows: usize, bit_width: u8, seed: u64) -> Self {
        let col = gen_uniform_bits(rows, bit_width, seed);
        BitUnpackBench::from_values(&col.as_i64().unwrap())
    }

    /// Packs the given values and benchmarks their unpacking.
    pub fn from_values(values: &[i64]) -> Self {
        let (packed, params) = bitpack_encode(values).unwrap();
        BitUnpackBench {
            packed,
            width: params.bit_width,
            base: params.for_base,
            n: values.len(),
        }
    }
}

impl BenchKernel for BitUnpackBench {
    fn bytes_per_run(&self) -> u64 {
        self.n as u64 * 8
    }

    fn run(&self, cfg: &LaunchConfig, dev: &VirtualDevice) -> Result<(), PatternError> {
        let kernel = FullyParallelKernel {
            n_out: self.n,
            out_elem_bytes: 8,
            map_fn: Box::new(|i, out| {
                let v = self.base.wrapping_add(crate::codecs::read_field(
                    &self.packed,
                    i,
                    self.width,
                ) as i64);
                out.copy_from_slice(&v.to_le_bytes());
                Ok(())
            }),
        };
        run_fully_parallel(&kernel, cfg, dev).map(|_| ())
    }
}

/// Group-parallel benchmark: RLE expansion.
pub struct RleExpandBench {
    values: Vec<i64>,
    offsets: Vec<u64>,
    total: u64,
}

impl RleExpandBench {
    pub fn generate(n_groups: usize, dist: &RunDist, seed: u64) -> Self {
        let col = gen_rle_groups(n_groups, dist, seed);
        let (values, counts) = crate::codecs::rle_encode(&col.as_i64().unwrap());
        let counts_u: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
        let offsets = prefix_sum(&counts_u, ScanMode::Exclusive).unwrap();
        let total = *offsets.last().unwrap();
        RleExpandBench {
            values,
            offsets,
            total,
        }
    }

    pub fn from_runs(values: Vec<i64>, counts: &[u64]) -> Self {
        let offsets = prefix_sum(counts, ScanMode::Exclusive).unwrap();
        let total = *offsets.last().unwrap();
        RleExpandBench {
            values,
            offsets,
            total,
        }
    }
}

impl BenchKernel for RleExpandBench {
    fn bytes_per_run(&self) -> u64 {
        self.total * 8
    }

    fn run(&self, cfg: &LaunchConfig, dev: &VirtualDevice) -> Result<(), PatternError> {
        let kernel = GroupParallelKernel {
            n_groups: self.values.len(),
            group_out_offsets: self.offsets.clone(),
            out_elem_bytes: 8,
            emit_fn: Box::new(|g, _j, out| {
                out.copy_from_slice(&self.values[g].to_le_bytes());
                Ok(())
            }),
        };
        run_group_parallel(&kernel, cfg, dev).map(|_| ())
    }
}

/// Non-parallel benchmark: chunked rANS decode.
pub struct AnsChunkBench {
    payload: Vec<u8>,
    chunk_offsets: Vec<u64>,
    out_offsets: Vec<u64>,
    table: AnsDecodeTable,
    plain_len: usize,
}

impl AnsChunkBench {
    pub fn generate(plain_len: usize, seed: u64) -> Self {
        let mut rng = Rng::seeded(seed);
        let data: Vec<u8> = (0..plain_len)
            .map(|_| if rng.f64() < 0.8 { b'A' } else { b'B' })
            .collect();
        AnsChunkBench::from_bytes(&data)
    }

    /// Entropy-encodes the given bytes and benchmarks their chunk decode.
    pub fn from_bytes(data: &[u8]) -> Self {
        assert!(!data.is_empty(), "benchmark needs non-empty input");
        let params = AnsParams::default();
        let (payload, chunk_offsets, freqs) = ans_encode(data, &params).unwrap();
        let table = AnsDecodeTable::new(&freqs, params.table_log).unwrap();
        let chunk = params.chunk_size as usize;
        let n_chunks = chunk_offsets.len() - 1;
        let plain_len = data.len();
        let out_offsets = (0..=n_chunks)
            .map(|i| ((i * chunk).min(plain_len)) as u64)
            .collect();
        AnsChunkBench {
            payload,
            chunk_offsets,
            out_offsets,
            table,
            plain_len,
        }
    }
}

impl BenchKernel for AnsChunkBench {
    fn bytes_per_run(&self) -> u64 {
        self.plain_len as u64
    }

    fn run(&self, cfg: &LaunchConfig, dev: &VirtualDevice) -> Result<(), PatternError> {
        let kernel = NonParallelKernel {
            n_chunks: self.chunk_offsets.len() - 1,
            input: &self.payload,
            chunk_in_offsets: self.chunk_offsets.clone(),
            chunk_out_offsets: self.out_offsets.clone(),
            decode_chunk_fn: Box::new(|_c, inp, out| {
                crate::codecs::ans_decode_chunk(inp, &self.table, out)
            }),
        };
        run_non_parallel(&kernel, cfg, dev).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nvidia_like() -> VirtualDevice {
        VirtualDevice::new(32, 64, 4)
    }

    fn amd_like() -> VirtualDevice {
        VirtualDevice::new(64, 64, 4)
    }

    #[test]
    fn fp_space_counts_match_exploration_table() {
        // warp 32: 5 x 6 x 1
        let space = ConfigSpace {
            pattern: PatternKind::FullyParallel,
            device: nvidia_like(),
            elem_bytes: 8,
        };
        assert_eq!(enumerate_space(&space).len(), 30);
        // warp 64: S lattice {64..1024} has 5 points
        let space = ConfigSpace {
            pattern: PatternKind::FullyParallel,
            device: amd_like(),
            elem_bytes: 8,
        };
        assert_eq!(enumerate_space(&space).len(), 25);
    }

    #[test]
    fn gp_space_counts() {
        let space = ConfigSpace {
            pattern: PatternKind::GroupParallel,
            device: nvidia_like(),
            elem_bytes: 8,
        };
        // 1 x 6 x 11
        assert_eq!(enumerate_space(&space).len(), 66);
    }

    #[test]
    fn np_space_counts() {
        let space = ConfigSpace {
            pattern: PatternKind::NonParallel,
            device: nvidia_like(),
            elem_bytes: 1,
        };
        // 1 x 1 x 11
        assert_eq!(enumerate_space(&space).len(), 11);
    }

    #[test]
    fn fp_c_follows_element_size() {
        for (elem, want_c) in [(8usize, 1u64), (4, 1), (2, 2), (1, 4)] {
            let space = ConfigSpace {
                pattern: PatternKind::FullyParallel,
                device: nvidia_like(),
                elem_bytes: elem,
            };
            assert!(enumerate_space(&space).iter().all(|cfg| cfg.c == want_c));
        }
    }

    /// Deterministic fake kernel with a planted unimodal surface.
    struct PlantedKernel {
        peak: (u64, u64, u64),
    }

    impl PlantedKernel {
        fn score(&self, cfg: &LaunchConfig) -> f64 {
            let d = |a: u64, b: u64| (a.max(1).ilog2() as f64 - b.max(1).ilog2() as f64).abs();
            1000.0
                - 10.0 * d(cfg.l, self.peak.0)
                - 100.0 * d(cfg.s, self.peak.1)
                - 50.0 * d(cfg.c, self.peak.2)
        }
    }

    impl BenchKernel for PlantedKernel {
        fn bytes_per_run(&self) -> u64 {
            1_000_000
        }

        fn run(&self, cfg: &LaunchConfig, _dev: &VirtualDevice) -> Result<(), PatternError> {
            // spin long enough that the planted surface dominates timing noise
            let target = 4e-4 * 1000.0 / self.score(cfg);
            let start = Instant::now();
            while start.elapsed().as_secs_f64() < target {
                std::hint::black_box(0u64);
            }
            Ok(())
        }
    }

    #[test]
    fn pruned_search_finds_planted_optimum() {
        let space = ConfigSpace {
            pattern: PatternKind::GroupParallel,
            device: nvidia_like(),
            elem_bytes: 8,
        };
        let kernel = PlantedKernel {
            peak: (64, 128, 16),
        };
        let bf = brute_force_search(&kernel, &space, 3).unwrap();
        let pruned = pruned_search(&kernel, &space, 3).unwrap();
        assert_eq!(bf.best_config.s, 128);
        assert_eq!(bf.best_config.c, 16);
        assert_eq!(pruned.best_config, bf.best_config);
        assert!(pruned.evaluations < bf.evaluations);
        assert!(pruned.evaluations <= 12);
    }

    #[test]
    fn singleton_space_evaluates_once() {
        let space = ConfigSpace {
            pattern: PatternKind::NonParallel,
            device: nvidia_like(),
            elem_bytes: 1,
        };
        let kernel = AnsChunkBench::generate(64 * 1024, 3);
        let report = brute_force_search(&kernel, &space, 3).unwrap();
        assert_eq!(report.evaluations, 11);
        assert!(report.trace.iter().all(|t| t.metric <= report.best_metric));
        let pruned = pruned_search(&kernel, &space, 3).unwrap();
        assert!(pruned.evaluations <= 7);
    }

    #[test]
    fn cross_device_diagonal_is_one() {
        let kernel = BitUnpackBench::generate(200_000, 13, 1);
        let entries = vec![
            (
                "warp32".to_string(),
                nvidia_like(),
                LaunchConfig::fully_parallel(4, 256, 1),
            ),
            (
                "warp64".to_string(),
                amd_like(),
                LaunchConfig::fully_parallel(2, 512, 1),
            ),
        ];
        let report = cross_device_report(&entries, &kernel, 3).unwrap();
        assert_eq!(report.efficiency[0][0], 1.0);
        assert_eq!(report.efficiency[1][1], 1.0);
        assert_eq!(report.efficiency.len(), 2);
    }

    #[test]
    fn shared_configs_do_not_beat_tuned_native_ones_by_much() {
        let kernel = BitUnpackBench::generate(800_000, 21, 2);
        let devices = [
            ("warp32".to_string(), VirtualDevice::new(32, 64, 4)),
            ("warp64".to_string(), VirtualDevice::new(64, 64, 4)),
        ];
        let mut entries = Vec::new();
        for (name, device) in devices {
            let space = ConfigSpace {
                pattern: PatternKind::FullyParallel,
                device,
                elem_bytes: 8,
            };
            let native = pruned_search(&kernel, &space, 5).unwrap().best_config;
            entries.push((name, device, native));
        }
        let report = cross_device_report(&entries, &kernel, 5).unwrap();
        for (i, row) in report.efficiency.iter().enumerate() {
            for (j, &eff) in row.iter().enumerate() {
                assert!(
                    eff <= 1.35,
                    "shared config [{i}][{j}] at {eff:.2}x beat the tuned native config"
                );
            }
        }
    }
}
