//! Pure index-mapping math for the three patterns.
//!
//! These functions define which output elements a given (block, lane,
//! iteration) coordinate owns. The partition properties — every element,
//! (group, item) pair, and chunk covered exactly once — are what make the
//! engine's concurrent writes sound.

use super::{LaunchConfig, PatternError, PatternKind};
use std::ops::Range;

/// Number of blocks a Fully-Parallel launch issues for `n_out` elements.
pub fn fp_grid_blocks(n_out: u64, cfg: &LaunchConfig) -> u64 {
    let tile = cfg.l * cfg.s * cfg.c;
    n_out.div_ceil(tile)
}

/// The half-open output range owned by (block, thread, iter), clamped to
/// `n_out`. A block owns the tile `[block*L*S*C, (block+1)*L*S*C)`; within
/// it, iteration `iter` advances by `S*C` and each thread owns `C`
/// contiguous elements.
pub fn fp_index_range(
    block: u64,
    thread: u64,
    iter: u64,
    cfg: &LaunchConfig,
    n_out: u64,
) -> Result<Range<u64>, PatternError> {
    debug_assert_eq!(cfg.pattern, PatternKind::FullyParallel);
    if thread >= cfg.s {
        return Err(PatternError::OutOfGeometry {
            coordinate: "thread",
            value: thread,
            limit: cfg.s,
        });
    }
    if iter >= cfg.l {
        return Err(PatternError::OutOfGeometry {
            coordinate: "iter",
            value: iter,
            limit: cfg.l,
        });
    }
    let start = block * (cfg.l * cfg.s * cfg.c) + iter * (cfg.s * cfg.c) + thread * cfg.c;
    let end = (start + cfg.c).min(n_out);
    Ok(start.min(n_out)..end)
}

/// How many groups one horizontal iteration advances: `L*S/C`.
pub fn gp_group_stride(cfg: &LaunchConfig) -> u64 {
    (cfg.l * cfg.s) / cfg.c
}

/// Maps (block, thread, h_iter) to the (group, lane) it serves.
///
/// When `C >= S`, `C/S` blocks cooperate on one group and the lane id
/// interleaves block-major. When `S > C`, one block spans `S/C` groups in
/// lockstep. The returned group id is unbounded; callers skip ids at or
/// beyond their group count. Lanes then stride over the group's items with
/// step `C`.
pub fn gp_assignment(
    block: u64,
    thread: u64,
    h_iter: u64,
    cfg: &LaunchConfig,
) -> Result<(u64, u64), PatternError> {
    debug_assert_eq!(cfg.pattern, PatternKind::GroupParallel);
    if block >= cfg.l {
        return Err(PatternError::OutOfGeometry {
            coordinate: "block",
            value: block,
            limit: cfg.l,
        });
    }
    if thread >= cfg.s {
        return Err(PatternError::OutOfGeometry {
            coordinate: "thread",
            value: thread,
            limit: cfg.s,
        });
    }
    let stride = gp_group_stride(cfg);
    if cfg.c >= cfg.s {
        let blocks_per_group = cfg.c / cfg.s;
        let base_group = block / blocks_per_group;
        let group = base_group + h_iter * stride;
        let lane = (block % blocks_per_group) * cfg.s + thread;
        Ok((group, lane))
    } else {
        let groups_per_block = cfg.s / cfg.c;
        let group = block * groups_per_block + thread / cfg.c + h_iter * stride;
        let lane = thread % cfg.c;
        Ok((group, lane))
    }
}

/// Chunk id owned by (block, lane) in a Non-Parallel launch: one chunk per
/// lane, `S*C` lanes per block.
pub fn np_chunk_id(block: u64, lane: u64, cfg: &LaunchConfig) -> u64 {
    block * (cfg.s * cfg.c) + lane
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::LaunchConfig;

    #[test]
    fn fp_range_matches_tile_walkthrough() {
        // <L,S,C> = <2,2,4>: tile of 16 elements per block.
        let cfg = LaunchConfig::fully_parallel(2, 2, 4);
        let r = fp_index_range(0, 1, 1, &cfg, 1 << 20).unwrap();
        assert_eq!(r, 12..16);
    }

    #[test]
    fn fp_degenerate_unit_tiles() {
        let cfg = LaunchConfig::fully_parallel(1, 1, 1);
        for k in [0u64, 3, 17, 999] {
            assert_eq!(fp_index_range(k, 0, 0, &cfg, 1000).unwrap(), k..k + 1);
        }
    }

    #[test]
    fn fp_rejects_out_of_geometry_lanes() {
        let cfg = LaunchConfig::fully_parallel(2, 2, 4);
        assert!(fp_index_range(0, 2, 0, &cfg, 100).is_err());
        assert!(fp_index_range(0, 0, 2, &cfg, 100).is_err());
    }

    #[test]
    fn fp_ranges_partition_output() {
        let cfg = LaunchConfig::fully_parallel(2, 32, 2);
        let n_out = 1000u64;
        let mut seen = vec![0u32; n_out as usize];
        for block in 0..fp_grid_blocks(n_out, &cfg) {
            for iter in 0..cfg.l {
                for thread in 0..cfg.s {
                    for i in fp_index_range(block, thread, iter, &cfg, n_out).unwrap() {
                        seen[i as usize] += 1;
                    }
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn gp_fig8_geometry() {
        // <8,4,16>: 4 blocks cooperate per group, stride 2 groups per h_iter.
        let cfg = LaunchConfig::group_parallel(8, 4, 16);
        assert_eq!(gp_group_stride(&cfg), 2);
        let mut lanes = Vec::new();
        for block in 4..8 {
            for thread in 0..4 {
                let (group, lane) = gp_assignment(block, thread, 2, &cfg).unwrap();
                assert_eq!(group, 5);
                lanes.push(lane);
            }
        }
        lanes.sort_unstable();
        assert_eq!(lanes, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn gp_equal_s_and_c_is_one_block_per_group() {
        let cfg = LaunchConfig::group_parallel(4, 32, 32);
        for block in 0..4 {
            for thread in 0..32 {
                let (group, lane) = gp_assignment(block, thread, 0, &cfg).unwrap();
                assert_eq!(group, block);
                assert_eq!(lane, thread);
            }
        }
    }

    #[test]
    fn gp_assignments_cover_every_group_item_once() {
        // Exhaustive coverage for a ragged set of group sizes.
        let cfg = LaunchConfig::group_parallel(8, 4, 16);
        let sizes: Vec<u64> = (0..37).map(|g| (g * 13 + 1) % 40 + 1).collect();
        let n_groups = sizes.len() as u64;
        let stride = gp_group_stride(&cfg);
        let h_iters = n_groups.div_ceil(stride);
        let mut seen: Vec<Vec<u32>> = sizes.iter().map(|&s| vec![0; s as usize]).collect();
        for h in 0..h_iters {
            for block in 0..cfg.l {
                for thread in 0..cfg.s {
                    let (g, lane) = gp_assignment(block, thread, h, &cfg).unwrap();
                    if g >= n_groups {
                        continue;
                    }
                    let mut j = lane;
                    while j < sizes[g as usize] {
                        seen[g as usize][j as usize] += 1;
                        j += cfg.c;
                    }
                }
            }
        }
        for group in seen {
            assert!(group.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn np_chunk_id_arithmetic() {
        // <2,4,2>: 8 lanes per block, 16 chunks across 2 blocks.
        let cfg = LaunchConfig {
            pattern: crate::pattern::PatternKind::NonParallel,
            l: 2,
            s: 4,
            c: 2,
        };
        let mut ids = Vec::new();
        for block in 0..2 {
            for lane in 0..8 {
                ids.push(np_chunk_id(block, lane, &cfg));
            }
        }
        assert_eq!(ids, (0..16).collect::<Vec<_>>());
        assert_eq!(np_chunk_id(1, 3, &cfg), 11);
    }
}
