//! Two-stage transfer/decompress pipelining: Johnson's rule ordering, an
//! exact flow-shop simulator, and a real overlapped executor with a
//! rate-throttled link emulation.

use crate::datamodel::{serialize_artifact, CompressedArtifact, ElementType, TypedColumn};
use crate::nesting::{decode_artifact, ExecOptions, PipelineError};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// One column's pipelining costs: stage 1 is the link transfer, stage 2 the
/// decompression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferJob {
    pub id: String,
    pub transfer_cost: f64,
    pub decompress_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobTimeline {
    pub id: String,
    pub transfer_start: f64,
    pub transfer_end: f64,
    pub decompress_start: f64,
    pub decompress_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleResult {
    pub order: Vec<String>,
    pub makespan: f64,
    pub timeline: Vec<JobTimeline>,
}

/// Makespan-optimal two-machine flow-shop order: jobs whose transfer is no
/// slower than their decompression go first, ascending by transfer cost; the
/// rest follow, descending by decompress cost. Ties break by ascending id so
/// schedules are deterministic. Returns indices into `jobs`.
pub fn johnson_order(jobs: &[TransferJob]) -> Vec<usize> {
    let mut first: Vec<usize> = (0..jobs.len())
        .filter(|&i| jobs[i].transfer_cost <= jobs[i].decompress_cost)
        .collect();
    first.sort_by(|&a, &b| {
        jobs[a]
            .transfer_cost
            .total_cmp(&jobs[b].transfer_cost)
            .then_with(|| jobs[a].id.cmp(&jobs[b].id))
    });
    let mut second: Vec<usize> = (0..jobs.len())
        .filter(|&i| jobs[i].transfer_cost > jobs[i].decompress_cost)
        .collect();
    second.sort_by(|&a, &b| {
        jobs[b]
            .decompress_cost
            .total_cmp(&jobs[a].decompress_cost)
            .then_with(|| jobs[a].id.cmp(&jobs[b].id))
    });
    first.extend(second);
    first
}

/// Classic two-machine flow shop: one serial transfer engine, one serial
/// decompress engine that takes a job once its transfer is done and the
/// engine is free. Makespan is the last decompress end.
pub fn simulate_pipeline(jobs: &[TransferJob], order: &[usize]) -> ScheduleResult {
    assert_eq!(order.len(), jobs.len(), "order must be a permutation");
    let mut transfer_free = 0.0f64;
    let mut decompress_free = 0.0f64;
    let mut timeline = Vec::with_capacity(order.len());
    for &idx in order {
        let job = &jobs[idx];
        let transfer_start = transfer_free;
        let transfer_end = transfer_start + job.transfer_cost;
        transfer_free = transfer_end;
        let decompress_start = transfer_end.max(decompress_free);
        let decompress_end = decompress_start + job.decompress_cost;
        decompress_free = decompress_end;
        timeline.push(JobTimeline {
            id: job.id.clone(),
            transfer_start,
            transfer_end,
            decompress_start,
            decompress_end,
        });
    }
    let makespan = timeline.last().map_or(0.0, |t| t.decompress_end);
    ScheduleResult {
        order: order.iter().map(|&i| jobs[i].id.clone()).collect(),
        makespan,
        timeline,
    }
}

/// Estimated plain byte size of an artifact without decoding it. Exact for
/// fixed-width columns; VarBytes columns are estimated from the root codec's
/// own bookkeeping.
pub fn plain_size_estimate(artifact: &CompressedArtifact) -> u64 {
    match artifact.original_type {
        ElementType::Int64 | ElementType::Float64 => artifact.original_count * 8,
        ElementType::FixedBytes(w) => artifact.original_count * w as u64,
        ElementType::VarBytes => {
            use crate::datamodel::CodecParams;
            match &artifact.root.params {
                // framed image holds offsets + payload verbatim
                CodecParams::Raw => artifact.streams[0].bytes.len() as u64,
                CodecParams::Ans { plain_len, .. } => *plain_len,
                CodecParams::StrDict {
                    token_count,
                    occurrence_count,
                    ..
                } => {
                    let offsets_bytes = (artifact.original_count + 1) * 8;
                    // average token length from a raw dictionary blob child
                    let avg = match (&artifact.root.children[0].params, artifact.streams.first()) {
                        (CodecParams::Raw, Some(blob)) => {
                            crate::codecs::decode_token_blob(&blob.bytes)
                                .ok()
                                .and_then(|(offs, _, _)| {
                                    offs.last()
                                        .map(|&total| total as f64 / (*token_count).max(1) as f64)
                                })
                                .unwrap_or(8.0)
                        }
                        _ => 8.0,
                    };
                    offsets_bytes + (*occurrence_count as f64 * avg) as u64
                }
                _ => artifact.original_count * 8,
            }
        }
    }
}

/// Builds a job from an artifact and link/decode rates (bytes per second).
pub fn estimate_job(
    id: &str,
    artifact: &CompressedArtifact,
    link_bandwidth: f64,
    measured_decode_rate: f64,
) -> TransferJob {
    assert!(link_bandwidth > 0.0 && measured_decode_rate > 0.0);
    TransferJob {
        id: id.to_string(),
        transfer_cost: artifact.compressed_size() as f64 / link_bandwidth,
        decompress_cost: plain_size_estimate(artifact) as f64 / measured_decode_rate,
    }
}

/// A job with its payload, for the real overlapped executor.
pub struct PipelineJob {
    pub id: String,
    pub artifact: CompressedArtifact,
}

/// Copies `bytes` into a fresh buffer, pacing the copy so the effective rate
/// does not exceed `bandwidth` bytes/sec.
fn throttled_copy(bytes: &[u8], bandwidth: f64) -> Vec<u8> {
    const CHUNK: usize = 64 * 1024;
    let start = Instant::now();
    let mut staged = Vec::with_capacity(bytes.len());
    for chunk in bytes.chunks(CHUNK) {
        staged.extend_from_slice(chunk);
        let target = staged.len() as f64 / bandwidth;
        let elapsed = start.elapsed().as_secs_f64();
        if target > elapsed {
            std::thread::sleep(Duration::from_secs_f64(target - elapsed));
        }
    }
    staged
}

/// Runs transfer (stage 1, throttled to `link_bandwidth`) and decode
/// (stage 2) concurrently with job granularity, in the given order. Returns
/// the decoded columns in `jobs` order plus the measured wall-clock makespan
/// in seconds. Outputs are bit-identical to a plain sequential decode.
pub fn run_overlapped(
    jobs: &[PipelineJob],
    order: &[usize],
    link_bandwidth: f64,
    opts: &ExecOptions,
) -> Result<(Vec<TypedColumn>, f64), PipelineError> {
    assert_eq!(order.len(), jobs.len(), "order must be a permutation");
    assert!(link_bandwidth > 0.0);
    // serialize up front: the wire bytes are what the link carries
    let wires: Vec<Vec<u8>> = jobs
        .iter()
        .map(|j| serialize_artifact(&j.artifact))
        .collect();
    let mut decoded: Vec<Option<TypedColumn>> = (0..jobs.len()).map(|_| None).collect();
    let (tx, rx) = std::sync::mpsc::sync_channel::<(usize, Vec<u8>)>(jobs.len());
    let start = Instant::now();
    let makespan = std::thread::scope(|scope| -> Result<f64, PipelineError> {
        let wires_ref = &wires;
        scope.spawn(move || {
            for &idx in order {
                let staged = throttled_copy(&wires_ref[idx], link_bandwidth);
                if tx.send((idx, staged)).is_err() {
                    break;
                }
            }
        });
        for _ in 0..jobs.len() {
            let (idx, staged) = rx
                .recv()
                .map_err(|_| PipelineError::MalformedArtifact("transfer stage aborted"))?;
            let artifact = crate::datamodel::deserialize_artifact(&staged)
                .map_err(|_| PipelineError::MalformedArtifact("staged artifact corrupt"))?;
            let column = decode_artifact(&artifact, opts, true)?;
            decoded[idx] = Some(column);
        }
        Ok(start.elapsed().as_secs_f64())
    })?;
    Ok((decoded.into_iter().map(Option::unwrap).collect(), makespan))
}
