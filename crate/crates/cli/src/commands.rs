//! Implementations of the CLI subcommands.

use crate::io::{read_artifact, read_column, write_artifact, write_column, CliError};
use patternpress::codecs::rle_encode;
use patternpress::datagen::{
    gen_rle_groups, gen_skewed_symbols, gen_tpch_like, gen_uniform_bits, RunDist, TpchColumnKind,
};
use patternpress::datamodel::{CodecNode, CodecParams, ElementType, TypedColumn};
use patternpress::nesting::{
    compile_decode, compile_encode, decode_artifact, fuse, parse_pipeline, pipeline_of_tree,
    render_pipeline, traffic_model, ExecOptions,
};
use patternpress::pattern::{throughput_bound, LaunchConfig, PatternKind, VirtualDevice};
use patternpress::scheduler::{
    johnson_order, run_overlapped, simulate_pipeline, PipelineJob, ScheduleResult, TransferJob,
};
use patternpress::tuner::{
    brute_force_search, pruned_search, AnsChunkBench, BenchKernel, BitUnpackBench, ConfigSpace,
    RleExpandBench, SearchReport,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Virtual device used by all commands; PATTERNPRESS_WORKERS overrides the
/// worker count.
pub fn device() -> VirtualDevice {
    let mut dev = VirtualDevice::host_warp32();
    if let Ok(value) = std::env::var("PATTERNPRESS_WORKERS") {
        if let Ok(n) = value.parse::<u32>() {
            if n >= 1 {
                dev.worker_count = n;
            }
        }
    }
    dev
}

fn exec_options(config: Option<&str>, device: VirtualDevice) -> Result<ExecOptions, CliError> {
    let mut opts = ExecOptions {
        device,
        ..ExecOptions::default()
    };
    if let Some(text) = config {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "--config expects \"L,S,C\", got \"{text}\""
            )));
        }
        let mut nums = [0u64; 3];
        for (i, p) in parts.iter().enumerate() {
            nums[i] = p.parse().map_err(|_| {
                CliError::Usage(format!("--config component \"{p}\" is not a number"))
            })?;
        }
        let (l, s, c) = (nums[0], nums[1], nums[2]);
        opts.fp = Some(LaunchConfig::fully_parallel(l, s, c));
        opts.gp = Some(LaunchConfig::group_parallel(l, s, c));
        opts.np = Some(LaunchConfig::non_parallel(s, c));
    }
    Ok(opts)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

pub fn parse_run_dist(text: &str) -> Result<RunDist, CliError> {
    let bad = |m: String| CliError::Usage(m);
    if let Some(rest) = text.strip_prefix("mixed:") {
        let (a, b) = rest.split_once('+').ok_or_else(|| {
            bad(format!(
                "mixed dist needs two parts joined by '+': \"{text}\""
            ))
        })?;
        return Ok(RunDist::Mixed(
            Box::new(parse_run_dist(a)?),
            Box::new(parse_run_dist(b)?),
        ));
    }
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["even", x] => Ok(RunDist::EvenX(
            x.parse()
                .map_err(|_| bad(format!("bad even length \"{x}\"")))?,
        )),
        ["random", lo, hi] => Ok(RunDist::RandomRange(
            lo.parse()
                .map_err(|_| bad(format!("bad range low \"{lo}\"")))?,
            hi.parse()
                .map_err(|_| bad(format!("bad range high \"{hi}\"")))?,
        )),
        ["outlier", big, frac] => Ok(RunDist::Outlier {
            big: big
                .parse()
                .map_err(|_| bad(format!("bad outlier size \"{big}\"")))?,
            frac: frac
                .parse()
                .map_err(|_| bad(format!("bad outlier fraction \"{frac}\"")))?,
        }),
        _ => Err(bad(format!(
            "unknown dist \"{text}\" (even:X, random:LO:HI, outlier:BIG:FRAC, mixed:A+B)"
        ))),
    }
}

fn expected_run_len(dist: &RunDist) -> f64 {
    match dist {
        RunDist::EvenX(x) => *x as f64,
        RunDist::RandomRange(lo, hi) => (*lo + *hi) as f64 / 2.0,
        RunDist::Outlier { big, frac } => 1.0 * (1.0 - frac) + *big as f64 * frac,
        RunDist::Mixed(a, b) => (expected_run_len(a) + expected_run_len(b)) / 2.0,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_gen(
    kind: &str,
    rows: usize,
    seed: u64,
    bits: u8,
    dist: &str,
    ratios: &str,
    out: &Path,
) -> Result<(), CliError> {
    let col = match kind {
        "uniform" => gen_uniform_bits(rows, bits, seed),
        "rle" => {
            let dist = parse_run_dist(dist)?;
            let groups = ((rows as f64 / expected_run_len(&dist)).round() as usize).max(1);
            gen_rle_groups(groups, &dist, seed)
        }
        "skewed" => {
            let parsed: Result<Vec<f64>, _> =
                ratios.split(',').map(|r| r.trim().parse::<f64>()).collect();
            let parsed =
                parsed.map_err(|_| CliError::Usage(format!("bad --ratios list \"{ratios}\"")))?;
            let total: f64 = parsed.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CliError::Usage(format!(
                    "--ratios must sum to 1, got {total}"
                )));
            }
            gen_skewed_symbols(rows, &parsed, seed)
        }
        "orderkey" => gen_tpch_like(TpchColumnKind::OrderKeyLike, rows, seed),
        "date" => gen_tpch_like(TpchColumnKind::DateLike, rows, seed),
        "decimal" => gen_tpch_like(TpchColumnKind::DecimalLike, rows, seed),
        "comment" => gen_tpch_like(TpchColumnKind::CommentLike, rows, seed),
        "fk" => gen_tpch_like(TpchColumnKind::FkLike, rows, seed),
        other => return Err(CliError::Usage(format!(
            "unknown kind \"{other}\" (uniform, rle, skewed, orderkey, date, decimal, comment, fk)"
        ))),
    };
    write_column(out, &col)?;
    println!(
        "wrote {} ({} rows, {} plain bytes) + sidecar",
        out.display(),
        col.count(),
        col.plain_size()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// compress / decompress / verify
// ---------------------------------------------------------------------------

pub fn cmd_compress(input: &Path, pipeline: &str, out: &Path) -> Result<(), CliError> {
    let col = read_column(input)?;
    let spec = parse_pipeline(pipeline)?;
    let artifact = compile_encode(&spec, &col)?;
    write_artifact(out, &artifact)?;
    let compressed = artifact.compressed_size();
    let plain = col.plain_size();
    println!(
        "{} -> {}: {} -> {} bytes (ratio {:.3})",
        input.display(),
        out.display(),
        plain,
        compressed,
        plain as f64 / compressed as f64
    );
    Ok(())
}

pub fn cmd_decompress(
    input: &Path,
    out: &Path,
    config: Option<&str>,
    fused: bool,
) -> Result<(), CliError> {
    let artifact = read_artifact(input)?;
    let opts = exec_options(config, device())?;
    let col = decode_artifact(&artifact, &opts, fused)?;
    write_column(out, &col)?;
    println!(
        "decoded {} rows ({} plain bytes) into {}",
        col.count(),
        col.plain_size(),
        out.display()
    );
    Ok(())
}

pub fn cmd_verify(plain: &Path, compressed: &Path) -> Result<(), CliError> {
    let col = read_column(plain)?;
    let artifact = read_artifact(compressed)?;
    let decoded = decode_artifact(&artifact, &ExecOptions::default(), true)?;
    if decoded != col {
        return Err(CliError::Integrity(format!(
            "decoded column does not match {}",
            plain.display()
        )));
    }
    println!("ok: {} matches {}", compressed.display(), plain.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BenchSide {
    median_seconds: f64,
    throughput_bytes_per_sec: f64,
}

#[derive(Serialize)]
struct BenchConfigEntry {
    pattern: PatternKind,
    l: u64,
    s: u64,
    c: u64,
    median_seconds: f64,
    throughput_bytes_per_sec: f64,
}

#[derive(Serialize)]
struct BenchReport {
    schema: &'static str,
    input: String,
    compressed_bytes: u64,
    plain_bytes: u64,
    compression_ratio: f64,
    reps: usize,
    fused: BenchSide,
    unfused: BenchSide,
    traffic: patternpress::nesting::TrafficEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_bytes_per_sec: Option<f64>,
    configs: Vec<BenchConfigEntry>,
}

fn median_decode_seconds(
    artifact: &patternpress::datamodel::CompressedArtifact,
    opts: &ExecOptions,
    fused: bool,
    reps: usize,
) -> Result<f64, CliError> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let _ = decode_artifact(artifact, opts, fused)?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2].max(1e-9))
}

pub fn cmd_bench(
    input: &Path,
    reps: usize,
    bandwidth: Option<f64>,
    json: bool,
) -> Result<(), CliError> {
    let artifact = read_artifact(input)?;
    let dev = device();
    let opts = ExecOptions {
        device: dev,
        ..ExecOptions::default()
    };
    let plain_bytes = decode_artifact(&artifact, &opts, true)?.plain_size() as u64;
    let compressed_bytes = artifact.compressed_size() as u64;
    let reps = reps.max(3);

    let fused_s = median_decode_seconds(&artifact, &opts, true, reps)?;
    let unfused_s = median_decode_seconds(&artifact, &opts, false, reps)?;
    let plan = compile_decode(&artifact)?;
    let traffic = traffic_model(&plan, compressed_bytes, plain_bytes);

    let mut configs = Vec::new();
    for (l, s, c) in [(1, 32, 1), (4, 256, 1), (16, 1024, 1)] {
        let cfg = LaunchConfig::fully_parallel(l, s, c);
        let cfg_opts = ExecOptions {
            device: dev,
            fp: Some(cfg),
            ..ExecOptions::default()
        };
        let t = median_decode_seconds(&artifact, &cfg_opts, true, reps)?;
        configs.push(BenchConfigEntry {
            pattern: cfg.pattern,
            l: cfg.l,
            s: cfg.s,
            c: cfg.c,
            median_seconds: t,
            throughput_bytes_per_sec: plain_bytes as f64 / t,
        });
    }

    let report = BenchReport {
        schema: "patternpress.bench/1",
        input: input.display().to_string(),
        compressed_bytes,
        plain_bytes,
        compression_ratio: plain_bytes as f64 / compressed_bytes as f64,
        reps,
        fused: BenchSide {
            median_seconds: fused_s,
            throughput_bytes_per_sec: plain_bytes as f64 / fused_s,
        },
        unfused: BenchSide {
            median_seconds: unfused_s,
            throughput_bytes_per_sec: plain_bytes as f64 / unfused_s,
        },
        traffic,
        bound_bytes_per_sec: bandwidth
            .map(|bw| throughput_bound(bw, compressed_bytes as f64, plain_bytes as f64)),
        configs,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{}: {} -> {} bytes (ratio {:.3})",
            report.input, report.plain_bytes, report.compressed_bytes, report.compression_ratio
        );
        println!(
            "fused:   {:>10.3} MB/s ({:.6}s median of {})",
            report.fused.throughput_bytes_per_sec / 1e6,
            report.fused.median_seconds,
            reps
        );
        println!(
            "unfused: {:>10.3} MB/s ({:.6}s median of {})",
            report.unfused.throughput_bytes_per_sec / 1e6,
            report.unfused.median_seconds,
            reps
        );
        println!(
            "traffic model: fused {} B, unfused {} B, ratio {:.3}",
            report.traffic.fused_bytes, report.traffic.unfused_bytes, report.traffic.ratio
        );
        if let Some(bound) = report.bound_bytes_per_sec {
            println!("memory-bound throughput ceiling: {:.3} MB/s", bound / 1e6);
        }
        for entry in &report.configs {
            println!(
                "config <{},{},{}>: {:.3} MB/s",
                entry.l,
                entry.s,
                entry.c,
                entry.throughput_bytes_per_sec / 1e6
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TuneReport {
    schema: &'static str,
    pattern: PatternKind,
    mode: String,
    #[serde(flatten)]
    report: SearchReport,
}

pub fn cmd_tune(input: &Path, pattern: &str, mode: &str, reps: usize) -> Result<(), CliError> {
    let artifact = read_artifact(input)?;
    let dev = device();
    let col = decode_artifact(
        &artifact,
        &ExecOptions {
            device: dev,
            ..ExecOptions::default()
        },
        true,
    )?;
    let reps = reps.max(3);
    let as_i64 = |col: &TypedColumn| -> Result<Vec<i64>, CliError> {
        col.as_i64().ok_or_else(|| {
            CliError::Data(format!(
                "pattern \"{pattern}\" benchmarks need an Int64 column"
            ))
        })
    };
    let (kernel, space): (Box<dyn BenchKernel>, ConfigSpace) = match pattern {
        "fp" => {
            let values = as_i64(&col)?;
            (
                Box::new(BitUnpackBench::from_values(&values)),
                ConfigSpace {
                    pattern: PatternKind::FullyParallel,
                    device: dev,
                    elem_bytes: 8,
                },
            )
        }
        "gp" => {
            let values = as_i64(&col)?;
            let (run_values, run_counts) = rle_encode(&values);
            let counts: Vec<u64> = run_counts.iter().map(|&c| c as u64).collect();
            (
                Box::new(RleExpandBench::from_runs(run_values, &counts)),
                ConfigSpace {
                    pattern: PatternKind::GroupParallel,
                    device: dev,
                    elem_bytes: 8,
                },
            )
        }
        "np" => (
            Box::new(AnsChunkBench::from_bytes(col.payload())),
            ConfigSpace {
                pattern: PatternKind::NonParallel,
                device: dev,
                elem_bytes: 1,
            },
        ),
        other => {
            return Err(CliError::Usage(format!(
                "unknown pattern \"{other}\" (fp, gp, np)"
            )))
        }
    };
    let report = match mode {
        "bf" => brute_force_search(kernel.as_ref(), &space, reps),
        "pruned" => pruned_search(kernel.as_ref(), &space, reps),
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode \"{other}\" (bf, pruned)"
            )))
        }
    }
    .map_err(|e| CliError::Data(e.to_string()))?;
    let wrapped = TuneReport {
        schema: "patternpress.tune/1",
        pattern: space.pattern,
        mode: mode.to_string(),
        report,
    };
    println!("{}", serde_json::to_string_pretty(&wrapped)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// schedule
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct JobLine {
    id: String,
    transfer_cost: f64,
    decompress_cost: f64,
    #[serde(default)]
    artifact: Option<String>,
}

#[derive(Serialize)]
struct ScheduleReport {
    schema: &'static str,
    mode: String,
    #[serde(flatten)]
    result: ScheduleResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    measured_makespan_seconds: Option<f64>,
}

fn brute_force_order(jobs: &[TransferJob]) -> Vec<usize> {
    fn permute(
        rest: &mut Vec<usize>,
        chosen: &mut Vec<usize>,
        jobs: &[TransferJob],
        best: &mut (f64, Vec<usize>),
    ) {
        if rest.is_empty() {
            let makespan = simulate_pipeline(jobs, chosen).makespan;
            if makespan < best.0 {
                *best = (makespan, chosen.clone());
            }
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            chosen.push(v);
            permute(rest, chosen, jobs, best);
            chosen.pop();
            rest.insert(i, v);
        }
    }
    let mut best = (f64::INFINITY, (0..jobs.len()).collect());
    permute(
        &mut (0..jobs.len()).collect(),
        &mut Vec::new(),
        jobs,
        &mut best,
    );
    best.1
}

pub fn cmd_schedule(
    jobs_path: &Path,
    mode: &str,
    run: bool,
    bandwidth: f64,
    json: bool,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(jobs_path)?;
    let mut jobs = Vec::new();
    let mut artifacts: Vec<Option<String>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JobLine = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", jobs_path.display(), lineno + 1)))?;
        jobs.push(TransferJob {
            id: parsed.id,
            transfer_cost: parsed.transfer_cost,
            decompress_cost: parsed.decompress_cost,
        });
        artifacts.push(parsed.artifact);
    }
    if jobs.is_empty() {
        return Err(CliError::Data("no jobs in file".into()));
    }
    let order = match mode {
        "johnson" => johnson_order(&jobs),
        "given" => (0..jobs.len()).collect(),
        "bruteforce" => {
            if jobs.len() > 9 {
                return Err(CliError::Usage(
                    "bruteforce mode is limited to 9 jobs".into(),
                ));
            }
            brute_force_order(&jobs)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode \"{other}\" (johnson, given, bruteforce)"
            )))
        }
    };
    let result = simulate_pipeline(&jobs, &order);
    let measured = if run {
        let base = jobs_path.parent().unwrap_or(Path::new("."));
        let mut pipeline_jobs = Vec::with_capacity(jobs.len());
        for (i, artifact_path) in artifacts.iter().enumerate() {
            let rel = artifact_path.as_ref().ok_or_else(|| {
                CliError::Usage(format!(
                    "--run needs an \"artifact\" path for job {}",
                    jobs[i].id
                ))
            })?;
            let full: PathBuf = if Path::new(rel).is_absolute() {
                rel.into()
            } else {
                base.join(rel)
            };
            pipeline_jobs.push(PipelineJob {
                id: jobs[i].id.clone(),
                artifact: read_artifact(&full)?,
            });
        }
        let (_, makespan) = run_overlapped(
            &pipeline_jobs,
            &order,
            bandwidth,
            &ExecOptions {
                device: device(),
                ..ExecOptions::default()
            },
        )?;
        Some(makespan)
    } else {
        None
    };
    let report = ScheduleReport {
        schema: "patternpress.schedule/1",
        mode: mode.to_string(),
        result,
        measured_makespan_seconds: measured,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("order: {}", report.result.order.join(" -> "));
        println!("simulated makespan: {:.6}", report.result.makespan);
        for t in &report.result.timeline {
            println!(
                "  {:<12} transfer [{:.4}, {:.4})  decompress [{:.4}, {:.4})",
                t.id, t.transfer_start, t.transfer_end, t.decompress_start, t.decompress_end
            );
        }
        if let Some(m) = report.measured_makespan_seconds {
            println!("measured makespan: {m:.6}s");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

fn params_summary(params: &CodecParams) -> String {
    match params {
        CodecParams::BitPack {
            bit_width,
            for_base,
            count,
        } => format!("width={bit_width}, base={for_base}, count={count}"),
        CodecParams::Delta { base, count } => format!("base={base}, count={count}"),
        CodecParams::Rle { run_count, total } => format!("runs={run_count}, total={total}"),
        CodecParams::DeltaStride { run_count, total } => {
            format!("runs={run_count}, total={total}")
        }
        CodecParams::Dict {
            entry_type,
            entry_count,
            index_count,
        } => format!("entries={entry_count} ({entry_type:?}), indices={index_count}"),
        CodecParams::Float2Int {
            decimal_scale,
            count,
        } => format!("scale=10^{decimal_scale}, count={count}"),
        CodecParams::StrDict {
            token_count,
            occurrence_count,
            string_count,
        } => {
            format!("tokens={token_count}, occurrences={occurrence_count}, strings={string_count}")
        }
        CodecParams::Ans {
            chunk_size,
            table_log,
            plain_len,
            chunk_offsets,
            ..
        } => format!(
            "chunk={chunk_size}, table_log={table_log}, plain={plain_len}, chunks={}",
            chunk_offsets.len().saturating_sub(1)
        ),
        CodecParams::Raw => String::new(),
    }
}

fn print_tree(
    node: &CodecNode,
    indent: usize,
    stream_idx: &mut usize,
    artifact: &patternpress::datamodel::CompressedArtifact,
) {
    let pad = "  ".repeat(indent);
    if node.codec_id() == patternpress::datamodel::CodecId::Raw {
        let stream = &artifact.streams[*stream_idx];
        println!("{pad}Raw [{:?}, {} bytes]", stream.role, stream.bytes.len());
        *stream_idx += 1;
        return;
    }
    println!(
        "{pad}{:?} ({})",
        node.codec_id(),
        params_summary(&node.params)
    );
    for child in &node.children {
        print_tree(child, indent + 1, stream_idx, artifact);
    }
}

pub fn cmd_inspect(input: &Path) -> Result<(), CliError> {
    let artifact = read_artifact(input)?;
    let type_name = match artifact.original_type {
        ElementType::Int64 => "int64".to_string(),
        ElementType::Float64 => "float64".to_string(),
        ElementType::FixedBytes(w) => format!("fixed:{w}"),
        ElementType::VarBytes => "varbytes".to_string(),
    };
    println!("{}", input.display());
    println!(
        "  type {}  rows {}  checksum {:#018x}",
        type_name, artifact.original_count, artifact.checksum
    );
    println!(
        "  compressed {} bytes in {} streams",
        artifact.compressed_size(),
        artifact.streams.len()
    );
    println!(
        "  pipeline: {}",
        render_pipeline(&pipeline_of_tree(&artifact.root))
    );
    let mut stream_idx = 0;
    print_tree(&artifact.root, 1, &mut stream_idx, &artifact);
    // fused plan shape
    let plan = fuse(compile_decode(&artifact)?);
    println!("  fused decode plan: {} steps", plan.steps.len());
    Ok(())
}
