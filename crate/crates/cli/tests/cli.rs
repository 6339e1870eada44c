//! End-to-end CLI tests: file formats, exit codes, JSON report schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patternpress"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("patternpress-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn gen_is_deterministic_and_sidecar_written() {
    let dir = workdir("gen");
    ok(
        &[
            "gen", "--kind", "rle", "--dist", "even:2", "--rows", "1000", "--seed", "7", "-o",
            "a.bin",
        ],
        &dir,
    );
    ok(
        &[
            "gen", "--kind", "rle", "--dist", "even:2", "--rows", "1000", "--seed", "7", "-o",
            "b.bin",
        ],
        &dir,
    );
    assert_eq!(
        std::fs::read(dir.join("a.bin")).unwrap(),
        std::fs::read(dir.join("b.bin")).unwrap()
    );
    let sidecar: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("a.json")).unwrap()).unwrap();
    assert_eq!(sidecar["schema"], "patternpress.column/1");
    assert_eq!(sidecar["element_type"], "int64");
    assert_eq!(sidecar["count"], 1000);
}

#[test]
fn invalid_dist_is_usage_error() {
    let dir = workdir("baddist");
    let out = run(
        &[
            "gen", "--kind", "rle", "--dist", "nope:1", "--rows", "10", "-o", "x.bin",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn compress_decompress_round_trip_every_table_pipeline() {
    let dir = workdir("roundtrip");
    let cases = [
        ("uniform", "Bit-packing"),
        ("date", "Dictionary encoding | Bit-packing"),
        ("decimal", "Float2Int | Bit-packing"),
        (
            "orderkey",
            "RLE | [DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing], Bit-packing]",
        ),
        (
            "orderkey",
            "DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing]",
        ),
        ("orderkey", "RLE | [DeltaStride, RLE]"),
        (
            "fk",
            "Delta encoding | Dictionary encoding | Bit-packing | Dictionary encoding | Bit-packing",
        ),
        ("rle", "RLE"),
        ("skewed", "ANS"),
        ("comment", "String-dictionary | Bit-packing | ANS"),
    ];
    for (i, (kind, pipeline)) in cases.iter().enumerate() {
        let plain = format!("in{i}.bin");
        let packed = format!("out{i}.zdmv");
        let back = format!("back{i}.bin");
        ok(
            &[
                "gen", "--kind", kind, "--rows", "20000", "--seed", "3", "-o", &plain,
            ],
            &dir,
        );
        ok(
            &["compress", &plain, "--pipeline", pipeline, "-o", &packed],
            &dir,
        );
        ok(&["decompress", &packed, "-o", &back], &dir);
        assert_eq!(
            std::fs::read(dir.join(&plain)).unwrap(),
            std::fs::read(dir.join(&back)).unwrap(),
            "{pipeline} round trip"
        );
        ok(&["verify", &plain, &packed], &dir);
    }
}

#[test]
fn decimal_pipeline_compresses_over_3x() {
    let dir = workdir("ratio");
    ok(
        &[
            "gen", "--kind", "decimal", "--rows", "50000", "--seed", "1", "-o", "d.bin",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "d.bin",
            "--pipeline",
            "Float2Int | Bit-packing",
            "-o",
            "d.zdmv",
        ],
        &dir,
    );
    let plain = std::fs::metadata(dir.join("d.bin")).unwrap().len();
    let packed = std::fs::metadata(dir.join("d.zdmv")).unwrap().len();
    assert!(
        plain as f64 / packed as f64 > 3.0,
        "ratio {} not > 3",
        plain as f64 / packed as f64
    );
}

#[test]
fn config_and_fusion_flags_leave_bytes_unchanged() {
    let dir = workdir("config");
    ok(
        &[
            "gen", "--kind", "date", "--rows", "30000", "--seed", "5", "-o", "d.bin",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "d.bin",
            "--pipeline",
            "Dictionary encoding | Bit-packing",
            "-o",
            "d.zdmv",
        ],
        &dir,
    );
    ok(&["decompress", "d.zdmv", "-o", "ref.bin"], &dir);
    let reference = std::fs::read(dir.join("ref.bin")).unwrap();
    for (i, extra) in [
        vec!["--config", "1,32,1"],
        vec!["--config", "16,1024,1"],
        vec!["--no-fused"],
        vec!["--config", "4,64,2", "--no-fused"],
    ]
    .iter()
    .enumerate()
    {
        let out = format!("v{i}.bin");
        let mut args = vec!["decompress", "d.zdmv", "-o", &out];
        args.extend(extra.iter().copied());
        ok(&args, &dir);
        assert_eq!(std::fs::read(dir.join(&out)).unwrap(), reference);
    }
}

#[test]
fn type_mismatch_is_data_error() {
    let dir = workdir("mismatch");
    ok(
        &[
            "gen", "--kind", "uniform", "--rows", "100", "--seed", "1", "-o", "u.bin",
        ],
        &dir,
    );
    let out = run(
        &[
            "compress",
            "u.bin",
            "--pipeline",
            "Float2Int",
            "-o",
            "u.zdmv",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Float2Int"));
}

#[test]
fn corrupted_artifacts_fail_with_diagnostics() {
    let dir = workdir("corrupt");
    ok(
        &[
            "gen", "--kind", "uniform", "--rows", "5000", "--seed", "2", "-o", "u.bin",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "u.bin",
            "--pipeline",
            "Bit-packing",
            "-o",
            "u.zdmv",
        ],
        &dir,
    );
    let good = std::fs::read(dir.join("u.zdmv")).unwrap();

    // broken magic: data error (3)
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    std::fs::write(dir.join("bad1.zdmv"), &bad_magic).unwrap();
    let out = run(&["decompress", "bad1.zdmv", "-o", "x.bin"], &dir);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    // flipped payload byte: checksum integrity failure (4)
    let mut tampered = good.clone();
    let last = tampered.len() - 1;
    tampered[last] ^= 0xff;
    std::fs::write(dir.join("bad2.zdmv"), &tampered).unwrap();
    let out = run(&["decompress", "bad2.zdmv", "-o", "y.bin"], &dir);
    assert_eq!(out.status.code(), Some(4));

    // verify against the wrong plain file: integrity failure (4)
    ok(
        &[
            "gen",
            "--kind",
            "uniform",
            "--rows",
            "5000",
            "--seed",
            "9",
            "-o",
            "other.bin",
        ],
        &dir,
    );
    let out = run(&["verify", "other.bin", "u.zdmv"], &dir);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bench_json_schema_is_stable() {
    let dir = workdir("bench");
    ok(
        &[
            "gen", "--kind", "date", "--rows", "20000", "--seed", "4", "-o", "d.bin",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "d.bin",
            "--pipeline",
            "Dictionary encoding | Bit-packing",
            "-o",
            "d.zdmv",
        ],
        &dir,
    );
    let out = ok(
        &[
            "bench",
            "d.zdmv",
            "--reps",
            "3",
            "--bandwidth",
            "32000000000",
            "--json",
        ],
        &dir,
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], "patternpress.bench/1");
    for key in [
        "compressed_bytes",
        "plain_bytes",
        "compression_ratio",
        "fused",
        "unfused",
        "traffic",
        "bound_bytes_per_sec",
        "configs",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(
        report["fused"]["throughput_bytes_per_sec"]
            .as_f64()
            .unwrap()
            > 0.0
    );
    assert!(report["traffic"]["ratio"].as_f64().unwrap() >= 1.0);
    // measured throughput stays under the memory-bound ceiling
    assert!(
        report["fused"]["throughput_bytes_per_sec"]
            .as_f64()
            .unwrap()
            <= report["bound_bytes_per_sec"].as_f64().unwrap()
    );
}

#[test]
fn tune_reports_search_within_budget() {
    let dir = workdir("tune");
    ok(
        &[
            "gen", "--kind", "uniform", "--rows", "200000", "--bits", "17", "--seed", "6", "-o",
            "u.bin",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "u.bin",
            "--pipeline",
            "Bit-packing",
            "-o",
            "u.zdmv",
        ],
        &dir,
    );
    let out = ok(
        &[
            "tune",
            "u.zdmv",
            "--pattern",
            "fp",
            "--mode",
            "pruned",
            "--reps",
            "3",
        ],
        &dir,
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], "patternpress.tune/1");
    assert_eq!(report["pattern"], "fully_parallel");
    let evals = report["evaluations"].as_u64().unwrap();
    assert!(evals <= 10, "{evals} evaluations");
    assert!(report["best_metric"].as_f64().unwrap() > 0.0);
    let trace = report["trace"].as_array().unwrap();
    assert_eq!(trace.len() as u64, evals);
}

#[test]
fn schedule_simulates_and_runs_overlapped() {
    let dir = workdir("schedule");
    // the classic two-job instance
    std::fs::write(
        dir.join("jobs.jsonl"),
        r#"{"id":"A","transfer_cost":4.0,"decompress_cost":1.0}
{"id":"B","transfer_cost":1.0,"decompress_cost":4.0}
"#,
    )
    .unwrap();
    let out = ok(
        &["schedule", "jobs.jsonl", "--mode", "johnson", "--json"],
        &dir,
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], "patternpress.schedule/1");
    assert_eq!(report["order"][0], "B");
    assert_eq!(report["order"][1], "A");
    assert_eq!(report["makespan"], 6.0);

    // brute force agrees
    let out = ok(
        &["schedule", "jobs.jsonl", "--mode", "bruteforce", "--json"],
        &dir,
    );
    let bf: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(bf["makespan"], 6.0);

    // real overlapped run with artifact payloads
    ok(
        &[
            "gen", "--kind", "uniform", "--rows", "40000", "--seed", "1", "-o", "a.bin",
        ],
        &dir,
    );
    ok(
        &[
            "gen", "--kind", "skewed", "--rows", "400000", "--seed", "2", "-o", "b.bin",
        ],
        &dir,
    );
    ok(
        &["compress", "a.bin", "--pipeline", "Raw", "-o", "a.zdmv"],
        &dir,
    );
    ok(
        &["compress", "b.bin", "--pipeline", "ANS", "-o", "b.zdmv"],
        &dir,
    );
    std::fs::write(
        dir.join("run.jsonl"),
        r#"{"id":"A","transfer_cost":4.0,"decompress_cost":1.0,"artifact":"a.zdmv"}
{"id":"B","transfer_cost":1.0,"decompress_cost":4.0,"artifact":"b.zdmv"}
"#,
    )
    .unwrap();
    let out = ok(
        &[
            "schedule",
            "run.jsonl",
            "--mode",
            "johnson",
            "--run",
            "--bandwidth",
            "2000000000",
            "--json",
        ],
        &dir,
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["measured_makespan_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn inspect_prints_canonical_pipeline() {
    let dir = workdir("inspect");
    ok(
        &[
            "gen", "--kind", "orderkey", "--rows", "10000", "--seed", "8", "-o", "k.bin",
        ],
        &dir,
    );
    let pipeline = "DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing]";
    ok(
        &["compress", "k.bin", "--pipeline", pipeline, "-o", "k.zdmv"],
        &dir,
    );
    let out = ok(&["inspect", "k.zdmv"], &dir);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(pipeline), "inspect output:\n{text}");
    assert!(text.contains("rows 10000"));
}

#[test]
fn identical_inputs_are_idempotent() {
    let dir = workdir("idempotent");
    ok(
        &[
            "gen", "--kind", "decimal", "--rows", "5000", "--seed", "3", "-o", "d.bin",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "d.bin",
            "--pipeline",
            "Float2Int | Bit-packing",
            "-o",
            "one.zdmv",
        ],
        &dir,
    );
    ok(
        &[
            "compress",
            "d.bin",
            "--pipeline",
            "Float2Int | Bit-packing",
            "-o",
            "two.zdmv",
        ],
        &dir,
    );
    assert_eq!(
        std::fs::read(dir.join("one.zdmv")).unwrap(),
        std::fs::read(dir.join("two.zdmv")).unwrap()
    );
}
