//! patternpress command-line interface.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/type error, 4 integrity
//! failure.

mod commands;
mod io;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "patternpress",
    about = "Pattern-based compression pipelines: generate, compress, decode, tune, schedule",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic benchmark column (.bin + .json sidecar).
    Gen {
        /// uniform, rle, skewed, orderkey, date, decimal, comment, fk
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 100_000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bit width for --kind uniform (1..=63).
        #[arg(long, default_value_t = 25)]
        bits: u8,
        /// Run-length shape for --kind rle: even:X, random:LO:HI,
        /// outlier:BIG:FRAC, or mixed:A+B.
        #[arg(long, default_value = "even:2")]
        dist: String,
        /// Comma-separated symbol frequencies for --kind skewed (sum 1).
        #[arg(long, default_value = "0.9,0.1")]
        ratios: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compress a column file with a pipeline into a ZDMV artifact.
    Compress {
        input: PathBuf,
        /// Pipeline text, e.g. "Dictionary encoding | Bit-packing".
        #[arg(long)]
        pipeline: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Decode a ZDMV artifact back into a column file.
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Launch geometry override "L,S,C" (applied where valid).
        #[arg(long)]
        config: Option<String>,
        /// Disable kernel fusion (fused is the default).
        #[arg(long, default_value_t = false)]
        no_fused: bool,
    },
    /// Decode an artifact and compare it against a plain column file.
    Verify { plain: PathBuf, compressed: PathBuf },
    /// Measure decode throughput (fused vs unfused, per config) and the
    /// memory-bound ceiling.
    Bench {
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Memory bandwidth in bytes/sec for the throughput ceiling.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = false)]
        json: bool,
    },
    /// Search launch configs for a pattern; prints a SearchReport as JSON.
    Tune {
        input: PathBuf,
        /// fp, gp, or np
        #[arg(long)]
        pattern: String,
        /// bf (brute force) or pruned
        #[arg(long, default_value = "pruned")]
        mode: String,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Order transfer/decompress jobs (JSONL) and simulate or run them.
    Schedule {
        jobs: PathBuf,
        /// johnson, given, or bruteforce
        #[arg(long, default_value = "johnson")]
        mode: String,
        /// Actually execute the overlapped pipeline (jobs need artifact paths).
        #[arg(long, default_value_t = false)]
        run: bool,
        /// Emulated link bandwidth in bytes/sec for --run.
        #[arg(long, default_value_t = 1e9)]
        bandwidth: f64,
        #[arg(long, default_value_t = false)]
        json: bool,
    },
    /// Print an artifact's codec tree and canonical pipeline text.
    Inspect { input: PathBuf },
}

fn run(cli: Cli) -> Result<(), io::CliError> {
    match cli.command {
        Command::Gen {
            kind,
            rows,
            seed,
            bits,
            dist,
            ratios,
            output,
        } => commands::cmd_gen(&kind, rows, seed, bits, &dist, &ratios, &output),
        Command::Compress {
            input,
            pipeline,
            output,
        } => commands::cmd_compress(&input, &pipeline, &output),
        Command::Decompress {
            input,
            output,
            config,
            no_fused,
        } => commands::cmd_decompress(&input, &output, config.as_deref(), !no_fused),
        Command::Verify { plain, compressed } => commands::cmd_verify(&plain, &compressed),
        Command::Bench {
            input,
            reps,
            bandwidth,
            json,
        } => commands::cmd_bench(&input, reps, bandwidth, json),
        Command::Tune {
            input,
            pattern,
            mode,
            reps,
        } => commands::cmd_tune(&input, &pattern, &mode, reps),
        Command::Schedule {
            jobs,
            mode,
            run,
            bandwidth,
            json,
        } => commands::cmd_schedule(&jobs, &mode, run, bandwidth, json),
        Command::Inspect { input } => commands::cmd_inspect(&input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
