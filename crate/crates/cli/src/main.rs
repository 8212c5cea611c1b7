use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use entangle::cost::Workload;
use entangle::lab::{BenchWorkload, KernelChoice, Method, ScenarioFamily};
use entangle_cli::{
    cmd_bench, cmd_curves, cmd_roundtrip, cmd_run, cmd_table, default_curve_dimensions, write_csv, BenchSpec, CliError,
    CliResult, RunSpec, TABLE_STREAMS,
};

#[derive(Parser)]
#[command(
    name = "entangle",
    version,
    about = "Fault-tolerant integer stream processing experiments"
)]
struct Args {
    /// Output file, `-` for stdout.
    #[arg(long, global = true, default_value = "-")]
    out: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Entangle,
    Abft,
}

#[derive(Subcommand)]
enum Cmd {
    /// Shift, guard bits and usable bitwidths per stream count.
    Table,
    /// Entangle and extract random blocks with every excluded stream.
    Roundtrip {
        #[arg(long = "M", default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 32)]
        w: u32,
        #[arg(long = "N", default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, env = "ENTANGLE_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Fault-injection trials, one CSV row per trial.
    Run {
        #[arg(long, value_enum, default_value = "entangle")]
        method: MethodArg,
        #[arg(long = "M", default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 32)]
        w: u32,
        #[arg(long = "N", default_value_t = 16)]
        n: usize,
        /// identity, add, sub, scale, perm, conv, xcorr, inner or gemm.
        #[arg(long, default_value = "conv")]
        kernel: String,
        /// none, all-bitflips, random-bitflips, random-overwrite, stream-drop or double-cancel.
        #[arg(long, default_value = "none")]
        scenario: String,
        #[arg(long, env = "ENTANGLE_SEED", default_value_t = 0)]
        seed: u64,
        /// Trials for the random families.
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Median wall-clock time of plain, entangled and checksum pipelines.
    Bench {
        /// gemm, conv or identity.
        #[arg(long, default_value = "gemm")]
        workload: String,
        #[arg(long = "M", default_value_t = 3)]
        m: usize,
        #[arg(long = "N", value_delimiter = ',', default_value = "200,500,1000,2000")]
        n: Vec<usize>,
        /// Minimum repetitions per point (at least 5).
        #[arg(long, default_value_t = 9)]
        reps: usize,
        /// Target plain-pipeline time per point, in milliseconds.
        #[arg(long, default_value_t = 1000)]
        budget_ms: u64,
        #[arg(long, env = "ENTANGLE_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Modelled overhead ratios of both schemes.
    Curves {
        /// gemm, conv_time or conv_freq; all when omitted.
        #[arg(long, value_delimiter = ',')]
        workload: Vec<String>,
        #[arg(long = "M", value_delimiter = ',')]
        m: Vec<u32>,
        #[arg(long = "N", value_delimiter = ',')]
        n: Vec<u64>,
    },
}

fn parse_or_usage<T>(v: Option<T>, what: &str, s: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("unknown {what} `{s}`")))
}

fn output(path: &str) -> CliResult<Box<dyn Write>> {
    Ok(if path == "-" {
        Box::new(io::stdout().lock())
    } else {
        Box::new(File::create(path)?)
    })
}

/// Returns whether every guarantee held.
fn run(args: Args) -> CliResult<bool> {
    let out = output(&args.out)?;
    match args.cmd {
        Cmd::Table => write_csv(&cmd_table(), out)?,
        Cmd::Roundtrip { m, w, n, reps, seed } => {
            let row = cmd_roundtrip(m, w, n, reps, seed)?;
            write_csv(&[row], out)?;
            return Ok(row.mismatches == 0);
        }
        Cmd::Run {
            method,
            m,
            w,
            n,
            kernel,
            scenario,
            seed,
            reps,
        } => {
            let spec = RunSpec {
                method: match method {
                    MethodArg::Entangle => Method::Entangle,
                    MethodArg::Abft => Method::Abft,
                },
                m_streams: m,
                word_bits: w,
                n,
                kernel: parse_or_usage(KernelChoice::parse(&kernel), "kernel", &kernel)?,
                family: parse_or_usage(ScenarioFamily::parse(&scenario), "scenario", &scenario)?,
                seed,
                reps,
            };
            let report = cmd_run(&spec)?;
            write_csv(&report.rows, out)?;
            eprintln!("inputs: uniform over the largest range certified for the kernel");
            // Double faults carry no guarantee and are reported, not enforced.
            if !report.violations.is_empty() && spec.family != ScenarioFamily::DoubleCancel {
                eprintln!("guarantee violated in {} trial(s):", report.violations.len());
                for v in report.violations.iter().take(10) {
                    eprintln!("  {v}");
                }
                return Ok(false);
            }
        }
        Cmd::Bench {
            workload,
            m,
            n,
            reps,
            budget_ms,
            seed,
        } => {
            let spec = BenchSpec {
                workload: parse_or_usage(BenchWorkload::parse(&workload), "workload", &workload)?,
                m_streams: m,
                dimensions: n,
                reps,
                budget: Duration::from_millis(budget_ms),
                seed,
            };
            let report = cmd_bench(&spec)?;
            write_csv(&report.rows, out)?;
            match report.abft_exceeds_from {
                Some(n) => eprintln!("abft overhead exceeds entangle overhead for N >= {n}"),
                None => eprintln!("abft overhead does not stay above entangle overhead on this grid"),
            }
        }
        Cmd::Curves { workload, m, n } => {
            let workloads = if workload.is_empty() {
                Workload::ALL.to_vec()
            } else {
                workload
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|e: entangle::Error| CliError::Usage(e.to_string()))?
            };
            let streams = if m.is_empty() {
                TABLE_STREAMS.iter().map(|&m| m as u32).collect()
            } else {
                m
            };
            let dims = if n.is_empty() { default_curve_dimensions() } else { n };
            write_csv(&cmd_curves(&workloads, &streams, &dims)?, out)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
