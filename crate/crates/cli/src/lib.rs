//! Command implementations behind the `entangle` binary. Each command
//! returns typed rows; `write_csv` serialises them.

use std::io::Write;
use std::time::Duration;

use entangle::cost::{abft_overhead, entangle_overhead, CostQuery, Workload};
use entangle::lab::{bench_point, random_block, run_cell, BenchWorkload, Cell, KernelChoice, Method, ScenarioFamily};
use entangle::{abft_bitwidth, config_for, disentangle_excluding, entangle, StreamBlock, Word};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] entangle::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(_) => 1,
            CliError::Csv(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub const TABLE_STREAMS: [usize; 7] = [3, 4, 5, 8, 11, 16, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub w: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub l: u32,
    pub k: u32,
    pub bitwidth: u32,
    pub abft_bitwidth: u32,
}

/// Shift, guard bits and usable bitwidths for the standard stream counts.
pub fn cmd_table() -> Vec<TableRow> {
    let mut rows = Vec::new();
    for w in [32, 64] {
        for m in TABLE_STREAMS {
            let c = config_for(m, w).expect("standard stream counts are feasible");
            rows.push(TableRow {
                w,
                m,
                l: c.shift_bits(),
                k: c.guard_bits(),
                bitwidth: c.supported_bitwidth(),
                abft_bitwidth: abft_bitwidth(m, w),
            });
        }
    }
    rows
}

/// Parameters of `run`, validated before any work starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSpec {
    pub method: Method,
    pub m_streams: usize,
    pub word_bits: u32,
    pub n: usize,
    pub kernel: KernelChoice,
    pub family: ScenarioFamily,
    pub seed: u64,
    pub reps: usize,
}

impl RunSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.m_streams < 3 {
            return Err(CliError::Usage(format!(
                "--M must be at least 3, got {}",
                self.m_streams
            )));
        }
        if self.word_bits != 32 && self.word_bits != 64 {
            return Err(CliError::Usage(format!("--w must be 32 or 64, got {}", self.word_bits)));
        }
        if self.n == 0 {
            return Err(CliError::Usage("--N must be positive".into()));
        }
        if self.reps == 0 {
            return Err(CliError::Usage("--reps must be positive".into()));
        }
        config_for(self.m_streams, self.word_bits)
            .map_err(|e| CliError::Usage(format!("no entanglement layout: {e}")))?;
        Ok(())
    }

    fn cell(&self) -> Cell {
        Cell {
            method: self.method,
            m_streams: self.m_streams,
            word_bits: self.word_bits,
            n: self.n,
            kernel: self.kernel,
            family: self.family,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRow {
    pub method: &'static str,
    #[serde(rename = "M")]
    pub m: usize,
    pub w: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub kernel: &'static str,
    pub scenario: String,
    pub detected: bool,
    pub recovered: bool,
    pub correct: bool,
    pub ns_encode: u64,
    pub ns_apply: u64,
    pub ns_check: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    /// Scenario labels of trials whose single-fault guarantee failed.
    pub violations: Vec<String>,
}

/// One row per trial of the requested scenario family.
pub fn cmd_run(spec: &RunSpec) -> CliResult<RunReport> {
    spec.validate()?;
    let records = run_cell(&spec.cell(), spec.reps, spec.seed)?;
    let mut violations = Vec::new();
    let rows = records
        .iter()
        .map(|r| {
            if !r.guarantee_held {
                violations.push(r.label());
            }
            RunRow {
                method: spec.method.name(),
                m: spec.m_streams,
                w: spec.word_bits,
                n: spec.n,
                kernel: spec.kernel.name(),
                scenario: r.label(),
                detected: r.outcome.detected,
                recovered: r.outcome.recovered,
                correct: r.outcome.outputs_correct,
                ns_encode: r.outcome.ns_encode,
                ns_apply: r.outcome.ns_apply,
                ns_check: r.outcome.ns_check,
            }
        })
        .collect();
    Ok(RunReport { rows, violations })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSpec {
    pub workload: BenchWorkload,
    pub m_streams: usize,
    pub dimensions: Vec<usize>,
    pub reps: usize,
    pub budget: Duration,
    pub seed: u64,
}

impl BenchSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.m_streams < 3 {
            return Err(CliError::Usage(format!(
                "--M must be at least 3, got {}",
                self.m_streams
            )));
        }
        if self.dimensions.is_empty() || self.dimensions.contains(&0) {
            return Err(CliError::Usage("--N needs positive dimensions".into()));
        }
        if self.reps < 5 {
            return Err(CliError::Usage(format!("--reps must be at least 5, got {}", self.reps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub workload: &'static str,
    pub method: &'static str,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub median_ns: u64,
    pub overhead_pct_vs_plain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Smallest dimension from which the checksum overhead stays above the
    /// entanglement overhead.
    pub abft_exceeds_from: Option<usize>,
}

/// Plain, entangled and checksum timings for every dimension.
pub fn cmd_bench(spec: &BenchSpec) -> CliResult<BenchReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut exceeds = Vec::new();
    for (i, &n) in spec.dimensions.iter().enumerate() {
        let p = bench_point(
            spec.workload,
            spec.m_streams,
            n,
            spec.reps,
            spec.budget,
            spec.seed.wrapping_add(i as u64),
        )?;
        let row = |method: &'static str, median_ns: u64, pct: f64| BenchRow {
            workload: spec.workload.name(),
            method,
            m: spec.m_streams,
            n,
            median_ns,
            overhead_pct_vs_plain: pct,
        };
        rows.push(row("plain", p.plain_ns, 0.0));
        rows.push(row("entangle", p.entangle_ns, p.entangle_overhead_pct));
        rows.push(row("abft", p.abft_ns, p.abft_overhead_pct));
        exceeds.push((n, p.abft_overhead_pct > p.entangle_overhead_pct));
    }
    exceeds.sort_unstable();
    let abft_exceeds_from = exceeds
        .iter()
        .rposition(|&(_, e)| !e)
        .map_or(exceeds.first().map(|&(n, _)| n), |i| {
            exceeds.get(i + 1).map(|&(n, _)| n)
        });
    Ok(BenchReport {
        rows,
        abft_exceeds_from,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundTripRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub w: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub blocks: usize,
    pub mismatches: usize,
}

/// Entangles `blocks` random full-range blocks and extracts each with every
/// choice of excluded stream; counts blocks where any extraction differs.
pub fn cmd_roundtrip(m_streams: usize, word_bits: u32, n: usize, blocks: usize, seed: u64) -> CliResult<RoundTripRow> {
    RunSpec {
        method: Method::Entangle,
        m_streams,
        word_bits,
        n,
        kernel: KernelChoice::Identity,
        family: ScenarioFamily::None,
        seed,
        reps: blocks,
    }
    .validate()?;
    let mismatches = match word_bits {
        32 => roundtrip_typed::<i32>(m_streams, n, blocks, seed)?,
        _ => roundtrip_typed::<i64>(m_streams, n, blocks, seed)?,
    };
    Ok(RoundTripRow {
        m: m_streams,
        w: word_bits,
        n,
        blocks,
        mismatches,
    })
}

fn roundtrip_typed<W: Word>(m: usize, n: usize, blocks: usize, seed: u64) -> CliResult<usize> {
    let config = config_for(m, W::BITS)?;
    let bound = config.dynamic_range().magnitude() as u128;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..blocks {
        let b: StreamBlock<W> = random_block(m, n, bound, &mut rng);
        let e = entangle(&b, &config)?;
        let mut ok = true;
        for r in 0..m {
            ok &= disentangle_excluding(&e, r)? == b;
        }
        mismatches += usize::from(!ok);
    }
    Ok(mismatches)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub workload: &'static str,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "N")]
    pub n: u64,
    pub entangle_ratio: f64,
    pub abft_ratio: f64,
}

/// Default dimension grid for the cost curves.
pub fn default_curve_dimensions() -> Vec<u64> {
    let mut v: Vec<u64> = (1..=9).map(|i| i * 100).collect();
    v.extend((1..=9).map(|i| i * 500 + 500));
    v
}

/// Overhead ratios of both schemes from the operation-count model.
pub fn cmd_curves(workloads: &[Workload], streams: &[u32], dimensions: &[u64]) -> CliResult<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &workload in workloads {
        for &m in streams {
            for &n in dimensions {
                let q = CostQuery::new(workload, m, n).map_err(|e| CliError::Usage(e.to_string()))?;
                rows.push(CurveRow {
                    workload: workload.name(),
                    m,
                    n,
                    entangle_ratio: entangle_overhead(&q).ratio,
                    abft_ratio: abft_overhead(&q).ratio,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
