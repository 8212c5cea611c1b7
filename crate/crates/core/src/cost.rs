//! Analytical operation counts (additions and multiplications, shifts
//! ignored) for the protected workloads and the overhead of each
//! protection scheme.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Workload {
    /// `M` subblock products of `N x N` by `N x N`.
    Gemm,
    /// Time-domain overlap-save convolution of `M` streams.
    ConvTime,
    /// Frequency-domain overlap-save convolution of `M` streams.
    ConvFreq,
}

impl Workload {
    pub const ALL: [Workload; 3] = [Workload::Gemm, Workload::ConvTime, Workload::ConvFreq];

    pub fn name(&self) -> &'static str {
        match self {
            Workload::Gemm => "gemm",
            Workload::ConvTime => "conv_time",
            Workload::ConvFreq => "conv_freq",
        }
    }
}

impl std::str::FromStr for Workload {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Workload::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::Shape(format!("unknown workload `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostQuery {
    pub workload: Workload,
    pub m_streams: u32,
    pub dimension: u64,
}

impl CostQuery {
    pub fn new(workload: Workload, m_streams: u32, dimension: u64) -> Result<Self> {
        if m_streams < 3 || dimension < 1 {
            return Err(Error::Shape(format!(
                "cost query needs M >= 3 and N >= 1, got M={m_streams} N={dimension}"
            )));
        }
        Ok(Self {
            workload,
            m_streams,
            dimension,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overhead {
    pub count: f64,
    /// `count / base_cost`.
    pub ratio: f64,
}

pub fn base_cost(q: &CostQuery) -> f64 {
    let m = q.m_streams as f64;
    let n = q.dimension as f64;
    match q.workload {
        Workload::Gemm => m * n * n * n,
        Workload::ConvTime => 4.0 * m * n * n,
        Workload::ConvFreq => m * ((45.0 * n + 15.0) * (3.0 * n + 1.0).log2() + 3.0 * n + 1.0),
    }
}

/// Upper bound on entanglement, extraction and validation operations:
/// `2MN^2` for GEMM, `2MN` for convolution.
pub fn entangle_overhead(q: &CostQuery) -> Overhead {
    let m = q.m_streams as f64;
    let n = q.dimension as f64;
    let count = match q.workload {
        Workload::Gemm => 2.0 * m * n * n,
        Workload::ConvTime | Workload::ConvFreq => 2.0 * m * n,
    };
    Overhead {
        count,
        ratio: count / base_cost(q),
    }
}

/// Checksum generation and validation plus processing of the extra stream.
pub fn abft_overhead(q: &CostQuery) -> Overhead {
    let m = q.m_streams as f64;
    let n = q.dimension as f64;
    let base = base_cost(q);
    let count = match q.workload {
        Workload::Gemm => 2.0 * m * n * n + base / m,
        Workload::ConvTime | Workload::ConvFreq => 2.0 * m * n + base / m,
    };
    Overhead {
        count,
        ratio: count / base,
    }
}

/// Reported overhead range of row-column checksum GEMM. It is quoted,
/// not modelled.
pub const ABFT_RC_GEMM_OVERHEAD: (f64, f64) = (0.035, 0.055);
