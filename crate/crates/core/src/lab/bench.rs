use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trial::{certified_input_bound, median, random_block};
use crate::abft::{abft_apply, abft_check, abft_encode};
use crate::config::config_for;
use crate::entangle::{disentangle_and_verify, entangle};
use crate::error::{Error, Result};
use crate::lsb::{apply_entangled, apply_plain, LsbKernel};

/// Rows of each per-stream GEMM operand.
pub const BENCH_GEMM_ROWS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchWorkload {
    /// Each stream is a `32 x N` matrix multiplied by an `N x N` operand.
    Gemm,
    /// Circular convolution of length-`N` streams with `N` taps.
    Conv,
    /// Identity kernel; isolates the encode and check cost.
    Identity,
}

impl BenchWorkload {
    pub const ALL: [BenchWorkload; 3] = [BenchWorkload::Gemm, BenchWorkload::Conv, BenchWorkload::Identity];

    pub fn name(&self) -> &'static str {
        match self {
            BenchWorkload::Gemm => "gemm",
            BenchWorkload::Conv => "conv",
            BenchWorkload::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchPoint {
    pub workload: BenchWorkload,
    pub m_streams: usize,
    pub n: usize,
    pub reps: usize,
    pub plain_ns: u64,
    pub entangle_ns: u64,
    pub abft_ns: u64,
    /// Median over repetitions of the overhead relative to the plain run
    /// of the same repetition.
    pub entangle_overhead_pct: f64,
    pub abft_overhead_pct: f64,
}

pub fn overhead_pct(ns: u64, plain_ns: u64) -> f64 {
    if plain_ns == 0 {
        return 0.0;
    }
    (ns as f64 - plain_ns as f64) / plain_ns as f64 * 100.0
}

fn median_f64(mut v: Vec<f64>) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v[v.len() / 2]
}

fn time<T>(f: impl FnOnce() -> T) -> u64 {
    let t = Instant::now();
    black_box(f());
    t.elapsed().as_nanos() as u64
}

/// Times the plain, entangled and checksum pipelines on the same block with
/// 32-bit words. Each repetition runs all three, in rotating order, so drift
/// affects them alike; at least `min_reps` are taken and more are added (up to 101)
/// until the plain pipeline has run for about `budget`.
pub fn bench_point(
    workload: BenchWorkload,
    m_streams: usize,
    n: usize,
    min_reps: usize,
    budget: Duration,
    seed: u64,
) -> Result<BenchPoint> {
    if min_reps < 1 || n < 1 {
        return Err(Error::Scenario(
            "benchmark needs N >= 1 and at least one repetition".into(),
        ));
    }
    let config = config_for(m_streams, 32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (kernel, len) = match workload {
        BenchWorkload::Gemm => {
            let g = (0..n * n).map(|_| rng.random_range(-1..=1)).collect();
            (LsbKernel::matrix_multiply(n, n, g)?, BENCH_GEMM_ROWS * n)
        }
        BenchWorkload::Conv => {
            let taps = (0..n).map(|_| rng.random_range(-1..=1)).collect();
            (LsbKernel::circular_convolution(taps)?, n)
        }
        BenchWorkload::Identity => (LsbKernel::identity(), n),
    };
    let bound = certified_input_bound(&config, &kernel);
    let block = random_block::<i32, _>(m_streams, len, bound, &mut rng);

    let plain = || apply_plain(&block, &kernel);
    let ent = || -> Result<()> {
        let e = apply_entangled(&entangle(&block, &config)?, &kernel)?;
        black_box(disentangle_and_verify(&e, 0)?);
        Ok(())
    };
    let abft = || -> Result<()> {
        let a = abft_apply(&abft_encode(&block)?, &kernel)?;
        black_box(abft_check(&a));
        Ok(())
    };
    // Warm-up, also surfacing errors before timing.
    plain()?;
    ent()?;
    abft()?;

    let (mut p, mut e, mut a) = (Vec::new(), Vec::new(), Vec::new());
    let budget_ns = budget.as_nanos() as u64;
    let mut spent = 0u64;
    while p.len() < min_reps || (spent < budget_ns && p.len() < 101) {
        let mut t = [0u64; 3];
        for j in 0..3 {
            let which = (j + p.len()) % 3;
            t[which] = match which {
                0 => time(plain),
                1 => time(ent),
                _ => time(abft),
            };
        }
        spent += t[0];
        p.push(t[0]);
        e.push(t[1]);
        a.push(t[2]);
    }
    let paired = |x: &[u64]| median_f64(x.iter().zip(&p).map(|(&v, &base)| overhead_pct(v, base)).collect());
    Ok(BenchPoint {
        workload,
        m_streams,
        n,
        reps: p.len(),
        entangle_overhead_pct: paired(&e),
        abft_overhead_pct: paired(&a),
        plain_ns: median(&mut p),
        entangle_ns: median(&mut e),
        abft_ns: median(&mut a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_point_is_emitted() {
        let p = bench_point(BenchWorkload::Identity, 3, 8, 5, Duration::ZERO, 1).unwrap();
        assert_eq!(p.reps, 5);
        assert!(p.plain_ns > 0 || p.entangle_ns > 0);
    }

    #[test]
    fn small_gemm_runs() {
        let p = bench_point(BenchWorkload::Gemm, 3, 16, 5, Duration::from_millis(5), 1).unwrap();
        assert!(p.reps >= 5 && p.reps <= 101);
        assert!(p.entangle_overhead_pct.is_finite());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bench_point(BenchWorkload::Conv, 3, 8, 0, Duration::ZERO, 1).is_err());
        assert!(bench_point(BenchWorkload::Conv, 2, 8, 5, Duration::ZERO, 1).is_err());
        assert_eq!(overhead_pct(150, 100), 50.0);
    }
}
