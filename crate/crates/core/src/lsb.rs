//! Linear, sesquilinear and bijective kernels applied stream by stream.
//!
//! Every kernel here commutes with entanglement: applying it to each
//! entangled stream and disentangling gives the same result as applying it
//! to the plain streams. Additive kernels are the one exception that needs
//! care, their operand is entangled with itself first.

use crate::block::{EntangledBlock, StreamBlock};
use crate::config::EntanglementConfig;
use crate::error::{Error, Result};
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    AddConst,
    SubConst,
    Scale,
    InnerProduct,
    Permutation,
    CircularConvolution,
    CrossCorrelation,
    MatrixMultiply,
}

impl KernelKind {
    pub const ALL: [KernelKind; 8] = [
        KernelKind::AddConst,
        KernelKind::SubConst,
        KernelKind::Scale,
        KernelKind::InnerProduct,
        KernelKind::Permutation,
        KernelKind::CircularConvolution,
        KernelKind::CrossCorrelation,
        KernelKind::MatrixMultiply,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::AddConst => "add_const",
            KernelKind::SubConst => "sub_const",
            KernelKind::Scale => "scale",
            KernelKind::InnerProduct => "inner_product",
            KernelKind::Permutation => "permutation",
            KernelKind::CircularConvolution => "circular_convolution",
            KernelKind::CrossCorrelation => "cross_correlation",
            KernelKind::MatrixMultiply => "matrix_multiply",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Operand {
    /// Element-wise operand; a single value is broadcast.
    Elementwise(Vec<i64>),
    /// Taps of a circular filter, zero padded to the stream length.
    Taps(Vec<i64>),
    Weights(Vec<i64>),
    Permutation(Vec<usize>),
    /// Row-major `inner x cols` matrix.
    Matrix {
        inner: usize,
        cols: usize,
        data: Vec<i64>,
    },
}

impl Operand {
    /// Worst-case growth factor of the output magnitude over the input
    /// magnitude, for kernels without an additive term.
    fn gain(&self) -> u128 {
        match self {
            Operand::Permutation(_) => 1,
            Operand::Elementwise(v) => v.iter().map(|x| x.unsigned_abs() as u128).max().unwrap_or(0),
            Operand::Taps(v) | Operand::Weights(v) => v.iter().map(|x| x.unsigned_abs() as u128).sum(),
            Operand::Matrix { cols, data, .. } => {
                let mut col_sums = vec![0u128; *cols];
                for row in data.chunks_exact(*cols) {
                    for (acc, x) in col_sums.iter_mut().zip(row) {
                        *acc += x.unsigned_abs() as u128;
                    }
                }
                col_sums.into_iter().max().unwrap_or(0)
            }
        }
    }
}

/// An LSB operation together with its operand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LsbKernel {
    kind: KernelKind,
    operand: Operand,
    gain: u128,
}

impl LsbKernel {
    fn new(kind: KernelKind, operand: Operand) -> Self {
        let gain = operand.gain();
        Self { kind, operand, gain }
    }

    pub fn add_const(g: Vec<i64>) -> Result<Self> {
        Self::elementwise(KernelKind::AddConst, g)
    }

    pub fn sub_const(g: Vec<i64>) -> Result<Self> {
        Self::elementwise(KernelKind::SubConst, g)
    }

    pub fn scale(g: Vec<i64>) -> Result<Self> {
        Self::elementwise(KernelKind::Scale, g)
    }

    pub fn identity() -> Self {
        Self::new(KernelKind::Scale, Operand::Elementwise(vec![1]))
    }

    fn elementwise(kind: KernelKind, g: Vec<i64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::Shape("operand must not be empty".into()));
        }
        Ok(Self::new(kind, Operand::Elementwise(g)))
    }

    /// `d = sum_n c[n] g[n]`, a single output sample per stream.
    pub fn inner_product(g: Vec<i64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::Shape("operand must not be empty".into()));
        }
        Ok(Self::new(KernelKind::InnerProduct, Operand::Weights(g)))
    }

    /// `d[n] = c[perm[n]]`.
    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::NotAPermutation(n));
            }
        }
        if n == 0 {
            return Err(Error::NotAPermutation(0));
        }
        Ok(Self::new(KernelKind::Permutation, Operand::Permutation(perm)))
    }

    /// `d[n] = sum_j c[j] g[(n - j) mod N]`.
    pub fn circular_convolution(taps: Vec<i64>) -> Result<Self> {
        Self::taps(KernelKind::CircularConvolution, taps)
    }

    /// `d[n] = sum_j g[j] c[(n + j) mod N]`.
    pub fn cross_correlation(taps: Vec<i64>) -> Result<Self> {
        Self::taps(KernelKind::CrossCorrelation, taps)
    }

    fn taps(kind: KernelKind, taps: Vec<i64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Shape("kernel needs at least one tap".into()));
        }
        Ok(Self::new(kind, Operand::Taps(taps)))
    }

    /// Each stream is read as a row-major `rows x inner` matrix and
    /// multiplied by the row-major `inner x cols` matrix `g`.
    pub fn matrix_multiply(inner: usize, cols: usize, g: Vec<i64>) -> Result<Self> {
        if inner == 0 || cols == 0 || g.len() != inner * cols {
            return Err(Error::Shape(format!(
                "matrix operand of {} values is not {inner} x {cols}",
                g.len()
            )));
        }
        Ok(Self::new(
            KernelKind::MatrixMultiply,
            Operand::Matrix { inner, cols, data: g },
        ))
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Additive operands must be entangled with themselves before being
    /// applied to entangled streams.
    pub fn self_entangle_required(&self) -> bool {
        matches!(self.kind, KernelKind::AddConst | KernelKind::SubConst)
    }

    fn values(&self) -> &[i64] {
        match &self.operand {
            Operand::Elementwise(v) | Operand::Taps(v) | Operand::Weights(v) => v,
            Operand::Matrix { data, .. } => data,
            Operand::Permutation(_) => &[],
        }
    }

    pub fn max_abs_operand(&self) -> u128 {
        self.values()
            .iter()
            .map(|v| v.unsigned_abs() as u128)
            .max()
            .unwrap_or(0)
    }

    /// Worst-case output magnitude for inputs bounded by `input_bound`.
    pub fn output_bound(&self, input_bound: u128) -> u128 {
        match self.kind {
            KernelKind::AddConst | KernelKind::SubConst => input_bound.saturating_add(self.max_abs_operand()),
            _ => input_bound.saturating_mul(self.gain),
        }
    }

    /// Output stream length for input streams of `len` samples.
    pub fn output_len(&self, len: usize) -> Result<usize> {
        let mismatch = |what: String| Err(Error::Shape(what));
        match &self.operand {
            Operand::Elementwise(g) => {
                if g.len() == 1 || g.len() == len {
                    Ok(len)
                } else {
                    mismatch(format!("operand of {} values for streams of {len}", g.len()))
                }
            }
            Operand::Weights(g) => {
                if g.len() == len {
                    Ok(1)
                } else {
                    mismatch(format!("inner product of {} weights with streams of {len}", g.len()))
                }
            }
            Operand::Taps(g) => {
                if g.len() <= len {
                    Ok(len)
                } else {
                    mismatch(format!("{} taps exceed stream length {len}", g.len()))
                }
            }
            Operand::Permutation(p) => {
                if p.len() == len {
                    Ok(len)
                } else {
                    mismatch(format!("permutation of {} for streams of {len}", p.len()))
                }
            }
            Operand::Matrix { inner, cols, .. } => {
                if len.is_multiple_of(*inner) {
                    Ok(len / inner * cols)
                } else {
                    mismatch(format!("stream of {len} is not a whole number of rows of {inner}"))
                }
            }
        }
    }

    /// Converts the operand to words, applying `map` to each value first.
    fn operand_words<W: Word>(&self, map: impl Fn(i128) -> i128) -> Result<Vec<W>> {
        self.values()
            .iter()
            .map(|&v| {
                let mapped = map(v as i128);
                W::from_i128(mapped).ok_or(Error::OperandWidth(mapped))
            })
            .collect()
    }

    /// Applies the kernel to one stream with operand words `g`.
    fn run<W: Word>(&self, g: &[W], input: &[W], out: &mut Vec<W>) {
        let len = input.len();
        out.clear();
        match &self.operand {
            Operand::Elementwise(_) => {
                let op: fn(W, W) -> W = match self.kind {
                    KernelKind::AddConst => |a, b| a.wrapping_add(&b),
                    KernelKind::SubConst => |a, b| a.wrapping_sub(&b),
                    _ => |a, b| a.wrapping_mul(&b),
                };
                if g.len() == 1 {
                    out.extend(input.iter().map(|&c| op(c, g[0])));
                } else {
                    out.extend(input.iter().zip(g).map(|(&c, &b)| op(c, b)));
                }
            }
            Operand::Weights(_) => {
                let acc = input
                    .iter()
                    .zip(g)
                    .fold(W::zero(), |acc, (&c, &b)| acc.wrapping_add(&c.wrapping_mul(&b)));
                out.push(acc);
            }
            Operand::Permutation(p) => out.extend(p.iter().map(|&i| input[i])),
            Operand::Taps(_) => {
                out.resize(len, W::zero());
                let correlate = self.kind == KernelKind::CrossCorrelation;
                for (t, &tap) in g.iter().enumerate() {
                    if tap == W::zero() {
                        continue;
                    }
                    // Split the circular index range into two contiguous runs.
                    let (head, tail) = if correlate {
                        // d[n] += g[t] c[(n + t) mod N]
                        ((0..len - t, t..len), (len - t..len, 0..t))
                    } else {
                        // d[n] += g[t] c[(n - t) mod N]
                        ((t..len, 0..len - t), (0..t, len - t..len))
                    };
                    for (dst, src) in [head, tail] {
                        for (o, &c) in out[dst].iter_mut().zip(&input[src]) {
                            *o = o.wrapping_add(&c.wrapping_mul(&tap));
                        }
                    }
                }
            }
            Operand::Matrix { inner, cols, .. } => {
                let rows = len / inner;
                out.resize(rows * cols, W::zero());
                gemm_blocked(input, g, out, rows, *inner, *cols);
            }
        }
    }
}

const COL_BLOCK: usize = 512;

/// `out += a * b` for row-major `a: rows x inner`, `b: inner x cols`.
///
/// Columns are processed in blocks so the output tile stays in cache while
/// each row of `b` is streamed once per block.
// Kept out of line so every caller runs identical machine code.
#[inline(never)]
fn gemm_blocked<W: Word>(a: &[W], b: &[W], out: &mut [W], rows: usize, inner: usize, cols: usize) {
    for j0 in (0..cols).step_by(COL_BLOCK) {
        let j1 = (j0 + COL_BLOCK).min(cols);
        for kk in 0..inner {
            let b_seg = &b[kk * cols + j0..kk * cols + j1];
            for i in 0..rows {
                let a_ik = a[i * inner + kk];
                let o_seg = &mut out[i * cols + j0..i * cols + j1];
                for (o, &bv) in o_seg.iter_mut().zip(b_seg) {
                    *o = o.wrapping_add(&a_ik.wrapping_mul(&bv));
                }
            }
        }
    }
}

fn apply_streams<'a, W: Word>(
    streams: impl Iterator<Item = &'a [W]>,
    m_streams: usize,
    len: usize,
    kernel: &LsbKernel,
    g: &[W],
) -> Result<(usize, Vec<W>)> {
    let out_len = kernel.output_len(len)?;
    let mut data = Vec::with_capacity(m_streams * out_len);
    let mut buf = Vec::with_capacity(out_len);
    for s in streams {
        kernel.run(g, s, &mut buf);
        data.extend_from_slice(&buf);
    }
    Ok((out_len, data))
}

/// Reference (fault-intolerant) application of `kernel` to every stream.
pub fn apply_plain<W: Word>(block: &StreamBlock<W>, kernel: &LsbKernel) -> Result<StreamBlock<W>> {
    let g = kernel.operand_words::<W>(|v| v)?;
    let (out_len, data) = apply_streams(block.streams(), block.m_streams(), block.len(), kernel, &g)?;
    StreamBlock::from_flat(block.m_streams(), out_len, data)
}

/// Applies `kernel` to a single stream with an explicit additive scale.
///
/// Used by the checksum baseline, whose checksum stream needs the additive
/// operand multiplied by the number of data streams.
pub(crate) fn apply_stream_scaled<W: Word>(stream: &[W], kernel: &LsbKernel, additive_scale: i128) -> Result<Vec<W>> {
    let scale = if kernel.self_entangle_required() {
        additive_scale
    } else {
        1
    };
    let g = kernel.operand_words::<W>(|v| v * scale)?;
    kernel.output_len(stream.len())?;
    let mut out = Vec::new();
    kernel.run(&g, stream, &mut out);
    Ok(out)
}

/// Worst-case range analysis of one kernel application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeCertificate {
    pub input_bound: u128,
    pub output_bound: u128,
    pub admissible: bool,
}

pub fn certify_range(config: &EntanglementConfig, kernel: &LsbKernel, input_bound: u128) -> RangeCertificate {
    let output_bound = kernel.output_bound(input_bound);
    RangeCertificate {
        input_bound,
        output_bound,
        admissible: output_bound <= config.dynamic_range().magnitude() as u128,
    }
}

/// Certifies a sequence of kernels by composing worst-case bounds; every
/// intermediate output must stay admissible.
pub fn certify_chain(config: &EntanglementConfig, kernels: &[LsbKernel], input_bound: u128) -> RangeCertificate {
    let limit = config.dynamic_range().magnitude() as u128;
    let mut bound = input_bound;
    let mut admissible = true;
    for k in kernels {
        bound = k.output_bound(bound);
        admissible &= bound <= limit;
    }
    RangeCertificate {
        input_bound,
        output_bound: bound,
        admissible,
    }
}

/// Applies `kernel` directly to each entangled stream.
///
/// The block's carried bound is certified first, so the entangled result
/// never leaves the word.
pub fn apply_entangled<W: Word>(block: &EntangledBlock<W>, kernel: &LsbKernel) -> Result<EntangledBlock<W>> {
    let cert = certify_range(&block.config, kernel, block.bound);
    if !cert.admissible {
        return Err(Error::Uncertified {
            output_bound: cert.output_bound,
            limit: block.config.dynamic_range().magnitude() as u128,
        });
    }
    let l = block.config.shift_bits();
    let g = if kernel.self_entangle_required() {
        kernel.operand_words::<W>(|v| (v << l) + v)?
    } else {
        kernel.operand_words::<W>(|v| v)?
    };
    let (out_len, data) = apply_streams(block.streams(), block.m_streams(), block.len(), kernel, &g)?;
    Ok(EntangledBlock {
        config: block.config,
        len: out_len,
        data,
        bound: cert.output_bound,
    })
}

/// Applies kernels in sequence, certifying each step.
pub fn apply_entangled_chain<W: Word>(block: &EntangledBlock<W>, kernels: &[LsbKernel]) -> Result<EntangledBlock<W>> {
    let mut cur = block.clone();
    for k in kernels {
        cur = apply_entangled(&cur, k)?;
    }
    Ok(cur)
}
