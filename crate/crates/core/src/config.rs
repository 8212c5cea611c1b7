//! Superposition geometry: the number of streams `M`, the word width `w`,
//! the per-pair shift `l` and the guard width `k`.

use crate::error::{Error, Result};

/// Parameters of an entanglement group.
///
/// Every entangled value is the sum of one plain value and another plain
/// value shifted up by `l` bits. The constraint `(M-1)l + k <= w` keeps the
/// composite temporary of disentanglement inside a double-width register and
/// every entangled value inside a `w`-bit word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntanglementConfig {
    m_streams: usize,
    word_bits: u32,
    shift_bits: u32,
    guard_bits: u32,
}

impl EntanglementConfig {
    pub fn new(m_streams: usize, word_bits: u32, shift_bits: u32, guard_bits: u32) -> Result<Self> {
        let invalid = |reason| Error::InvalidConfig {
            m_streams,
            word_bits,
            shift_bits,
            guard_bits,
            reason,
        };
        if m_streams < 3 {
            return Err(invalid("at least three streams are required"));
        }
        if word_bits != 32 && word_bits != 64 {
            return Err(invalid("word width must be 32 or 64"));
        }
        if shift_bits < 1 || guard_bits < 1 {
            return Err(invalid("l and k must be at least 1"));
        }
        if guard_bits > shift_bits {
            return Err(invalid("k must not exceed l"));
        }
        if (m_streams as u64 - 1) * shift_bits as u64 + guard_bits as u64 > word_bits as u64 {
            return Err(invalid("(M-1)l + k exceeds the word width"));
        }
        Ok(Self {
            m_streams,
            word_bits,
            shift_bits,
            guard_bits,
        })
    }

    pub fn m_streams(&self) -> usize {
        self.m_streams
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn shift_bits(&self) -> u32 {
        self.shift_bits
    }

    pub fn guard_bits(&self) -> u32 {
        self.guard_bits
    }

    /// Width of the low field of the composite temporary, `(M-1)l`.
    pub fn composite_shift(&self) -> u32 {
        (self.m_streams as u32 - 1) * self.shift_bits
    }

    /// Output bitwidth supported by this configuration, `(M-2)l + k`.
    pub fn supported_bitwidth(&self) -> u32 {
        (self.m_streams as u32 - 2) * self.shift_bits + self.guard_bits
    }

    /// Bits occupied by an entangled value excluding the sign, `(M-1)l + k`.
    pub fn entangled_bitwidth(&self) -> u32 {
        self.composite_shift() + self.guard_bits
    }

    pub fn dynamic_range(&self) -> DynamicRange {
        dynamic_range(self)
    }
}

/// Selects `(l, k)` maximising `(M-2)l + k` under `(M-1)l + k <= w` and
/// `1 <= k <= l`. Ties go to the larger `l`.
pub fn config_for(m_streams: usize, word_bits: u32) -> Result<EntanglementConfig> {
    if m_streams < 3 || (word_bits != 32 && word_bits != 64) {
        // Surface the precise reason through the validating constructor.
        EntanglementConfig::new(m_streams, word_bits, 1, 1)?;
    }
    let m = m_streams as u64;
    let w = word_bits as u64;
    let mut best: Option<(u64, u64, u64)> = None;
    for l in 1..=w {
        if (m - 1) * l + 1 > w {
            break;
        }
        let k = l.min(w - (m - 1) * l);
        let score = (m - 2) * l + k;
        // Iterating l upwards with `>=` keeps the largest l among ties.
        if best.is_none_or(|(s, _, _)| score >= s) {
            best = Some((score, l, k));
        }
    }
    let (_, l, k) = best.ok_or(Error::Infeasible { m_streams, word_bits })?;
    EntanglementConfig::new(m_streams, word_bits, l as u32, k as u32)
}

/// Symmetric interval of plain values that may be entangled or produced by
/// an entangled computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DynamicRange {
    pub lo: i64,
    pub hi: i64,
}

impl DynamicRange {
    pub fn contains(&self, v: i128) -> bool {
        v >= self.lo as i128 && v <= self.hi as i128
    }

    pub fn magnitude(&self) -> u64 {
        self.hi as u64
    }
}

/// Admissible range for every plain input and output value.
///
/// The general bound is `2^((M-3)l+k) * (2^(l-1) - 1)`. For three streams
/// the pairwise bound `2^(l+k-1) - 2^l` also applies and the smaller of the
/// two is returned.
pub fn dynamic_range(config: &EntanglementConfig) -> DynamicRange {
    let m = config.m_streams as u32;
    let l = config.shift_bits;
    let k = config.guard_bits;
    let general: i128 = (1i128 << ((m - 3) * l + k)) * ((1i128 << (l - 1)) - 1);
    let mut hi = general;
    if m == 3 {
        let pairwise = (1i128 << (l + k - 1)) - (1i128 << l);
        hi = hi.min(pairwise);
    }
    let hi = hi.max(0) as i64;
    DynamicRange { lo: -hi, hi }
}

/// `ceil(log2(n))` for `n >= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Output bitwidth available to a single-checksum scheme over `M` streams,
/// `w - ceil(log2 M)`.
pub fn abft_bitwidth(m_streams: usize, word_bits: u32) -> u32 {
    word_bits.saturating_sub(ceil_log2(m_streams))
}
