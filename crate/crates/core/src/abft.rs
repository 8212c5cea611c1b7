//! Single-checksum algorithm-based fault tolerance, the comparison baseline.
//!
//! A checksum stream holding the column sums of the `M` data streams is
//! processed alongside them. Sums are taken modulo `2^w`, which keeps the
//! checksum relation exact for every linear kernel even if intermediate
//! values wrap.

use crate::block::{FaultCheckResult, StreamBlock};
use crate::config::abft_bitwidth;
use crate::error::{Error, Result};
use crate::lsb::{apply_stream_scaled, LsbKernel};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbftBlock<W> {
    data: StreamBlock<W>,
    checksum: Vec<W>,
}

/// Largest magnitude an input may have so that the checksum cannot
/// overflow: signed values of `w - ceil(log2 M)` bits.
pub fn abft_input_limit(m_streams: usize, word_bits: u32) -> u128 {
    let bits = abft_bitwidth(m_streams, word_bits);
    (1u128 << (bits - 1)) - 1
}

fn column_sums<W: Word>(block: &StreamBlock<W>) -> Vec<W> {
    let mut sums = vec![W::zero(); block.len()];
    for s in block.streams() {
        for (acc, &v) in sums.iter_mut().zip(s) {
            *acc = acc.wrapping_add(&v);
        }
    }
    sums
}

/// Appends the checksum stream `r[n] = sum_m c[m][n]`.
pub fn abft_encode<W: Word>(block: &StreamBlock<W>) -> Result<AbftBlock<W>> {
    let limit = abft_input_limit(block.m_streams(), W::BITS) as i128;
    for (s, stream) in block.streams().enumerate() {
        if let Some((n, v)) = stream
            .iter()
            .enumerate()
            .find(|(_, v)| v.as_i128() > limit || v.as_i128() < -limit - 1)
        {
            return Err(Error::OutOfRange {
                stream: s,
                position: n,
                value: v.as_i128(),
                bound: limit,
            });
        }
    }
    Ok(AbftBlock {
        checksum: column_sums(block),
        data: block.clone(),
    })
}

impl<W: Word> AbftBlock<W> {
    pub fn data(&self) -> &StreamBlock<W> {
        &self.data
    }

    pub fn checksum(&self) -> &[W] {
        &self.checksum
    }

    pub fn m_streams(&self) -> usize {
        self.data.m_streams()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Stream `s` counting the checksum as stream `M`.
    pub fn stream_mut(&mut self, s: usize) -> Result<&mut [W]> {
        let m = self.m_streams();
        match s.cmp(&m) {
            std::cmp::Ordering::Less => Ok(self.data.stream_mut(s)),
            std::cmp::Ordering::Equal => Ok(&mut self.checksum),
            std::cmp::Ordering::Greater => Err(Error::StreamIndex {
                index: s,
                streams: m + 1,
            }),
        }
    }

    pub fn stream(&self, s: usize) -> &[W] {
        if s == self.m_streams() {
            &self.checksum
        } else {
            self.data.stream(s)
        }
    }

    /// Marks one of the `M + 1` streams as lost.
    pub fn drop_stream(self, s: usize) -> Result<AbftPartial<W>> {
        let m = self.m_streams();
        if s > m {
            return Err(Error::StreamIndex {
                index: s,
                streams: m + 1,
            });
        }
        let mut data: Vec<Option<Vec<W>>> = self.data.into_streams().into_iter().map(Some).collect();
        let mut checksum = Some(self.checksum);
        if s == m {
            checksum = None;
        } else {
            data[s] = None;
        }
        Ok(AbftPartial { data, checksum })
    }
}

/// Applies the kernel to the `M` data streams and the checksum stream.
///
/// Additive operands reach the checksum multiplied by `M`, which keeps the
/// column-sum relation for affine kernels.
pub fn abft_apply<W: Word>(block: &AbftBlock<W>, kernel: &LsbKernel) -> Result<AbftBlock<W>> {
    let data = crate::lsb::apply_plain(&block.data, kernel)?;
    let checksum = apply_stream_scaled(&block.checksum, kernel, block.m_streams() as i128)?;
    Ok(AbftBlock { data, checksum })
}

/// Flags position `n` iff the data column no longer sums to the checksum.
pub fn abft_check<W: Word>(block: &AbftBlock<W>) -> FaultCheckResult {
    let sums = column_sums(&block.data);
    FaultCheckResult::from_positions(
        sums.iter()
            .zip(&block.checksum)
            .enumerate()
            .filter_map(|(n, (s, e))| (s != e).then_some(n))
            .collect(),
    )
}

/// ABFT streams after a fail-stop failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbftPartial<W> {
    data: Vec<Option<Vec<W>>>,
    checksum: Option<Vec<W>>,
}

impl<W: Word> AbftPartial<W> {
    pub fn absent(&self) -> Vec<usize> {
        let m = self.data.len();
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
            .chain(self.checksum.is_none().then_some(m))
            .collect()
    }

    pub fn drop_stream(&mut self, s: usize) -> Result<()> {
        let m = self.data.len();
        if s == m {
            self.checksum = None;
        } else {
            *self.data.get_mut(s).ok_or(Error::StreamIndex {
                index: s,
                streams: m + 1,
            })? = None;
        }
        Ok(())
    }
}

/// Reconstructs a missing data stream by subtracting the survivors from the
/// checksum.
pub fn abft_recover<W: Word>(partial: &AbftPartial<W>) -> Result<StreamBlock<W>> {
    let absent = partial.absent();
    let m = partial.data.len();
    match absent.as_slice() {
        [] => {}
        [s] if *s == m => {}
        [s] => {
            let checksum = partial.checksum.as_ref().expect("only one stream is absent");
            let mut missing = checksum.clone();
            for stream in partial.data.iter().flatten() {
                for (acc, &v) in missing.iter_mut().zip(stream) {
                    *acc = acc.wrapping_sub(&v);
                }
            }
            let mut streams = partial.data.clone();
            streams[*s] = Some(missing);
            return StreamBlock::from_streams(streams.into_iter().flatten().collect());
        }
        more => return Err(Error::Unrecoverable { absent: more.len() }),
    }
    StreamBlock::from_streams(partial.data.iter().flatten().cloned().collect())
}
