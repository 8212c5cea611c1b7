//! Containers for groups of equal-length integer streams.

use crate::config::EntanglementConfig;
use crate::error::{Error, Result};
use crate::word::Word;

/// `M` plain streams of `N` samples each, stored stream-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamBlock<W> {
    m_streams: usize,
    len: usize,
    data: Vec<W>,
}

impl<W: Word> StreamBlock<W> {
    pub fn from_streams(streams: Vec<Vec<W>>) -> Result<Self> {
        let m_streams = streams.len();
        if m_streams == 0 {
            return Err(Error::Shape("a block needs at least one stream".into()));
        }
        let len = streams[0].len();
        if len == 0 {
            return Err(Error::Shape("streams must not be empty".into()));
        }
        if let Some((i, s)) = streams.iter().enumerate().find(|(_, s)| s.len() != len) {
            return Err(Error::Shape(format!(
                "stream {i} has {} samples, stream 0 has {len}",
                s.len()
            )));
        }
        Ok(Self {
            m_streams,
            len,
            data: streams.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(m_streams: usize, len: usize, data: Vec<W>) -> Result<Self> {
        if m_streams == 0 || len == 0 {
            return Err(Error::Shape("block dimensions must be positive".into()));
        }
        if data.len() != m_streams * len {
            return Err(Error::Shape(format!(
                "{} values cannot form {m_streams} streams of {len}",
                data.len()
            )));
        }
        Ok(Self { m_streams, len, data })
    }

    pub fn zeros(m_streams: usize, len: usize) -> Result<Self> {
        Self::from_flat(m_streams, len, vec![W::zero(); m_streams * len])
    }

    pub fn m_streams(&self) -> usize {
        self.m_streams
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stream(&self, m: usize) -> &[W] {
        &self.data[m * self.len..(m + 1) * self.len]
    }

    pub fn stream_mut(&mut self, m: usize) -> &mut [W] {
        &mut self.data[m * self.len..(m + 1) * self.len]
    }

    pub fn streams(&self) -> impl ExactSizeIterator<Item = &[W]> + '_ {
        self.data.chunks_exact(self.len)
    }

    pub fn get(&self, m: usize, n: usize) -> W {
        self.data[m * self.len + n]
    }

    pub fn as_flat(&self) -> &[W] {
        &self.data
    }

    pub fn into_streams(self) -> Vec<Vec<W>> {
        self.data.chunks_exact(self.len).map(<[W]>::to_vec).collect()
    }

    /// Largest absolute value in the block.
    pub fn max_abs(&self) -> u128 {
        self.data.iter().map(|v| v.as_i128().unsigned_abs()).max().unwrap_or(0)
    }
}

/// `M` entangled streams together with the configuration that produced them.
///
/// `bound` is a certified upper bound on the magnitude of the plain values
/// the block represents; it is carried through every kernel application so
/// the next application can be certified against the dynamic range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntangledBlock<W> {
    pub(crate) config: EntanglementConfig,
    pub(crate) len: usize,
    pub(crate) data: Vec<W>,
    pub(crate) bound: u128,
}

impl<W: Word> EntangledBlock<W> {
    /// Wraps raw entangled streams, e.g. results received from remote workers.
    ///
    /// `bound` must bound the plain values the streams encode.
    pub fn from_raw(config: EntanglementConfig, streams: StreamBlock<W>, bound: u128) -> Result<Self> {
        check_word_width::<W>(&config)?;
        if streams.m_streams() != config.m_streams() {
            return Err(Error::Shape(format!(
                "configuration expects {} streams, got {}",
                config.m_streams(),
                streams.m_streams()
            )));
        }
        Ok(Self {
            config,
            len: streams.len,
            data: streams.data,
            bound,
        })
    }

    pub fn config(&self) -> &EntanglementConfig {
        &self.config
    }

    pub fn m_streams(&self) -> usize {
        self.config.m_streams()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bound(&self) -> u128 {
        self.bound
    }

    pub fn stream(&self, m: usize) -> &[W] {
        &self.data[m * self.len..(m + 1) * self.len]
    }

    pub fn stream_mut(&mut self, m: usize) -> &mut [W] {
        &mut self.data[m * self.len..(m + 1) * self.len]
    }

    pub fn streams(&self) -> impl ExactSizeIterator<Item = &[W]> + '_ {
        self.data.chunks_exact(self.len)
    }

    pub fn get(&self, m: usize, n: usize) -> W {
        self.data[m * self.len + n]
    }

    pub fn as_flat(&self) -> &[W] {
        &self.data
    }

    /// Largest absolute entangled value.
    pub fn max_abs(&self) -> u128 {
        self.data.iter().map(|v| v.as_i128().unsigned_abs()).max().unwrap_or(0)
    }

    /// Marks stream `r` as lost, as after a fail-stop failure of its core.
    pub fn drop_stream(self, r: usize) -> Result<PartialBlock<W>> {
        let m = self.m_streams();
        if r >= m {
            return Err(Error::StreamIndex { index: r, streams: m });
        }
        let streams = self
            .data
            .chunks_exact(self.len)
            .enumerate()
            .map(|(i, s)| (i != r).then(|| s.to_vec()))
            .collect();
        Ok(PartialBlock {
            config: self.config,
            len: self.len,
            streams,
        })
    }
}

/// Entangled streams of which some may be absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialBlock<W> {
    pub(crate) config: EntanglementConfig,
    pub(crate) len: usize,
    pub(crate) streams: Vec<Option<Vec<W>>>,
}

impl<W: Word> PartialBlock<W> {
    pub fn config(&self) -> &EntanglementConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stream(&self, m: usize) -> Option<&[W]> {
        self.streams[m].as_deref()
    }

    pub fn absent(&self) -> Vec<usize> {
        self.streams
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
            .collect()
    }

    /// Marks a further stream as lost.
    pub fn drop_stream(&mut self, r: usize) -> Result<()> {
        let m = self.streams.len();
        let slot = self
            .streams
            .get_mut(r)
            .ok_or(Error::StreamIndex { index: r, streams: m })?;
        *slot = None;
        Ok(())
    }
}

/// Outcome of a per-position consistency check.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaultCheckResult {
    /// Positions whose check failed, ascending.
    pub fault_positions: Vec<usize>,
}

impl FaultCheckResult {
    pub fn from_positions(fault_positions: Vec<usize>) -> Self {
        Self { fault_positions }
    }

    pub fn clean(&self) -> bool {
        self.fault_positions.is_empty()
    }
}

pub(crate) fn check_word_width<W: Word>(config: &EntanglementConfig) -> Result<()> {
    if config.word_bits() != W::BITS {
        return Err(Error::WordWidth {
            config_bits: config.word_bits(),
            word_bits: W::BITS,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_streams_are_rejected() {
        let err = StreamBlock::<i32>::from_streams(vec![vec![1, 2], vec![3]]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        assert!(StreamBlock::<i32>::from_streams(vec![vec![], vec![]]).is_err());
        assert!(StreamBlock::<i32>::from_flat(2, 3, vec![0; 5]).is_err());
    }

    #[test]
    fn stream_access() {
        let b = StreamBlock::<i32>::from_streams(vec![vec![1, 2], vec![3, 4], vec![5, -6]]).unwrap();
        assert_eq!(b.stream(1), &[3, 4]);
        assert_eq!(b.get(2, 1), -6);
        assert_eq!(b.max_abs(), 6);
        assert_eq!(b.streams().count(), 3);
    }
}
