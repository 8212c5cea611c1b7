use num_traits::Zero;

use crate::abft::{AbftBlock, AbftPartial};
use crate::block::{EntangledBlock, PartialBlock};
use crate::error::{Error, Result};
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    NoFault,
    /// XOR of one stored word with a nonzero mask.
    BitFlip,
    /// Replacement of one stored word.
    ValueOverwrite,
    /// Loss of a whole stream (fail-stop failure of its core).
    StreamDrop,
}

impl FaultKind {
    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::NoFault => "none",
            FaultKind::BitFlip => "bit_flip",
            FaultKind::ValueOverwrite => "value_overwrite",
            FaultKind::StreamDrop => "stream_drop",
        }
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, FaultKind::BitFlip | FaultKind::ValueOverwrite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaultScenario {
    pub kind: FaultKind,
    pub stream: usize,
    /// Absent for stream drops.
    pub position: Option<usize>,
    /// XOR mask (read as a `w`-bit pattern) or replacement value.
    pub mask_or_value: i64,
    pub seed: u64,
}

impl FaultScenario {
    pub fn none() -> Self {
        Self {
            kind: FaultKind::NoFault,
            stream: 0,
            position: None,
            mask_or_value: 0,
            seed: 0,
        }
    }

    pub fn bit_flip(stream: usize, position: usize, mask: u64) -> Self {
        Self {
            kind: FaultKind::BitFlip,
            stream,
            position: Some(position),
            mask_or_value: mask as i64,
            seed: 0,
        }
    }

    pub fn overwrite(stream: usize, position: usize, value: i64) -> Self {
        Self {
            kind: FaultKind::ValueOverwrite,
            stream,
            position: Some(position),
            mask_or_value: value,
            seed: 0,
        }
    }

    pub fn stream_drop(stream: usize) -> Self {
        Self {
            kind: FaultKind::StreamDrop,
            stream,
            position: None,
            mask_or_value: 0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Compact textual form used in CSV output, e.g. `bit_flip:s1:n3:0x20`.
    pub fn label(&self) -> String {
        match self.kind {
            FaultKind::NoFault => "none".to_string(),
            FaultKind::BitFlip => format!(
                "bit_flip:s{}:n{}:{:#x}",
                self.stream,
                self.position.unwrap_or(0),
                self.mask_or_value as u64
            ),
            FaultKind::ValueOverwrite => format!(
                "value_overwrite:s{}:n{}:{}",
                self.stream,
                self.position.unwrap_or(0),
                self.mask_or_value
            ),
            FaultKind::StreamDrop => format!("stream_drop:s{}", self.stream),
        }
    }
}

/// Blocks whose stored streams can be corrupted or lost.
pub trait FaultTarget: Clone {
    type Word: Word;
    type Partial;

    fn stream_count(&self) -> usize;
    fn stream_len(&self) -> usize;
    fn word_mut(&mut self, stream: usize, position: usize) -> &mut Self::Word;
    fn into_partial(self, stream: usize) -> Result<Self::Partial>;
    fn drop_more(partial: &mut Self::Partial, stream: usize) -> Result<()>;
}

impl<W: Word> FaultTarget for EntangledBlock<W> {
    type Word = W;
    type Partial = PartialBlock<W>;

    fn stream_count(&self) -> usize {
        self.m_streams()
    }

    fn stream_len(&self) -> usize {
        self.len()
    }

    fn word_mut(&mut self, stream: usize, position: usize) -> &mut W {
        &mut self.stream_mut(stream)[position]
    }

    fn into_partial(self, stream: usize) -> Result<PartialBlock<W>> {
        self.drop_stream(stream)
    }

    fn drop_more(partial: &mut PartialBlock<W>, stream: usize) -> Result<()> {
        partial.drop_stream(stream)
    }
}

/// The checksum counts as stream `M`.
impl<W: Word> FaultTarget for AbftBlock<W> {
    type Word = W;
    type Partial = AbftPartial<W>;

    fn stream_count(&self) -> usize {
        self.m_streams() + 1
    }

    fn stream_len(&self) -> usize {
        self.len()
    }

    fn word_mut(&mut self, stream: usize, position: usize) -> &mut W {
        &mut self.stream_mut(stream).expect("stream index checked")[position]
    }

    fn into_partial(self, stream: usize) -> Result<AbftPartial<W>> {
        self.drop_stream(stream)
    }

    fn drop_more(partial: &mut AbftPartial<W>, stream: usize) -> Result<()> {
        partial.drop_stream(stream)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Corrupted<B: FaultTarget> {
    Transient(B),
    FailStop(B::Partial),
}

fn check_bounds<B: FaultTarget>(block: &B, s: &FaultScenario) -> Result<()> {
    if s.kind == FaultKind::NoFault {
        return Ok(());
    }
    if s.stream >= block.stream_count() {
        return Err(Error::StreamIndex {
            index: s.stream,
            streams: block.stream_count(),
        });
    }
    if s.kind.is_transient() {
        let n = s
            .position
            .ok_or_else(|| Error::Scenario("transient fault needs a position".into()))?;
        if n >= block.stream_len() {
            return Err(Error::PositionIndex {
                index: n,
                len: block.stream_len(),
            });
        }
    }
    Ok(())
}

fn corrupt_word<B: FaultTarget>(block: &mut B, s: &FaultScenario) -> Result<()> {
    let n = s.position.expect("checked");
    match s.kind {
        FaultKind::BitFlip => {
            let mask = <B::Word as Word>::from_bit_pattern(s.mask_or_value as u64);
            if mask == B::Word::zero() {
                return Err(Error::Scenario("bit-flip mask has no bits in the word".into()));
            }
            let w = block.word_mut(s.stream, n);
            *w = *w ^ mask;
        }
        FaultKind::ValueOverwrite => {
            let v = <B::Word as Word>::from_i128(s.mask_or_value as i128)
                .ok_or(Error::OperandWidth(s.mask_or_value as i128))?;
            *block.word_mut(s.stream, n) = v;
        }
        _ => unreachable!("not a transient fault"),
    }
    Ok(())
}

/// Applies exactly the corruption described by `scenario`.
pub fn inject<B: FaultTarget>(block: B, scenario: &FaultScenario) -> Result<Corrupted<B>> {
    inject_all(block, std::slice::from_ref(scenario))
}

/// Applies several faults; transient corruptions first, then stream losses.
pub fn inject_all<B: FaultTarget>(mut block: B, scenarios: &[FaultScenario]) -> Result<Corrupted<B>> {
    for s in scenarios {
        check_bounds(&block, s)?;
    }
    for s in scenarios.iter().filter(|s| s.kind.is_transient()) {
        corrupt_word(&mut block, s)?;
    }
    let mut drops = scenarios.iter().filter(|s| s.kind == FaultKind::StreamDrop);
    match drops.next() {
        None => Ok(Corrupted::Transient(block)),
        Some(first) => {
            let mut partial = block.into_partial(first.stream)?;
            for s in drops {
                B::drop_more(&mut partial, s.stream)?;
            }
            Ok(Corrupted::FailStop(partial))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::StreamBlock;
    use crate::config::EntanglementConfig;
    use crate::entangle::{entangle, verify};

    fn sample() -> EntangledBlock<i32> {
        let c = EntanglementConfig::new(3, 32, 11, 10).unwrap();
        let b = StreamBlock::from_streams(vec![vec![1, 2, 3, 4], vec![5, 6, 7, 8], vec![-1, -2, -3, -4]]).unwrap();
        entangle(&b, &c).unwrap()
    }

    #[test]
    fn bit_flip_touches_one_word() {
        let e = sample();
        let Corrupted::Transient(bad) = inject(e.clone(), &FaultScenario::bit_flip(0, 3, 1 << 5)).unwrap() else {
            panic!("expected a transient corruption");
        };
        for s in 0..3 {
            for n in 0..4 {
                let expect = if (s, n) == (0, 3) {
                    e.get(s, n) ^ (1 << 5)
                } else {
                    e.get(s, n)
                };
                assert_eq!(bad.get(s, n), expect);
            }
        }
    }

    #[test]
    fn drop_marks_stream_absent() {
        let e = sample();
        let Corrupted::FailStop(p) = inject(e.clone(), &FaultScenario::stream_drop(2)).unwrap() else {
            panic!("expected a fail-stop");
        };
        assert_eq!(p.absent(), vec![2]);
        assert_eq!(p.stream(0).unwrap(), e.stream(0));
        assert_eq!(p.stream(1).unwrap(), e.stream(1));
    }

    #[test]
    fn overwrite_with_original_is_a_no_op() {
        let e = sample();
        let s = FaultScenario::overwrite(1, 2, e.get(1, 2) as i64);
        let Corrupted::Transient(same) = inject(e.clone(), &s).unwrap() else {
            panic!()
        };
        assert_eq!(same, e);
        assert!(verify(&same, 0).unwrap().clean());
    }

    #[test]
    fn out_of_bounds_and_invalid() {
        let e = sample();
        assert!(inject(e.clone(), &FaultScenario::bit_flip(3, 0, 1)).is_err());
        assert!(inject(e.clone(), &FaultScenario::bit_flip(0, 4, 1)).is_err());
        assert!(inject(e.clone(), &FaultScenario::bit_flip(0, 0, 1 << 40)).is_err());
        assert!(inject(e.clone(), &FaultScenario::overwrite(0, 0, 1 << 40)).is_err());
        assert!(inject(e, &FaultScenario::stream_drop(9)).is_err());
    }
}
