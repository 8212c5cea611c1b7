//! Entanglement, disentanglement, transient-fault verification and
//! fail-stop recovery.
//!
//! Stream `m` of an entangled block holds `(c[m-1] << l) + c[m]` (indices
//! mod `M`). Any `M-1` of the `M` entangled streams determine all `M` plain
//! streams: the retained streams are folded into a double-width composite
//! whose high part is the plain value of the excluded stream `r` and whose
//! low `(M-1)l` bits hold the plain value of stream `r-1`. The remaining
//! plain values follow by subtracting shifted neighbours around the cycle.

use num_traits::{WrappingAdd, WrappingSub, Zero};

use crate::block::{check_word_width, EntangledBlock, FaultCheckResult, PartialBlock, StreamBlock};
use crate::config::EntanglementConfig;
use crate::error::{Error, Result};
use crate::word::Word;

/// Sink for arithmetic operation counts. Shifts are not counted.
pub trait Tally {
    fn tally(&mut self, ops: u64);
}

/// Discards counts; compiles to nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn tally(&mut self, _ops: u64) {}
}

/// Counts additions, subtractions and negations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub ops: u64,
}

impl Tally for OpCounter {
    #[inline(always)]
    fn tally(&mut self, ops: u64) {
        self.ops += ops;
    }
}

/// Shift amounts for one configuration and word type.
#[derive(Clone, Copy)]
struct Geometry {
    m: usize,
    l: usize,
    low_bits: usize,
    /// `2w - (M-1)l`: shifting up then arithmetically down by this much
    /// sign-extends the low field of the composite.
    extend: usize,
    odd: bool,
}

impl Geometry {
    fn new<W: Word>(config: &EntanglementConfig) -> Self {
        let low_bits = config.composite_shift() as usize;
        Self {
            m: config.m_streams(),
            l: config.shift_bits() as usize,
            low_bits,
            extend: 2 * W::BITS as usize - low_bits,
            odd: config.m_streams() % 2 == 1,
        }
    }
}

/// Plain values of streams `r` and `r-1` at position `n`, computed without
/// reading stream `r`.
#[inline(always)]
fn extract_pair<W: Word, T: Tally>(
    g: Geometry,
    streams: &[&[W]],
    r: usize,
    n: usize,
    tally: &mut T,
) -> (W::Wide, W::Wide) {
    // Alternating shifted sum of the M-1 retained streams, normalised by
    // (-1)^M so that the low field is +d[r-1] for every M:
    //   composite = (-1)^M 2^((M-1)l) d[r] + d[r-1]
    let mut acc = W::Wide::zero();
    for j in 0..g.m - 1 {
        let v = streams[(r + 1 + j) % g.m][n].widen();
        let positive = (j % 2 == 0) != g.odd;
        acc = if positive {
            (acc << g.l).wrapping_add(&v)
        } else {
            (acc << g.l).wrapping_sub(&v)
        };
    }
    tally.tally(g.m as u64 - 1);

    let low = (acc << g.extend) >> g.extend;
    // The difference is an exact multiple of 2^((M-1)l).
    let high = if g.odd {
        low.wrapping_sub(&acc) >> g.low_bits
    } else {
        acc.wrapping_sub(&low) >> g.low_bits
    };
    tally.tally(1);
    (high, low)
}

#[inline(always)]
fn disentangle_position<W: Word, T: Tally>(
    g: Geometry,
    streams: &[&[W]],
    r: usize,
    n: usize,
    out: &mut [Vec<W>],
    tally: &mut T,
) -> (W::Wide, W::Wide) {
    let (d_r, d_prev) = extract_pair(g, streams, r, n, tally);
    out[r][n] = W::truncate(d_r);
    out[(r + g.m - 1) % g.m][n] = W::truncate(d_prev);
    let mut prev = d_r;
    for step in 1..=g.m - 2 {
        let idx = (r + step) % g.m;
        let d = streams[idx][n].widen().wrapping_sub(&(prev << g.l));
        out[idx][n] = W::truncate(d);
        prev = d;
    }
    tally.tally(g.m as u64 - 2);
    (d_r, d_prev)
}

/// Re-synthesised entangled value of stream `r`, `d[r] + (d[r-1] << l)`.
#[inline(always)]
fn resynthesize<W: Word, T: Tally>(g: Geometry, pair: (W::Wide, W::Wide), tally: &mut T) -> W::Wide {
    tally.tally(1);
    pair.0.wrapping_add(&(pair.1 << g.l))
}

fn check_excluded(r: usize, m: usize) -> Result<()> {
    if r >= m {
        return Err(Error::StreamIndex { index: r, streams: m });
    }
    Ok(())
}

/// Superimposes each plain stream with its cyclic predecessor shifted by `l`.
pub fn entangle<W: Word>(block: &StreamBlock<W>, config: &EntanglementConfig) -> Result<EntangledBlock<W>> {
    entangle_with(block, config, &mut NoTally)
}

/// [`entangle`] with operation counting.
pub fn entangle_with<W: Word, T: Tally>(
    block: &StreamBlock<W>,
    config: &EntanglementConfig,
    tally: &mut T,
) -> Result<EntangledBlock<W>> {
    check_word_width::<W>(config)?;
    let m = config.m_streams();
    if block.m_streams() != m {
        return Err(Error::Shape(format!(
            "configuration expects {m} streams, block has {}",
            block.m_streams()
        )));
    }
    let range = config.dynamic_range();
    let len = block.len();
    for (s, stream) in block.streams().enumerate() {
        if let Some((n, v)) = stream.iter().enumerate().find(|(_, v)| !range.contains(v.as_i128())) {
            return Err(Error::OutOfRange {
                stream: s,
                position: n,
                value: v.as_i128(),
                bound: range.hi as i128,
            });
        }
    }

    let l = config.shift_bits() as usize;
    let mut data = Vec::with_capacity(m * len);
    for s in 0..m {
        let own = block.stream(s);
        let prev = block.stream((s + m - 1) % m);
        data.extend(
            prev.iter()
                .zip(own)
                .map(|(&p, &c)| W::truncate((p.widen() << l).wrapping_add(&c.widen()))),
        );
    }
    tally.tally((m * len) as u64);
    Ok(EntangledBlock {
        config: *config,
        len,
        data,
        bound: block.max_abs(),
    })
}

fn disentangle_slices<W: Word, T: Tally>(
    config: &EntanglementConfig,
    streams: &[&[W]],
    len: usize,
    r: usize,
    tally: &mut T,
) -> Result<StreamBlock<W>> {
    let g = Geometry::new::<W>(config);
    let mut out = vec![vec![W::zero(); len]; g.m];
    for n in 0..len {
        disentangle_position(g, streams, r, n, &mut out, tally);
    }
    StreamBlock::from_streams(out)
}

/// Recovers all `M` plain streams without reading entangled stream `r`.
pub fn disentangle_excluding<W: Word>(block: &EntangledBlock<W>, r: usize) -> Result<StreamBlock<W>> {
    check_excluded(r, block.m_streams())?;
    let streams: Vec<&[W]> = block.streams().collect();
    disentangle_slices(&block.config, &streams, block.len(), r, &mut NoTally)
}

/// Checks every position by re-synthesising stream `r` from the other
/// `M-1` streams and comparing it with the stored value.
///
/// Any corruption confined to a single stream at a position is flagged. The
/// check does not identify which stream was corrupted.
pub fn verify<W: Word>(block: &EntangledBlock<W>, r: usize) -> Result<FaultCheckResult> {
    check_excluded(r, block.m_streams())?;
    let g = Geometry::new::<W>(&block.config);
    let streams: Vec<&[W]> = block.streams().collect();
    let faults = (0..block.len())
        .filter(|&n| {
            let pair = extract_pair(g, &streams, r, n, &mut NoTally);
            resynthesize::<W, _>(g, pair, &mut NoTally) != streams[r][n].widen()
        })
        .collect();
    Ok(FaultCheckResult::from_positions(faults))
}

/// Disentangles excluding `r` and verifies in one pass over the block.
pub fn disentangle_and_verify<W: Word>(
    block: &EntangledBlock<W>,
    r: usize,
) -> Result<(StreamBlock<W>, FaultCheckResult)> {
    disentangle_and_verify_with(block, r, &mut NoTally)
}

/// [`disentangle_and_verify`] with operation counting.
pub fn disentangle_and_verify_with<W: Word, T: Tally>(
    block: &EntangledBlock<W>,
    r: usize,
    tally: &mut T,
) -> Result<(StreamBlock<W>, FaultCheckResult)> {
    check_excluded(r, block.m_streams())?;
    let g = Geometry::new::<W>(&block.config);
    let streams: Vec<&[W]> = block.streams().collect();
    let mut out = vec![vec![W::zero(); block.len()]; g.m];
    let mut faults = Vec::new();
    for n in 0..block.len() {
        let pair = disentangle_position(g, &streams, r, n, &mut out, tally);
        if resynthesize::<W, _>(g, pair, tally) != streams[r][n].widen() {
            faults.push(n);
        }
    }
    Ok((
        StreamBlock::from_streams(out)?,
        FaultCheckResult::from_positions(faults),
    ))
}

/// Recovers all plain outputs after the loss of at most one stream.
pub fn recover_failstop<W: Word>(partial: &PartialBlock<W>) -> Result<StreamBlock<W>> {
    let absent = partial.absent();
    let r = match absent.as_slice() {
        [] => 0,
        [r] => *r,
        more => return Err(Error::Unrecoverable { absent: more.len() }),
    };
    let streams: Vec<&[W]> = partial.streams.iter().map(|s| s.as_deref().unwrap_or(&[])).collect();
    disentangle_slices(&partial.config, &streams, partial.len(), r, &mut NoTally)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_for;

    fn cfg(m: usize, w: u32, l: u32, k: u32) -> EntanglementConfig {
        EntanglementConfig::new(m, w, l, k).unwrap()
    }

    fn block(cols: &[&[i32]]) -> StreamBlock<i32> {
        StreamBlock::from_streams(cols.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn entangle_zero_is_zero() {
        let c = cfg(3, 32, 11, 10);
        let e = entangle(&StreamBlock::<i32>::zeros(3, 4).unwrap(), &c).unwrap();
        assert!(e.as_flat().iter().all(|&v| v == 0));
    }

    #[test]
    fn entangle_triplet_by_hand() {
        let c = cfg(3, 32, 11, 10);
        let e = entangle(&block(&[&[1], &[2], &[3]]), &c).unwrap();
        assert_eq!(e.as_flat(), &[6145, 2050, 4099]);
    }

    #[test]
    fn entangle_four_streams_by_hand() {
        let c = cfg(4, 32, 8, 8);
        let e = entangle(&block(&[&[1], &[0], &[0], &[0]]), &c).unwrap();
        assert_eq!(e.as_flat(), &[1, 256, 0, 0]);
    }

    #[test]
    fn entangle_rejects_out_of_range() {
        let c = cfg(3, 32, 11, 10);
        let err = entangle(&block(&[&[0, 0], &[0, 1_046_529], &[0, 0]]), &c).unwrap_err();
        assert_eq!(
            err,
            Error::OutOfRange {
                stream: 1,
                position: 1,
                value: 1_046_529,
                bound: 1_046_528
            }
        );
        assert!(entangle(&block(&[&[0], &[-1_046_528], &[1_046_528]]), &c).is_ok());
    }

    #[test]
    fn entangle_rejects_shape_and_width() {
        let c = cfg(3, 32, 11, 10);
        assert!(matches!(entangle(&block(&[&[0], &[0]]), &c), Err(Error::Shape(_))));
        let b64 = StreamBlock::<i64>::zeros(3, 1).unwrap();
        assert!(matches!(entangle(&b64, &c), Err(Error::WordWidth { .. })));
    }

    #[test]
    fn disentangle_triplet_by_hand() {
        let c = cfg(3, 32, 11, 10);
        let e = EntangledBlock::from_raw(c, block(&[&[6145], &[2050], &[4099]]), 3).unwrap();
        for r in 0..3 {
            assert_eq!(
                disentangle_excluding(&e, r).unwrap(),
                block(&[&[1], &[2], &[3]]),
                "r={r}"
            );
        }
    }

    /// Intermediate values of the three-stream trace: the composite is
    /// δ2 - (δ1 << 11) = -4194301, whose low 22 bits sign-extend to 3.
    #[test]
    fn composite_trace_for_three_streams() {
        let c = cfg(3, 32, 11, 10);
        let g = Geometry::new::<i32>(&c);
        let streams: [&[i32]; 3] = [&[6145], &[2050], &[4099]];
        let (d0, d2) = extract_pair(g, &streams, 0, 0, &mut NoTally);
        assert_eq!((d0, d2), (1, 3));
        assert_eq!(4099i64 - (2050i64 << 11), -4_194_301);
        assert_eq!(((-4_194_301i64) << 42) >> 42, 3);
        assert_eq!((-(-4_194_301i64 - 3)) >> 22, 1);
    }

    #[test]
    fn excluded_stream_is_never_read() {
        let c = cfg(3, 32, 11, 10);
        let mut e = EntangledBlock::from_raw(c, block(&[&[6145], &[2050], &[4099]]), 3).unwrap();
        e.stream_mut(0)[0] = i32::MIN;
        assert_eq!(disentangle_excluding(&e, 0).unwrap(), block(&[&[1], &[2], &[3]]));
        assert!(!verify(&e, 0).unwrap().clean());
    }

    #[test]
    fn excluded_index_out_of_bounds() {
        let c = cfg(3, 32, 11, 10);
        let e = entangle(&StreamBlock::<i32>::zeros(3, 1).unwrap(), &c).unwrap();
        assert!(matches!(disentangle_excluding(&e, 3), Err(Error::StreamIndex { .. })));
        assert!(matches!(verify(&e, 7), Err(Error::StreamIndex { .. })));
    }

    #[test]
    fn round_trip_extremes_all_configs() {
        for w in [32u32, 64] {
            for m in 3..=12 {
                let c = config_for(m, w).unwrap();
                let hi = c.dynamic_range().hi;
                let cols: Vec<Vec<i64>> = (0..m)
                    .map(|s| vec![hi, -hi, 0, if s % 2 == 0 { hi } else { -hi }, 1, -1])
                    .collect();
                if w == 32 {
                    let b =
                        StreamBlock::from_streams(cols.iter().map(|s| s.iter().map(|&v| v as i32).collect()).collect())
                            .unwrap();
                    let e = entangle(&b, &c).unwrap();
                    assert!(verify(&e, 0).unwrap().clean());
                    for r in 0..m {
                        assert_eq!(disentangle_excluding(&e, r).unwrap(), b, "M={m} w={w} r={r}");
                    }
                } else {
                    let b = StreamBlock::from_streams(cols).unwrap();
                    let e = entangle(&b, &c).unwrap();
                    assert!(verify(&e, 0).unwrap().clean());
                    for r in 0..m {
                        assert_eq!(disentangle_excluding(&e, r).unwrap(), b, "M={m} w={w} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_single_bit_flips_three_streams() {
        let c = cfg(3, 32, 11, 10);
        let b = block(&[&[1, -7, 1000], &[2, 0, -1_046_528], &[3, 99, 1_046_528]]);
        let e = entangle(&b, &c).unwrap();
        for s in 0..3 {
            for n in 0..3 {
                for bit in 0..32 {
                    let mut bad = e.clone();
                    bad.stream_mut(s)[n] ^= 1 << bit;
                    assert_eq!(
                        verify(&bad, 0).unwrap().fault_positions,
                        vec![n],
                        "s={s} n={n} bit={bit}"
                    );
                }
            }
        }
    }

    #[test]
    fn failstop_recovery() {
        let c = cfg(3, 32, 11, 10);
        let e = EntangledBlock::from_raw(c, block(&[&[6145], &[2050], &[4099]]), 3).unwrap();
        let p = e.clone().drop_stream(0).unwrap();
        assert_eq!(p.absent(), vec![0]);
        assert_eq!(recover_failstop(&p).unwrap(), block(&[&[1], &[2], &[3]]));

        let mut p2 = p.clone();
        p2.drop_stream(2).unwrap();
        assert_eq!(recover_failstop(&p2), Err(Error::Unrecoverable { absent: 2 }));

        let z = entangle(&StreamBlock::<i32>::zeros(3, 5).unwrap(), &c).unwrap();
        let rz = recover_failstop(&z.drop_stream(1).unwrap()).unwrap();
        assert_eq!(rz, StreamBlock::zeros(3, 5).unwrap());
    }

    #[test]
    fn op_counts() {
        let m = 5;
        let c = config_for(m, 32).unwrap();
        let b = StreamBlock::<i32>::zeros(m, 10).unwrap();
        let mut t = OpCounter::default();
        let e = entangle_with(&b, &c, &mut t).unwrap();
        assert_eq!(t.ops, (m * 10) as u64);
        let mut t = OpCounter::default();
        disentangle_and_verify_with(&e, 0, &mut t).unwrap();
        // (M-1) composite + 1 high part + (M-2) cascade + 1 re-synthesis
        assert_eq!(t.ops, ((2 * m - 1) * 10) as u64);
    }
}
