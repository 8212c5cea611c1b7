use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::inject::{inject_all, Corrupted, FaultKind, FaultScenario};
use crate::abft::{abft_apply, abft_check, abft_encode, abft_input_limit, abft_recover};
use crate::block::{EntangledBlock, StreamBlock};
use crate::config::{config_for, EntanglementConfig};
use crate::entangle::{disentangle_and_verify, entangle, recover_failstop, verify};
use crate::error::{Error, Result};
use crate::lsb::{apply_entangled, apply_plain, certify_range, LsbKernel};
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Entangle,
    Abft,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Entangle => "entangle",
            Method::Abft => "abft",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub method: Method,
    /// A check flagged a fault, or a stream was observed missing.
    pub detected: bool,
    /// All outputs were reconstructed after a stream loss.
    pub recovered: bool,
    /// Delivered outputs equal the fault-free reference.
    pub outputs_correct: bool,
    /// Ground truth: the injected faults changed the stored data.
    pub fault_effective: bool,
    pub ns_encode: u64,
    pub ns_apply: u64,
    pub ns_check: u64,
}

impl TrialOutcome {
    /// Whether the single-fault guarantees held for this trial. Trials with
    /// more than one fault carry no guarantee.
    pub fn guarantee_held(&self, faults: &[FaultScenario]) -> bool {
        let active: Vec<&FaultScenario> = faults.iter().filter(|f| f.kind != FaultKind::NoFault).collect();
        match active.as_slice() {
            [] => !self.detected && self.outputs_correct,
            [f] if f.kind == FaultKind::StreamDrop => self.recovered && self.outputs_correct,
            [_] if self.fault_effective => self.detected,
            [_] => !self.detected && self.outputs_correct,
            _ => true,
        }
    }
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// Encode, apply, inject, check or recover, and compare with the plain
/// reference. The entanglement check excludes stream 0.
pub fn run_trial<W: Word>(
    block: &StreamBlock<W>,
    kernel: &LsbKernel,
    scenario: &FaultScenario,
    method: Method,
    config: &EntanglementConfig,
) -> Result<TrialOutcome> {
    run_trial_multi(block, kernel, std::slice::from_ref(scenario), method, config)
}

pub fn run_trial_multi<W: Word>(
    block: &StreamBlock<W>,
    kernel: &LsbKernel,
    faults: &[FaultScenario],
    method: Method,
    config: &EntanglementConfig,
) -> Result<TrialOutcome> {
    let reference = apply_plain(block, kernel)?;
    match method {
        Method::Entangle => {
            let t = Instant::now();
            let e = entangle(block, config)?;
            let ns_encode = elapsed_ns(t);
            let t = Instant::now();
            let out = apply_entangled(&e, kernel)?;
            let ns_apply = elapsed_ns(t);
            let pristine = out.clone();
            let t = Instant::now();
            let (detected, recovered, delivered, effective) = match inject_all(out, faults)? {
                Corrupted::Transient(bad) => {
                    let (d, check) = disentangle_and_verify(&bad, 0)?;
                    (!check.clean(), false, Some(d), bad != pristine)
                }
                Corrupted::FailStop(partial) => {
                    let d = recover_failstop(&partial).ok();
                    (true, d.is_some(), d, true)
                }
            };
            let ns_check = elapsed_ns(t);
            Ok(TrialOutcome {
                method,
                detected,
                recovered,
                outputs_correct: delivered.as_ref() == Some(&reference),
                fault_effective: effective,
                ns_encode,
                ns_apply,
                ns_check,
            })
        }
        Method::Abft => {
            let t = Instant::now();
            let a = abft_encode(block)?;
            let ns_encode = elapsed_ns(t);
            let t = Instant::now();
            let out = abft_apply(&a, kernel)?;
            let ns_apply = elapsed_ns(t);
            let pristine = out.clone();
            let t = Instant::now();
            let (detected, recovered, delivered, effective) = match inject_all(out, faults)? {
                Corrupted::Transient(bad) => {
                    let check = abft_check(&bad);
                    let effective = bad != pristine;
                    (!check.clean(), false, Some(bad.data().clone()), effective)
                }
                Corrupted::FailStop(partial) => {
                    let d = abft_recover(&partial).ok();
                    (true, d.is_some(), d, true)
                }
            };
            let ns_check = elapsed_ns(t);
            Ok(TrialOutcome {
                method,
                detected,
                recovered,
                outputs_correct: delivered.as_ref() == Some(&reference),
                fault_effective: effective,
                ns_encode,
                ns_apply,
                ns_check,
            })
        }
    }
}

/// Kernel families the lab can instantiate with random operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelChoice {
    Identity,
    AddConst,
    SubConst,
    Scale,
    Permutation,
    Convolution,
    CrossCorrelation,
    InnerProduct,
    /// Each stream is an `N x N` matrix multiplied by an `N x N` operand.
    Gemm,
}

impl KernelChoice {
    pub const ALL: [KernelChoice; 9] = [
        KernelChoice::Identity,
        KernelChoice::AddConst,
        KernelChoice::SubConst,
        KernelChoice::Scale,
        KernelChoice::Permutation,
        KernelChoice::Convolution,
        KernelChoice::CrossCorrelation,
        KernelChoice::InnerProduct,
        KernelChoice::Gemm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelChoice::Identity => "identity",
            KernelChoice::AddConst => "add",
            KernelChoice::SubConst => "sub",
            KernelChoice::Scale => "scale",
            KernelChoice::Permutation => "perm",
            KernelChoice::Convolution => "conv",
            KernelChoice::CrossCorrelation => "xcorr",
            KernelChoice::InnerProduct => "inner",
            KernelChoice::Gemm => "gemm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Stream length used for dimension `n`.
    pub fn stream_len(&self, n: usize) -> usize {
        match self {
            KernelChoice::Gemm => n * n,
            _ => n,
        }
    }

    /// Random operand of modest magnitude for dimension `n`.
    pub fn build<R: Rng>(&self, n: usize, rng: &mut R) -> Result<LsbKernel> {
        let vec = |rng: &mut R, len: usize, mag: i64| -> Vec<i64> {
            (0..len).map(|_| rng.random_range(-mag..=mag)).collect()
        };
        match self {
            KernelChoice::Identity => Ok(LsbKernel::identity()),
            KernelChoice::AddConst => LsbKernel::add_const(vec(rng, n, 100)),
            KernelChoice::SubConst => LsbKernel::sub_const(vec(rng, n, 100)),
            KernelChoice::Scale => LsbKernel::scale(vec(rng, n, 8)),
            KernelChoice::Permutation => {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                LsbKernel::permutation(p)
            }
            KernelChoice::Convolution => LsbKernel::circular_convolution(vec(rng, n, 3)),
            KernelChoice::CrossCorrelation => LsbKernel::cross_correlation(vec(rng, n, 3)),
            KernelChoice::InnerProduct => LsbKernel::inner_product(vec(rng, n, 3)),
            KernelChoice::Gemm => LsbKernel::matrix_multiply(n, n, vec(rng, n * n, 2)),
        }
    }
}

/// Largest input magnitude for which `kernel` is certified under `config`
/// and the checksum baseline cannot overflow.
pub fn certified_input_bound(config: &EntanglementConfig, kernel: &LsbKernel) -> u128 {
    let hi = config.dynamic_range().magnitude() as u128;
    let abft = abft_input_limit(config.m_streams(), config.word_bits());
    // Output bounds are monotone in the input bound; bisect.
    let (mut lo, mut up) = (0u128, hi.min(abft));
    if certify_range(config, kernel, up).admissible {
        return up;
    }
    if !certify_range(config, kernel, 0).admissible {
        return 0;
    }
    while up - lo > 1 {
        let mid = lo + (up - lo) / 2;
        if certify_range(config, kernel, mid).admissible {
            lo = mid;
        } else {
            up = mid;
        }
    }
    lo
}

/// Uniform random block with every value in `[-bound, bound]`.
pub fn random_block<W: Word, R: Rng>(m: usize, len: usize, bound: u128, rng: &mut R) -> StreamBlock<W> {
    let b = bound as i128;
    let data = (0..m * len)
        .map(|_| W::from_i128(rng.random_range(-b..=b)).expect("bound fits the word"))
        .collect();
    StreamBlock::from_flat(m, len, data).expect("dimensions are positive")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioFamily {
    None,
    /// Every single-bit flip of every stored word: streams x w x positions.
    AllBitflips,
    RandomBitflips,
    RandomOverwrite,
    /// Each stream dropped in turn.
    StreamDrop,
    /// Pairs of co-located bit flips chosen to cancel in the check.
    DoubleCancel,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 6] = [
        ScenarioFamily::None,
        ScenarioFamily::AllBitflips,
        ScenarioFamily::RandomBitflips,
        ScenarioFamily::RandomOverwrite,
        ScenarioFamily::StreamDrop,
        ScenarioFamily::DoubleCancel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioFamily::None => "none",
            ScenarioFamily::AllBitflips => "all-bitflips",
            ScenarioFamily::RandomBitflips => "random-bitflips",
            ScenarioFamily::RandomOverwrite => "random-overwrite",
            ScenarioFamily::StreamDrop => "stream-drop",
            ScenarioFamily::DoubleCancel => "double-cancel",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// One point of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub m_streams: usize,
    pub word_bits: u32,
    pub n: usize,
    pub kernel: KernelChoice,
    pub family: ScenarioFamily,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub faults: Vec<FaultScenario>,
    pub outcome: TrialOutcome,
    pub guarantee_held: bool,
}

impl TrialRecord {
    pub fn label(&self) -> String {
        let labels: Vec<String> = self.faults.iter().map(FaultScenario::label).collect();
        labels.join("+")
    }
}

fn mix(seed: u64, i: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every trial of one grid cell. `trials` is ignored by the
/// exhaustive families. Results are in deterministic order.
pub fn run_cell(cell: &Cell, trials: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    match cell.word_bits {
        32 => run_cell_typed::<i32>(cell, trials, seed),
        64 => run_cell_typed::<i64>(cell, trials, seed),
        w => Err(Error::Scenario(format!("unsupported word width {w}"))),
    }
}

fn run_cell_typed<W: Word>(cell: &Cell, trials: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    let config = config_for(cell.m_streams, cell.word_bits)?;
    let m = cell.m_streams;
    let len = cell.kernel.stream_len(cell.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernel = cell.kernel.build(cell.n, &mut rng)?;
    let bound = certified_input_bound(&config, &kernel);
    let base: StreamBlock<W> = random_block(m, len, bound, &mut rng);
    let out_len = kernel.output_len(len)?;
    // The checksum baseline stores one extra stream.
    let stored = match cell.method {
        Method::Entangle => m,
        Method::Abft => m + 1,
    };
    let w = cell.word_bits as usize;

    // (faults, fresh input seed) per trial
    let plans: Vec<(Vec<FaultScenario>, Option<u64>)> = match cell.family {
        ScenarioFamily::None => (0..trials.max(1))
            .map(|i| (vec![FaultScenario::none()], Some(mix(seed, i as u64))))
            .collect(),
        ScenarioFamily::AllBitflips => {
            let mut v = Vec::with_capacity(stored * w * out_len);
            for s in 0..stored {
                for bit in 0..w {
                    for n in 0..out_len {
                        v.push((vec![FaultScenario::bit_flip(s, n, 1u64 << bit)], None));
                    }
                }
            }
            v
        }
        ScenarioFamily::RandomBitflips | ScenarioFamily::RandomOverwrite => (0..trials.max(1))
            .map(|i| {
                let ts = mix(seed, i as u64);
                let mut r = ChaCha8Rng::seed_from_u64(ts);
                let s = r.random_range(0..stored);
                let n = r.random_range(0..out_len);
                let f = if cell.family == ScenarioFamily::RandomBitflips {
                    FaultScenario::bit_flip(s, n, 1u64 << r.random_range(0..w))
                } else {
                    let v = W::from_bit_pattern(r.random::<u64>()).as_i128() as i64;
                    FaultScenario::overwrite(s, n, v)
                };
                (vec![f.with_seed(ts)], Some(ts))
            })
            .collect(),
        ScenarioFamily::StreamDrop => (0..stored)
            .flat_map(|s| {
                (0..trials.max(1)).map(move |i| {
                    let ts = mix(seed, (s * trials.max(1) + i) as u64);
                    (vec![FaultScenario::stream_drop(s).with_seed(ts)], Some(ts))
                })
            })
            .collect(),
        ScenarioFamily::DoubleCancel => {
            let pairs = match cell.method {
                Method::Entangle => {
                    let e = apply_entangled(&entangle(&base, &config)?, &kernel)?;
                    cancelling_pairs_entangled(&e, 0, trials.max(1))
                }
                Method::Abft => cancelling_pairs_abft::<W>(m, out_len, trials.max(1)),
            };
            pairs.into_iter().map(|p| (p.to_vec(), None)).collect()
        }
    };

    plans
        .into_par_iter()
        .map(|(faults, fresh)| {
            let block = match fresh {
                Some(ts) => random_block(m, len, bound, &mut ChaCha8Rng::seed_from_u64(ts)),
                None => base.clone(),
            };
            let outcome = run_trial_multi(&block, &kernel, &faults, cell.method, &config)?;
            let guarantee_held = outcome.guarantee_held(&faults);
            Ok(TrialRecord {
                faults,
                outcome,
                guarantee_held,
            })
        })
        .collect()
}

/// Co-located pairs of single-bit flips that leave the entanglement check
/// clean at their position, searched exhaustively over stream pairs and bit
/// pairs at successive positions until `limit` pairs are found.
pub fn cancelling_pairs_entangled<W: Word>(
    block: &EntangledBlock<W>,
    excluded: usize,
    limit: usize,
) -> Vec<[FaultScenario; 2]> {
    let m = block.m_streams();
    let w = W::BITS as usize;
    let mut found = Vec::new();
    for n in 0..block.len() {
        // Single-position view so each candidate costs one position check.
        let column = StreamBlock::from_flat(m, 1, (0..m).map(|s| block.get(s, n)).collect()).expect("non-empty");
        let col = EntangledBlock::from_raw(*block.config(), column, block.bound()).expect("same config");
        for s1 in 0..m {
            for s2 in s1 + 1..m {
                for b1 in 0..w {
                    for b2 in 0..w {
                        let mut c = col.clone();
                        c.stream_mut(s1)[0] = c.get(s1, 0) ^ W::from_bit_pattern(1 << b1);
                        c.stream_mut(s2)[0] = c.get(s2, 0) ^ W::from_bit_pattern(1 << b2);
                        if verify(&c, excluded).expect("index in range").clean() {
                            found.push([
                                FaultScenario::bit_flip(s1, n, 1 << b1),
                                FaultScenario::bit_flip(s2, n, 1 << b2),
                            ]);
                            if found.len() >= limit {
                                return found;
                            }
                        }
                    }
                }
            }
        }
    }
    found
}

/// Co-located pairs that leave the column sum unchanged: flipping the sign
/// bit of two data words changes the sum by `0` or `2^w`, which vanishes
/// modulo `2^w` whatever the data.
pub fn cancelling_pairs_abft<W: Word>(m: usize, len: usize, limit: usize) -> Vec<[FaultScenario; 2]> {
    let sign = 1u64 << (W::BITS - 1);
    let mut found = Vec::new();
    'outer: for n in 0..len {
        for s1 in 0..m {
            for s2 in s1 + 1..m {
                found.push([
                    FaultScenario::bit_flip(s1, n, sign),
                    FaultScenario::bit_flip(s2, n, sign),
                ]);
                if found.len() >= limit {
                    break 'outer;
                }
            }
        }
    }
    found
}

/// Aggregate of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: Cell,
    pub trials: usize,
    pub effective_faults: usize,
    pub detected: usize,
    pub recovered: usize,
    pub correct: usize,
    pub guarantees_held: usize,
    /// Detected fraction of effective transient faults (1 when none).
    pub detection_rate: f64,
    pub correct_rate: f64,
    pub median_ns_encode: u64,
    pub median_ns_apply: u64,
    pub median_ns_check: u64,
}

impl SweepRow {
    pub fn all_guarantees_held(&self) -> bool {
        self.guarantees_held == self.trials
    }
}

pub fn median(values: &mut [u64]) -> u64 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[values.len() / 2]
}

pub fn summarize(cell: Cell, records: &[TrialRecord]) -> SweepRow {
    let trials = records.len();
    let transient_effective: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.outcome.fault_effective && r.faults.iter().all(|f| f.kind.is_transient()))
        .collect();
    let detected_transients = transient_effective.iter().filter(|r| r.outcome.detected).count();
    let count = |f: fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let mut enc: Vec<u64> = records.iter().map(|r| r.outcome.ns_encode).collect();
    let mut app: Vec<u64> = records.iter().map(|r| r.outcome.ns_apply).collect();
    let mut chk: Vec<u64> = records.iter().map(|r| r.outcome.ns_check).collect();
    let correct = count(|r| r.outcome.outputs_correct);
    SweepRow {
        cell,
        trials,
        effective_faults: count(|r| r.outcome.fault_effective),
        detected: count(|r| r.outcome.detected),
        recovered: count(|r| r.outcome.recovered),
        correct,
        guarantees_held: count(|r| r.guarantee_held),
        detection_rate: if transient_effective.is_empty() {
            1.0
        } else {
            detected_transients as f64 / transient_effective.len() as f64
        },
        correct_rate: if trials == 0 {
            1.0
        } else {
            correct as f64 / trials as f64
        },
        median_ns_encode: median(&mut enc),
        median_ns_apply: median(&mut app),
        median_ns_check: median(&mut chk),
    }
}

/// Experiment grid; every combination of the listed values is one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepGrid {
    pub methods: Vec<Method>,
    pub m_streams: Vec<usize>,
    pub word_bits: Vec<u32>,
    pub dimensions: Vec<usize>,
    pub kernels: Vec<KernelChoice>,
    pub families: Vec<ScenarioFamily>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &method in &self.methods {
            for &m_streams in &self.m_streams {
                for &word_bits in &self.word_bits {
                    for &n in &self.dimensions {
                        for &kernel in &self.kernels {
                            for &family in &self.families {
                                cells.push(Cell {
                                    method,
                                    m_streams,
                                    word_bits,
                                    n,
                                    kernel,
                                    family,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// Runs every cell of the grid; each cell is seeded from `seed` and its
/// index so results do not depend on scheduling.
pub fn sweep(grid: &SweepGrid, trials: usize, seed: u64) -> Result<Vec<SweepRow>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Scenario("empty grid".into()));
    }
    cells
        .iter()
        .enumerate()
        .map(|(i, cell)| Ok(summarize(*cell, &run_cell(cell, trials, mix(seed, i as u64))?)))
        .collect()
}
