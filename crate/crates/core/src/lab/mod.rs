//! Deterministic fault injection and experiment harness.

mod bench;
mod inject;
mod trial;

pub use bench::{bench_point, overhead_pct, BenchPoint, BenchWorkload, BENCH_GEMM_ROWS};
pub use inject::{inject, inject_all, Corrupted, FaultKind, FaultScenario, FaultTarget};
pub use trial::{
    cancelling_pairs_abft, cancelling_pairs_entangled, certified_input_bound, median, random_block, run_cell,
    run_trial, run_trial_multi, summarize, sweep, Cell, KernelChoice, Method, ScenarioFamily, SweepGrid, SweepRow,
    TrialOutcome, TrialRecord,
};
