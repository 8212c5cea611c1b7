//! Numerical entanglement of integer streams.
//!
//! `M` input streams are superimposed pairwise into `M` entangled streams of
//! the same word width. Linear, sesquilinear and bijective (LSB) kernels run
//! directly on the entangled streams; the plain results can be extracted
//! from any `M-1` of them, and the spare redundancy flags corruption of a
//! single stream. A single-checksum baseline is included for comparison,
//! along with an operation-count model and a fault-injection harness.

mod abft;
mod block;
mod config;
pub mod cost;
mod entangle;
mod error;
pub mod lab;
mod lsb;
mod word;

pub use abft::{abft_apply, abft_check, abft_encode, abft_input_limit, abft_recover, AbftBlock, AbftPartial};
pub use block::{EntangledBlock, FaultCheckResult, PartialBlock, StreamBlock};
pub use config::{abft_bitwidth, ceil_log2, config_for, dynamic_range, DynamicRange, EntanglementConfig};
pub use entangle::{
    disentangle_and_verify, disentangle_and_verify_with, disentangle_excluding, entangle, entangle_with,
    recover_failstop, verify, NoTally, OpCounter, Tally,
};
pub use error::{Error, Result};
pub use lsb::{
    apply_entangled, apply_entangled_chain, apply_plain, certify_chain, certify_range, KernelKind, LsbKernel,
    RangeCertificate,
};
pub use word::Word;
