//! Deterministic RV64 interpreter with a BTB, a return address stack, an LRU
//! data cache and bounded speculation.
//!
//! A mispredicted indirect jump, call or return opens a speculation window
//! at the predicted target. Instructions in the window run on the live
//! register file, which is restored from a checkpoint when the window
//! closes; cache fills and elapsed cycles are kept. Windows close after
//! `spec_window` instructions, at a serializing instruction (`ecall`, CSR
//! reads) or at a fetch from a non-instruction address. Speculative stores
//! are dropped, and the predictors are neither consulted nor trained inside
//! a window.
//!
//! RAS hints follow the standard link-register convention with `ra` and `t0`
//! as link registers: a `jal`/`jalr` writing a link register pushes, a `jalr`
//! reading one pops (unless it also writes the same register), and every
//! other `jalr` is predicted by the BTB.

mod btb;
mod cache;
mod config;
mod lru;
mod machine;
mod memory;
mod program;
mod ras;

pub use btb::Btb;
pub use cache::{Access, Cache};
pub use config::MachineConfig;
pub use lru::SetAssoc;
pub use machine::{
    load, load_unit, Machine, SpecEvent, Status, StepEvent, Trace, EXIT_ADDR, STACK_BYTES,
};
pub use memory::Memory;
pub use program::{AluOp, BranchCond, Decoded, Op, Program};
pub use ras::Ras;

use crate::asm::AsmError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid machine configuration: {0}")]
    Config(String),
    #[error("no entry symbol: the unit has no instructions")]
    NoEntry,
    #[error("{0} and {1} regions overlap")]
    Overlap(&'static str, &'static str),
    #[error("unresolved symbol `{0}`")]
    UnresolvedSymbol(String),
    #[error("unsupported instruction `{0}`")]
    Unsupported(String),
    #[error(transparent)]
    Asm(#[from] AsmError),
}
