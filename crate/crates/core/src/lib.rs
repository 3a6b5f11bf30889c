//! Software mitigations for Spectre-BTI and Spectre-RSB on RV64, and a
//! deterministic model of the speculation structures they defend against.
//!
//! - [`asm`]: parse, print, expand and lay out RV64 assembly.
//! - [`harden`]: retpoline-style rewriting of indirect jumps, indirect calls
//!   and direct calls, plus the code-size overhead report.
//! - [`sim`]: an interpreter with a BTB, a RAS, an LRU L1 data cache and
//!   bounded speculation windows whose cache effects survive a squash.
//! - [`attack`]: generated Spectre proofs-of-concept with a Flush&Reload
//!   harness.

pub mod asm;
pub mod attack;
pub mod harden;
pub mod sim;
