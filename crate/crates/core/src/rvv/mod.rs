//! The supported RVV subset: instruction set, textual format and the
//! functional reference model.

pub mod asm;
pub mod golden;
pub mod isa;

pub use asm::{decode, DataSegment, ParseError, ParseErrorKind, Program};
pub use golden::{golden_execute, reduction_tree_sum, GoldenResult, ScalarState};
pub use isa::*;

use thiserror::Error;

use crate::image::MemoryError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("pc {pc}: {source}")]
    Memory { pc: usize, source: MemoryError },
    #[error("pc {pc}: illegal instruction: {reason}")]
    Illegal { pc: usize, reason: String },
    #[error("program exceeded {0} executed instructions")]
    StepLimit(u64),
}

/// Upper bound on executed instructions before a run is declared runaway.
pub const STEP_LIMIT: u64 = 1 << 32;

/// Value of the `.loop` bookkeeping: `true` means branch back.
pub(crate) fn loop_step(counters: &mut std::collections::HashMap<usize, u64>, pc: usize, count: u64) -> bool {
    let done = counters.entry(pc).or_insert(0);
    *done += 1;
    if *done < count {
        true
    } else {
        counters.remove(&pc);
        false
    }
}
