//! Cycle-approximate model of a cluster-based long-vector RISC-V processor.

pub mod config;
pub mod engine;
pub mod harness;
pub mod image;
pub mod kernels;
pub mod layout;
pub mod memsys;
pub mod ring;
pub mod rvv;
