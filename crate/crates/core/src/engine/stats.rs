//! Cycle statistics collected by the engine.

use serde::Serialize;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CycleStats {
    /// Cycles from the first vector instruction issue to the last result
    /// leaving the vector unit: a VRF writeback or a store beat sent to memory.
    pub total_cycles: u64,
    pub window_start: u64,
    pub window_end: u64,
    /// Cycles in which each FPU produced a valid result, indexed
    /// `cluster * lanes + lane`.
    pub fpu_active: Vec<u64>,
    /// Floating-point operations executed by the vector unit.
    pub flops: u64,
    pub vector_instructions: u64,
    pub scalar_instructions: u64,
    /// Cycles the scalar core waited for a REQI acknowledgment.
    pub reqi_stall: u64,
    /// Cycles the scalar core waited for a free vector queue slot.
    pub queue_stall: u64,
    /// Cycles memory beats waited for the port.
    pub memory_stall: u64,
    /// Cycles ring packets waited behind other packets.
    pub ring_stall: u64,
    pub memory_beats: u64,
    pub ring_packets: u64,
    pub reshuffles: u64,
}

impl CycleStats {
    pub fn utilization(&self) -> f64 {
        utilization(self)
    }

    pub fn flop_per_cycle(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            self.flops as f64 / self.total_cycles as f64
        }
    }
}

/// Mean fraction of the runtime window in which each FPU produced a result.
/// A run without vector work has utilization 0.
pub fn utilization(stats: &CycleStats) -> f64 {
    if stats.total_cycles == 0 || stats.fpu_active.is_empty() {
        return 0.0;
    }
    let total: u64 = stats.fpu_active.iter().sum();
    total as f64 / (stats.fpu_active.len() as f64 * stats.total_cycles as f64)
}
