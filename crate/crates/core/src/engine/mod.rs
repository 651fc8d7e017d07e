//! Cycle engine: scalar-core stub, REQI issue and acknowledgment, in-order
//! vector units with element-group chaining, and statistics.
//!
//! Timing is computed per instruction in program order. Every vector
//! register keeps, for each element group (one 64-bit word per lane), the
//! cycle its value becomes readable and the last cycle it was read. A unit
//! processes one group per cycle, so a consumer may start on group `g` as
//! soon as its producer has written group `g`.

mod memory;
pub mod stats;
mod vector;
pub mod vrf;

use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, MachineConfig};
use crate::image::MemoryImage;
use crate::layout::{Geometry, LayoutTag};
use crate::memsys::{Glsu, MemoryPort};
use crate::ring::Ring;
use crate::rvv::{loop_step, ExecError, Instruction, Lmul, Program, ScalarInstruction, ScalarState, Sew, STEP_LIMIT};

pub use stats::{utilization, CycleStats};
pub use vrf::Vrf;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cycle {cycle}: {source}")]
    Fault { cycle: u64, source: ExecError },
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub memory: MemoryImage,
    pub scalar: ScalarState,
    pub stats: CycleStats,
    /// Ring link events, when tracing was requested.
    pub ring_trace: Vec<String>,
    /// Per vector instruction timing, when tracing was requested.
    pub instr_trace: Vec<InstrTiming>,
}

/// Dispatch and completion cycle of one executed vector instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstrTiming {
    pub pc: usize,
    pub dispatch: u64,
    pub done: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub ring_trace: bool,
    pub instr_trace: bool,
}

/// Cycles at which a vector instruction reaches the clusters, becomes
/// executable, and is acknowledged back to the scalar core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReqiTiming {
    pub broadcast: u64,
    pub dispatch: u64,
    pub ack: u64,
}

/// REQI timing of a vector instruction issued at `issue`. All clusters see
/// the broadcast in the same cycle; cluster 0 acknowledges. Each cut adds
/// one cycle in each direction.
pub fn reqi_issue(issue: u64, cfg: &MachineConfig) -> ReqiTiming {
    let cuts = cfg.reqi_cuts as u64;
    ReqiTiming {
        broadcast: issue + 1 + cuts,
        dispatch: issue + cfg.ack_delay + cuts,
        ack: issue + cfg.ack_delay + 2 * cuts,
    }
}

/// Earliest processing cycle of each element group of a consumer that
/// starts no earlier than `start` and handles one group per cycle, given
/// the cycles at which its producer wrote each group.
pub fn chain_ready(producer_writes: &[u64], start: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(producer_writes.len());
    let mut next = start;
    for &w in producer_writes {
        let t = next.max(w);
        out.push(t);
        next = t + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Load = 0,
    Store = 1,
    Fpu = 2,
    Sldu = 3,
}

struct Engine<'a> {
    cfg: MachineConfig,
    program: &'a Program,
    mem: MemoryImage,
    vrf: Vrf,
    glsu: Glsu,
    ring: Ring,
    port: MemoryPort,
    s: ScalarState,
    sew: Sew,
    lmul: Lmul,
    vl: usize,
    pc: usize,
    /// Cycle at which the scalar core can issue its next instruction.
    now: u64,
    xready: [u64; 32],
    fready: [u64; 32],
    ack_ready: u64,
    /// In-order retirement cycles of in-flight vector instructions.
    pending: VecDeque<u64>,
    last_retire: u64,
    unit_free: [u64; 4],
    gpr: usize,
    /// Per register and element group: cycle the value becomes readable.
    wr: Vec<u64>,
    /// Per register and element group: last cycle it was read.
    rd: Vec<u64>,
    /// Per register written as a mask: readiness per element group.
    mask_wr: Vec<Option<Vec<u64>>>,
    mask_rd: Vec<u64>,
    /// Last port grant per memory window, for ordering loads and stores.
    load_grant: HashMap<u64, u64>,
    store_grant: HashMap<u64, u64>,
    next_request: u32,
    first_issue: Option<u64>,
    last_writeback: u64,
    last_dispatch: u64,
    instr_trace: Option<Vec<InstrTiming>>,
    stats: CycleStats,
}

/// Execute `program` on the timed machine. Final memory matches
/// [`crate::rvv::golden_execute`] bit for bit.
pub fn run(program: &Program, cfg: &MachineConfig, image: &MemoryImage) -> Result<RunResult, RunError> {
    run_with(program, cfg, image, RunOptions::default())
}

pub fn run_with(
    program: &Program,
    cfg: &MachineConfig,
    image: &MemoryImage,
    options: RunOptions,
) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let mut mem = image.clone();
    for seg in &program.data {
        mem.write(seg.addr, &seg.bytes)
            .map_err(|e| RunError::Fault { cycle: 0, source: ExecError::Memory { pc: 0, source: e } })?;
    }
    let geom = Geometry { lanes: cfg.lanes, clusters: cfg.clusters, vlen: cfg.vlen };
    let gpr = cfg.groups_per_register();
    let mut ring = Ring::new(cfg.clusters, cfg.ring_cuts);
    if options.ring_trace {
        ring.enable_trace();
    }
    let mut e = Engine {
        cfg: cfg.clone(),
        program,
        mem,
        vrf: Vrf::new(geom),
        glsu: Glsu::new(cfg.mem_width_bytes, cfg.clusters, cfg.lanes),
        ring,
        port: MemoryPort::default(),
        s: ScalarState::default(),
        sew: Sew::E64,
        lmul: Lmul::M1,
        vl: 0,
        pc: 0,
        now: 0,
        xready: [0; 32],
        fready: [0; 32],
        ack_ready: 0,
        pending: VecDeque::new(),
        last_retire: 0,
        unit_free: [0; 4],
        gpr,
        wr: vec![0; 32 * gpr],
        rd: vec![0; 32 * gpr],
        mask_wr: vec![None; 32],
        mask_rd: vec![0; 32],
        load_grant: HashMap::new(),
        store_grant: HashMap::new(),
        next_request: 0,
        first_issue: None,
        last_writeback: 0,
        last_dispatch: 0,
        instr_trace: options.instr_trace.then(Vec::new),
        stats: CycleStats { fpu_active: vec![0; cfg.total_lanes()], ..Default::default() },
    };
    e.execute()?;
    let mut stats = e.stats;
    if let Some(start) = e.first_issue {
        stats.window_start = start;
        stats.window_end = e.last_writeback.max(start);
        stats.total_cycles = stats.window_end - start;
    }
    stats.ring_packets += e.ring.injected;
    let ring_trace = e.ring.trace().to_vec();
    let instr_trace = e.instr_trace.unwrap_or_default();
    Ok(RunResult { memory: e.mem, scalar: e.s, stats, ring_trace, instr_trace })
}

impl<'a> Engine<'a> {
    fn fault(&self, source: ExecError) -> RunError {
        RunError::Fault { cycle: self.now, source }
    }

    fn illegal(&self, reason: impl Into<String>) -> ExecError {
        ExecError::Illegal { pc: self.pc, reason: reason.into() }
    }

    fn execute(&mut self) -> Result<(), RunError> {
        let program = self.program;
        let mut loops = HashMap::new();
        let mut executed = 0u64;
        while self.pc < program.instructions.len() {
            executed += 1;
            if executed > STEP_LIMIT {
                return Err(self.fault(ExecError::StepLimit(STEP_LIMIT)));
            }
            let next = match &program.instructions[self.pc] {
                Instruction::Vector(v) => {
                    self.vector(*v).map_err(|e| self.fault(e))?;
                    None
                }
                Instruction::Scalar(s) => self.scalar(s).map_err(|e| self.fault(e))?,
                Instruction::Loop { target, count } => {
                    self.stats.scalar_instructions += 1;
                    self.now += self.cfg.scalar_latency;
                    loop_step(&mut loops, self.pc, *count).then(|| program.target(target))
                }
            };
            self.pc = next.unwrap_or(self.pc + 1);
        }
        Ok(())
    }

    /// Issue slot of a scalar instruction whose sources become ready at `ready`.
    fn scalar_issue(&mut self, ready: u64) -> u64 {
        let t = self.now.max(ready);
        self.now = t + 1;
        self.stats.scalar_instructions += 1;
        t
    }

    fn scalar(&mut self, instr: &ScalarInstruction) -> Result<Option<usize>, ExecError> {
        use ScalarInstruction as S;
        let lat = self.cfg.scalar_latency;
        let mem_lat = self.cfg.scalar_mem_latency;
        let xr = |e: &Self, r: crate::rvv::XReg| e.xready[r.0 as usize];
        let fr = |e: &Self, r: crate::rvv::FReg| e.fready[r.0 as usize];
        match instr {
            S::Li { rd, imm } => {
                let t = self.scalar_issue(0);
                self.s.set_x(*rd, *imm as u64);
                self.xready[rd.0 as usize] = t + lat;
            }
            S::Addi { rd, rs, imm } => {
                let t = self.scalar_issue(xr(self, *rs));
                self.s.set_x(*rd, self.s.xr(*rs).wrapping_add(*imm as u64));
                self.xready[rd.0 as usize] = t + lat;
            }
            S::Slli { rd, rs, shamt } => {
                let t = self.scalar_issue(xr(self, *rs));
                self.s.set_x(*rd, self.s.xr(*rs) << shamt);
                self.xready[rd.0 as usize] = t + lat;
            }
            S::Alu { op, rd, rs1, rs2 } => {
                let t = self.scalar_issue(xr(self, *rs1).max(xr(self, *rs2)));
                let (a, b) = (self.s.xr(*rs1), self.s.xr(*rs2));
                let v = match op {
                    crate::rvv::IntOp::Add => a.wrapping_add(b),
                    crate::rvv::IntOp::Sub => a.wrapping_sub(b),
                    crate::rvv::IntOp::Sll => a << (b & 63),
                    crate::rvv::IntOp::Mul => a.wrapping_mul(b),
                };
                self.s.set_x(*rd, v);
                self.xready[rd.0 as usize] = t + lat;
            }
            S::Fld { fd, base, offset } => {
                let t = self.scalar_issue(xr(self, *base));
                let addr = self.s.xr(*base).wrapping_add(*offset as u64);
                let v = self.mem.read_u64(addr).map_err(|e| ExecError::Memory { pc: self.pc, source: e })?;
                self.s.f[fd.0 as usize] = v;
                self.fready[fd.0 as usize] = t + mem_lat;
            }
            S::Fsd { fs, base, offset } => {
                self.scalar_issue(xr(self, *base).max(fr(self, *fs)));
                let addr = self.s.xr(*base).wrapping_add(*offset as u64);
                let v = self.s.f[fs.0 as usize];
                self.mem.write_u64(addr, v).map_err(|e| ExecError::Memory { pc: self.pc, source: e })?;
            }
            S::Fp { op, fd, fs1, fs2 } => {
                let t = self.scalar_issue(fr(self, *fs1).max(fr(self, *fs2)));
                let v = op.apply(self.s.fr(*fs1), self.s.fr(*fs2));
                self.s.set_f(*fd, v);
                self.fready[fd.0 as usize] = t + self.cfg.fpu_latency;
            }
            S::FmvD { fd, fs } => {
                let t = self.scalar_issue(fr(self, *fs));
                self.s.f[fd.0 as usize] = self.s.f[fs.0 as usize];
                self.fready[fd.0 as usize] = t + lat;
            }
            S::Bnez { rs, target } => {
                self.scalar_issue(xr(self, *rs));
                if self.s.xr(*rs) != 0 {
                    return Ok(Some(self.program.target(target)));
                }
            }
            S::Beqz { rs, target } => {
                self.scalar_issue(xr(self, *rs));
                if self.s.xr(*rs) == 0 {
                    return Ok(Some(self.program.target(target)));
                }
            }
            S::Jump { target } => {
                self.scalar_issue(0);
                return Ok(Some(self.program.target(target)));
            }
        }
        Ok(None)
    }

    /// Issue a vector instruction through the REQI once its scalar operands
    /// are ready, a queue slot is free and the previous one was acknowledged.
    /// Returns the dispatch cycle.
    fn vector_issue(&mut self, scalar_ready: u64) -> u64 {
        let mut t = self.now.max(scalar_ready);
        if self.pending.len() >= self.cfg.queue_depth {
            let free = self.pending.pop_front().unwrap();
            if free > t {
                self.stats.queue_stall += free - t;
                t = free;
            }
        }
        if self.ack_ready > t {
            self.stats.reqi_stall += self.ack_ready - t;
            t = self.ack_ready;
        }
        let timing = reqi_issue(t, &self.cfg);
        self.ack_ready = timing.ack;
        self.now = t + 1;
        self.first_issue.get_or_insert(t);
        self.stats.vector_instructions += 1;
        self.last_dispatch = timing.dispatch;
        timing.dispatch
    }

    /// Record the completion of the instruction issued last.
    fn complete(&mut self, done: u64) {
        self.complete_at(done, done);
    }

    /// Record an instruction that retires at `done` but whose last result
    /// leaves the vector unit at `writeback`.
    fn complete_at(&mut self, done: u64, writeback: u64) {
        self.last_retire = self.last_retire.max(done);
        self.pending.push_back(self.last_retire);
        self.last_writeback = self.last_writeback.max(writeback);
        let (pc, dispatch) = (self.pc, self.last_dispatch);
        if let Some(t) = &mut self.instr_trace {
            t.push(InstrTiming { pc, dispatch, done });
        }
    }

    fn idx(&self, reg: usize, g: usize) -> usize {
        reg * self.gpr + g
    }

    /// Readiness of all groups of `count` registers from `base`.
    fn reg_ready(&self, base: usize, count: usize) -> u64 {
        self.wr[base * self.gpr..(base + count) * self.gpr].iter().copied().max().unwrap_or(0)
    }

    fn reg_last_read(&self, base: usize, count: usize) -> u64 {
        self.rd[base * self.gpr..(base + count) * self.gpr].iter().copied().max().unwrap_or(0)
    }

    /// Bring `count` registers from `base` into layout `tag`, reshuffling
    /// through the slide unit and ring when needed.
    fn ensure_layout(&mut self, base: usize, count: usize, tag: LayoutTag, d: u64) {
        for reg in base..base + count {
            let Some(packets) = self.vrf.retag(reg, tag) else { continue };
            let start = d
                .max(self.unit_free[Unit::Sldu as usize])
                .max(self.reg_ready(reg, 1))
                .max(self.reg_last_read(reg, 1));
            let busy = self.gpr as u64;
            let transfer = (packets.div_ceil(self.cfg.clusters) as u64) * self.ring.hop_latency();
            let end = start + busy + self.cfg.sldu_latency + transfer;
            self.unit_free[Unit::Sldu as usize] = start + busy;
            for g in 0..self.gpr {
                let i = self.idx(reg, g);
                self.wr[i] = end;
            }
            self.mask_wr[reg] = None;
            self.stats.reshuffles += 1;
            self.stats.ring_packets += packets as u64;
            self.last_writeback = self.last_writeback.max(end);
        }
    }

    /// Readiness of v0 as a mask for element group `g`.
    fn mask_ready(&self, g: usize) -> u64 {
        match &self.mask_wr[0] {
            Some(times) if !times.is_empty() => times[g.min(times.len() - 1)],
            _ => self.reg_ready(0, 1),
        }
    }

    /// Run `n` element groups through `unit`, one per cycle, in order.
    /// Returns the processing cycle of each group. Sources are marked read;
    /// the destination's write is left to the caller.
    #[allow(clippy::too_many_arguments)]
    fn schedule(
        &mut self,
        unit: Unit,
        d: u64,
        n: usize,
        srcs: &[usize],
        extra: Option<&[u64]>,
        masked: bool,
        dest: Option<usize>,
        latency: u64,
    ) -> Vec<u64> {
        let mut out = Vec::with_capacity(n);
        let mut next = d.max(self.unit_free[unit as usize]);
        for g in 0..n {
            let mut r = next;
            for &s in srcs {
                r = r.max(self.wr[self.idx(s, g)]);
            }
            if let Some(x) = extra {
                r = r.max(x[g]);
            }
            if masked {
                r = r.max(self.mask_ready(g));
            }
            if let Some(v) = dest {
                let i = self.idx(v, g);
                r = r.max(self.rd[i]).max((self.wr[i] + 1).saturating_sub(latency));
            }
            for &s in srcs {
                let i = self.idx(s, g);
                self.rd[i] = self.rd[i].max(r);
            }
            out.push(r);
            next = r + 1;
        }
        if masked {
            if let Some(&last) = out.last() {
                self.mask_rd[0] = self.mask_rd[0].max(last);
            }
        }
        if let Some(&last) = out.last() {
            self.unit_free[unit as usize] = last + 1;
        }
        out
    }

    /// Record data writes of `dest` per element group; returns the last one.
    fn write_groups(&mut self, dest: usize, writes: &[u64]) -> u64 {
        for (g, &w) in writes.iter().enumerate() {
            let i = self.idx(dest, g);
            self.wr[i] = w;
        }
        let lmul_regs = writes.len().div_ceil(self.gpr).max(1);
        for reg in dest..dest + lmul_regs {
            self.mask_wr[reg] = None;
        }
        writes.iter().copied().max().unwrap_or(0)
    }

    /// Lane index (`cluster * L + lane`) that owns element `i`.
    #[inline]
    fn lane_of(&self, i: usize) -> usize {
        let l = self.cfg.lanes;
        ((i / l) % self.cfg.clusters) * l + i % l
    }

    /// Element groups covering `vl` elements of `sew`.
    fn group_count(&self, vl: usize, sew: Sew) -> usize {
        vl.div_ceil(self.group_size(sew))
    }

    fn group_size(&self, sew: Sew) -> usize {
        self.cfg.total_lanes() * 8 / sew.bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reqi_examples() {
        let mut cfg = MachineConfig::new(4, 4);
        let base = reqi_issue(10, &cfg);
        assert_eq!(base.ack, 10 + cfg.ack_delay);
        cfg.reqi_cuts = 1;
        let cut = reqi_issue(10, &cfg);
        assert_eq!(cut.ack, base.ack + 2);
        assert_eq!(cut.broadcast, base.broadcast + 1);
    }

    #[test]
    fn chain_ready_follows_producer() {
        assert_eq!(chain_ready(&[5, 6, 7, 8], 0), vec![5, 6, 7, 8]);
        assert_eq!(chain_ready(&[5, 6, 7, 8], 10), vec![10, 11, 12, 13]);
        assert_eq!(chain_ready(&[5, 20, 7], 0), vec![5, 20, 21]);
        assert!(chain_ready(&[], 3).is_empty());
    }
}
