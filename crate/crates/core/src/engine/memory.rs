//! Vector loads and stores: GLSU datapath for unit-stride accesses,
//! element-wise access otherwise, and memory-port timing.

use super::{Engine, Unit};
use crate::layout::{cluster_bus_destination, LayoutTag};
use crate::memsys::{addrgen_split, glsu_latency, BeatDesc, Direction, GlsuError, MemRequest};
use crate::rvv::{ExecError, Sew, VectorInstruction};

impl<'a> Engine<'a> {
    fn glsu_err(&self, e: GlsuError) -> ExecError {
        match e {
            GlsuError::Memory(source) => ExecError::Memory { pc: self.pc, source },
            other => self.illegal(other.to_string()),
        }
    }

    fn window(&self, addr: u64) -> u64 {
        addr / self.cfg.mem_width_bytes as u64
    }

    /// Beats of an access in address order with the element range each covers.
    fn beats(&self, base: u64, stride: Option<u64>, eew: Sew, active: &[bool]) -> Vec<(BeatDesc, usize, usize)> {
        let eb = eew.bytes();
        match stride {
            None => {
                let req = MemRequest::unit_stride(0, base, self.vl, eew, Direction::Load);
                addrgen_split(&req, self.cfg.mem_width_bytes)
                    .into_iter()
                    .map(|b| {
                        let off = (b.addr - base) as usize;
                        (b, off / eb, (off + b.len - 1) / eb)
                    })
                    .collect()
            }
            Some(s) => (0..self.vl)
                .filter(|&i| active[i])
                .map(|i| (BeatDesc { addr: base.wrapping_add(s.wrapping_mul(i as u64)), len: eb }, i, i))
                .collect(),
        }
    }

    /// Reserve the memory port for a beat that may start at `earliest`,
    /// after any conflicting access to the same window.
    fn grant(&mut self, beat: &BeatDesc, earliest: u64, dir: Direction) -> u64 {
        let first = self.window(beat.addr);
        let last = self.window(beat.addr + beat.len as u64 - 1);
        let mut t = earliest;
        for w in first..=last {
            if let Some(&g) = self.store_grant.get(&w) {
                t = t.max(g + 1);
            }
            if dir == Direction::Store {
                if let Some(&g) = self.load_grant.get(&w) {
                    t = t.max(g + 1);
                }
            }
        }
        let g = self.port.reserve(t);
        self.stats.memory_stall += g - earliest;
        self.stats.memory_beats += 1;
        let map = if dir == Direction::Load { &mut self.load_grant } else { &mut self.store_grant };
        for w in first..=last {
            let e = map.entry(w).or_insert(g);
            *e = (*e).max(g);
        }
        g
    }

    fn active_mask(&self, masked: bool) -> Vec<bool> {
        (0..self.vl).map(|i| !masked || self.vrf.mask_bit(0, i)).collect()
    }

    pub(super) fn vload(&mut self, instr: VectorInstruction) -> Result<(), ExecError> {
        let (eew, vd, base, stride, masked) = match instr {
            VectorInstruction::Load { eew, vd, base, masked } => (eew, vd, base, None, masked),
            VectorInstruction::LoadStrided { eew, vd, base, stride, masked } => (eew, vd, base, Some(stride), masked),
            _ => unreachable!(),
        };
        if eew != self.sew {
            return Err(self.illegal("load EEW differs from SEW"));
        }
        self.check_group_pub(vd)?;
        let mut ready = self.xready[base.0 as usize];
        if let Some(s) = stride {
            ready = ready.max(self.xready[s.0 as usize]);
        }
        let d = self.vector_issue(ready);
        let vdi = vd.0 as usize;
        self.ensure_layout(vdi, self.lmul.factor(), LayoutTag::Standard(eew), d);
        if masked {
            self.ensure_layout(0, 1, LayoutTag::Mask, d);
        }
        let addr = self.s.xr(base);
        let stride_v = stride.map(|s| self.s.xr(s));
        let active = self.active_mask(masked);
        let eb = eew.bytes();

        // Data.
        if stride_v.is_none() && !masked {
            let id = self.next_request;
            self.next_request = self.next_request.wrapping_add(1);
            let req = MemRequest::unit_stride(id, addr, self.vl, eew, Direction::Load);
            let beats = self.glsu.load(&self.mem, &req).map_err(|e| self.glsu_err(e))?;
            let (lanes, total) = (self.cfg.lanes, self.cfg.total_lanes());
            for beat in &beats {
                for (c, bus) in beat.clusters.iter().enumerate() {
                    for (o, &byte) in bus.iter().enumerate() {
                        if !beat.enables[c][o] {
                            continue;
                        }
                        let (lane, slot_in_beat) = cluster_bus_destination(o, eew, lanes);
                        let slot = beat.index * (8 / eb) + slot_in_beat;
                        let e = slot * total + c * lanes + lane;
                        self.vrf.set_byte(vdi, e, eb, o % eb, byte);
                    }
                }
            }
        } else {
            let step = stride_v.unwrap_or(eb as u64);
            for i in 0..self.vl {
                if active[i] {
                    let a = addr.wrapping_add(step.wrapping_mul(i as u64));
                    let bytes = self.mem.read(a, eb).map_err(|e| ExecError::Memory { pc: self.pc, source: e })?;
                    let mut buf = [0u8; 8];
                    buf[..eb].copy_from_slice(bytes);
                    self.vrf.set(vdi, i, eew, u64::from_le_bytes(buf));
                }
            }
        }

        // Timing.
        let groups = self.group_count(self.vl, eew);
        if groups == 0 {
            self.complete(d);
            return Ok(());
        }
        let gs = self.group_size(eew);
        let glsu = glsu_latency(Direction::Load, self.cfg.glsu_cuts, self.cfg.mem_width_bytes, self.cfg.clusters);
        let start = d.max(self.unit_free[Unit::Load as usize]);
        let mut arrival = vec![start; groups];
        let mut prev: Option<u64> = None;
        for (k, (beat, lo, hi)) in self.beats(addr, stride_v, eew, &active).into_iter().enumerate() {
            let earliest = (start + k as u64).max(prev.map_or(0, |p| p + 1));
            let g = self.grant(&beat, earliest, Direction::Load);
            prev = Some(g);
            let at = g + self.cfg.mem_latency + glsu;
            for grp in lo / gs..=hi / gs {
                arrival[grp] = arrival[grp].max(at);
            }
        }
        self.unit_free[Unit::Load as usize] = prev.map_or(start, |p| p + 1);
        if masked {
            let m = self.reg_ready(0, 1).max(self.mask_ready(groups - 1));
            self.mask_rd[0] = self.mask_rd[0].max(m);
        }
        let mut writes = Vec::with_capacity(groups);
        for (g, &a) in arrival.iter().enumerate() {
            let i = self.idx(vdi, g);
            // One cycle to write the VRF once the beat has been shuffled.
            writes.push((a + 1).max(self.rd[i] + 1).max(self.wr[i] + 1));
        }
        let done = self.write_groups(vdi, &writes);
        self.complete(done);
        Ok(())
    }

    pub(super) fn vstore(&mut self, instr: VectorInstruction) -> Result<(), ExecError> {
        let (eew, vs3, base, stride, masked) = match instr {
            VectorInstruction::Store { eew, vs3, base, masked } => (eew, vs3, base, None, masked),
            VectorInstruction::StoreStrided { eew, vs3, base, stride, masked } => (eew, vs3, base, Some(stride), masked),
            _ => unreachable!(),
        };
        if eew != self.sew {
            return Err(self.illegal("store EEW differs from SEW"));
        }
        self.check_group_pub(vs3)?;
        let mut ready = self.xready[base.0 as usize];
        if let Some(s) = stride {
            ready = ready.max(self.xready[s.0 as usize]);
        }
        let d = self.vector_issue(ready);
        let vsi = vs3.0 as usize;
        self.ensure_layout(vsi, self.lmul.factor(), LayoutTag::Standard(eew), d);
        if masked {
            self.ensure_layout(0, 1, LayoutTag::Mask, d);
        }
        let addr = self.s.xr(base);
        let stride_v = stride.map(|s| self.s.xr(s));
        let active = self.active_mask(masked);
        let eb = eew.bytes();

        // Data.
        if stride_v.is_none() {
            let id = self.next_request;
            self.next_request = self.next_request.wrapping_add(1);
            let req = MemRequest::unit_stride(id, addr, self.vl, eew, Direction::Store);
            let (lanes, clusters, total) = (self.cfg.lanes, self.cfg.clusters, self.cfg.total_lanes());
            let bus = 8 * lanes;
            let stream_beats = req.length.div_ceil(self.cfg.mem_width_bytes);
            let mut buses = Vec::with_capacity(stream_beats);
            for j in 0..stream_beats {
                let mut per_cluster = vec![vec![0u8; bus]; clusters];
                for (c, b) in per_cluster.iter_mut().enumerate() {
                    for (o, byte) in b.iter_mut().enumerate() {
                        let (lane, slot_in_beat) = cluster_bus_destination(o, eew, lanes);
                        let e = (j * (8 / eb) + slot_in_beat) * total + c * lanes + lane;
                        if e < self.vl {
                            *byte = self.vrf.byte(vsi, e, eb, o % eb);
                        }
                    }
                }
                buses.push(per_cluster);
            }
            let vl = self.vl;
            self.glsu
                .store(&mut self.mem, &req, &buses, |k| k / eb < vl && active[k / eb])
                .map_err(|e| match e {
                    GlsuError::Memory(source) => ExecError::Memory { pc: self.pc, source },
                    other => ExecError::Illegal { pc: self.pc, reason: other.to_string() },
                })?;
        } else {
            let step = stride_v.unwrap();
            for i in 0..self.vl {
                if active[i] {
                    let a = addr.wrapping_add(step.wrapping_mul(i as u64));
                    let v = self.vrf.get(vsi, i, eew).to_le_bytes();
                    self.mem.write(a, &v[..eb]).map_err(|e| ExecError::Memory { pc: self.pc, source: e })?;
                }
            }
        }

        // Timing: read groups in order, then send beats once their bytes are read.
        let groups = self.group_count(self.vl, eew);
        if groups == 0 {
            self.complete(d);
            return Ok(());
        }
        let gs = self.group_size(eew);
        let glsu = glsu_latency(Direction::Store, self.cfg.glsu_cuts, self.cfg.mem_width_bytes, self.cfg.clusters);
        let t = self.schedule(Unit::Store, d, groups, &[vsi], None, masked, None, 0);
        let mut done = d;
        let mut prev: Option<u64> = None;
        for (beat, lo, hi) in self.beats(addr, stride_v, eew, &active) {
            let data = (lo / gs..=hi / gs).map(|g| t[g]).max().unwrap() + 1;
            let earliest = data.max(prev.map_or(0, |p| p + 1));
            let g = self.grant(&beat, earliest, Direction::Store);
            prev = Some(g);
            done = done.max(g + self.cfg.mem_latency + glsu);
        }
        // The write acknowledgment gates retirement only; the data has left
        // the vector unit once its last beat is granted.
        self.complete_at(done, prev.map_or(d, |p| p + 1));
        Ok(())
    }

    fn check_group_pub(&self, v: crate::rvv::VReg) -> Result<(), ExecError> {
        let n = self.lmul.factor();
        if (v.0 as usize) % n != 0 || v.0 as usize + n > 32 {
            return Err(self.illegal(format!("register group {v} misaligned for LMUL {n}")));
        }
        Ok(())
    }
}
