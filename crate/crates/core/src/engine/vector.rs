//! Vector instruction semantics and timing, except memory access.

use super::{Engine, Unit};
use crate::layout::{element_home, LayoutTag};
use crate::ring::{reduction_schedule, route, RingDirection, RingPacket};
use crate::rvv::{vlmax, vsetvl, ExecError, FReg, ReductionOrder, SlideAmount, Sew, VReg, VSrc, VectorInstruction, XReg};

const E64: LayoutTag = LayoutTag::Standard(Sew::E64);

fn vector_of(src: VSrc) -> Option<VReg> {
    match src {
        VSrc::Vector(v) => Some(v),
        VSrc::Scalar(_) => None,
    }
}

/// Partial-sum combination used by every reduction stage; absent partials
/// are passed through.
fn combine(a: Option<f64>, b: Option<f64>) -> (Option<f64>, bool) {
    match (a, b) {
        (Some(x), Some(y)) => (Some(x + y), true),
        (x, None) => (x, false),
        (None, y) => (y, false),
    }
}

impl<'a> Engine<'a> {
    fn check_group(&self, v: VReg, single: bool) -> Result<(), ExecError> {
        let n = if single { 1 } else { self.lmul.factor() };
        if (v.0 as usize) % n != 0 || v.0 as usize + n > 32 {
            return Err(self.illegal(format!("register group {v} misaligned for LMUL {n}")));
        }
        Ok(())
    }

    fn need_f64(&self) -> Result<(), ExecError> {
        if self.sew != Sew::E64 {
            return Err(self.illegal("floating-point operations require SEW=64"));
        }
        Ok(())
    }

    fn xr(&self, r: XReg) -> u64 {
        self.xready[r.0 as usize]
    }

    fn fr(&self, r: FReg) -> u64 {
        self.fready[r.0 as usize]
    }

    fn active(&self, masked: bool, i: usize) -> bool {
        !masked || self.vrf.mask_bit(0, i)
    }

    fn regs(&self) -> usize {
        self.lmul.factor()
    }

    /// Count one FPU result for every active element below `vl`.
    fn count_fpu(&mut self, masked: bool) {
        let total = self.cfg.total_lanes();
        if masked {
            for i in 0..self.vl {
                if self.vrf.mask_bit(0, i) {
                    let lane = self.lane_of(i);
                    self.stats.fpu_active[lane] += 1;
                }
            }
        } else {
            for (k, a) in self.stats.fpu_active.iter_mut().enumerate() {
                // Lane index k holds elements k' with k' mod total == position of k.
                let pos = (k / self.cfg.lanes) * self.cfg.lanes + k % self.cfg.lanes;
                if self.vl > pos {
                    *a += ((self.vl - pos).div_ceil(total)) as u64;
                }
            }
        }
    }

    fn active_count(&self, masked: bool) -> u64 {
        if masked {
            (0..self.vl).filter(|&i| self.vrf.mask_bit(0, i)).count() as u64
        } else {
            self.vl as u64
        }
    }

    pub(super) fn vector(&mut self, instr: VectorInstruction) -> Result<(), ExecError> {
        use VectorInstruction as V;
        match instr {
            V::Vsetvli { rd, avl, sew, lmul } => {
                let t = self.scalar_issue(self.xr(avl));
                let requested = if avl.0 == 0 { u64::MAX } else { self.s.xr(avl) };
                let vl = vsetvl(requested, sew, lmul, self.cfg.vlen).map_err(|e| self.illegal(e.to_string()))?;
                self.sew = sew;
                self.lmul = lmul;
                self.vl = vl;
                self.s.set_x(rd, vl as u64);
                self.xready[rd.0 as usize] = t + self.cfg.scalar_latency;
            }
            V::Load { .. } | V::LoadStrided { .. } => self.vload(instr)?,
            V::Store { .. } | V::StoreStrided { .. } => self.vstore(instr)?,
            V::Arith { vd, vs2, src1, masked, .. } | V::Macc { vd, vs2, src1, masked } => {
                self.need_f64()?;
                for v in [Some(vd), Some(vs2), vector_of(src1)].into_iter().flatten() {
                    self.check_group(v, false)?;
                }
                let scalar = match src1 {
                    VSrc::Scalar(f) => self.fr(f),
                    VSrc::Vector(_) => 0,
                };
                let d = self.vector_issue(scalar);
                let n = self.regs();
                self.ensure_layout(vd.0 as usize, n, E64, d);
                self.ensure_layout(vs2.0 as usize, n, E64, d);
                if let Some(v) = vector_of(src1) {
                    self.ensure_layout(v.0 as usize, n, E64, d);
                }
                if masked {
                    self.ensure_layout(0, 1, LayoutTag::Mask, d);
                }
                let macc = matches!(instr, V::Macc { .. });
                let mut srcs = vec![vs2.0 as usize];
                srcs.extend(vector_of(src1).map(|v| v.0 as usize));
                if macc {
                    srcs.push(vd.0 as usize);
                }
                let groups = self.group_count(self.vl, Sew::E64);
                let lat = self.cfg.fpu_latency;
                let t = self.schedule(Unit::Fpu, d, groups, &srcs, None, masked, Some(vd.0 as usize), lat);
                let writes: Vec<u64> = t.iter().map(|x| x + lat).collect();
                let done = self.write_groups(vd.0 as usize, &writes).max(d);
                let (base2, based) = (vs2.0 as usize, vd.0 as usize);
                let fvalue = |e: &Self, i: usize| match src1 {
                    VSrc::Vector(v) => e.vrf.getf(v.0 as usize, i),
                    VSrc::Scalar(f) => e.s.fr(f),
                };
                for i in 0..self.vl {
                    if !self.active(masked, i) {
                        continue;
                    }
                    let a = self.vrf.getf(base2, i);
                    let r = match instr {
                        V::Arith { op, .. } => op.apply(a, fvalue(self, i)),
                        _ => fvalue(self, i).mul_add(a, self.vrf.getf(based, i)),
                    };
                    self.vrf.setf(based, i, r);
                }
                self.stats.flops += self.active_count(masked) * if macc { 2 } else { 1 };
                self.count_fpu(masked);
                self.complete(done);
            }
            V::Compare { op, vd, vs2, src1, masked } => {
                self.need_f64()?;
                self.check_group(vd, true)?;
                self.check_group(vs2, false)?;
                let scalar = match src1 {
                    VSrc::Scalar(f) => self.fr(f),
                    VSrc::Vector(_) => 0,
                };
                let d = self.vector_issue(scalar);
                let n = self.regs();
                self.ensure_layout(vs2.0 as usize, n, E64, d);
                if let Some(v) = vector_of(src1) {
                    self.ensure_layout(v.0 as usize, n, E64, d);
                }
                if masked {
                    self.ensure_layout(0, 1, LayoutTag::Mask, d);
                }
                let vdi = vd.0 as usize;
                if masked {
                    // Inactive bits keep their old value and must be moved.
                    self.ensure_layout(vdi, 1, LayoutTag::Mask, d);
                } else if self.vrf.tag(vdi) != LayoutTag::Mask {
                    self.vrf.replace_tag(vdi, LayoutTag::Mask);
                }
                let mut srcs = vec![vs2.0 as usize];
                srcs.extend(vector_of(src1).map(|v| v.0 as usize));
                let groups = self.group_count(self.vl, Sew::E64);
                let lat = self.cfg.fpu_latency;
                // Mask bits of a group share the destination word; wait for
                // earlier readers and writers of the whole register.
                let war = self.mask_rd[vdi].max(self.reg_last_read(vdi, 1)).max(self.reg_ready(vdi, 1).saturating_sub(lat));
                let t = self.schedule(Unit::Fpu, d.max(war), groups, &srcs, None, masked, None, lat);
                let writes: Vec<u64> = t.iter().map(|x| x + lat).collect();
                let done = writes.iter().copied().max().unwrap_or(0).max(d);
                for g in 0..self.gpr {
                    let i = self.idx(vdi, g);
                    self.wr[i] = self.wr[i].max(done);
                }
                self.mask_wr[vdi] = Some(writes);
                for i in 0..self.vl {
                    if !self.active(masked, i) {
                        continue;
                    }
                    let b = match src1 {
                        VSrc::Vector(v) => self.vrf.getf(v.0 as usize, i),
                        VSrc::Scalar(f) => self.s.fr(f),
                    };
                    let bit = op.apply(self.vrf.getf(vs2.0 as usize, i), b);
                    self.vrf.set_mask_bit(vdi, i, bit);
                }
                for i in self.vl..self.cfg.vlen {
                    self.vrf.set_mask_bit(vdi, i, true);
                }
                self.stats.flops += self.active_count(masked);
                self.count_fpu(masked);
                self.complete(done);
            }
            V::RedSum { order, vd, vs2, vs1, masked } => self.reduction(order, vd, vs2, vs1, masked)?,
            V::Slide1Up { vd, vs2, fill, masked } | V::Slide1Down { vd, vs2, fill, masked } => {
                self.need_f64()?;
                self.check_group(vd, false)?;
                self.check_group(vs2, false)?;
                let up = matches!(instr, V::Slide1Up { .. });
                let d = self.vector_issue(self.fr(fill));
                let fillv = self.s.f[fill.0 as usize];
                self.slide(d, vd, vs2, if up { 1 } else { -1 }, self.vl, Some(fillv), masked);
            }
            V::SlideUp { vd, vs2, amount, masked } | V::SlideDown { vd, vs2, amount, masked } => {
                self.check_group(vd, false)?;
                self.check_group(vs2, false)?;
                let (k, ready) = match amount {
                    SlideAmount::Reg(r) => (self.s.xr(r), self.xr(r)),
                    SlideAmount::Imm(i) => (i, 0),
                };
                let d = self.vector_issue(ready);
                let max = vlmax(self.sew, self.lmul, self.cfg.vlen);
                let k = k.min(max as u64) as i64;
                let up = matches!(instr, V::SlideUp { .. });
                self.slide(d, vd, vs2, if up { k } else { -k }, max, None, masked);
            }
            V::Merge { vd, vs2, fs1 } => {
                self.need_f64()?;
                self.check_group(vd, false)?;
                self.check_group(vs2, false)?;
                let d = self.vector_issue(self.fr(fs1));
                let n = self.regs();
                self.ensure_layout(vd.0 as usize, n, E64, d);
                self.ensure_layout(vs2.0 as usize, n, E64, d);
                self.ensure_layout(0, 1, LayoutTag::Mask, d);
                let groups = self.group_count(self.vl, Sew::E64);
                let lat = self.cfg.fpu_latency;
                let t = self.schedule(Unit::Fpu, d, groups, &[vs2.0 as usize], None, true, Some(vd.0 as usize), lat);
                let writes: Vec<u64> = t.iter().map(|x| x + lat).collect();
                let done = self.write_groups(vd.0 as usize, &writes).max(d);
                let f = self.s.f[fs1.0 as usize];
                for i in 0..self.vl {
                    let v = if self.vrf.mask_bit(0, i) { f } else { self.vrf.get(vs2.0 as usize, i, Sew::E64) };
                    self.vrf.set(vd.0 as usize, i, Sew::E64, v);
                }
                self.complete(done);
            }
            V::Splat { vd, fs1 } => {
                self.need_f64()?;
                self.check_group(vd, false)?;
                let d = self.vector_issue(self.fr(fs1));
                self.ensure_layout(vd.0 as usize, self.regs(), E64, d);
                let groups = self.group_count(self.vl, Sew::E64);
                let lat = self.cfg.fpu_latency;
                let t = self.schedule(Unit::Fpu, d, groups, &[], None, false, Some(vd.0 as usize), lat);
                let writes: Vec<u64> = t.iter().map(|x| x + lat).collect();
                let done = self.write_groups(vd.0 as usize, &writes).max(d);
                let f = self.s.f[fs1.0 as usize];
                for i in 0..self.vl {
                    self.vrf.set(vd.0 as usize, i, Sew::E64, f);
                }
                self.complete(done);
            }
            V::MoveToScalar { fd, vs2 } => {
                self.need_f64()?;
                let d = self.vector_issue(0);
                let v = vs2.0 as usize;
                self.ensure_layout(v, 1, E64, d);
                let i = self.idx(v, 0);
                let read = d.max(self.wr[i]);
                self.rd[i] = self.rd[i].max(read);
                // The value returns to the scalar core over the REQI response path.
                let back = read + 1 + self.cfg.reqi_cuts as u64;
                self.s.f[fd.0 as usize] = self.vrf.get(v, 0, Sew::E64);
                self.fready[fd.0 as usize] = back;
                self.complete(back);
            }
        }
        Ok(())
    }

    /// Slide by `amount` (positive = up). `src_len` bounds readable source
    /// elements; `fill` is the scalar for the vacated end of a slide-by-1.
    #[allow(clippy::too_many_arguments)]
    fn slide(&mut self, d: u64, vd: VReg, vs2: VReg, amount: i64, src_len: usize, fill: Option<u64>, masked: bool) {
        let n = self.regs();
        let (vdi, vsi) = (vd.0 as usize, vs2.0 as usize);
        let eb = self.sew.bytes();
        let tag = LayoutTag::Standard(self.sew);
        self.ensure_layout(vdi, n, tag, d);
        self.ensure_layout(vsi, n, tag, d);
        if masked {
            self.ensure_layout(0, 1, LayoutTag::Mask, d);
        }
        let vl = self.vl;
        let gs = self.group_size(self.sew);
        let groups = self.group_count(vl, self.sew);
        let src_groups = self.group_count(src_len, self.sew).max(1);
        let k = amount.unsigned_abs() as usize;
        // Source element feeding destination element i, if any.
        let source = |i: usize| -> Option<usize> {
            if amount > 0 {
                i.checked_sub(k)
            } else {
                let j = i + k;
                if fill.is_some() && j >= vl {
                    None
                } else if j < src_len {
                    Some(j)
                } else {
                    None
                }
            }
        };
        // Extra readiness from neighbouring source groups.
        let mut extra = vec![0u64; groups];
        for (g, x) in extra.iter_mut().enumerate() {
            let lo = g * gs;
            let hi = ((g + 1) * gs).min(vl) - 1;
            let (a, b) = if amount > 0 {
                (lo.saturating_sub(k) / gs, hi.saturating_sub(k) / gs)
            } else {
                ((lo + k) / gs, (hi + k) / gs)
            };
            for sg in a..=b.min(src_groups - 1) {
                *x = (*x).max(self.wr[self.idx(vsi, sg)]);
            }
        }
        let lat = self.cfg.sldu_latency;
        let t = self.schedule(Unit::Sldu, d, groups, &[], Some(&extra), masked, Some(vdi), lat);
        for (g, &tg) in t.iter().enumerate() {
            let lo = g * gs;
            let hi = ((g + 1) * gs).min(vl) - 1;
            let (a, b) = if amount > 0 { (lo.saturating_sub(k) / gs, hi.saturating_sub(k) / gs) } else { ((lo + k) / gs, (hi + k) / gs) };
            for sg in a..=b.min(src_groups - 1) {
                let i = self.idx(vsi, sg);
                self.rd[i] = self.rd[i].max(tg);
            }
        }
        // Element moves; cross-cluster ones travel over the ring.
        let (lanes, clusters) = (self.cfg.lanes, self.cfg.clusters);
        let per = self.cfg.vlen / (eb * 8);
        let src_vals: Vec<u64> = (0..src_len.min(n * per)).map(|j| self.vrf.get(vsi, j, self.sew)).collect();
        let mut writes: Vec<u64> = t.iter().map(|x| x + lat).collect();
        for i in 0..vl {
            if !self.active(masked, i) {
                continue;
            }
            let value = match source(i) {
                Some(j) => {
                    let (from, to) = (element_home(j % per, lanes, clusters), element_home(i % per, lanes, clusters));
                    if from.cluster != to.cluster {
                        let g = i / gs;
                        let (direction, hops) = route(from.cluster, to.cluster, clusters);
                        let inject = t[g];
                        let p = RingPacket { payload: src_vals[j], src: from.cluster, dst: to.cluster, direction, inject };
                        let deliver = self.ring.send(&p);
                        self.stats.ring_stall += deliver - (inject + hops as u64 * self.ring.hop_latency());
                        writes[g] = writes[g].max(deliver + lat);
                    }
                    src_vals[j]
                }
                None if amount > 0 && fill.is_none() => continue,
                None => fill.unwrap_or(0),
            };
            self.vrf.set(vdi, i, self.sew, value);
        }
        let done = self.write_groups(vdi, &writes).max(d);
        self.complete(done);
    }

    fn reduction(&mut self, _order: ReductionOrder, vd: VReg, vs2: VReg, vs1: VReg, masked: bool) -> Result<(), ExecError> {
        self.need_f64()?;
        self.check_group(vs2, false)?;
        let d = self.vector_issue(0);
        if self.vl == 0 {
            self.complete(d);
            return Ok(());
        }
        let (vdi, vsi, v1) = (vd.0 as usize, vs2.0 as usize, vs1.0 as usize);
        self.ensure_layout(vsi, self.regs(), E64, d);
        self.ensure_layout(v1, 1, E64, d);
        self.ensure_layout(vdi, 1, E64, d);
        if masked {
            self.ensure_layout(0, 1, LayoutTag::Mask, d);
        }
        let (lanes, clusters) = (self.cfg.lanes, self.cfg.clusters);
        let total = lanes * clusters;
        let lat = self.cfg.fpu_latency;
        let hop_in = self.cfg.sldu_latency;
        let groups = self.group_count(self.vl, Sew::E64);
        // Intra-lane stage: each lane accumulates its elements in index order.
        let t = self.schedule(Unit::Fpu, d, groups, &[vsi], None, masked, None, lat);
        let mut partial: Vec<Option<f64>> = vec![None; total];
        let mut ready = vec![0u64; total];
        let mut adds = 0u64;
        for i in 0..self.vl {
            if !self.active(masked, i) {
                continue;
            }
            let lane = self.lane_of(i);
            let (s, added) = combine(partial[lane], Some(self.vrf.getf(vsi, i)));
            partial[lane] = s;
            if added {
                adds += 1;
                self.stats.fpu_active[lane] += 1;
            }
            ready[lane] = t[i / total] + lat;
        }
        // Inter-lane stage: binary tree inside each cluster.
        for c in 0..clusters {
            let mut stride = 1;
            while stride < lanes {
                let mut l = 0;
                while l + stride < lanes {
                    let (dst, src) = (c * lanes + l, c * lanes + l + stride);
                    if partial[src].is_some() {
                        let arrive = ready[src] + hop_in;
                        let (s, added) = combine(partial[dst], partial[src]);
                        ready[dst] = if added { ready[dst].max(arrive) + lat } else { arrive };
                        if added {
                            adds += 1;
                            self.stats.fpu_active[dst] += 1;
                        }
                        partial[dst] = s;
                        partial[src] = None;
                    }
                    l += 2 * stride;
                }
                stride *= 2;
            }
        }
        // Inter-cluster stage over the ring.
        let schedule = reduction_schedule(clusters).expect("cluster count validated");
        for round in &schedule {
            for &(src_c, dst_c, dist) in &round.transfers {
                let (dst, src) = (dst_c * lanes, src_c * lanes);
                let Some(value) = partial[src] else { continue };
                let inject = ready[src] + hop_in;
                let p = RingPacket {
                    payload: value.to_bits(),
                    src: src_c,
                    dst: dst_c,
                    direction: RingDirection::TowardPrevious,
                    inject,
                };
                let deliver = self.ring.send(&p);
                self.stats.ring_stall += deliver - (inject + dist as u64 * self.ring.hop_latency());
                let (s, added) = combine(partial[dst], Some(value));
                ready[dst] = if added { ready[dst].max(deliver) + lat } else { deliver };
                if added {
                    adds += 1;
                    self.stats.fpu_active[dst] += 1;
                }
                partial[dst] = s;
                partial[src] = None;
            }
        }
        // Final stage: fold in vs1[0].
        let i1 = self.idx(v1, 0);
        let init_ready = self.wr[i1];
        self.rd[i1] = self.rd[i1].max(init_ready);
        let (res, added) = combine(Some(self.vrf.getf(v1, 0)), partial[0]);
        if added {
            adds += 1;
            self.stats.fpu_active[0] += 1;
        }
        let id = self.idx(vdi, 0);
        let done = ready[0].max(init_ready).max(self.rd[id]) + lat;
        self.wr[id] = done;
        self.mask_wr[vdi] = None;
        self.vrf.setf(vdi, 0, res.unwrap());
        self.stats.flops += adds;
        self.complete(done);
        Ok(())
    }
}
