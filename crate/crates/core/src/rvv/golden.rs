//! Flat, element-wise reference semantics. The timed engine must reproduce
//! its final memory bit for bit.

use std::collections::HashMap;

use super::isa::*;
use super::{loop_step, ExecError, Program, STEP_LIMIT};
use crate::image::MemoryImage;
use crate::layout::element_home;

/// Architectural scalar state: integer and FP register files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarState {
    pub x: [u64; 32],
    /// FP registers as raw IEEE-754 bits.
    pub f: [u64; 32],
}

impl Default for ScalarState {
    fn default() -> Self {
        ScalarState { x: [0; 32], f: [0; 32] }
    }
}

impl ScalarState {
    pub fn xr(&self, r: XReg) -> u64 {
        self.x[r.0 as usize]
    }

    pub fn set_x(&mut self, r: XReg, v: u64) {
        if r.0 != 0 {
            self.x[r.0 as usize] = v;
        }
    }

    pub fn fr(&self, r: FReg) -> f64 {
        f64::from_bits(self.f[r.0 as usize])
    }

    pub fn set_f(&mut self, r: FReg, v: f64) {
        self.f[r.0 as usize] = v.to_bits();
    }
}

#[derive(Debug, Clone)]
pub struct GoldenResult {
    pub memory: MemoryImage,
    pub scalar: ScalarState,
    /// Vector floating-point operations on active elements.
    pub flops: u64,
    pub executed: u64,
}

/// Combine two optional partial sums; absent partials are skipped.
fn combine(a: Option<f64>, b: Option<f64>) -> (Option<f64>, u64) {
    match (a, b) {
        (Some(x), Some(y)) => (Some(x + y), 1),
        (x, None) => (x, 0),
        (None, y) => (y, 0),
    }
}

fn tree_fold(parts: &mut [Option<f64>]) -> u64 {
    let mut adds = 0;
    let mut stride = 1;
    while stride < parts.len() {
        let mut i = 0;
        while i + stride < parts.len() {
            let (v, n) = combine(parts[i], parts[i + stride]);
            parts[i] = v;
            parts[i + stride] = None;
            adds += n;
            i += 2 * stride;
        }
        stride *= 2;
    }
    adds
}

/// Sum `(index, value)` pairs in the fixed machine order: per lane by
/// ascending index, then a binary tree over lanes of each cluster, then a
/// binary tree over clusters. Returns the sum (if any element) and the
/// number of additions performed.
pub fn reduction_tree_sum(
    elements: impl IntoIterator<Item = (usize, f64)>,
    lanes: usize,
    clusters: usize,
) -> (Option<f64>, u64) {
    let mut partial: Vec<Option<f64>> = vec![None; lanes * clusters];
    let mut adds = 0;
    for (i, v) in elements {
        let h = element_home(i, lanes, clusters);
        let slot = &mut partial[h.lane_index(lanes)];
        let (s, n) = combine(*slot, Some(v));
        *slot = s;
        adds += n;
    }
    let mut cluster_sums = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let lanes_of = &mut partial[c * lanes..(c + 1) * lanes];
        adds += tree_fold(lanes_of);
        cluster_sums.push(lanes_of[0]);
    }
    adds += tree_fold(&mut cluster_sums);
    (cluster_sums[0], adds)
}

struct Golden<'a> {
    program: &'a Program,
    lanes: usize,
    clusters: usize,
    vlen: usize,
    vrf: Vec<u8>,
    sew: Sew,
    lmul: Lmul,
    vl: usize,
    s: ScalarState,
    mem: MemoryImage,
    flops: u64,
    pc: usize,
}

impl<'a> Golden<'a> {
    fn vlenb(&self) -> usize {
        self.vlen / 8
    }

    fn illegal(&self, reason: impl Into<String>) -> ExecError {
        ExecError::Illegal { pc: self.pc, reason: reason.into() }
    }

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

    fn off(&self, v: VReg, i: usize) -> usize {
        v.0 as usize * self.vlenb() + i * self.sew.bytes()
    }

    fn get(&self, v: VReg, i: usize) -> u64 {
        let o = self.off(v, i);
        let mut buf = [0u8; 8];
        let eb = self.sew.bytes();
        buf[..eb].copy_from_slice(&self.vrf[o..o + eb]);
        u64::from_le_bytes(buf)
    }

    fn set(&mut self, v: VReg, i: usize, val: u64) {
        let o = self.off(v, i);
        let eb = self.sew.bytes();
        self.vrf[o..o + eb].copy_from_slice(&val.to_le_bytes()[..eb]);
    }

    fn getf(&self, v: VReg, i: usize) -> f64 {
        f64::from_bits(self.get(v, i))
    }

    fn setf(&mut self, v: VReg, i: usize, val: f64) {
        self.set(v, i, val.to_bits());
    }

    fn mask_bit(&self, v: VReg, i: usize) -> bool {
        self.vrf[v.0 as usize * self.vlenb() + i / 8] >> (i % 8) & 1 == 1
    }

    fn set_mask_bit(&mut self, v: VReg, i: usize, bit: bool) {
        let idx = v.0 as usize * self.vlenb() + i / 8;
        let b = &mut self.vrf[idx];
        if bit {
            *b |= 1 << (i % 8);
        } else {
            *b &= !(1 << (i % 8));
        }
    }

    fn active(&self, masked: bool, i: usize) -> bool {
        !masked || self.mask_bit(VReg(0), i)
    }

    fn src1(&self, src: VSrc, i: usize) -> f64 {
        match src {
            VSrc::Vector(v) => self.getf(v, i),
            VSrc::Scalar(f) => self.s.fr(f),
        }
    }

    fn mem_err(&self, e: crate::image::MemoryError) -> ExecError {
        ExecError::Memory { pc: self.pc, source: e }
    }

    fn vector(&mut self, instr: VectorInstruction) -> Result<(), ExecError> {
        use VectorInstruction as V;
        match instr {
            V::Vsetvli { rd, avl, sew, lmul } => {
                let requested = if avl.0 == 0 { u64::MAX } else { self.s.xr(avl) };
                let vl = vsetvl(requested, sew, lmul, self.vlen).map_err(|e| self.illegal(e.to_string()))?;
                self.sew = sew;
                self.lmul = lmul;
                self.vl = vl;
                self.s.set_x(rd, vl as u64);
            }
            V::Load { eew, vd, base, masked } | V::LoadStrided { eew, vd, base, masked, .. } => {
                if eew != self.sew {
                    return Err(self.illegal("load EEW differs from SEW"));
                }
                self.check_group(vd, false)?;
                let stride = match instr {
                    V::LoadStrided { stride, .. } => self.s.xr(stride),
                    _ => eew.bytes() as u64,
                };
                let base = self.s.xr(base);
                for i in 0..self.vl {
                    if self.active(masked, i) {
                        let addr = base.wrapping_add(stride.wrapping_mul(i as u64));
                        let bytes = self.mem.read(addr, eew.bytes()).map_err(|e| self.mem_err(e))?;
                        let mut buf = [0u8; 8];
                        buf[..eew.bytes()].copy_from_slice(bytes);
                        self.set(vd, i, u64::from_le_bytes(buf));
                    }
                }
            }
            V::Store { eew, vs3, base, masked } | V::StoreStrided { eew, vs3, base, masked, .. } => {
                if eew != self.sew {
                    return Err(self.illegal("store EEW differs from SEW"));
                }
                self.check_group(vs3, false)?;
                let stride = match instr {
                    V::StoreStrided { stride, .. } => self.s.xr(stride),
                    _ => eew.bytes() as u64,
                };
                let base = self.s.xr(base);
                for i in 0..self.vl {
                    if self.active(masked, i) {
                        let addr = base.wrapping_add(stride.wrapping_mul(i as u64));
                        let val = self.get(vs3, i).to_le_bytes();
                        self.mem.write(addr, &val[..eew.bytes()]).map_err(|e| self.mem_err(e))?;
                    }
                }
            }
            V::Arith { op, vd, vs2, src1, masked } => {
                self.need_f64()?;
                for v in [Some(vd), Some(vs2), vector_of(src1)].into_iter().flatten() {
                    self.check_group(v, false)?;
                }
                for i in 0..self.vl {
                    if self.active(masked, i) {
                        let r = op.apply(self.getf(vs2, i), self.src1(src1, i));
                        self.setf(vd, i, r);
                        self.flops += 1;
                    }
                }
            }
            V::Macc { vd, src1, vs2, masked } => {
                self.need_f64()?;
                for v in [Some(vd), Some(vs2), vector_of(src1)].into_iter().flatten() {
                    self.check_group(v, false)?;
                }
                for i in 0..self.vl {
                    if self.active(masked, i) {
                        let r = self.src1(src1, i).mul_add(self.getf(vs2, i), self.getf(vd, i));
                        self.setf(vd, i, r);
                        self.flops += 2;
                    }
                }
            }
            V::Compare { op, vd, vs2, src1, masked } => {
                self.need_f64()?;
                self.check_group(vd, true)?;
                self.check_group(vs2, false)?;
                for i in 0..self.vl {
                    if self.active(masked, i) {
                        let bit = op.apply(self.getf(vs2, i), self.src1(src1, i));
                        self.set_mask_bit(vd, i, bit);
                        self.flops += 1;
                    }
                }
                // Mask destinations are tail-agnostic; the tail is filled with ones.
                for i in self.vl..self.vlen {
                    self.set_mask_bit(vd, i, true);
                }
            }
            V::RedSum { vd, vs2, vs1, masked, .. } => {
                self.need_f64()?;
                self.check_group(vs2, false)?;
                let elems: Vec<(usize, f64)> =
                    (0..self.vl).filter(|&i| self.active(masked, i)).map(|i| (i, self.getf(vs2, i))).collect();
                if self.vl == 0 {
                    return Ok(());
                }
                let (sum, adds) = reduction_tree_sum(elems, self.lanes, self.clusters);
                let init = self.getf(vs1, 0);
                let (res, n) = combine(Some(init), sum);
                self.setf(vd, 0, res.unwrap());
                self.flops += adds + n;
            }
            V::Slide1Up { vd, vs2, fill, masked } | V::Slide1Down { vd, vs2, fill, masked } => {
                self.need_f64()?;
                self.check_group(vd, false)?;
                self.check_group(vs2, false)?;
                let src: Vec<u64> = (0..self.vl).map(|i| self.get(vs2, i)).collect();
                let up = matches!(instr, V::Slide1Up { .. });
                let fillv = self.s.f[fill.0 as usize];
                for i in 0..self.vl {
                    if !self.active(masked, i) {
                        continue;
                    }
                    let v = if up {
                        if i == 0 { fillv } else { src[i - 1] }
                    } else if i + 1 == self.vl {
                        fillv
                    } else {
                        src[i + 1]
                    };
                    self.set(vd, i, v);
                }
            }
            V::SlideUp { vd, vs2, amount, masked } | V::SlideDown { vd, vs2, amount, masked } => {
                self.check_group(vd, false)?;
                self.check_group(vs2, false)?;
                let k = match amount {
                    SlideAmount::Reg(r) => self.s.xr(r),
                    SlideAmount::Imm(i) => i,
                };
                let vlmax = vlmax(self.sew, self.lmul, self.vlen);
                let src: Vec<u64> = (0..vlmax).map(|i| self.get(vs2, i)).collect();
                let up = matches!(instr, V::SlideUp { .. });
                for i in 0..self.vl {
                    if !self.active(masked, i) {
                        continue;
                    }
                    if up {
                        if (i as u64) >= k {
                            self.set(vd, i, src[i - k as usize]);
                        }
                    } else {
                        let j = (i as u64).saturating_add(k);
                        let v = if j < vlmax as u64 { src[j as usize] } else { 0 };
                        self.set(vd, i, v);
                    }
                }
            }
            V::Merge { vd, vs2, fs1 } => {
                self.need_f64()?;
                self.check_group(vd, false)?;
                self.check_group(vs2, false)?;
                let f = self.s.f[fs1.0 as usize];
                for i in 0..self.vl {
                    let v = if self.mask_bit(VReg(0), i) { f } else { self.get(vs2, i) };
                    self.set(vd, i, v);
                }
            }
            V::Splat { vd, fs1 } => {
                self.need_f64()?;
                self.check_group(vd, false)?;
                let f = self.s.f[fs1.0 as usize];
                for i in 0..self.vl {
                    self.set(vd, i, f);
                }
            }
            V::MoveToScalar { fd, vs2 } => {
                self.need_f64()?;
                let v = self.get(vs2, 0);
                self.s.f[fd.0 as usize] = v;
            }
        }
        Ok(())
    }

    fn scalar(&mut self, instr: &ScalarInstruction) -> Result<Option<usize>, ExecError> {
        use ScalarInstruction as S;
        match instr {
            S::Li { rd, imm } => self.s.set_x(*rd, *imm as u64),
            S::Addi { rd, rs, imm } => self.s.set_x(*rd, self.s.xr(*rs).wrapping_add(*imm as u64)),
            S::Slli { rd, rs, shamt } => self.s.set_x(*rd, self.s.xr(*rs) << shamt),
            S::Alu { op, rd, rs1, rs2 } => {
                let (a, b) = (self.s.xr(*rs1), self.s.xr(*rs2));
                let v = match op {
                    IntOp::Add => a.wrapping_add(b),
                    IntOp::Sub => a.wrapping_sub(b),
                    IntOp::Sll => a << (b & 63),
                    IntOp::Mul => a.wrapping_mul(b),
                };
                self.s.set_x(*rd, v);
            }
            S::Fld { fd, base, offset } => {
                let addr = self.s.xr(*base).wrapping_add(*offset as u64);
                let v = self.mem.read_u64(addr).map_err(|e| self.mem_err(e))?;
                self.s.f[fd.0 as usize] = v;
            }
            S::Fsd { fs, base, offset } => {
                let addr = self.s.xr(*base).wrapping_add(*offset as u64);
                let v = self.s.f[fs.0 as usize];
                self.mem.write_u64(addr, v).map_err(|e| self.mem_err(e))?;
            }
            S::Fp { op, fd, fs1, fs2 } => {
                let v = op.apply(self.s.fr(*fs1), self.s.fr(*fs2));
                self.s.set_f(*fd, v);
            }
            S::FmvD { fd, fs } => self.s.f[fd.0 as usize] = self.s.f[fs.0 as usize],
            S::Bnez { rs, target } => {
                if self.s.xr(*rs) != 0 {
                    return Ok(Some(self.program.target(target)));
                }
            }
            S::Beqz { rs, target } => {
                if self.s.xr(*rs) == 0 {
                    return Ok(Some(self.program.target(target)));
                }
            }
            S::Jump { target } => return Ok(Some(self.program.target(target))),
        }
        Ok(None)
    }
}

fn vector_of(src: VSrc) -> Option<VReg> {
    match src {
        VSrc::Vector(v) => Some(v),
        VSrc::Scalar(_) => None,
    }
}

/// Execute `program` functionally on `image` for a machine of `lanes` x
/// `clusters` lanes and `vlen`-bit vector registers.
pub fn golden_execute(
    program: &Program,
    image: &MemoryImage,
    lanes: usize,
    clusters: usize,
    vlen: usize,
) -> Result<GoldenResult, ExecError> {
    let mut mem = image.clone();
    for seg in &program.data {
        mem.write(seg.addr, &seg.bytes).map_err(|e| ExecError::Memory { pc: 0, source: e })?;
    }
    let mut g = Golden {
        program,
        lanes,
        clusters,
        vlen,
        vrf: vec![0; 32 * vlen / 8],
        sew: Sew::E64,
        lmul: Lmul::M1,
        vl: 0,
        s: ScalarState::default(),
        mem,
        flops: 0,
        pc: 0,
    };
    let mut loops = HashMap::new();
    let mut executed = 0u64;
    while g.pc < program.instructions.len() {
        executed += 1;
        if executed > STEP_LIMIT {
            return Err(ExecError::StepLimit(STEP_LIMIT));
        }
        let next = match &program.instructions[g.pc] {
            Instruction::Vector(v) => {
                g.vector(*v)?;
                None
            }
            Instruction::Scalar(s) => g.scalar(s)?,
            Instruction::Loop { target, count } => {
                loop_step(&mut loops, g.pc, *count).then(|| program.target(target))
            }
        };
        g.pc = next.unwrap_or(g.pc + 1);
    }
    Ok(GoldenResult { memory: g.mem, scalar: g.s, flops: g.flops, executed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_with(values: &[(u64, f64)]) -> MemoryImage {
        let mut m = MemoryImage::new(0x1000, 0x1000).unwrap();
        for &(a, v) in values {
            m.write_f64(a, v).unwrap();
        }
        m
    }

    fn run(text: &str, image: &MemoryImage) -> GoldenResult {
        golden_execute(&Program::parse(text).unwrap(), image, 4, 2, 1024).unwrap()
    }

    #[test]
    fn vsetvl_examples() {
        assert_eq!(vsetvl(10, Sew::E64, Lmul::M1, 4096), Ok(10));
        assert_eq!(vsetvl(100, Sew::E64, Lmul::M1, 4096), Ok(64));
        assert_eq!(vsetvl(9000, Sew::E64, Lmul::M8, 65536), Ok(8192));
        assert_eq!(vsetvl(1, Sew::E64, Lmul::M1, 3000), Err(ConfigError::IllegalVlen(3000)));
    }

    #[test]
    fn dot_product() {
        let img = image_with(&[(0x1000, 1.0), (0x1008, 2.0), (0x1010, 3.0), (0x1100, 4.0), (0x1108, 5.0), (0x1110, 6.0)]);
        let r = run(
            "li a0, 3\nli a1, 0x1000\nli a2, 0x1100\nli a3, 0x1200\n\
             vsetvli t0, a0, e64, m1\nvle64.v v1, (a1)\nvle64.v v2, (a2)\nvfmul.vv v3, v1, v2\n\
             vfmv.v.f v4, f31\nvfredusum.vs v5, v3, v4\nvfmv.f.s fa0, v5\nfsd fa0, 0(a3)\n",
            &img,
        );
        assert_eq!(r.memory.read_f64(0x1200).unwrap(), 32.0);
        assert_eq!(r.flops, 6);
    }

    #[test]
    fn slide1down_fills_last_element() {
        let img = image_with(&[(0x1000, 1.0), (0x1008, 2.0), (0x1010, 3.0), (0x1018, 4.0), (0x1100, 9.0)]);
        let r = run(
            "li a0, 4\nli a1, 0x1000\nli a2, 0x1100\nfld fa0, 0(a2)\nvsetvli t0, a0, e64, m1\n\
             vle64.v v1, (a1)\nvfslide1down.vf v2, v1, fa0\nvse64.v v2, (a1)\n",
            &img,
        );
        let got: Vec<f64> = (0..4).map(|i| r.memory.read_f64(0x1000 + 8 * i).unwrap()).collect();
        assert_eq!(got, vec![2.0, 3.0, 4.0, 9.0]);
    }

    #[test]
    fn tree_order_is_fixed() {
        // Lanes of cluster 0 hold {0,1,2,3,8,9,...}; verify against a manual fold.
        let vals: Vec<f64> = (0..16).map(|i| 1.0 / (i as f64 + 3.0)).collect();
        let (s, adds) = reduction_tree_sum(vals.iter().copied().enumerate(), 4, 2);
        let lane = |c: usize, l: usize| vals[c * 4 + l] + vals[8 + c * 4 + l];
        let cl2 = |c: usize| {
            let (a, b, d, e) = (lane(c, 0), lane(c, 1), lane(c, 2), lane(c, 3));
            (a + b) + (d + e)
        };
        assert_eq!(s.unwrap().to_bits(), (cl2(0) + cl2(1)).to_bits());
        assert_eq!(adds, 15);
    }

    #[test]
    fn out_of_bounds_faults() {
        let img = MemoryImage::new(0x1000, 64).unwrap();
        let p = Program::parse("li a0, 16\nli a1, 0x1000\nvsetvli t0, a0, e64, m1\nvle64.v v0, (a1)\n").unwrap();
        let err = golden_execute(&p, &img, 4, 2, 1024).unwrap_err();
        assert!(matches!(err, ExecError::Memory { pc: 3, .. }));
    }

    #[test]
    fn loop_directive_repeats_body() {
        let img = MemoryImage::new(0x1000, 64).unwrap();
        let r = run("li a0, 0\nbody:\naddi a0, a0, 2\n.loop body 5\n", &img);
        assert_eq!(r.scalar.x[10], 10);
    }

    #[test]
    fn misaligned_group_is_illegal() {
        let img = MemoryImage::new(0x1000, 64).unwrap();
        let p = Program::parse("li a0, 4\nvsetvli t0, a0, e64, m4\nvfadd.vv v2, v4, v8\n").unwrap();
        assert!(matches!(golden_execute(&p, &img, 4, 2, 1024), Err(ExecError::Illegal { pc: 2, .. })));
    }
}
