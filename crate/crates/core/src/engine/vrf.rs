//! Vector register file distributed over lanes, with a layout tag per
//! architectural register.

use crate::layout::{element_home, reshuffle, Geometry, LaneChunks, LayoutTag};
use crate::rvv::Sew;

#[derive(Debug, Clone)]
pub struct Vrf {
    geom: Geometry,
    /// Per register, lane chunks stored back to back (`lane_index * lane_bytes`).
    regs: Vec<Vec<u8>>,
    tags: Vec<LayoutTag>,
}

impl Vrf {
    pub fn new(geom: Geometry) -> Self {
        let bytes = geom.register_bytes();
        Vrf { geom, regs: vec![vec![0; bytes]; 32], tags: vec![LayoutTag::Standard(Sew::E64); 32] }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn tag(&self, reg: usize) -> LayoutTag {
        self.tags[reg]
    }

    /// Elements of width `eb` bytes held by one register.
    fn per_register(&self, eb: usize) -> usize {
        self.geom.register_bytes() / eb
    }

    /// Register and byte offset of element `i` of the group starting at `base`.
    #[inline]
    pub fn locate(&self, base: usize, i: usize, eb: usize) -> (usize, usize) {
        let per = self.per_register(eb);
        let (reg, local) = (base + i / per, i % per);
        let h = element_home(local, self.geom.lanes, self.geom.clusters);
        (reg, h.lane_index(self.geom.lanes) * self.geom.lane_bytes() + h.slot * eb)
    }

    pub fn get(&self, base: usize, i: usize, sew: Sew) -> u64 {
        let eb = sew.bytes();
        let (reg, off) = self.locate(base, i, eb);
        let mut buf = [0u8; 8];
        buf[..eb].copy_from_slice(&self.regs[reg][off..off + eb]);
        u64::from_le_bytes(buf)
    }

    pub fn set(&mut self, base: usize, i: usize, sew: Sew, value: u64) {
        let eb = sew.bytes();
        let (reg, off) = self.locate(base, i, eb);
        self.regs[reg][off..off + eb].copy_from_slice(&value.to_le_bytes()[..eb]);
    }

    pub fn getf(&self, base: usize, i: usize) -> f64 {
        f64::from_bits(self.get(base, i, Sew::E64))
    }

    pub fn setf(&mut self, base: usize, i: usize, value: f64) {
        self.set(base, i, Sew::E64, value.to_bits());
    }

    pub fn byte(&self, base: usize, i: usize, eb: usize, b: usize) -> u8 {
        let (reg, off) = self.locate(base, i, eb);
        self.regs[reg][off + b]
    }

    pub fn set_byte(&mut self, base: usize, i: usize, eb: usize, b: usize, value: u8) {
        let (reg, off) = self.locate(base, i, eb);
        self.regs[reg][off + b] = value;
    }

    /// Bit `i` of a mask-layout register: slot bit of the element's home lane.
    fn mask_pos(&self, reg: usize, i: usize) -> (usize, u8) {
        debug_assert_eq!(self.tags[reg], LayoutTag::Mask);
        let h = element_home(i, self.geom.lanes, self.geom.clusters);
        (h.lane_index(self.geom.lanes) * self.geom.lane_bytes() + h.slot / 8, 1 << (h.slot % 8))
    }

    pub fn mask_bit(&self, reg: usize, i: usize) -> bool {
        let (byte, bit) = self.mask_pos(reg, i);
        self.regs[reg][byte] & bit != 0
    }

    pub fn set_mask_bit(&mut self, reg: usize, i: usize, value: bool) {
        let (byte, bit) = self.mask_pos(reg, i);
        if value {
            self.regs[reg][byte] |= bit;
        } else {
            self.regs[reg][byte] &= !bit;
        }
    }

    pub fn chunks(&self, reg: usize) -> LaneChunks {
        self.regs[reg].chunks(self.geom.lane_bytes()).map(|c| c.to_vec()).collect()
    }

    /// Give `reg` the layout `to` without preserving its contents, for a
    /// write that replaces the whole register.
    pub fn replace_tag(&mut self, reg: usize, to: LayoutTag) {
        self.tags[reg] = to;
        self.regs[reg].fill(0);
    }

    /// Re-encode `reg` under `to`; returns the cross-cluster packet count,
    /// or `None` if it already had that layout.
    pub fn retag(&mut self, reg: usize, to: LayoutTag) -> Option<usize> {
        let from = self.tags[reg];
        if from == to {
            return None;
        }
        let vl = match to {
            LayoutTag::Mask => self.geom.vlen,
            LayoutTag::Standard(sew) => self.geom.vlen / sew.bits() as usize,
        };
        let (out, packets) =
            reshuffle(&self.chunks(reg), from, to, vl, &self.geom).expect("register shape is fixed by the geometry");
        self.regs[reg] = out.concat();
        self.tags[reg] = to;
        Some(packets)
    }
}
