//! Placement of vector elements and mask bits in the distributed register file.
//!
//! Element `i` of a register lives in cluster `(i / L) mod C`, lane `i mod L`,
//! at per-lane position `i / (L*C)`, independently of the element width.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::rvv::Sew;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementHome {
    pub cluster: usize,
    pub lane: usize,
    pub slot: usize,
}

impl ElementHome {
    /// Flat lane index `cluster * L + lane`.
    pub fn lane_index(&self, lanes: usize) -> usize {
        self.cluster * lanes + self.lane
    }
}

pub fn element_home(i: usize, lanes: usize, clusters: usize) -> ElementHome {
    ElementHome { cluster: (i / lanes) % clusters, lane: i % lanes, slot: i / (lanes * clusters) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskBitHome {
    pub home: ElementHome,
    /// 64-bit mask word inside the lane.
    pub word: usize,
    /// Bit position inside that word.
    pub bit: u32,
}

pub fn mask_bit_home(i: usize, lanes: usize, clusters: usize) -> MaskBitHome {
    let home = element_home(i, lanes, clusters);
    MaskBitHome { home, word: home.slot / 64, bit: (home.slot % 64) as u32 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutTag {
    Standard(Sew),
    Mask,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("register buffer does not match the geometry ({0})")]
    Shape(String),
}

/// Structural parameters of the distributed register file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub lanes: usize,
    pub clusters: usize,
    /// Bits per vector register.
    pub vlen: usize,
}

impl Geometry {
    pub fn total_lanes(&self) -> usize {
        self.lanes * self.clusters
    }

    /// Bytes of one register held by each lane.
    pub fn lane_bytes(&self) -> usize {
        self.vlen / 8 / self.total_lanes()
    }

    pub fn register_bytes(&self) -> usize {
        self.vlen / 8
    }

    pub fn home(&self, i: usize) -> ElementHome {
        element_home(i, self.lanes, self.clusters)
    }
}

/// One register split into per-lane byte chunks, indexed by `cluster * L + lane`.
pub type LaneChunks = Vec<Vec<u8>>;

/// Location of one bit of the register's flat (memory-order) image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BitPos {
    chunk: usize,
    cluster: usize,
    /// Bit offset inside the chunk.
    offset: usize,
}

fn locate(tag: LayoutTag, flat_bit: usize, g: &Geometry) -> BitPos {
    match tag {
        LayoutTag::Standard(sew) => {
            let byte = flat_bit / 8;
            let elem = byte / sew.bytes();
            let home = g.home(elem);
            let offset = (home.slot * sew.bytes() + byte % sew.bytes()) * 8 + flat_bit % 8;
            BitPos { chunk: home.lane_index(g.lanes), cluster: home.cluster, offset }
        }
        LayoutTag::Mask => {
            let home = g.home(flat_bit);
            BitPos { chunk: home.lane_index(g.lanes), cluster: home.cluster, offset: home.slot }
        }
    }
}

fn get_bit(bytes: &[u8], bit: usize) -> bool {
    bytes[bit / 8] >> (bit % 8) & 1 == 1
}

fn set_bit(bytes: &mut [u8], bit: usize, value: bool) {
    if value {
        bytes[bit / 8] |= 1 << (bit % 8);
    } else {
        bytes[bit / 8] &= !(1 << (bit % 8));
    }
}

/// Distribute a flat register image over the lanes.
pub fn encode(flat: &[u8], tag: LayoutTag, g: &Geometry) -> Result<LaneChunks, LayoutError> {
    if flat.len() != g.register_bytes() {
        return Err(LayoutError::Shape(format!("{} bytes, expected {}", flat.len(), g.register_bytes())));
    }
    let mut chunks = vec![vec![0u8; g.lane_bytes()]; g.total_lanes()];
    match tag {
        LayoutTag::Standard(sew) => {
            let eb = sew.bytes();
            for (elem, bytes) in flat.chunks_exact(eb).enumerate() {
                let home = g.home(elem);
                let off = home.slot * eb;
                chunks[home.lane_index(g.lanes)][off..off + eb].copy_from_slice(bytes);
            }
        }
        LayoutTag::Mask => {
            for bit in 0..flat.len() * 8 {
                let pos = locate(tag, bit, g);
                set_bit(&mut chunks[pos.chunk], pos.offset, get_bit(flat, bit));
            }
        }
    }
    Ok(chunks)
}

/// Gather a distributed register back into its flat image.
pub fn decode(chunks: &[Vec<u8>], tag: LayoutTag, g: &Geometry) -> Result<Vec<u8>, LayoutError> {
    if chunks.len() != g.total_lanes() || chunks.iter().any(|c| c.len() != g.lane_bytes()) {
        return Err(LayoutError::Shape("lane chunk count or size".into()));
    }
    let mut flat = vec![0u8; g.register_bytes()];
    match tag {
        LayoutTag::Standard(sew) => {
            let eb = sew.bytes();
            for (elem, bytes) in flat.chunks_exact_mut(eb).enumerate() {
                let home = g.home(elem);
                let off = home.slot * eb;
                bytes.copy_from_slice(&chunks[home.lane_index(g.lanes)][off..off + eb]);
            }
        }
        LayoutTag::Mask => {
            for bit in 0..g.register_bytes() * 8 {
                let pos = locate(tag, bit, g);
                set_bit(&mut flat, bit, get_bit(&chunks[pos.chunk], pos.offset));
            }
        }
    }
    Ok(flat)
}

/// Number of flat bits that carry the first `vl` elements in a conversion.
fn valid_bits(from: LayoutTag, to: LayoutTag, vl: usize, g: &Geometry) -> usize {
    let bits = match (from, to) {
        (LayoutTag::Mask, _) | (_, LayoutTag::Mask) => vl,
        (_, LayoutTag::Standard(sew)) => vl * sew.bits() as usize,
    };
    bits.min(g.vlen)
}

/// 64-bit packets that must cross a cluster boundary to convert the first
/// `vl` elements from `from` to `to`. A cluster packs all bits bound for
/// the same destination cluster into full packets.
pub fn transfer_packets(from: LayoutTag, to: LayoutTag, vl: usize, g: &Geometry) -> usize {
    if from == to {
        return 0;
    }
    let mut flows: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for bit in 0..valid_bits(from, to, vl, g) {
        let src = locate(from, bit, g);
        let dst = locate(to, bit, g);
        if src.cluster != dst.cluster {
            *flows.entry((src.cluster, dst.cluster)).or_default() += 1;
        }
    }
    flows.values().map(|&n| n.div_ceil(64)).sum()
}

/// Re-encode a register from one layout to another. The whole register is
/// converted; the transfer count covers the first `vl` elements.
pub fn reshuffle(
    chunks: &[Vec<u8>],
    from: LayoutTag,
    to: LayoutTag,
    vl: usize,
    g: &Geometry,
) -> Result<(LaneChunks, usize), LayoutError> {
    if from == to {
        return Ok((chunks.to_vec(), 0));
    }
    let flat = decode(chunks, from, g)?;
    let out = encode(&flat, to, g)?;
    Ok((out, transfer_packets(from, to, vl, g)))
}

/// Destination of one byte of an aligned memory beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BusTarget {
    pub cluster: usize,
    /// Byte offset on that cluster's bus.
    pub offset: usize,
}

/// Where each byte of an aligned memory beat goes: `result[b]` is the
/// (cluster, cluster-bus byte) target of beat byte `b`. The beat is
/// `clusters * cluster_bus_bytes` bytes wide.
pub fn glsu_shuffle_pattern(sew: Sew, clusters: usize, cluster_bus_bytes: usize) -> Vec<BusTarget> {
    let eb = sew.bytes();
    let lanes = cluster_bus_bytes / 8;
    let width = clusters * cluster_bus_bytes;
    (0..width)
        .map(|b| {
            let e = b / eb;
            let cluster = (e / lanes) % clusters;
            let rank = e / (lanes * clusters) * lanes + e % lanes;
            BusTarget { cluster, offset: rank * eb + b % eb }
        })
        .collect()
}

/// Lane and per-beat slot reached by a byte at `offset` on a cluster bus.
pub fn cluster_bus_destination(offset: usize, sew: Sew, lanes: usize) -> (usize, usize) {
    let rank = offset / sew.bytes();
    (rank % lanes, rank / lanes)
}

/// Text table of `element -> (cluster, lane, slot)` for the first `vl` elements.
pub fn layout_table(vl: usize, lanes: usize, clusters: usize) -> String {
    let mut out = String::from("element cluster lane slot\n");
    for i in 0..vl {
        let h = element_home(i, lanes, clusters);
        let _ = writeln!(out, "{i} {} {} {}", h.cluster, h.lane, h.slot);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn home_examples() {
        assert_eq!(element_home(0, 4, 4), ElementHome { cluster: 0, lane: 0, slot: 0 });
        assert_eq!(element_home(5, 4, 2), ElementHome { cluster: 1, lane: 1, slot: 0 });
        assert_eq!(element_home(9, 4, 2), ElementHome { cluster: 0, lane: 1, slot: 1 });
    }

    #[test]
    fn home_enumeration_is_bijective() {
        let (l, c) = (4, 2);
        let homes: HashSet<_> = (0..64).map(|i| element_home(i, l, c)).collect();
        assert_eq!(homes.len(), 64);
        assert!(homes.iter().all(|h| h.slot < 8));
    }

    #[test]
    fn mask_bit_examples() {
        let m = mask_bit_home(7, 4, 2);
        assert_eq!((m.home.cluster, m.home.lane), (1, 3));
        assert_eq!((m.word, m.bit), (0, 0));
        let m = mask_bit_home(8, 4, 2);
        assert_eq!((m.home.cluster, m.home.lane, m.bit), (0, 0, 1));
    }

    #[test]
    fn every_lane_gets_64_bits_per_word() {
        let (l, c) = (4, 2);
        let mut count = BTreeMap::new();
        for i in 0..64 * l * c {
            let m = mask_bit_home(i, l, c);
            *count.entry((m.home.cluster, m.home.lane, m.word)).or_insert(0) += 1;
        }
        assert_eq!(count.len(), l * c);
        assert!(count.values().all(|&n| n == 64));
    }

    #[test]
    fn consecutive_elements_change_cluster_only_at_lane_boundary() {
        for &(l, c) in &[(4, 2), (4, 4), (2, 8), (1, 4)] {
            for i in 0..200 {
                let (a, b) = (element_home(i, l, c), element_home(i + 1, l, c));
                if c > 1 {
                    assert_eq!(a.cluster != b.cluster, i % l == l - 1, "i={i} l={l} c={c}");
                }
            }
        }
    }

    fn geom() -> Geometry {
        Geometry { lanes: 4, clusters: 2, vlen: 4096 }
    }

    #[test]
    fn identity_reshuffle_is_free() {
        let g = geom();
        let chunks = vec![vec![7u8; g.lane_bytes()]; 8];
        let (out, n) = reshuffle(&chunks, LayoutTag::Mask, LayoutTag::Mask, 64, &g).unwrap();
        assert_eq!((out, n), (chunks, 0));
    }

    #[test]
    fn standard8_mask_round_trip() {
        let g = geom();
        let flat: Vec<u8> = (0..g.register_bytes()).map(|i| (i * 37 + 11) as u8).collect();
        let std8 = encode(&flat, LayoutTag::Standard(Sew::E8), &g).unwrap();
        let (mask, _) = reshuffle(&std8, LayoutTag::Standard(Sew::E8), LayoutTag::Mask, 512, &g).unwrap();
        let (back, _) = reshuffle(&mask, LayoutTag::Mask, LayoutTag::Standard(Sew::E8), 512, &g).unwrap();
        assert_eq!(back, std8);
        assert_eq!(decode(&mask, LayoutTag::Mask, &g).unwrap(), flat);
    }

    #[test]
    fn transfer_count_matches_bit_enumeration() {
        // Independent enumeration: every mask bit j sits in element j/64 in
        // the standard(64) layout and must reach element j's home cluster.
        let g = geom();
        let vl = 128;
        let mut per_pair: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for j in 0..vl {
            let src = element_home(j / 64, 4, 2);
            let dst = mask_bit_home(j, 4, 2);
            if src.cluster != dst.home.cluster {
                *per_pair.entry((src.cluster, dst.home.cluster)).or_default() += 1;
            }
        }
        let expected: usize = per_pair.values().map(|n| n.div_ceil(64)).sum();
        assert_eq!(transfer_packets(LayoutTag::Standard(Sew::E64), LayoutTag::Mask, vl, &g), expected);
        // Elements 0 and 1 live in cluster 0; the 64 bits owned by the lanes
        // of cluster 1 cross in one packet.
        assert_eq!(expected, 1);
    }

    #[test]
    fn shuffle_pattern_examples() {
        let id = glsu_shuffle_pattern(Sew::E64, 1, 32);
        assert!(id.iter().enumerate().all(|(b, t)| t.cluster == 0 && t.offset == b));
        let p = glsu_shuffle_pattern(Sew::E64, 2, 32);
        assert!(p[..32].iter().enumerate().all(|(b, t)| t.cluster == 0 && t.offset == b));
        assert!(p[32..].iter().enumerate().all(|(b, t)| t.cluster == 1 && t.offset == b));
    }

    #[test]
    fn shuffle_pattern_is_permutation() {
        for sew in [Sew::E8, Sew::E16, Sew::E32, Sew::E64] {
            for clusters in [1, 2, 4, 8, 16] {
                for bus in [8, 16, 32] {
                    let p = glsu_shuffle_pattern(sew, clusters, bus);
                    let set: HashSet<_> = p.iter().copied().collect();
                    assert_eq!(set.len(), p.len());
                    assert!(p.iter().all(|t| t.cluster < clusters && t.offset < bus));
                }
            }
        }
    }

    #[test]
    fn shuffle_then_lane_matches_element_home() {
        for sew in [Sew::E8, Sew::E16, Sew::E32, Sew::E64] {
            let (l, c) = (4, 4);
            let p = glsu_shuffle_pattern(sew, c, 8 * l);
            for (b, t) in p.iter().enumerate() {
                let e = b / sew.bytes();
                let (lane, slot) = cluster_bus_destination(t.offset, sew, l);
                assert_eq!(element_home(e, l, c), ElementHome { cluster: t.cluster, lane, slot });
            }
        }
    }

    proptest! {
        #[test]
        fn reshuffle_round_trip(seed in any::<u64>(), sew_idx in 0usize..4, vl in 0usize..4096) {
            let g = Geometry { lanes: 4, clusters: 4, vlen: 4096 };
            let sew = [Sew::E8, Sew::E16, Sew::E32, Sew::E64][sew_idx];
            let flat: Vec<u8> = (0..g.register_bytes())
                .map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64) as u8)
                .collect();
            let a = encode(&flat, LayoutTag::Standard(sew), &g).unwrap();
            let (m, _) = reshuffle(&a, LayoutTag::Standard(sew), LayoutTag::Mask, vl, &g).unwrap();
            let (back, _) = reshuffle(&m, LayoutTag::Mask, LayoutTag::Standard(sew), vl, &g).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
