//! L2 memory port and the three-stage Global Load-Store Unit
//! (Align -> Addrgen -> Shuffle).

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::image::{MemoryError, MemoryImage};
use crate::layout::glsu_shuffle_pattern;
use crate::rvv::Sew;

/// Requests are additionally split at page boundaries.
pub const PAGE_BYTES: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRequest {
    pub id: u32,
    pub base: u64,
    pub length: usize,
    pub direction: Direction,
    pub sew: Sew,
}

impl MemRequest {
    pub fn unit_stride(id: u32, base: u64, vl: usize, sew: Sew, direction: Direction) -> Self {
        MemRequest { id, base, length: vl * sew.bytes(), direction, sew }
    }
}

/// One bus transfer produced by Addrgen: `len` bytes starting at `addr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeatDesc {
    pub addr: u64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlsuError {
    #[error("request id {0} already has a live table entry")]
    DuplicateRequest(u32),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Power-of-two shifts (largest first) whose sum is `offset`.
pub fn align_plan(offset: usize, w_mem: usize) -> Vec<usize> {
    debug_assert!(w_mem.is_power_of_two() && offset < w_mem);
    let mut shifts = Vec::new();
    let mut bit = w_mem >> 1;
    while bit > 0 {
        if offset & bit != 0 {
            shifts.push(bit);
        }
        bit >>= 1;
    }
    shifts
}

/// Rotate a bus word left through the staged shifts.
pub fn align_rotate(word: &[u8], plan: &[usize]) -> Vec<u8> {
    let mut out = word.to_vec();
    for &s in plan {
        out.rotate_left(s % word.len().max(1));
    }
    out
}

/// Inverse of [`align_rotate`].
pub fn unalign_rotate(word: &[u8], plan: &[usize]) -> Vec<u8> {
    let mut out = word.to_vec();
    for &s in plan.iter().rev() {
        out.rotate_right(s % word.len().max(1));
    }
    out
}

/// Split a request into beats, each inside one `w_mem`-aligned window and
/// one 4 KiB page, in address order.
pub fn addrgen_split(req: &MemRequest, w_mem: usize) -> Vec<BeatDesc> {
    let w = w_mem as u64;
    let end = req.base + req.length as u64;
    let mut beats = Vec::new();
    let mut addr = req.base;
    while addr < end {
        let window_end = (addr / w + 1) * w;
        let page_end = (addr / PAGE_BYTES + 1) * PAGE_BYTES;
        let stop = end.min(window_end).min(page_end);
        beats.push(BeatDesc { addr, len: (stop - addr) as usize });
        addr = stop;
    }
    beats
}

/// Levels of the GLSU without any added cuts: one per align shift level,
/// one for Addrgen, one per shuffle level.
pub fn glsu_base_latency(w_mem: usize, clusters: usize) -> u64 {
    (w_mem.trailing_zeros() + 1 + clusters.trailing_zeros()) as u64
}

/// Cycles the GLSU adds between memory and the cluster VLSUs. Each cut
/// registers both the request and the response path.
pub fn glsu_latency(_direction: Direction, cuts: u32, w_mem: usize, clusters: usize) -> u64 {
    glsu_base_latency(w_mem, clusters) + 2 * cuts as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceBeat {
    pub direction: Direction,
    /// Cycle at which the beat is ready to use the memory port.
    pub issue: u64,
}

/// Grant cycle and completion cycle of one beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceGrant {
    pub beat: usize,
    pub grant: u64,
    pub completion: u64,
}

/// Serve beats on a single shared port, one beat per cycle. Loads and
/// stores are each served in order; when both have a ready beat the port
/// alternates between them. The result is the grant log in grant order.
pub fn memory_service(beats: &[ServiceBeat], l_mem: u64, glsu_lat: u64) -> Vec<ServiceGrant> {
    let loads: Vec<usize> = (0..beats.len()).filter(|&i| beats[i].direction == Direction::Load).collect();
    let stores: Vec<usize> = (0..beats.len()).filter(|&i| beats[i].direction == Direction::Store).collect();
    let (mut li, mut si) = (0, 0);
    let mut last = Direction::Store;
    let mut t = 0u64;
    let mut log = Vec::with_capacity(beats.len());
    while li < loads.len() || si < stores.len() {
        let load_ready = loads.get(li).filter(|&&b| beats[b].issue <= t);
        let store_ready = stores.get(si).filter(|&&b| beats[b].issue <= t);
        let pick = match (load_ready, store_ready) {
            (Some(_), Some(_)) if last == Direction::Load => Direction::Store,
            (Some(_), _) => Direction::Load,
            (None, Some(_)) => Direction::Store,
            (None, None) => {
                let next = [loads.get(li), stores.get(si)]
                    .into_iter()
                    .flatten()
                    .map(|&b| beats[b].issue)
                    .min()
                    .unwrap();
                t = next;
                continue;
            }
        };
        let beat = if pick == Direction::Load {
            li += 1;
            loads[li - 1]
        } else {
            si += 1;
            stores[si - 1]
        };
        log.push(ServiceGrant { beat, grant: t, completion: t + l_mem + glsu_lat });
        last = pick;
        t += 1;
    }
    log
}

/// Reservation calendar of the memory port (one beat per cycle).
#[derive(Debug, Clone, Default)]
pub struct MemoryPort {
    /// Busy intervals `[start, end)`, merged.
    busy: BTreeMap<u64, u64>,
}

impl MemoryPort {
    /// Earliest free cycle at or after `earliest`; marks it busy.
    pub fn reserve(&mut self, earliest: u64) -> u64 {
        let mut c = earliest;
        if let Some((_, &e)) = self.busy.range(..=c).next_back() {
            if e > c {
                c = e;
            }
        }
        let left = self.busy.range(..=c).next_back().filter(|(_, &e)| e == c).map(|(&s, _)| s);
        let right_end = self.busy.remove(&(c + 1));
        let start = left.unwrap_or(c);
        self.busy.insert(start, right_end.unwrap_or(c + 1));
        c
    }
}

/// Align and shuffle control state per in-flight request.
#[derive(Debug, Clone, Default)]
pub struct GlsuTables {
    align: HashMap<u32, Vec<usize>>,
    shuffle: HashMap<u32, (Sew, usize, u64)>,
}

impl GlsuTables {
    pub fn open(&mut self, req: &MemRequest, w_mem: usize) -> Result<(), GlsuError> {
        if self.align.contains_key(&req.id) {
            return Err(GlsuError::DuplicateRequest(req.id));
        }
        let offset = (req.base % w_mem as u64) as usize;
        self.align.insert(req.id, align_plan(offset, w_mem));
        self.shuffle.insert(req.id, (req.sew, req.length / req.sew.bytes(), req.base));
        Ok(())
    }

    pub fn plan(&self, id: u32) -> &[usize] {
        &self.align[&id]
    }

    pub fn close(&mut self, id: u32) {
        self.align.remove(&id);
        self.shuffle.remove(&id);
    }

    pub fn live(&self) -> usize {
        debug_assert_eq!(self.align.len(), self.shuffle.len());
        self.align.len()
    }
}

/// Data of one aligned stream beat as seen by each cluster's bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterBeat {
    pub index: usize,
    /// Valid bytes in this stream beat.
    pub valid: usize,
    /// Per-cluster bus contents (`8 * L` bytes each); bytes beyond `valid`
    /// are don't-care.
    pub clusters: Vec<Vec<u8>>,
    /// Which cluster-bus bytes carry valid data.
    pub enables: Vec<Vec<bool>>,
}

/// Functional datapath of the GLSU.
#[derive(Debug, Clone)]
pub struct Glsu {
    pub w_mem: usize,
    pub clusters: usize,
    pub lanes: usize,
    pub tables: GlsuTables,
}

impl Glsu {
    pub fn new(w_mem: usize, clusters: usize, lanes: usize) -> Self {
        Glsu { w_mem, clusters, lanes, tables: GlsuTables::default() }
    }

    fn cluster_bus(&self) -> usize {
        self.w_mem / self.clusters
    }

    /// Window-sized bus words of memory, indexed from the window holding `base`.
    fn read_windows(&self, mem: &MemoryImage, req: &MemRequest) -> Result<Vec<Vec<u8>>, GlsuError> {
        let w = self.w_mem as u64;
        let first = req.base / w;
        let mut windows: Vec<Vec<u8>> = Vec::new();
        for beat in addrgen_split(req, self.w_mem) {
            let idx = (beat.addr / w - first) as usize;
            if windows.len() <= idx {
                windows.resize(idx + 1, vec![0; self.w_mem]);
            }
            let off = (beat.addr % w) as usize;
            windows[idx][off..off + beat.len].copy_from_slice(mem.read(beat.addr, beat.len)?);
        }
        windows.push(vec![0; self.w_mem]);
        Ok(windows)
    }

    /// Aligned request stream split into `w_mem`-byte beats.
    fn align_stream(&self, windows: &[Vec<u8>], plan: &[usize], offset: usize) -> Vec<Vec<u8>> {
        let w = self.w_mem;
        let rotated: Vec<Vec<u8>> = windows.iter().map(|win| align_rotate(win, plan)).collect();
        (0..windows.len() - 1)
            .map(|j| {
                let mut beat = rotated[j][..w - offset].to_vec();
                beat.extend_from_slice(&rotated[j + 1][w - offset..]);
                beat
            })
            .collect()
    }

    /// Load path: memory -> Addrgen -> Align -> Shuffle, one entry per
    /// aligned stream beat.
    pub fn load(&mut self, mem: &MemoryImage, req: &MemRequest) -> Result<Vec<ClusterBeat>, GlsuError> {
        self.tables.open(req, self.w_mem)?;
        let result = self.load_inner(mem, req);
        self.tables.close(req.id);
        result
    }

    fn load_inner(&self, mem: &MemoryImage, req: &MemRequest) -> Result<Vec<ClusterBeat>, GlsuError> {
        if req.length == 0 {
            return Ok(Vec::new());
        }
        let offset = (req.base % self.w_mem as u64) as usize;
        let windows = self.read_windows(mem, req)?;
        let stream = self.align_stream(&windows, self.tables.plan(req.id), offset);
        let pattern = glsu_shuffle_pattern(req.sew, self.clusters, self.cluster_bus());
        let beats = req.length.div_ceil(self.w_mem);
        Ok(stream
            .into_iter()
            .take(beats)
            .enumerate()
            .map(|(j, data)| {
                let valid = (req.length - j * self.w_mem).min(self.w_mem);
                let mut clusters = vec![vec![0u8; self.cluster_bus()]; self.clusters];
                let mut enables = vec![vec![false; self.cluster_bus()]; self.clusters];
                for (b, &byte) in data.iter().enumerate() {
                    let t = pattern[b];
                    clusters[t.cluster][t.offset] = byte;
                    enables[t.cluster][t.offset] = b < valid;
                }
                ClusterBeat { index: j, valid, clusters, enables }
            })
            .collect())
    }

    /// Store path: cluster buses -> inverse Shuffle -> inverse Align -> memory.
    /// `beats[j]` holds the cluster-bus contents for aligned stream beat `j`;
    /// `enabled(k)` says whether stream byte `k` is written.
    pub fn store(
        &mut self,
        mem: &mut MemoryImage,
        req: &MemRequest,
        beats: &[Vec<Vec<u8>>],
        enabled: impl Fn(usize) -> bool,
    ) -> Result<(), GlsuError> {
        self.tables.open(req, self.w_mem)?;
        let result = self.store_inner(mem, req, beats, enabled);
        self.tables.close(req.id);
        result
    }

    fn store_inner(
        &self,
        mem: &mut MemoryImage,
        req: &MemRequest,
        beats: &[Vec<Vec<u8>>],
        enabled: impl Fn(usize) -> bool,
    ) -> Result<(), GlsuError> {
        let w = self.w_mem;
        let pattern = glsu_shuffle_pattern(req.sew, self.clusters, self.cluster_bus());
        let stream: Vec<Vec<u8>> = beats
            .iter()
            .map(|buses| pattern.iter().map(|t| buses[t.cluster][t.offset]).collect())
            .collect();
        let offset = (req.base % w as u64) as usize;
        let plan = self.tables.plan(req.id).to_vec();
        let first_window = req.base / w as u64;
        let empty = vec![0u8; w];
        for beat in addrgen_split(req, w) {
            let m = (beat.addr / w as u64 - first_window) as usize;
            // Rotated frame of window m: its low part comes from stream beat m,
            // its high part from stream beat m-1.
            let cur = stream.get(m).unwrap_or(&empty);
            let prev = if m > 0 { &stream[m - 1] } else { &empty };
            let mut frame = cur[..w - offset].to_vec();
            frame.extend_from_slice(&prev[w - offset..]);
            let window = unalign_rotate(&frame, &plan);
            let woff = (beat.addr % w as u64) as usize;
            for k in 0..beat.len {
                let stream_byte = (beat.addr - req.base) as usize + k;
                if enabled(stream_byte) {
                    mem.write(beat.addr + k as u64, &[window[woff + k]])?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{cluster_bus_destination, element_home};
    use proptest::prelude::*;

    fn req(base: u64, length: usize) -> MemRequest {
        MemRequest { id: 0, base, length, direction: Direction::Load, sew: Sew::E64 }
    }

    #[test]
    fn align_plan_examples() {
        assert!(align_plan(0, 64).is_empty());
        assert_eq!(align_plan(3, 64), vec![2, 1]);
        assert_eq!(align_plan(37, 64), vec![32, 4, 1]);
    }

    #[test]
    fn staged_shifts_equal_one_barrel_shift() {
        let word: Vec<u8> = (0..64).collect();
        for off in 0..64 {
            let mut barrel = word.clone();
            barrel.rotate_left(off);
            assert_eq!(align_rotate(&word, &align_plan(off, 64)), barrel);
            assert_eq!(unalign_rotate(&barrel, &align_plan(off, 64)), word);
        }
    }

    #[test]
    fn addrgen_examples() {
        let b = addrgen_split(&req(0x1000, 256), 64);
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|x| x.len == 64));
        let b = addrgen_split(&req(0x1003, 256), 64);
        assert_eq!(b.len(), 5);
        assert_eq!(b[0], BeatDesc { addr: 0x1003, len: 61 });
        let b = addrgen_split(&req(0x1FC0, 128), 64);
        assert_eq!(b, vec![BeatDesc { addr: 0x1FC0, len: 64 }, BeatDesc { addr: 0x2000, len: 64 }]);
        let b = addrgen_split(&req(0x1F00, 512), 8192);
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].addr, 0x2000);
        assert!(addrgen_split(&req(0x1000, 0), 64).is_empty());
    }

    #[test]
    fn latency_grows_two_cycles_per_cut() {
        let base = glsu_latency(Direction::Load, 0, 512, 16);
        assert_eq!(base, 9 + 1 + 4);
        assert_eq!(glsu_latency(Direction::Load, 4, 512, 16) - base, 8);
        assert_eq!(glsu_latency(Direction::Load, 1, 512, 16) - base, 2);
    }

    #[test]
    fn service_examples() {
        let one = memory_service(&[ServiceBeat { direction: Direction::Load, issue: 0 }], 20, 10);
        assert_eq!(one[0].completion, 30);
        let four: Vec<_> = (0..4).map(|_| ServiceBeat { direction: Direction::Load, issue: 5 }).collect();
        let log = memory_service(&four, 20, 10);
        let done: Vec<u64> = log.iter().map(|g| g.completion).collect();
        assert_eq!(done, vec![35, 36, 37, 38]);
    }

    #[test]
    fn service_alternates_loads_and_stores() {
        let beats: Vec<_> = (0..8)
            .map(|i| ServiceBeat { direction: if i < 4 { Direction::Load } else { Direction::Store }, issue: 0 })
            .collect();
        let log = memory_service(&beats, 20, 10);
        // Replay: the grant log must alternate directions while both queues are non-empty.
        let dirs: Vec<Direction> = log.iter().map(|g| beats[g.beat].direction).collect();
        for pair in dirs.windows(2) {
            assert_ne!(pair[0], pair[1]);
        }
        let grants: Vec<u64> = log.iter().map(|g| g.grant).collect();
        assert_eq!(grants, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn port_fills_holes_in_order() {
        let mut p = MemoryPort::default();
        assert_eq!(p.reserve(10), 10);
        assert_eq!(p.reserve(10), 11);
        assert_eq!(p.reserve(5), 5);
        assert_eq!(p.reserve(9), 9);
        assert_eq!(p.reserve(9), 12);
        assert_eq!(p.reserve(6), 6);
    }

    #[test]
    fn tables_track_one_entry_per_request() {
        let mut t = GlsuTables::default();
        let r = req(0x1003, 64);
        t.open(&r, 64).unwrap();
        assert_eq!(t.open(&r, 64), Err(GlsuError::DuplicateRequest(0)));
        assert_eq!(t.live(), 1);
        t.close(0);
        assert_eq!(t.live(), 0);
    }

    /// Flat oracle: byte k of the request goes straight to the home of
    /// element k / eb.
    fn teleport_check(base: u64, vl: usize, sew: Sew, lanes: usize, clusters: usize) {
        let w = 8 * lanes * clusters;
        let mut mem = MemoryImage::new(0x1000, 0x4000).unwrap();
        for a in 0..0x4000u64 {
            mem.write(0x1000 + a, &[(a * 7 + 3) as u8]).unwrap();
        }
        let r = MemRequest::unit_stride(1, base, vl, sew, Direction::Load);
        let mut glsu = Glsu::new(w, clusters, lanes);
        let beats = glsu.load(&mem, &r).unwrap();
        let eb = sew.bytes();
        let mut seen = 0;
        for beat in &beats {
            for c in 0..clusters {
                for o in 0..8 * lanes {
                    if !beat.enables[c][o] {
                        continue;
                    }
                    let (lane, slot_in_beat) = cluster_bus_destination(o, sew, lanes);
                    let slot = beat.index * (8 / eb) + slot_in_beat;
                    // Find the element whose home this is.
                    let elem = slot * lanes * clusters + c * lanes + lane;
                    assert_eq!(element_home(elem, lanes, clusters), crate::layout::ElementHome { cluster: c, lane, slot });
                    let k = elem * eb + o % eb;
                    assert_eq!(beat.clusters[c][o], mem.read(base + k as u64, 1).unwrap()[0]);
                    seen += 1;
                }
            }
        }
        assert_eq!(seen, vl * eb);
    }

    #[test]
    fn load_places_bytes_at_element_homes() {
        teleport_check(0x1000, 64, Sew::E64, 4, 2);
        teleport_check(0x1003, 61, Sew::E64, 4, 2);
        teleport_check(0x1105, 333, Sew::E8, 4, 4);
        teleport_check(0x1FFA, 100, Sew::E32, 2, 8);
        teleport_check(0x1000, 7, Sew::E16, 4, 1);
    }

    #[test]
    fn store_inverts_load() {
        let (lanes, clusters) = (4, 4);
        let w = 8 * lanes * clusters;
        let mut src = MemoryImage::new(0x1000, 0x2000).unwrap();
        for a in 0..0x2000u64 {
            src.write(0x1000 + a, &[(a * 13 + 1) as u8]).unwrap();
        }
        let r = MemRequest::unit_stride(3, 0x1011, 77, Sew::E64, Direction::Load);
        let mut glsu = Glsu::new(w, clusters, lanes);
        let beats = glsu.load(&src, &r).unwrap();
        let mut dst = MemoryImage::new(0x1000, 0x2000).unwrap();
        let sreq = MemRequest { id: 4, base: 0x1205, direction: Direction::Store, ..r };
        let buses: Vec<_> = beats.iter().map(|b| b.clusters.clone()).collect();
        glsu.store(&mut dst, &sreq, &buses, |_| true).unwrap();
        assert_eq!(dst.read(0x1205, 77 * 8).unwrap(), src.read(0x1011, 77 * 8).unwrap());
        assert_eq!(dst.read(0x1204, 1).unwrap(), &[0]);
        assert_eq!(dst.read(0x1205 + 77 * 8, 1).unwrap(), &[0]);
    }

    proptest! {
        #[test]
        fn addrgen_partitions_the_range(base in 0u64..1 << 20, length in 0usize..5000, wexp in 3u32..10) {
            let w = 1usize << wexp;
            let beats = addrgen_split(&req(base, length), w);
            let mut next = base;
            for b in &beats {
                prop_assert_eq!(b.addr, next);
                prop_assert!(b.len > 0);
                prop_assert_eq!(b.addr / w as u64, (b.addr + b.len as u64 - 1) / w as u64);
                prop_assert_eq!(b.addr / PAGE_BYTES, (b.addr + b.len as u64 - 1) / PAGE_BYTES);
                next += b.len as u64;
            }
            prop_assert_eq!(next, base + length as u64);
        }

        #[test]
        fn align_plan_sums_to_offset(wexp in 1u32..12, raw in any::<usize>()) {
            let w = 1usize << wexp;
            let off = raw % w;
            let plan = align_plan(off, w);
            prop_assert_eq!(plan.iter().sum::<usize>(), off);
            prop_assert!(plan.len() <= wexp as usize);
            prop_assert!(plan.iter().all(|s| s.is_power_of_two()));
            prop_assert!(plan.windows(2).all(|p| p[0] > p[1]));
        }
    }
}
