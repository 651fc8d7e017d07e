//! Inter-cluster ring: slide traffic, multi-hop bypass routing, and the
//! inter-cluster stage of reductions.

use thiserror::Error;

use crate::layout::element_home;

/// Cycles for one lane-to-lane hop inside a cluster (the SLDU network).
pub const LANE_HOP_LATENCY: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RingDirection {
    TowardNext,
    TowardPrevious,
}

impl RingDirection {
    fn index(self) -> usize {
        match self {
            RingDirection::TowardNext => 0,
            RingDirection::TowardPrevious => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("cluster count {0} is not a power of two")]
    NotPowerOfTwo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingPacket {
    pub payload: u64,
    pub src: usize,
    pub dst: usize,
    pub direction: RingDirection,
    pub inject: u64,
}

/// Hops from `src` to `dst` travelling in `direction` on a ring of `clusters`.
pub fn ring_distance(src: usize, dst: usize, clusters: usize, direction: RingDirection) -> usize {
    let forward = (dst + clusters - src) % clusters;
    match direction {
        RingDirection::TowardNext => forward,
        RingDirection::TowardPrevious => (clusters - forward) % clusters,
    }
}

/// Shorter direction between two clusters; ties go toward-next.
pub fn route(src: usize, dst: usize, clusters: usize) -> (RingDirection, usize) {
    let next = ring_distance(src, dst, clusters, RingDirection::TowardNext);
    let prev = ring_distance(src, dst, clusters, RingDirection::TowardPrevious);
    if next <= prev {
        (RingDirection::TowardNext, next)
    } else {
        (RingDirection::TowardPrevious, prev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlideTransfer {
    /// Source element index.
    pub element: usize,
    pub src: usize,
    pub dst: usize,
    pub direction: RingDirection,
    pub hops: usize,
}

/// Cross-cluster transfers of a slide. Positive `amount` slides up (element
/// `j` moves to `j + amount`), negative slides down. Sources are limited to
/// elements below `vl`.
pub fn slide_traffic(amount: i64, vl: usize, lanes: usize, clusters: usize) -> Vec<SlideTransfer> {
    slide_traffic_from(amount, vl, vl, lanes, clusters)
}

/// As [`slide_traffic`], with sources readable up to `src_len` elements.
pub fn slide_traffic_from(
    amount: i64,
    vl: usize,
    src_len: usize,
    lanes: usize,
    clusters: usize,
) -> Vec<SlideTransfer> {
    let mut out = Vec::new();
    if amount == 0 {
        return out;
    }
    let k = amount.unsigned_abs() as usize;
    for dest in 0..vl {
        let source = if amount > 0 {
            match dest.checked_sub(k) {
                Some(s) => s,
                None => continue,
            }
        } else {
            dest + k
        };
        if source >= src_len {
            continue;
        }
        let src = element_home(source, lanes, clusters).cluster;
        let dst = element_home(dest, lanes, clusters).cluster;
        if src != dst {
            let (direction, hops) = route(src, dst, clusters);
            out.push(SlideTransfer { element: source, src, dst, direction, hops });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionRound {
    pub round: usize,
    /// `(src cluster, dst cluster, hop distance)`.
    pub transfers: Vec<(usize, usize, usize)>,
}

/// Log-tree schedule folding all cluster partials into cluster 0.
pub fn reduction_schedule(clusters: usize) -> Result<Vec<ReductionRound>, RingError> {
    if !clusters.is_power_of_two() {
        return Err(RingError::NotPowerOfTwo(clusters));
    }
    let mut rounds = Vec::new();
    let mut d = 1;
    while d < clusters {
        let transfers = (0..clusters).filter(|c| c % (2 * d) == d).map(|c| (c, c - d, d)).collect();
        rounds.push(ReductionRound { round: rounds.len(), transfers });
        d *= 2;
    }
    Ok(rounds)
}

/// Fold per-cluster partials along a schedule; the receiver's value is the
/// left operand.
pub fn fold_schedule<T: Copy>(partials: &[T], schedule: &[ReductionRound], op: impl Fn(T, T) -> T) -> T {
    let mut vals = partials.to_vec();
    for round in schedule {
        for &(src, dst, _) in &round.transfers {
            vals[dst] = op(vals[dst], vals[src]);
        }
    }
    vals[0]
}

/// Timed ring with one FIFO link per cluster and direction.
#[derive(Debug, Clone)]
pub struct Ring {
    clusters: usize,
    cuts: u32,
    /// Next cycle each outgoing link can accept a packet.
    link_free: Vec<[u64; 2]>,
    pub injected: u64,
    pub delivered: u64,
    trace: Option<Vec<String>>,
}

impl Ring {
    pub fn new(clusters: usize, cuts: u32) -> Self {
        Ring { clusters, cuts, link_free: vec![[0; 2]; clusters], injected: 0, delivered: 0, trace: None }
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn hop_latency(&self) -> u64 {
        1 + self.cuts as u64
    }

    /// Route one packet hop by hop; returns its delivery cycle.
    pub fn send(&mut self, p: &RingPacket) -> u64 {
        self.injected += 1;
        let hops = ring_distance(p.src, p.dst, self.clusters, p.direction);
        let mut node = p.src;
        let mut t = p.inject;
        for _ in 0..hops {
            let link = &mut self.link_free[node][p.direction.index()];
            let accept = t.max(*link);
            *link = accept + 1;
            if let Some(log) = self.trace.as_mut() {
                log.push(format!("cycle {accept}: link {node} {:?} carries {:#018x} {}->{}", p.direction, p.payload, p.src, p.dst));
            }
            t = accept + self.hop_latency();
            node = match p.direction {
                RingDirection::TowardNext => (node + 1) % self.clusters,
                RingDirection::TowardPrevious => (node + self.clusters - 1) % self.clusters,
            };
        }
        self.delivered += 1;
        t
    }
}

/// Delivery cycles of `packets`, sent in the given order.
pub fn ring_deliver(packets: &[RingPacket], clusters: usize, ring_cuts: u32) -> Vec<u64> {
    let mut ring = Ring::new(clusters, ring_cuts);
    packets.iter().map(|p| ring.send(p)).collect()
}

/// Stage breakdown of one isolated reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionLatency {
    pub intra_lane: u64,
    pub inter_lane: u64,
    pub inter_cluster: u64,
    pub simd: u64,
    pub total: u64,
}

/// Closed-form reduction latency for 64-bit elements.
pub fn reduction_latency(
    clusters: usize,
    lanes: usize,
    elements_per_lane: usize,
    ring_cuts: u32,
    fpu_latency: u64,
) -> ReductionLatency {
    let intra_lane = elements_per_lane.saturating_sub(1) as u64 + fpu_latency;
    let inter_lane = lanes.trailing_zeros() as u64 * (LANE_HOP_LATENCY + fpu_latency);
    let hop = 1 + ring_cuts as u64;
    // Each round moves the partial from lane to ring port, across the ring
    // and into the receiving cluster's FPU.
    let inter_cluster =
        (0..clusters.trailing_zeros()).map(|r| LANE_HOP_LATENCY + (1u64 << r) * hop + fpu_latency).sum();
    // Folding in the scalar operand; 64-bit elements need no sub-word fold.
    let simd = fpu_latency;
    ReductionLatency {
        intra_lane,
        inter_lane,
        inter_cluster,
        simd,
        total: intra_lane + inter_lane + inter_cluster + simd,
    }
}
