//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use araxl_core::config::MachineConfig;
use araxl_core::harness::{csv_string, run_cell, run_latency, run_scaling, Cell, ExperimentPlan, Interface, ScalingRow};
use araxl_core::kernels::Kernel;
use araxl_core::layout::{element_home, reshuffle, encode, decode, Geometry, LayoutTag};
use araxl_core::memsys::{addrgen_split, align_plan, Direction, MemRequest, PAGE_BYTES};
use araxl_core::ring::{fold_schedule, reduction_schedule};
use araxl_core::rvv::Sew;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::time::Instant;

struct Outcome {
    failures: Vec<String>,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { failures: Vec::new(), detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

fn report(id: u32, title: &str, o: Outcome) -> bool {
    let ok = o.failures.is_empty();
    println!("criterion {id} {}: {title}{}", if ok { "PASS" } else { "FAIL" }, o.detail);
    for f in &o.failures {
        println!("    {f}");
    }
    ok
}

fn row(rows: &[ScalingRow], k: Kernel, lanes: usize, bpl: usize) -> &ScalingRow {
    rows.iter()
        .find(|r| r.kernel == k && r.lanes == lanes && r.bytes_per_lane == bpl)
        .unwrap_or_else(|| panic!("missing row {k} {lanes} lanes {bpl} B/lane"))
}

fn speedup(rows: &[ScalingRow], k: Kernel, bpl: usize) -> f64 {
    // Weak scaling: throughput ratio between the 64- and 8-lane machines.
    let fpc = |lanes| {
        let r = row(rows, k, lanes, bpl);
        r.flops as f64 / r.cycles as f64
    };
    fpc(64) / fpc(8)
}

fn utilization(rows: &[ScalingRow], k: Kernel, bpl: usize) -> f64 {
    row(rows, k, 64, bpl).utilization
}

fn main() {
    let mut all = true;

    // 1: every kernel, lane count and size, checked against the reference.
    let start = Instant::now();
    let scaling = run_scaling(&ExperimentPlan::scaling());
    let elapsed = start.elapsed();
    let mut o = Outcome::new();
    let rows = match scaling {
        Ok(rows) => rows,
        Err(e) => {
            o.check(false, e.to_string());
            Vec::new()
        }
    };
    o.check(rows.len() == 6 * 4 * 4, format!("{} of 96 cells", rows.len()));
    o.check(elapsed.as_secs() < 600, format!("matrix took {elapsed:?}"));
    o.detail = format!(" ({} cells in {:.1}s)", rows.len(), elapsed.as_secs_f64());
    all &= report(1, "simulated memory matches the reference on the full matrix", o);
    if rows.is_empty() {
        std::process::exit(1);
    }

    // 2
    let mut o = Outcome::new();
    let mm = utilization(&rows, Kernel::Fmatmul, 512);
    let conv = utilization(&rows, Kernel::Fconv2d, 512);
    o.check(mm >= 0.97, format!("fmatmul utilization {mm:.4} < 0.97"));
    o.check(conv >= 0.95, format!("fconv2d utilization {conv:.4} < 0.95"));
    o.detail = format!(" (fmatmul {mm:.4}, fconv2d {conv:.4})");
    all &= report(2, "64-lane compute-bound utilization at 512 B/lane", o);

    // 3
    let mut o = Outcome::new();
    let mut parts = Vec::new();
    for k in [Kernel::Fmatmul, Kernel::Fconv2d, Kernel::Jacobi2d, Kernel::Exp] {
        let s = speedup(&rows, k, 512);
        parts.push(format!("{k} {s:.3}"));
        o.check((7.6..=8.0).contains(&s), format!("{k} speedup {s:.3} outside [7.6, 8.0]"));
    }
    o.detail = format!(" ({})", parts.join(", "));
    all &= report(3, "8 to 64 lane weak scaling at 512 B/lane", o);

    // 4
    let mut o = Outcome::new();
    let s512 = speedup(&rows, Kernel::Fdotproduct, 512);
    o.check((5.2..=7.0).contains(&s512), format!("fdotproduct speedup {s512:.3} at 512 B/lane outside [5.2, 7.0]"));
    let long = ExperimentPlan {
        kernels: vec![Kernel::Fdotproduct],
        clusters: vec![2, 16],
        bytes_per_lane: vec![16384],
        ..ExperimentPlan::scaling()
    };
    let s_long = match run_scaling(&long) {
        Ok(r) => speedup(&r, Kernel::Fdotproduct, 16384),
        Err(e) => {
            o.check(false, e.to_string());
            f64::NAN
        }
    };
    o.check(s_long >= 7.5, format!("fdotproduct speedup {s_long:.3} at 16384 B/lane < 7.5"));
    o.detail = format!(" (512 B/lane {s512:.3}, 16384 B/lane {s_long:.3})");
    all &= report(4, "reduction kernel scaling", o);

    // 5
    let mut o = Outcome::new();
    let plan = ExperimentPlan { bytes_per_lane: vec![128, 256, 512], ..ExperimentPlan::latency() };
    match run_latency(&plan) {
        Ok(lat) => {
            let mut worst = [0.0f64; 3];
            for r in lat.iter().filter(|r| r.cuts > 0) {
                let drop = r.utilization_drop_vs_baseline;
                let limit = match (r.interface, r.cuts, r.bytes_per_lane) {
                    (Interface::Glsu, 4, _) | (Interface::Ring, 1, _) => Some(2.0),
                    (Interface::Reqi, 1, 128) => Some(6.0),
                    (Interface::Reqi, 1, 512) => Some(1.0),
                    _ => None,
                };
                let slot = Interface::ALL.iter().position(|&i| i == r.interface).unwrap();
                worst[slot] = worst[slot].max(drop);
                if let Some(limit) = limit {
                    o.check(
                        drop <= limit,
                        format!("{} {} cut(s) {} {} B/lane: drop {drop:.2} pp > {limit}", r.interface, r.cuts, r.kernel, r.bytes_per_lane),
                    );
                }
            }
            o.detail = format!(" (worst drop glsu {:.2} pp, reqi {:.2} pp, ring {:.2} pp)", worst[0], worst[1], worst[2]);
        }
        Err(e) => o.check(false, e.to_string()),
    }
    all &= report(5, "latency tolerance of the 64-lane machine", o);

    // 6
    let mut o = Outcome::new();
    let ceiling = |k: Kernel, lanes: usize| {
        let lc = lanes as f64;
        match k {
            Kernel::Fmatmul | Kernel::Fconv2d => 2.0 * lc,
            Kernel::Jacobi2d | Kernel::Fdotproduct => lc,
            Kernel::Exp => 28.0 / 21.0 * lc,
            Kernel::Softmax => 32.0 / 25.0 * lc,
        }
    };
    for r in &rows {
        let fpc = r.flops as f64 / r.cycles as f64;
        o.check(fpc <= ceiling(r.kernel, r.lanes), format!("{} {} lanes {} B/lane: {fpc:.2} FLOP/cycle over the ceiling", r.kernel, r.lanes, r.bytes_per_lane));
    }
    let best = rows
        .iter()
        .filter(|r| r.kernel == Kernel::Fmatmul)
        .map(|r| r.flops as f64 / r.cycles as f64 / ceiling(r.kernel, r.lanes))
        .fold(0.0, f64::max);
    o.check(best >= 0.97, format!("fmatmul reaches only {best:.4} of its ceiling"));
    o.detail = format!(" (fmatmul best {best:.4} of ceiling)");
    all &= report(6, "throughput never exceeds the per-kernel ceiling", o);

    // 7
    all &= report(7, "layout, memory-system, reduction and determinism properties", properties());

    // 8
    all &= report(8, "final memory invariant under timing perturbation", perturbation());

    if !all {
        std::process::exit(1);
    }
}

fn properties() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);

    // Element homes: distinct for distinct indices, and the index is
    // recovered from the home.
    for l in [1, 2, 4] {
        for c in 1..=16 {
            let mut seen = HashSet::new();
            let mut ok = true;
            for i in 0..100_000 {
                let h = element_home(i, l, c);
                ok &= h.lane < l && h.cluster < c;
                ok &= h.slot * l * c + h.cluster * l + h.lane == i;
                ok &= seen.insert((h.cluster, h.lane, h.slot));
            }
            o.check(ok, format!("element_home not a bijection for L={l} C={c}"));
        }
    }

    // Reshuffle round trip between random layouts.
    let tags = [
        LayoutTag::Standard(Sew::E8),
        LayoutTag::Standard(Sew::E16),
        LayoutTag::Standard(Sew::E32),
        LayoutTag::Standard(Sew::E64),
        LayoutTag::Mask,
    ];
    let shapes = [(1, 1), (2, 1), (4, 1), (1, 2), (4, 2), (2, 4), (4, 4), (4, 16)];
    for n in 0..1000 {
        let (lanes, clusters) = shapes[n % shapes.len()];
        let g = Geometry { lanes, clusters, vlen: 64 * lanes * clusters * rng.gen_range(1..=4) };
        let flat: Vec<u8> = (0..g.register_bytes()).map(|_| rng.gen()).collect();
        let (a, b) = (tags[rng.gen_range(0..5)], tags[rng.gen_range(0..5)]);
        let vl = rng.gen_range(0..=g.vlen / 64);
        let ok = encode(&flat, a, &g)
            .and_then(|chunks| reshuffle(&chunks, a, b, vl, &g))
            .and_then(|(there, _)| reshuffle(&there, b, a, vl, &g))
            .and_then(|(back, _)| decode(&back, a, &g))
            .map_or(false, |back| back == flat);
        o.check(ok, format!("reshuffle round trip {a:?} -> {b:?} on L={lanes} C={clusters}"));
    }

    // Align plans sum to the offset with distinct power-of-two shifts;
    // beats tile the request without overlap and never cross a bus window
    // or a page.
    for _ in 0..10_000 {
        let w = 1usize << rng.gen_range(3..=9);
        let offset = rng.gen_range(0..w);
        let plan = align_plan(offset, w);
        let distinct = plan.iter().collect::<HashSet<_>>().len() == plan.len();
        o.check(
            plan.iter().sum::<usize>() == offset && distinct && plan.iter().all(|s| s.is_power_of_two() && *s < w),
            format!("align_plan({offset}, {w}) = {plan:?}"),
        );
        let base = rng.gen_range(0..1u64 << 20);
        let length = rng.gen_range(0..20_000);
        let req = MemRequest { id: 0, base, length, direction: Direction::Load, sew: Sew::E64 };
        let beats = addrgen_split(&req, w);
        let mut next = base;
        let mut ok = true;
        for beat in &beats {
            let last = beat.addr + beat.len as u64 - 1;
            ok &= beat.addr == next && beat.len > 0;
            ok &= beat.addr / w as u64 == last / w as u64 && beat.addr / PAGE_BYTES == last / PAGE_BYTES;
            next = beat.addr + beat.len as u64;
        }
        ok &= next == base + length as u64;
        o.check(ok, format!("addrgen_split base {base:#x} length {length} width {w}"));
    }

    // Folding along the schedule uses every partial exactly once, combines
    // disjoint sets only, and ends in cluster 0.
    for c in [1, 2, 4, 8, 16] {
        let schedule = reduction_schedule(c).unwrap();
        let partials: Vec<u64> = (0..c).map(|i| 1u64 << i).collect();
        let disjoint = std::cell::Cell::new(true);
        let all = fold_schedule(&partials, &schedule, |a, b| {
            disjoint.set(disjoint.get() && a & b == 0);
            a | b
        });
        let values: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sum = fold_schedule(&values, &schedule, |a, b| a + b);
        let mut expect = values.clone();
        let mut d = 1;
        while d < c {
            for i in (0..c).step_by(2 * d) {
                expect[i] += expect[i + d];
            }
            d *= 2;
        }
        o.check(
            disjoint.get() && all == (1u64 << c) - 1 && sum.to_bits() == expect[0].to_bits(),
            format!("reduction schedule fold for C={c}"),
        );
    }

    // Determinism: identical CSV bytes from two runs.
    let plan = ExperimentPlan {
        kernels: Kernel::ALL.to_vec(),
        clusters: vec![2, 4],
        bytes_per_lane: vec![64, 128],
        ..ExperimentPlan::scaling()
    };
    let csv = || run_scaling(&plan).and_then(|r| csv_string(&r)).ok();
    let (a, b) = (csv(), csv());
    o.check(a.is_some() && a == b, "two scaling runs produced different CSV bytes");
    o
}

fn perturbation() -> Outcome {
    let mut o = Outcome::new();
    let settings: [(u32, u32, u32, u64); 9] = [
        (0, 0, 0, 20),
        (4, 0, 0, 20),
        (0, 1, 0, 20),
        (0, 0, 1, 20),
        (8, 3, 4, 20),
        (0, 0, 0, 1),
        (2, 2, 2, 60),
        (1, 0, 3, 7),
        (16, 4, 8, 100),
    ];
    let mut cells = 0;
    for k in Kernel::ALL {
        for (clusters, bpl) in [(2, 64), (4, 128)] {
            let mut baseline = None;
            for &(glsu, reqi, ring, mem) in &settings {
                let mut cfg = MachineConfig::new(4, clusters);
                cfg.glsu_cuts = glsu;
                cfg.reqi_cuts = reqi;
                cfg.ring_cuts = ring;
                cfg.mem_latency = mem;
                let cell = Cell { kernel: k, cfg: cfg.clone(), bytes_per_lane: bpl, seed: 11 };
                cells += 1;
                if let Err(e) = run_cell(&cell) {
                    o.check(false, e.to_string());
                    continue;
                }
                let inst = araxl_core::kernels::generate_with_seed(k, &cfg, bpl, 11).unwrap();
                let mem = araxl_core::engine::run(&inst.program, &cfg, &inst.image).unwrap().memory;
                match &baseline {
                    None => baseline = Some(mem),
                    Some(b) => o.check(*b == mem, format!("{cell}: memory differs from the unperturbed run")),
                }
            }
        }
    }
    o.check(cells >= 50, format!("only {cells} cells"));
    o.detail = format!(" ({cells} cells)");
    o
}
