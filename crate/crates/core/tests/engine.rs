use araxl_core::config::MachineConfig;
use araxl_core::engine::{run, run_with, InstrTiming, RunOptions};
use araxl_core::image::MemoryImage;
use araxl_core::ring::{reduction_latency, reduction_schedule};
use araxl_core::rvv::{golden_execute, Program};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DATA: u64 = 0x10000;
const DATA_WORDS: usize = 4096;
const OUT: u64 = 0x20000;
const OUT_WORDS: usize = 8192;

fn image(seed: u64) -> MemoryImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = MemoryImage::new(DATA, (OUT - DATA) as usize + 8 * OUT_WORDS).unwrap();
    for k in 0..DATA_WORDS {
        img.write_f64(DATA + 8 * k as u64, rng.gen_range(-4.0..4.0)).unwrap();
    }
    img
}

/// Random straight-line vector program over the data region; every vector
/// register is stored at the end so the register file is visible in memory.
fn random_program(rng: &mut ChaCha8Rng, vlmax: usize) -> String {
    let mut p = String::new();
    let mut line = |s: String| {
        p.push_str(&s);
        p.push('\n');
    };
    line(format!("li a0, {DATA}"));
    for f in 1..=4 {
        line(format!("fld f{f}, {}(a0)", 8 * f));
    }
    let mut vl = rng.gen_range(1..=vlmax);
    line(format!("li t0, {vl}"));
    line("vsetvli t1, t0, e64, m1".into());
    for v in 1..16 {
        line(format!("li a1, {}", DATA + 8 * rng.gen_range(0..DATA_WORDS - vlmax) as u64));
        line(format!("vle64.v v{v}, (a1)"));
    }
    line("vmflt.vf v0, v1, f1".into());
    let mut out = OUT;
    let reg = |rng: &mut ChaCha8Rng| rng.gen_range(1..16);
    for _ in 0..60 {
        let (d, a, b) = (reg(rng), reg(rng), reg(rng));
        let f = rng.gen_range(1..=4);
        let m = if rng.gen_bool(0.25) { ", v0.t" } else { "" };
        match rng.gen_range(0..16) {
            0 => {
                line(format!("li a1, {}", DATA + 8 * rng.gen_range(0..DATA_WORDS - vlmax) as u64));
                line(format!("vle64.v v{d}, (a1){m}"));
            }
            1 => {
                let stride = rng.gen_range(1..3) * 8;
                line(format!("li a1, {DATA}"));
                line(format!("li a2, {stride}"));
                line(format!("vlse64.v v{d}, (a1), a2{m}"));
            }
            2 => {
                line(format!("li a1, {out}"));
                line(format!("vse64.v v{a}, (a1){m}"));
                out += 8 * vlmax as u64;
            }
            3 => {
                line(format!("li a1, {out}"));
                line("li a2, 16".into());
                line(format!("vsse64.v v{a}, (a1), a2{m}"));
                out += 16 * vlmax as u64;
            }
            4 => line(format!("vfadd.vv v{d}, v{a}, v{b}{m}")),
            5 => line(format!("vfmul.vf v{d}, v{a}, f{f}{m}")),
            6 => line(format!("vfmacc.vv v{d}, v{a}, v{b}{m}")),
            7 => line(format!("vfmacc.vf v{d}, f{f}, v{a}{m}")),
            8 => line(format!("vm{}.vf v0, v{a}, f{f}", ["flt", "fgt", "fle", "feq"][rng.gen_range(0..4)])),
            9 => line(format!("vfmerge.vfm v{d}, v{a}, f{f}, v0")),
            10 if d != a => line(format!("vfslide1{}.vf v{d}, v{a}, f{f}{m}", ["up", "down"][rng.gen_range(0..2)])),
            11 if d != a => line(format!("vslide{}.vi v{d}, v{a}, {}{m}", ["up", "down"][rng.gen_range(0..2)], rng.gen_range(0..6))),
            12 => {
                line(format!("vfredusum.vs v{d}, v{a}, v{b}{m}"));
                line(format!("vfmv.f.s f5, v{d}"));
                line(format!("li a1, {out}"));
                line("fsd f5, 0(a1)".into());
                out += 8;
            }
            13 => line(format!("vfmv.v.f v{d}, f{f}")),
            14 => {
                vl = rng.gen_range(0..=vlmax);
                line(format!("li t0, {vl}"));
                line("vsetvli t1, t0, e64, m1".into());
            }
            _ => line(format!("vfsub.vf v{d}, v{a}, f{f}{m}")),
        }
    }
    line(format!("li t0, {vlmax}"));
    line("vsetvli t1, t0, e64, m1".into());
    for v in 0..16 {
        line(format!("li a1, {out}"));
        line(format!("vse64.v v{v}, (a1)"));
        out += 8 * vlmax as u64;
    }
    assert!(out <= OUT + 8 * OUT_WORDS as u64);
    p
}

#[test]
fn random_programs_match_reference_on_every_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (l, c) in [(1, 1), (2, 1), (4, 1), (1, 4), (2, 2), (4, 2), (4, 4), (2, 8)] {
        for cuts in [0, 2] {
            let mut cfg = MachineConfig::new(l, c);
            cfg.vlen = 256 * l * c;
            cfg.glsu_cuts = cuts;
            cfg.ring_cuts = cuts;
            cfg.reqi_cuts = cuts / 2;
            let vlmax = cfg.vlen / 64;
            for _ in 0..6 {
                let text = random_program(&mut rng, vlmax);
                let prog = Program::parse(&text).unwrap();
                let img = image(rng.gen());
                let golden = golden_execute(&prog, &img, l, c, cfg.vlen).unwrap();
                let res = run(&prog, &cfg, &img).unwrap();
                assert!(res.memory == golden.memory, "L{l} C{c} cuts {cuts}:\n{text}");
                assert_eq!(res.stats.flops, golden.flops);
                let u = res.stats.utilization();
                assert!((0.0..=1.0).contains(&u));
            }
        }
    }
}

fn trace(text: &str, cfg: &MachineConfig) -> Vec<InstrTiming> {
    let prog = Program::parse(text).unwrap();
    run_with(&prog, cfg, &image(1), RunOptions { instr_trace: true, ..Default::default() }).unwrap().instr_trace
}

#[test]
fn single_add_over_one_element_per_lane_activates_each_fpu_once() {
    let cfg = MachineConfig::new(4, 2);
    let text = "li t0, 8\nvsetvli t1, t0, e64, m1\nvfadd.vv v1, v2, v3\n";
    let res = run(&Program::parse(text).unwrap(), &cfg, &image(1)).unwrap();
    assert_eq!(res.stats.fpu_active, vec![1; 8]);
    assert!(res.stats.utilization() > 0.0);
}

#[test]
fn program_without_vector_work_has_zero_utilization() {
    let cfg = MachineConfig::default();
    let res = run(&Program::parse("li a0, 1\naddi a0, a0, 2\n").unwrap(), &cfg, &image(1)).unwrap();
    assert_eq!(res.stats.total_cycles, 0);
    assert_eq!(res.stats.utilization(), 0.0);
    let res = run(&Program::parse("").unwrap(), &cfg, &image(1)).unwrap();
    assert_eq!(res.stats.utilization(), 0.0);
}

#[test]
fn arithmetic_chains_on_a_load_group_by_group() {
    // A 16-group load followed by a dependent multiply-add: the consumer
    // finishes one FPU latency after the last group arrives, not a whole
    // vector later.
    let cfg = MachineConfig::new(4, 2);
    let text = format!("li t0, 128\nvsetvli t1, t0, e64, m1\nli a1, {DATA}\nvle64.v v1, (a1)\nvfmacc.vf v2, f1, v1\n");
    let t = trace(&text, &cfg);
    let (load, mac) = (t[0], t[1]);
    let groups = 128 / 8;
    assert!(mac.done <= load.done + cfg.fpu_latency + 1, "{load:?} {mac:?}");
    assert!(mac.done < load.done + groups as u64);
}

#[test]
fn slide_boundary_waits_for_the_ring() {
    let text = "li t0, 64\nvsetvli t1, t0, e64, m1\nvfslide1down.vf v2, v1, f1\n";
    let done = |cuts| {
        let mut cfg = MachineConfig::new(4, 2);
        cfg.ring_cuts = cuts;
        trace(text, &cfg)[0].done
    };
    assert_eq!(done(3), done(0) + 3);
    // A single cluster has no ring boundary.
    let mut one = MachineConfig::new(4, 1);
    one.ring_cuts = 3;
    let a = trace(text, &one)[0].done;
    one.ring_cuts = 0;
    assert_eq!(trace(text, &one)[0].done, a);
}

#[test]
fn runs_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = MachineConfig::new(2, 4);
    let text = random_program(&mut rng, cfg.vlen / 64);
    let prog = Program::parse(&text).unwrap();
    let a = run(&prog, &cfg, &image(3)).unwrap();
    let b = run(&prog, &cfg, &image(3)).unwrap();
    assert_eq!(a.stats, b.stats);
    assert!(a.memory == b.memory);
}

fn reduction_program(vl: usize) -> String {
    format!(
        "li a0, {DATA}\nfld f1, 8(a0)\nli t0, {vl}\nvsetvli t1, t0, e64, m8\n\
         li a1, {DATA}\nvle64.v v8, (a1)\nvfredusum.vs v1, v8, v2\nvfmv.f.s f2, v1\nli a2, {OUT}\nfsd f2, 0(a2)\n"
    )
}

#[test]
fn reduction_result_is_independent_of_ring_cuts() {
    let prog = Program::parse(&reduction_program(512)).unwrap();
    let mut outs = Vec::new();
    for cuts in 0..4 {
        let mut cfg = MachineConfig::new(4, 16);
        cfg.ring_cuts = cuts;
        outs.push(run(&prog, &cfg, &image(5)).unwrap().memory.read_u64(OUT).unwrap());
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn reduction_timing_follows_closed_form() {
    for c in [1, 2, 4, 8, 16] {
        let (l, epl) = (4, 8);
        let vl = l * c * epl;
        let text = reduction_program(vl);
        let run_cuts = |cuts: u32| {
            let mut cfg = MachineConfig::new(l, c);
            cfg.ring_cuts = cuts;
            let t = trace(&text, &cfg);
            (t[0].done, t[1].done)
        };
        let (load0, red0) = run_cuts(0);
        let (load2, red2) = run_cuts(2);
        assert_eq!(load0, load2);
        // Extra cycles per cut equal the summed hop distances of the schedule.
        let distance: u64 = reduction_schedule(c).unwrap().iter().map(|r| r.transfers[0].2 as u64).sum();
        assert_eq!(red2 - red0, 2 * distance, "C={c}");
        assert_eq!(
            reduction_latency(c, l, epl, 2, 4).total - reduction_latency(c, l, epl, 0, 4).total,
            2 * distance
        );
        // The reduction starts once the last loaded group is written, so its
        // span from there matches the closed form up to the one-cycle
        // handoff into the lane pipeline.
        let closed = reduction_latency(c, l, epl, 0, 4).total;
        let span = red0 - (load0 - epl as u64 + 1);
        assert!(span.abs_diff(closed) <= 2, "C={c}: span {span}, closed form {closed}");
    }
}
