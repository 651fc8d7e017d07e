use araxl_core::config::MachineConfig;
use araxl_core::engine;
use araxl_core::kernels::{flop_count, generate, Kernel};

#[test]
fn every_kernel_matches_reference_on_small_machines() {
    for (l, c) in [(4, 1), (4, 2), (2, 4)] {
        let cfg = MachineConfig::new(l, c);
        for k in Kernel::ALL {
            for bpl in [64, 128] {
                let inst = generate(k, &cfg, bpl).unwrap();
                assert_eq!(inst.flops, flop_count(&inst.spec), "{k} flops");
                let res = engine::run(&inst.program, &cfg, &inst.image).unwrap();
                assert!(res.memory == inst.golden, "{k} L{l} C{c} {bpl}B: memory differs from reference");
                assert_eq!(res.stats.flops, inst.flops, "{k}");
                let u = res.stats.utilization();
                assert!(u > 0.0 && u <= 1.0, "{k}: utilization {u}");
            }
        }
    }
}
