//! Experiment campaigns: weak-scaling performance and interface latency
//! tolerance, with CSV output and per-figure summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MachineConfig;
use crate::engine::{self, CycleStats, RunError};
use crate::kernels::{generate_with_seed, Kernel, KernelError, DEFAULT_SEED};

/// Interface that receives register cuts in the latency campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interface {
    Glsu,
    Reqi,
    Ring,
}

impl Interface {
    pub const ALL: [Interface; 3] = [Interface::Glsu, Interface::Reqi, Interface::Ring];

    pub fn name(self) -> &'static str {
        match self {
            Interface::Glsu => "glsu",
            Interface::Reqi => "reqi",
            Interface::Ring => "ring",
        }
    }

    /// Cuts evaluated for this interface in the default campaign.
    pub fn default_cuts(self) -> u32 {
        match self {
            Interface::Glsu => 4,
            Interface::Reqi | Interface::Ring => 1,
        }
    }

    fn apply(self, cfg: &mut MachineConfig, cuts: u32) {
        match self {
            Interface::Glsu => cfg.glsu_cuts = cuts,
            Interface::Reqi => cfg.reqi_cuts = cuts,
            Interface::Ring => cfg.ring_cuts = cuts,
        }
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Interface {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Interface::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| HarnessError::Plan(format!("unknown interface `{s}`")))
    }
}

/// One (kernel, machine, size) point of a campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub kernel: Kernel,
    pub cfg: MachineConfig,
    pub bytes_per_lane: usize,
    pub seed: u64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on {}x{} lanes at {} B/lane (cuts glsu={} reqi={} ring={}, seed {})",
            self.kernel,
            self.cfg.clusters,
            self.cfg.lanes,
            self.bytes_per_lane,
            self.cfg.glsu_cuts,
            self.cfg.reqi_cuts,
            self.cfg.ring_cuts,
            self.seed
        )
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("{cell}: {source}")]
    Kernel { cell: String, source: KernelError },
    #[error("{cell}: {source}")]
    Run { cell: String, source: RunError },
    #[error("{cell}: simulated memory differs from the reference model")]
    Mismatch { cell: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of one verified cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub stats: CycleStats,
    pub flops: u64,
}

/// Run one cell through the reference and timed models; fails if their
/// final memories differ.
pub fn run_cell(cell: &Cell) -> Result<CellResult, HarnessError> {
    let name = || cell.to_string();
    let inst = generate_with_seed(cell.kernel, &cell.cfg, cell.bytes_per_lane, cell.seed)
        .map_err(|source| HarnessError::Kernel { cell: name(), source })?;
    let res = engine::run(&inst.program, &cell.cfg, &inst.image)
        .map_err(|source| HarnessError::Run { cell: name(), source })?;
    if res.memory != inst.golden {
        return Err(HarnessError::Mismatch { cell: name() });
    }
    Ok(CellResult { stats: res.stats, flops: inst.flops })
}

/// Campaign description. Lane counts are `lanes * clusters` for each entry
/// of `clusters`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kernels: Vec<Kernel>,
    pub lanes: usize,
    pub clusters: Vec<usize>,
    pub bytes_per_lane: Vec<usize>,
    /// Cut settings per interface for the latency campaign; cuts = 0 is the
    /// baseline and is always run.
    pub cuts: Vec<(Interface, u32)>,
    /// Settings shared by every cell (latencies, VLEN policy is per cell).
    pub base: MachineConfig,
    pub seed: u64,
}

impl ExperimentPlan {
    /// The performance-scalability campaign: 8 to 64 lanes in 4-lane clusters.
    pub fn scaling() -> Self {
        ExperimentPlan {
            kernels: Kernel::ALL.to_vec(),
            lanes: 4,
            clusters: vec![2, 4, 8, 16],
            bytes_per_lane: vec![64, 128, 256, 512],
            cuts: Vec::new(),
            base: MachineConfig::default(),
            seed: DEFAULT_SEED,
        }
    }

    /// The latency-tolerance campaign on the 64-lane machine.
    pub fn latency() -> Self {
        ExperimentPlan {
            clusters: vec![16],
            cuts: Interface::ALL.iter().map(|&i| (i, i.default_cuts())).collect(),
            ..Self::scaling()
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.kernels.is_empty() || self.clusters.is_empty() || self.bytes_per_lane.is_empty() {
            return Err(HarnessError::Plan("kernels, clusters and sizes must be non-empty".into()));
        }
        for &c in &self.clusters {
            self.config(c).validate().map_err(|e| HarnessError::Plan(e.to_string()))?;
        }
        Ok(())
    }

    /// Machine with `clusters` clusters; VLEN and memory width follow the
    /// lane count unless the base config overrides VLEN per lane.
    pub fn config(&self, clusters: usize) -> MachineConfig {
        let shape = MachineConfig::new(self.lanes, clusters);
        let mut cfg = self.base.clone();
        cfg.lanes = self.lanes;
        cfg.clusters = clusters;
        let base_lanes = self.base.total_lanes();
        cfg.vlen = self.base.vlen / base_lanes * shape.total_lanes();
        cfg.mem_width_bytes = shape.mem_width_bytes;
        cfg
    }

    fn cells(&self, cfgs: &[MachineConfig]) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &kernel in &self.kernels {
            for cfg in cfgs {
                for &bytes_per_lane in &self.bytes_per_lane {
                    cells.push(Cell { kernel, cfg: cfg.clone(), bytes_per_lane, seed: self.seed });
                }
            }
        }
        cells
    }
}

fn run_cells(cells: &[Cell]) -> Result<Vec<CellResult>, HarnessError> {
    // Cells are independent; results come back in plan order.
    cells.par_iter().map(run_cell).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub kernel: Kernel,
    pub lanes: usize,
    pub bytes_per_lane: usize,
    pub cycles: u64,
    pub flops: u64,
    pub flop_per_cycle: f64,
    pub utilization: f64,
    pub speedup_vs_8lane: f64,
    pub seed: u64,
}

/// Weak-scaling campaign. Speedups are FLOP/cycle relative to the smallest
/// lane count of the plan at the same kernel and size.
pub fn run_scaling(plan: &ExperimentPlan) -> Result<Vec<ScalingRow>, HarnessError> {
    plan.validate()?;
    let cfgs: Vec<MachineConfig> = plan.clusters.iter().map(|&c| plan.config(c)).collect();
    let cells = plan.cells(&cfgs);
    let results = run_cells(&cells)?;
    let mut rows: Vec<ScalingRow> = cells
        .iter()
        .zip(&results)
        .map(|(cell, r)| ScalingRow {
            kernel: cell.kernel,
            lanes: cell.cfg.total_lanes(),
            bytes_per_lane: cell.bytes_per_lane,
            cycles: r.stats.total_cycles,
            flops: r.flops,
            flop_per_cycle: r.stats.flop_per_cycle(),
            utilization: r.stats.utilization(),
            speedup_vs_8lane: 0.0,
            seed: cell.seed,
        })
        .collect();
    let smallest = plan.clusters.iter().min().unwrap() * plan.lanes;
    let reference: BTreeMap<(Kernel, usize), f64> = rows
        .iter()
        .filter(|r| r.lanes == smallest)
        .map(|r| ((r.kernel, r.bytes_per_lane), r.flop_per_cycle))
        .collect();
    for r in &mut rows {
        let base = reference[&(r.kernel, r.bytes_per_lane)];
        r.speedup_vs_8lane = if base > 0.0 { r.flop_per_cycle / base } else { 0.0 };
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub kernel: Kernel,
    pub interface: Interface,
    pub cuts: u32,
    pub bytes_per_lane: usize,
    pub utilization: f64,
    /// Baseline utilization minus this utilization, in percentage points.
    pub utilization_drop_vs_baseline: f64,
}

/// Latency-tolerance campaign on the largest machine of the plan. Each
/// interface gets a baseline row (cuts = 0) followed by its cut rows.
pub fn run_latency(plan: &ExperimentPlan) -> Result<Vec<LatencyRow>, HarnessError> {
    plan.validate()?;
    let clusters = *plan.clusters.iter().max().unwrap();
    let base = plan.config(clusters);
    let mut cfgs = vec![base.clone()];
    for &(iface, cuts) in &plan.cuts {
        let mut cfg = base.clone();
        iface.apply(&mut cfg, cuts);
        cfgs.push(cfg);
    }
    let cells = plan.cells(&cfgs);
    let results = run_cells(&cells)?;
    let util: Vec<f64> = results.iter().map(|r| r.stats.utilization()).collect();
    let per_kernel = cfgs.len() * plan.bytes_per_lane.len();
    let mut rows = Vec::new();
    for (ki, &kernel) in plan.kernels.iter().enumerate() {
        let at = |cfg_index: usize, size_index: usize| util[ki * per_kernel + cfg_index * plan.bytes_per_lane.len() + size_index];
        let mut interfaces: Vec<Interface> = plan.cuts.iter().map(|c| c.0).collect();
        interfaces.dedup();
        for iface in interfaces {
            for (si, &bytes_per_lane) in plan.bytes_per_lane.iter().enumerate() {
                let baseline = at(0, si);
                rows.push(LatencyRow {
                    kernel,
                    interface: iface,
                    cuts: 0,
                    bytes_per_lane,
                    utilization: baseline,
                    utilization_drop_vs_baseline: 0.0,
                });
                for (ci, &(i, cuts)) in plan.cuts.iter().enumerate() {
                    if i != iface {
                        continue;
                    }
                    let u = at(ci + 1, si);
                    rows.push(LatencyRow {
                        kernel,
                        interface: iface,
                        cuts,
                        bytes_per_lane,
                        utilization: u,
                        utilization_drop_vs_baseline: (baseline - u) * 100.0,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    if rows.is_empty() {
        return Ok(String::new());
    }
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Lane count the scaling thresholds compare against the 8-lane machine.
pub const CHECK_LANES: usize = 64;

/// Threshold violations in a scaling campaign: FLOP/cycle above the
/// kernel ceiling anywhere, and utilization and speedup bounds on the
/// 64-lane machine at 512 B/lane (plus 16384 B/lane for fdotproduct).
/// Speedup bounds apply only when the campaign includes 8 lanes.
pub fn check_scaling(rows: &[ScalingRow]) -> Vec<String> {
    let mut bad = Vec::new();
    let has_8 = |k: Kernel, b: usize| rows.iter().any(|r| r.kernel == k && r.bytes_per_lane == b && r.lanes == 8);
    for r in rows {
        let ceiling = r.kernel.max_perf(r.lanes);
        if r.flop_per_cycle > ceiling * (1.0 + 1e-12) {
            bad.push(format!("{} {} lanes {} B/lane: {:.3} FLOP/cycle exceeds ceiling {ceiling:.3}", r.kernel, r.lanes, r.bytes_per_lane, r.flop_per_cycle));
        }
        if r.lanes != CHECK_LANES {
            continue;
        }
        let mut range = |what: &str, v: f64, lo: f64, hi: f64| {
            if !(lo..=hi).contains(&v) {
                bad.push(format!("{} {} lanes {} B/lane: {what} {v:.4} outside [{lo}, {hi}]", r.kernel, r.lanes, r.bytes_per_lane));
            }
        };
        if r.bytes_per_lane == 512 {
            match r.kernel {
                Kernel::Fmatmul => {
                    range("utilization", r.utilization, 0.97, 1.0);
                    range("fraction of ceiling", r.flop_per_cycle / r.kernel.max_perf(r.lanes), 0.97, 1.0);
                }
                Kernel::Fconv2d => range("utilization", r.utilization, 0.95, 1.0),
                _ => {}
            }
            if has_8(r.kernel, 512) {
                match r.kernel {
                    Kernel::Fmatmul | Kernel::Fconv2d | Kernel::Jacobi2d | Kernel::Exp => {
                        range("speedup", r.speedup_vs_8lane, 7.6, 8.0)
                    }
                    Kernel::Fdotproduct => range("speedup", r.speedup_vs_8lane, 5.2, 7.0),
                    Kernel::Softmax => {}
                }
            }
        }
        if r.kernel == Kernel::Fdotproduct && r.bytes_per_lane == 16384 && has_8(r.kernel, 16384) {
            range("speedup", r.speedup_vs_8lane, 7.5, f64::INFINITY);
        }
    }
    bad
}

/// Threshold violations in a latency campaign: 4 GLSU cuts and 1 ring cut
/// may cost at most 2 pp at 128 B/lane and above; 1 REQI cut at most 6 pp
/// at 128 B/lane and 1 pp at 512 B/lane.
pub fn check_latency(rows: &[LatencyRow]) -> Vec<String> {
    let mut bad = Vec::new();
    for r in rows {
        let limit = match (r.interface, r.cuts, r.bytes_per_lane) {
            (Interface::Glsu, 4, b) if b >= 128 => Some(2.0),
            (Interface::Ring, 1, b) if b >= 128 => Some(2.0),
            (Interface::Reqi, 1, 128) => Some(6.0),
            (Interface::Reqi, 1, 512) => Some(1.0),
            _ => None,
        };
        if let Some(limit) = limit {
            if r.utilization_drop_vs_baseline > limit {
                bad.push(format!(
                    "{} {} {} cuts {} B/lane: drop {:.2} pp exceeds {limit} pp",
                    r.kernel, r.interface, r.cuts, r.bytes_per_lane, r.utilization_drop_vs_baseline
                ));
            }
        }
    }
    bad
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("unrecognized header: {0}")]
    Header(String),
    #[error("io: {0}")]
    Io(String),
}

/// Parsed campaign output with a text summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub scaling: Vec<ScalingRow>,
    pub latency: Vec<LatencyRow>,
    /// Grid points absent from the input, described in words.
    pub missing: Vec<String>,
    pub summary: String,
}

fn parse_rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, ReportError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in rd.deserialize().enumerate() {
        // Row numbers count the header as row 1.
        rows.push(rec.map_err(|e: csv::Error| ReportError::Malformed { row: k + 2, message: e.to_string() })?);
    }
    Ok(rows)
}

/// Parse one or more campaign CSV texts (scaling or latency, recognized by
/// header) and summarize them.
pub fn report(inputs: &[&str]) -> Result<Report, ReportError> {
    let mut rep = Report::default();
    for text in inputs {
        let header = text.lines().next().unwrap_or("").trim();
        if header.is_empty() {
            continue;
        }
        if header.contains("speedup_vs_8lane") {
            rep.scaling.extend(parse_rows::<ScalingRow>(text)?);
        } else if header.contains("utilization_drop_vs_baseline") {
            rep.latency.extend(parse_rows::<LatencyRow>(text)?);
        } else {
            return Err(ReportError::Header(header.to_string()));
        }
    }
    rep.missing = missing_cells(&rep);
    rep.summary = summarize(&rep);
    Ok(rep)
}

fn missing_cells(rep: &Report) -> Vec<String> {
    let mut missing = Vec::new();
    let kernels: BTreeSet<Kernel> = rep.scaling.iter().map(|r| r.kernel).collect();
    let lanes: BTreeSet<usize> = rep.scaling.iter().map(|r| r.lanes).collect();
    let sizes: BTreeSet<usize> = rep.scaling.iter().map(|r| r.bytes_per_lane).collect();
    let have: BTreeSet<(Kernel, usize, usize)> =
        rep.scaling.iter().map(|r| (r.kernel, r.lanes, r.bytes_per_lane)).collect();
    for &k in &kernels {
        for &l in &lanes {
            for &b in &sizes {
                if !have.contains(&(k, l, b)) {
                    missing.push(format!("scaling: {k} at {l} lanes, {b} B/lane"));
                }
            }
        }
    }
    let kernels: BTreeSet<Kernel> = rep.latency.iter().map(|r| r.kernel).collect();
    let settings: BTreeSet<(Interface, u32)> = rep.latency.iter().map(|r| (r.interface, r.cuts)).collect();
    let sizes: BTreeSet<usize> = rep.latency.iter().map(|r| r.bytes_per_lane).collect();
    let have: BTreeSet<(Kernel, Interface, u32, usize)> =
        rep.latency.iter().map(|r| (r.kernel, r.interface, r.cuts, r.bytes_per_lane)).collect();
    for &k in &kernels {
        for &(i, c) in &settings {
            for &b in &sizes {
                if !have.contains(&(k, i, c, b)) {
                    missing.push(format!("latency: {k}, {i} with {c} cuts, {b} B/lane"));
                }
            }
        }
    }
    missing
}

fn summarize(rep: &Report) -> String {
    let mut s = String::new();
    if !rep.scaling.is_empty() {
        s.push_str("Performance scaling (speedup vs the smallest AraXL configuration, 4-lane clusters)\n");
        s.push_str(&format!(
            "{:<12} {:>6} {:>8} {:>12} {:>10} {:>8}\n",
            "kernel", "lanes", "B/lane", "FLOP/cycle", "util", "speedup"
        ));
        for r in &rep.scaling {
            s.push_str(&format!(
                "{:<12} {:>6} {:>8} {:>12.2} {:>9.1}% {:>8.2}\n",
                r.kernel.name(),
                r.lanes,
                r.bytes_per_lane,
                r.flop_per_cycle,
                100.0 * r.utilization,
                r.speedup_vs_8lane
            ));
        }
    }
    if !rep.latency.is_empty() {
        if !s.is_empty() {
            s.push('\n');
        }
        s.push_str("Latency tolerance (utilization drop vs no cuts, percentage points)\n");
        s.push_str(&format!("{:<12} {:<6} {:>5} {:>8} {:>8} {:>8}\n", "kernel", "iface", "cuts", "B/lane", "util", "drop"));
        for r in rep.latency.iter().filter(|r| r.cuts > 0) {
            s.push_str(&format!(
                "{:<12} {:<6} {:>5} {:>8} {:>7.1}% {:>8.2}\n",
                r.kernel.name(),
                r.interface.name(),
                r.cuts,
                r.bytes_per_lane,
                100.0 * r.utilization,
                r.utilization_drop_vs_baseline
            ));
        }
    }
    if !rep.missing.is_empty() {
        s.push_str("\nMissing cells:\n");
        for m in &rep.missing {
            s.push_str(&format!("  {m}\n"));
        }
    }
    s
}

#[derive(Debug, Serialize)]
struct Fig5Row {
    kernel: Kernel,
    lanes: usize,
    bytes_per_lane: usize,
    speedup: f64,
    utilization: f64,
}

#[derive(Debug, Serialize)]
struct Fig6Row {
    kernel: Kernel,
    bytes_per_lane: usize,
    cuts: u32,
    utilization: f64,
    utilization_drop_pp: f64,
}

/// Write `fig5.csv` (scaling) and `fig6a/b/c.csv` (GLSU, REQI and ring
/// latency) for the rows present in the report. Returns the files written.
pub fn write_figures(rep: &Report, dir: &Path) -> Result<Vec<String>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if !rep.scaling.is_empty() {
        let rows: Vec<Fig5Row> = rep
            .scaling
            .iter()
            .map(|r| Fig5Row {
                kernel: r.kernel,
                lanes: r.lanes,
                bytes_per_lane: r.bytes_per_lane,
                speedup: r.speedup_vs_8lane,
                utilization: r.utilization,
            })
            .collect();
        write_csv(&rows, fs::File::create(dir.join("fig5.csv"))?)?;
        written.push("fig5.csv".to_string());
    }
    for (iface, name) in [(Interface::Glsu, "fig6a.csv"), (Interface::Reqi, "fig6b.csv"), (Interface::Ring, "fig6c.csv")] {
        let rows: Vec<Fig6Row> = rep
            .latency
            .iter()
            .filter(|r| r.interface == iface && r.cuts > 0)
            .map(|r| Fig6Row {
                kernel: r.kernel,
                bytes_per_lane: r.bytes_per_lane,
                cuts: r.cuts,
                utilization: r.utilization,
                utilization_drop_pp: r.utilization_drop_vs_baseline,
            })
            .collect();
        if !rows.is_empty() {
            write_csv(&rows, fs::File::create(dir.join(name))?)?;
            written.push(name.to_string());
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentPlan {
        ExperimentPlan {
            kernels: vec![Kernel::Fdotproduct, Kernel::Exp],
            clusters: vec![1, 2],
            bytes_per_lane: vec![64],
            ..ExperimentPlan::scaling()
        }
    }

    #[test]
    fn config_scales_vlen_and_width_with_lanes() {
        let p = ExperimentPlan::scaling();
        let c = p.config(16);
        assert_eq!(c.total_lanes(), 64);
        assert_eq!(c.vlen, 65536);
        assert_eq!(c.mem_width_bytes, 512);
    }

    #[test]
    fn scaling_rows_normalize_to_smallest_machine() {
        let rows = run_scaling(&small()).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.utilization > 0.0 && r.utilization <= 1.0);
            assert!(r.speedup_vs_8lane > 0.0);
            if r.lanes == 4 {
                assert_eq!(r.speedup_vs_8lane, 1.0);
            }
        }
    }

    #[test]
    fn latency_baseline_matches_scaling() {
        let mut plan = small();
        plan.clusters = vec![2];
        plan.cuts = vec![(Interface::Ring, 1)];
        let lat = run_latency(&plan).unwrap();
        let sc = run_scaling(&plan).unwrap();
        for r in lat.iter().filter(|r| r.cuts == 0) {
            let s = sc.iter().find(|s| s.kernel == r.kernel && s.bytes_per_lane == r.bytes_per_lane).unwrap();
            assert_eq!(s.utilization, r.utilization);
        }
        assert_eq!(lat.len(), 4);
    }

    #[test]
    fn report_examples() {
        let empty = report(&[""]).unwrap();
        assert!(empty.summary.is_empty());
        let text = "kernel,lanes,bytes_per_lane,cycles,flops,flop_per_cycle,utilization,speedup_vs_8lane,seed\n\
                    exp,8,64,10,20,2.0,0.5,1.0,1\n\
                    exp,16,128,10,20,2.0,0.5,1.0,1\n";
        let rep = report(&[text]).unwrap();
        assert_eq!(rep.scaling.len(), 2);
        assert_eq!(rep.missing.len(), 2);
        let bad = format!("{text}exp,8,oops,1,1,1,1,1,1\n");
        match report(&[&bad]) {
            Err(ReportError::Malformed { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
    }
}
