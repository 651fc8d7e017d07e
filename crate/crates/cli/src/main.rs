use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use araxl_core::config::MachineConfig;
use araxl_core::engine::{self, RunOptions};
use araxl_core::harness::{
    self, check_latency, check_scaling, csv_string, report, write_figures, ExperimentPlan, HarnessError, Interface,
};
use araxl_core::image::MemoryImage;
use araxl_core::kernels::{build, generate_with_seed, Kernel, DEFAULT_SEED};
use araxl_core::layout::layout_table;
use araxl_core::rvv::{golden_execute, Program};
use clap::{Args, Parser, Subcommand};

/// Exit status when the timed engine disagrees with the reference model.
const EXIT_MISMATCH: u8 = 2;
/// Exit status when `--check` finds a threshold violation.
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "araxl-sim", version, about = "Cycle-approximate simulator of a clustered RISC-V vector processor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark program and its input memory image.
    Gen {
        #[arg(long)]
        kernel: Kernel,
        #[arg(long, default_value_t = 512)]
        bytes_per_lane: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Program text path; the image is written next to it with `.img` appended.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        machine: MachineArgs,
    },
    /// Simulate a generated kernel or a program file and print statistics.
    Run {
        #[arg(long, conflicts_with = "program")]
        kernel: Option<Kernel>,
        #[arg(long, default_value_t = 512)]
        bytes_per_lane: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Program text file.
        #[arg(long, requires = "image")]
        program: Option<PathBuf>,
        /// Memory image file written by `gen`.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Write the ring link event log to this file.
        #[arg(long)]
        ring_trace: Option<PathBuf>,
        #[command(flatten)]
        machine: MachineArgs,
    },
    /// Weak-scaling campaign over lane counts and vector sizes.
    Scaling {
        #[command(flatten)]
        campaign: CampaignArgs,
        /// Cluster counts to sweep.
        #[arg(long = "cluster-sweep", value_delimiter = ',', default_value = "2,4,8,16")]
        cluster_sweep: Vec<usize>,
    },
    /// Latency-tolerance campaign: cuts on one interface at a time.
    Latency {
        #[command(flatten)]
        campaign: CampaignArgs,
        /// Cluster count of the machine under test.
        #[arg(long, default_value_t = 16)]
        clusters: usize,
        #[arg(long, default_value_t = 4)]
        glsu_cuts: u32,
        #[arg(long, default_value_t = 1)]
        reqi_cuts: u32,
        #[arg(long, default_value_t = 1)]
        ring_cuts: u32,
    },
    /// Summarize campaign CSV files and write per-figure data files.
    Report {
        /// CSV files produced by `scaling` or `latency`.
        inputs: Vec<PathBuf>,
        /// Directory for fig5.csv and fig6a/b/c.csv.
        #[arg(long)]
        figures: Option<PathBuf>,
    },
    /// Print the element-to-lane mapping of a machine.
    Layout {
        #[arg(long, default_value_t = 16)]
        vl: usize,
        #[command(flatten)]
        machine: MachineArgs,
    },
}

/// Machine selection. `--lanes` is the total lane count; without
/// `--clusters` the machine is built from 4-lane clusters.
#[derive(Args, Clone, Default)]
struct MachineArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total number of lanes.
    #[arg(long)]
    lanes: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    /// Vector register length in bits.
    #[arg(long)]
    vlen: Option<usize>,
    #[arg(long)]
    glsu_cuts: Option<u32>,
    #[arg(long)]
    reqi_cuts: Option<u32>,
    #[arg(long)]
    ring_cuts: Option<u32>,
}

impl MachineArgs {
    fn resolve(&self) -> Result<MachineConfig, String> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                MachineConfig::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => MachineConfig::default(),
        };
        let vlen_per_lane = cfg.vlen / cfg.total_lanes();
        if self.lanes.is_some() || self.clusters.is_some() {
            let total = self.lanes.unwrap_or(cfg.total_lanes());
            let clusters = self.clusters.unwrap_or((total / 4).max(1));
            if clusters == 0 || total % clusters != 0 {
                return Err(format!("{total} lanes cannot be split into {clusters} clusters"));
            }
            let shape = MachineConfig::new(total / clusters, clusters);
            cfg.lanes = shape.lanes;
            cfg.clusters = shape.clusters;
            cfg.mem_width_bytes = shape.mem_width_bytes;
            cfg.vlen = vlen_per_lane * shape.total_lanes();
        }
        if let Some(v) = self.vlen {
            cfg.vlen = v;
        }
        if let Some(c) = self.glsu_cuts {
            cfg.glsu_cuts = c;
        }
        if let Some(c) = self.reqi_cuts {
            cfg.reqi_cuts = c;
        }
        if let Some(c) = self.ring_cuts {
            cfg.ring_cuts = c;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CampaignArgs {
    /// Kernels to run (default: all).
    #[arg(long, value_delimiter = ',')]
    kernel: Vec<Kernel>,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    bytes_per_lane: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Configuration file for latencies and cuts shared by all cells.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 if any threshold is violated.
    #[arg(long)]
    check: bool,
}

impl CampaignArgs {
    fn plan(&self, clusters: Vec<usize>) -> Result<ExperimentPlan, String> {
        let base = MachineArgs { config: self.config.clone(), ..Default::default() }.resolve()?;
        Ok(ExperimentPlan {
            kernels: if self.kernel.is_empty() { Kernel::ALL.to_vec() } else { self.kernel.clone() },
            lanes: 4,
            clusters,
            bytes_per_lane: self.bytes_per_lane.clone(),
            cuts: Vec::new(),
            base,
            seed: self.seed,
        })
    }

    fn emit(&self, csv: &str) -> Result<(), String> {
        match &self.out {
            Some(p) => fs::write(p, csv).map_err(|e| format!("{}: {e}", p.display())),
            None => {
                print!("{csv}");
                Ok(())
            }
        }
    }
}

enum Failure {
    Error(String),
    Mismatch(String),
    Check(Vec<String>),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Error(s)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Mismatch { .. } => Failure::Mismatch(e.to_string()),
            other => Failure::Error(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("mismatch: {msg}");
            ExitCode::from(EXIT_MISMATCH)
        }
        Err(Failure::Check(violations)) => {
            for v in &violations {
                eprintln!("check failed: {v}");
            }
            ExitCode::from(EXIT_CHECK)
        }
    }
}

fn image_path(program: &Path) -> PathBuf {
    let mut s = program.as_os_str().to_owned();
    s.push(".img");
    PathBuf::from(s)
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen { kernel, bytes_per_lane, seed, out, machine } => {
            let cfg = machine.resolve()?;
            let (spec, program, image) = build(kernel, &cfg, bytes_per_lane, seed).map_err(|e| e.to_string())?;
            fs::write(&out, program.to_text()).map_err(|e| format!("{}: {e}", out.display()))?;
            let img = image_path(&out);
            let file = fs::File::create(&img).map_err(|e| format!("{}: {e}", img.display()))?;
            image.write_to(std::io::BufWriter::new(file)).map_err(|e| format!("{}: {e}", img.display()))?;
            println!(
                "{}: N = {} elements, LMUL {}, {} instructions; image {} ({} bytes)",
                spec.kernel,
                spec.n,
                spec.lmul,
                program.instructions.len(),
                img.display(),
                image.len()
            );
            Ok(())
        }
        Command::Run { kernel, bytes_per_lane, seed, program, image, ring_trace, machine } => {
            let cfg = machine.resolve()?;
            let (program, image, golden) = match (kernel, program, image) {
                (Some(k), _, _) => {
                    let inst = generate_with_seed(k, &cfg, bytes_per_lane, seed).map_err(|e| e.to_string())?;
                    (inst.program, inst.image, inst.golden)
                }
                (None, Some(p), Some(i)) => {
                    let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                    let program = Program::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                    let file = fs::File::open(&i).map_err(|e| format!("{}: {e}", i.display()))?;
                    let image = MemoryImage::read_from(std::io::BufReader::new(file))
                        .map_err(|e| format!("{}: {e}", i.display()))?;
                    let golden = golden_execute(&program, &image, cfg.lanes, cfg.clusters, cfg.vlen)
                        .map_err(|e| format!("reference model: {e}"))?;
                    (program, image, golden.memory)
                }
                _ => return Err(Failure::Error("give --kernel or --program with --image".into())),
            };
            let options = RunOptions { ring_trace: ring_trace.is_some(), ..Default::default() };
            let res = engine::run_with(&program, &cfg, &image, options).map_err(|e| e.to_string())?;
            if let Some(path) = ring_trace {
                let mut text = res.ring_trace.join("\n");
                text.push('\n');
                fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let s = &res.stats;
            println!("machine: {} clusters x {} lanes, VLEN {}", cfg.clusters, cfg.lanes, cfg.vlen);
            println!("cycles: {}", s.total_cycles);
            println!("flops: {}", s.flops);
            println!("flop_per_cycle: {:.4}", s.flop_per_cycle());
            println!("utilization: {:.4}", s.utilization());
            println!("vector_instructions: {}", s.vector_instructions);
            println!("scalar_instructions: {}", s.scalar_instructions);
            println!("reqi_stall: {}", s.reqi_stall);
            println!("queue_stall: {}", s.queue_stall);
            println!("memory_beats: {}", s.memory_beats);
            println!("memory_stall: {}", s.memory_stall);
            println!("ring_packets: {}", s.ring_packets);
            println!("ring_stall: {}", s.ring_stall);
            println!("reshuffles: {}", s.reshuffles);
            if res.memory != golden {
                return Err(Failure::Mismatch("final memory differs from the reference model".into()));
            }
            println!("reference: match");
            Ok(())
        }
        Command::Scaling { campaign, cluster_sweep } => {
            let plan = campaign.plan(cluster_sweep)?;
            let rows = harness::run_scaling(&plan)?;
            campaign.emit(&csv_string(&rows)?)?;
            if campaign.check {
                let bad = check_scaling(&rows);
                if !bad.is_empty() {
                    return Err(Failure::Check(bad));
                }
            }
            Ok(())
        }
        Command::Latency { campaign, clusters, glsu_cuts, reqi_cuts, ring_cuts } => {
            let mut plan = campaign.plan(vec![clusters])?;
            plan.cuts = vec![(Interface::Glsu, glsu_cuts), (Interface::Reqi, reqi_cuts), (Interface::Ring, ring_cuts)];
            let rows = harness::run_latency(&plan)?;
            campaign.emit(&csv_string(&rows)?)?;
            if campaign.check {
                let bad = check_latency(&rows);
                if !bad.is_empty() {
                    return Err(Failure::Check(bad));
                }
            }
            Ok(())
        }
        Command::Report { inputs, figures } => {
            let texts = inputs
                .iter()
                .map(|p| fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display())))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let rep = report(&refs).map_err(|e| e.to_string())?;
            if !rep.scaling.is_empty() {
                println!("Speedups are relative to the smallest AraXL configuration in the data (8 lanes in the default campaign).");
            }
            print!("{}", rep.summary);
            if let Some(dir) = figures {
                for f in write_figures(&rep, &dir)? {
                    println!("wrote {}", dir.join(f).display());
                }
            }
            Ok(())
        }
        Command::Layout { vl, machine } => {
            let cfg = machine.resolve()?;
            print!("{}", layout_table(vl, cfg.lanes, cfg.clusters));
            Ok(())
        }
    }
}
