//! Benchmark generators: weak-scaled problem sizes, input data, reference
//! outputs and FLOP counts for the six evaluation kernels.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MachineConfig;
use crate::image::{MemoryImage, MAX_IMAGE_BYTES};
use crate::rvv::{golden_execute, vlmax, ExecError, Lmul, ParseError, Program, Sew};

pub const DEFAULT_SEED: u64 = 0x5EED;
/// Address of the first byte of every generated memory image.
pub const DATA_BASE: u64 = 0x8000_0000;

pub const MATMUL_ROWS: usize = 64;
pub const MATMUL_INNER: usize = 256;
pub const GRID_ROWS: usize = 256;
pub const FILTER: usize = 7;
pub const SOFTMAX_ROWS: usize = 64;
/// Taylor degree of the exponential polynomial.
const EXP_DEGREE: usize = 10;
/// The argument is scaled by 2^-EXP_SQUARINGS and the result squared back.
const EXP_SQUARINGS: usize = 4;
/// Vector FLOPs per element of the exponential.
pub const EXP_FLOPS: u64 = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Fmatmul,
    Fconv2d,
    Jacobi2d,
    Fdotproduct,
    Exp,
    Softmax,
}

impl Kernel {
    pub const ALL: [Kernel; 6] =
        [Kernel::Fmatmul, Kernel::Fconv2d, Kernel::Jacobi2d, Kernel::Fdotproduct, Kernel::Exp, Kernel::Softmax];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Fmatmul => "fmatmul",
            Kernel::Fconv2d => "fconv2d",
            Kernel::Jacobi2d => "jacobi2d",
            Kernel::Fdotproduct => "fdotproduct",
            Kernel::Exp => "exp",
            Kernel::Softmax => "softmax",
        }
    }

    /// Register grouping used at a given vector footprint.
    pub fn lmul(self, bytes_per_lane: usize) -> usize {
        match self {
            Kernel::Fmatmul => match bytes_per_lane {
                0..=128 => 1,
                129..=256 => 2,
                _ => 4,
            },
            Kernel::Fconv2d => 2,
            Kernel::Jacobi2d => 4,
            Kernel::Fdotproduct => 8,
            Kernel::Exp | Kernel::Softmax => 1,
        }
    }

    /// Peak DP-FLOP/cycle on `total_lanes` lanes.
    pub fn max_perf(self, total_lanes: usize) -> f64 {
        let lc = total_lanes as f64;
        match self {
            Kernel::Fmatmul | Kernel::Fconv2d => 2.0 * lc,
            Kernel::Jacobi2d | Kernel::Fdotproduct => lc,
            Kernel::Exp => 28.0 / 21.0 * lc,
            Kernel::Softmax => 32.0 / 25.0 * lc,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kernel::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| KernelError::UnknownKernel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("problem size: {0}")]
    Size(String),
    #[error("generated program does not assemble: {0}")]
    Assembly(#[from] ParseError),
    #[error("reference execution failed: {0}")]
    Golden(#[from] ExecError),
}

/// Problem dimensions of one kernel on one machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelSpec {
    pub kernel: Kernel,
    pub lanes: usize,
    pub clusters: usize,
    pub bytes_per_lane: usize,
    /// Row length (or vector length) in elements: `bytes_per_lane / 8` per lane.
    pub n: usize,
    pub lmul: usize,
    /// Elements per vector instruction.
    pub strip: usize,
    pub seed: u64,
}

impl KernelSpec {
    pub fn new(kernel: Kernel, cfg: &MachineConfig, bytes_per_lane: usize, seed: u64) -> Result<Self, KernelError> {
        if bytes_per_lane < 64 || !bytes_per_lane.is_power_of_two() {
            return Err(KernelError::Size(format!("{bytes_per_lane} bytes per lane is not a power of two >= 64")));
        }
        let lmul = kernel.lmul(bytes_per_lane);
        let n = bytes_per_lane / 8 * cfg.total_lanes();
        let max = vlmax(Sew::E64, Lmul::from_factor(lmul as u32).expect("table values are legal"), cfg.vlen);
        let strip = n.min(max);
        Ok(KernelSpec {
            kernel,
            lanes: cfg.lanes,
            clusters: cfg.clusters,
            bytes_per_lane,
            n,
            lmul,
            strip,
            seed,
        })
    }

    pub fn strips(&self) -> usize {
        self.n / self.strip
    }

    pub fn total_lanes(&self) -> usize {
        self.lanes * self.clusters
    }
}

/// Vector FLOPs performed by the generated program.
pub fn flop_count(spec: &KernelSpec) -> u64 {
    let n = spec.n as u64;
    match spec.kernel {
        Kernel::Fmatmul => 2 * (MATMUL_ROWS * MATMUL_INNER) as u64 * n,
        // First tap is a multiply, the other 48 are fused multiply-adds.
        Kernel::Fconv2d => (GRID_ROWS - FILTER + 1) as u64 * n * (2 * (FILTER * FILTER) as u64 - 1),
        Kernel::Jacobi2d => (GRID_ROWS - 2) as u64 * n * 5,
        Kernel::Fdotproduct => 2 * n,
        Kernel::Exp => EXP_FLOPS * n,
        // Exponential, one reduction add and one scaling multiply per element.
        Kernel::Softmax => SOFTMAX_ROWS as u64 * (EXP_FLOPS + 2) * n,
    }
}

/// A ready-to-run benchmark.
#[derive(Debug, Clone)]
pub struct KernelInstance {
    pub spec: KernelSpec,
    pub program: Program,
    pub image: MemoryImage,
    /// FLOPs counted by the reference model.
    pub flops: u64,
    /// Memory after reference execution.
    pub golden: MemoryImage,
}

pub fn generate(kernel: Kernel, cfg: &MachineConfig, bytes_per_lane: usize) -> Result<KernelInstance, KernelError> {
    generate_with_seed(kernel, cfg, bytes_per_lane, DEFAULT_SEED)
}

pub fn generate_with_seed(
    kernel: Kernel,
    cfg: &MachineConfig,
    bytes_per_lane: usize,
    seed: u64,
) -> Result<KernelInstance, KernelError> {
    let (spec, program, image) = build(kernel, cfg, bytes_per_lane, seed)?;
    let golden = golden_execute(&program, &image, cfg.lanes, cfg.clusters, cfg.vlen)?;
    Ok(KernelInstance { spec, program, image, flops: golden.flops, golden: golden.memory })
}

/// Program and input image without running the reference model.
pub fn build(
    kernel: Kernel,
    cfg: &MachineConfig,
    bytes_per_lane: usize,
    seed: u64,
) -> Result<(KernelSpec, Program, MemoryImage), KernelError> {
    let spec = KernelSpec::new(kernel, cfg, bytes_per_lane, seed)?;
    let mut b = Builder::new(seed);
    match kernel {
        Kernel::Fmatmul => fmatmul(&spec, &mut b),
        Kernel::Fconv2d => fconv2d(&spec, &mut b),
        Kernel::Jacobi2d => jacobi2d(&spec, &mut b),
        Kernel::Fdotproduct => fdotproduct(&spec, &mut b),
        Kernel::Exp => exp(&spec, &mut b),
        Kernel::Softmax => softmax(&spec, &mut b),
    }
    let image = b.image()?;
    let program = Program::parse(&b.text)?;
    Ok((spec, program, image))
}

/// Accumulates program text and the initial memory contents.
struct Builder {
    text: String,
    rng: ChaCha8Rng,
    next: u64,
    /// `(address, values)` blocks to place in the image.
    blocks: Vec<(u64, Vec<f64>)>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder { text: String::new(), rng: ChaCha8Rng::seed_from_u64(seed), next: DATA_BASE, blocks: Vec::new() }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn reserve(&mut self, elements: usize) -> u64 {
        let addr = self.next.next_multiple_of(4096);
        self.next = addr + 8 * elements as u64;
        addr
    }

    /// Array of uniform random values in [-1, 1).
    fn random(&mut self, elements: usize) -> u64 {
        let addr = self.reserve(elements);
        let values = (0..elements).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
        self.blocks.push((addr, values));
        addr
    }

    fn constants(&mut self, values: &[f64]) -> u64 {
        let addr = self.reserve(values.len());
        self.blocks.push((addr, values.to_vec()));
        addr
    }

    fn image(&self) -> Result<MemoryImage, KernelError> {
        let size = (self.next - DATA_BASE).next_multiple_of(4096) as usize;
        if size > MAX_IMAGE_BYTES {
            return Err(KernelError::Size(format!("needs {size} bytes of memory, limit is {MAX_IMAGE_BYTES}")));
        }
        let mut bytes = vec![0u8; size];
        for (addr, values) in &self.blocks {
            let off = (addr - DATA_BASE) as usize;
            for (k, v) in values.iter().enumerate() {
                bytes[off + 8 * k..off + 8 * k + 8].copy_from_slice(&v.to_le_bytes());
            }
        }
        Ok(MemoryImage::from_bytes(DATA_BASE, bytes).expect("size checked"))
    }

    fn setvl(&mut self, elements: usize, lmul: usize) {
        self.line(format!("li t0, {elements}"));
        self.line(format!("vsetvli t1, t0, e64, m{lmul}"));
    }
}

/// `C = A * B` with `A` 64x256 and `B` 256xN. Rows of `C` accumulate in
/// registers while rows of `B` stream through two load buffers.
fn fmatmul(spec: &KernelSpec, b: &mut Builder) {
    let (n, strip, lm) = (spec.n, spec.strip, spec.lmul);
    let rows_per_block = 16 / lm;
    let a = b.random(MATMUL_ROWS * MATMUL_INNER);
    let bm = b.random(MATMUL_INNER * n);
    let c = b.reserve(MATMUL_ROWS * n);
    let rowb = 8 * n;
    let arow = 8 * MATMUL_INNER;
    let acc = |i: usize| i * lm;
    let (buf0, buf1) = (16, 16 + lm);
    b.setvl(strip, lm);
    b.line(format!("li s0, {a}"));
    b.line(format!("li s1, {bm}"));
    b.line(format!("li s2, {c}"));
    b.line("mm_strip:");
    b.line("addi a0, s0, 0");
    b.line("addi a3, s2, 0");
    b.line("mm_block:");
    for i in 0..rows_per_block {
        b.line(format!("vfmv.v.f v{}, f31", acc(i)));
    }
    b.line("addi a1, a0, 0");
    b.line("addi a2, s1, 0");
    b.line("mm_k:");
    for (buf, koff) in [(buf0, 0), (buf1, 8)] {
        b.line(format!("vle64.v v{buf}, (a2)"));
        b.line(format!("addi a2, a2, {rowb}"));
        for i in 0..rows_per_block {
            b.line(format!("fld f{i}, {}(a1)", i * arow + koff));
        }
        for i in 0..rows_per_block {
            b.line(format!("vfmacc.vf v{}, f{i}, v{buf}", acc(i)));
        }
    }
    b.line("addi a1, a1, 16");
    b.line(format!(".loop mm_k {}", MATMUL_INNER / 2));
    b.line("addi a4, a3, 0");
    for i in 0..rows_per_block {
        b.line(format!("vse64.v v{}, (a4)", acc(i)));
        b.line(format!("addi a4, a4, {rowb}"));
    }
    b.line(format!("addi a0, a0, {}", rows_per_block * arow));
    b.line(format!("addi a3, a3, {}", rows_per_block * rowb));
    b.line(format!(".loop mm_block {}", MATMUL_ROWS / rows_per_block));
    b.line(format!("addi s1, s1, {}", 8 * strip));
    b.line(format!("addi s2, s2, {}", 8 * strip));
    b.line(format!(".loop mm_strip {}", spec.strips()));
}

/// 7x7 convolution over a 256xN grid, computed in place: output row `r`
/// overwrites input row `r` once no later output needs it. Column shifts
/// use slide-by-1 with the next input element as the scalar fill.
fn fconv2d(spec: &KernelSpec, b: &mut Builder) {
    let (n, strip) = (spec.n, spec.strip);
    let grid = b.random(GRID_ROWS * n);
    let filter = b.random(FILTER * FILTER);
    let rowb = 8 * n;
    b.setvl(strip, 2);
    b.line(format!("li s0, {grid}"));
    b.line(format!("li s4, {filter}"));
    b.line("conv_row:");
    for s in 0..spec.strips() {
        let c0 = s * strip;
        for i in 0..FILTER {
            let (mut cur, mut other) = if i % 2 == 0 { (8, 10) } else { (12, 14) };
            b.line(format!("addi a1, s0, {}", i * rowb + 8 * c0));
            b.line(format!("vle64.v v{cur}, (a1)"));
            for j in 0..FILTER {
                let tap = i * FILTER + j;
                let coef = tap % 8;
                b.line(format!("fld f{coef}, {}(s4)", 8 * tap));
                if tap == 0 {
                    b.line(format!("vfmul.vf v0, v{cur}, f{coef}"));
                } else {
                    b.line(format!("vfmacc.vf v0, f{coef}, v{cur}"));
                }
                if j + 1 < FILTER {
                    let col = c0 + strip + j;
                    let fill = if col < n {
                        let f = 8 + j % 4;
                        b.line(format!("fld f{f}, {}(a1)", 8 * (strip + j)));
                        f
                    } else {
                        31
                    };
                    b.line(format!("vfslide1down.vf v{other}, v{cur}, f{fill}"));
                    std::mem::swap(&mut cur, &mut other);
                }
            }
        }
        b.line(format!("addi a2, s0, {}", 8 * c0));
        b.line("vse64.v v0, (a2)");
    }
    b.line(format!("addi s0, s0, {rowb}"));
    b.line(format!(".loop conv_row {}", GRID_ROWS - FILTER + 1));
}

/// One 5-point stencil row: `v0 = 0.2 * (up + down + centre + left + right)`
/// stored at `(s0)`. `after_first_add` runs once `up` has been consumed.
fn jacobi_row(b: &mut Builder, up: usize, centre: usize, down: usize, left: usize, right: usize, after_first_add: &[String]) {
    b.line(format!("vfslide1up.vf v4, v{centre}, f{left}"));
    b.line(format!("vfslide1down.vf v8, v{centre}, f{right}"));
    b.line(format!("vfadd.vv v0, v{up}, v{down}"));
    for l in after_first_add {
        b.line(l);
    }
    b.line(format!("vfadd.vv v0, v0, v{centre}"));
    b.line("vfadd.vv v0, v0, v4");
    b.line("vfadd.vv v0, v0, v8");
    b.line("vfmul.vf v0, v0, f1");
    b.line("vse64.v v0, (s0)");
}

/// Jacobi 5-point stencil over a 256xN grid with zero boundaries. The
/// result for row `r` (1..=254) is written over row `r - 1`, which no later
/// row reads.
fn jacobi2d(spec: &KernelSpec, b: &mut Builder) {
    let (n, strip) = (spec.n, spec.strip);
    let grid = b.random(GRID_ROWS * n);
    let consts = b.constants(&[0.2]);
    let rowb = 8 * n;
    b.setvl(strip, 4);
    b.line(format!("li s4, {consts}"));
    b.line("fld f1, 0(s4)");
    b.line(format!("li s0, {grid}"));
    let interior = GRID_ROWS - 2;
    if spec.strips() == 1 {
        // Whole rows stay in three rotating registers; one load per row.
        let regs = [12, 16, 20];
        b.line("vle64.v v12, (s0)");
        b.line(format!("addi a1, s0, {rowb}"));
        b.line("vle64.v v16, (a1)");
        b.line(format!("addi a1, s0, {}", 2 * rowb));
        b.line("vle64.v v20, (a1)");
        let row = |b: &mut Builder, r: usize| {
            let (up, centre, down) = (regs[(r + 2) % 3], regs[r % 3], regs[(r + 1) % 3]);
            let prefetch = if r + 2 < GRID_ROWS {
                vec![format!("addi a1, s0, {}", 3 * rowb), format!("vle64.v v{up}, (a1)")]
            } else {
                Vec::new()
            };
            jacobi_row(b, up, centre, down, 31, 31, &prefetch);
            b.line(format!("addi s0, s0, {rowb}"));
        };
        let full = interior / 3;
        b.line("jac_rows:");
        for r in 1..=3 {
            row(b, r);
        }
        b.line(format!(".loop jac_rows {full}"));
        for r in 3 * full + 1..=interior {
            row(b, r);
        }
    } else {
        b.line("jac_rows:");
        for s in 0..spec.strips() {
            let c0 = s * strip;
            b.line(format!("addi a1, s0, {}", 8 * c0));
            b.line("vle64.v v12, (a1)");
            b.line(format!("addi a2, a1, {rowb}"));
            b.line("vle64.v v16, (a2)");
            b.line(format!("addi a2, a1, {}", 2 * rowb));
            b.line("vle64.v v20, (a2)");
            let left = if c0 > 0 {
                b.line(format!("fld f2, {}(s0)", rowb + 8 * (c0 - 1)));
                2
            } else {
                31
            };
            let right = if c0 + strip < n {
                b.line(format!("fld f3, {}(s0)", rowb + 8 * (c0 + strip)));
                3
            } else {
                31
            };
            b.line(format!("vfslide1up.vf v4, v16, f{left}"));
            b.line(format!("vfslide1down.vf v8, v16, f{right}"));
            b.line("vfadd.vv v0, v12, v20");
            b.line("vfadd.vv v0, v0, v16");
            b.line("vfadd.vv v0, v0, v4");
            b.line("vfadd.vv v0, v0, v8");
            b.line("vfmul.vf v0, v0, f1");
            b.line("vse64.v v0, (a1)");
        }
        b.line(format!("addi s0, s0, {rowb}"));
        b.line(format!(".loop jac_rows {interior}"));
    }
}

/// Dot product of two N-element vectors; the scalar result is stored
/// after the inputs.
fn fdotproduct(spec: &KernelSpec, b: &mut Builder) {
    let (n, strip) = (spec.n, spec.strip);
    let x = b.random(n);
    let y = b.random(n);
    let out = b.reserve(1);
    b.line("li t3, 1");
    b.line("vsetvli t4, t3, e64, m1");
    b.line("vfmv.v.f v24, f31");
    b.setvl(strip, 8);
    b.line(format!("li s0, {x}"));
    b.line(format!("li s1, {y}"));
    b.line("vle64.v v0, (s0)");
    b.line("vle64.v v8, (s1)");
    b.line("vfmul.vv v16, v0, v8");
    if spec.strips() > 1 {
        b.line("dot_strip:");
        b.line(format!("addi s0, s0, {}", 8 * strip));
        b.line(format!("addi s1, s1, {}", 8 * strip));
        b.line("vle64.v v0, (s0)");
        b.line("vle64.v v8, (s1)");
        b.line("vfmacc.vv v16, v0, v8");
        b.line(format!(".loop dot_strip {}", spec.strips() - 1));
    }
    b.line("vfredusum.vs v24, v16, v24");
    b.line("vfmv.f.s f0, v24");
    b.line(format!("li s2, {out}"));
    b.line("fsd f0, 0(s2)");
}

/// Constants of the exponential, loaded into f1..f14.
fn exp_constants(b: &mut Builder) {
    let mut values = vec![1.0 / (1u64 << EXP_SQUARINGS) as f64, 1.0];
    let mut fact = 1.0;
    for k in 2..=EXP_DEGREE {
        fact *= k as f64;
        values.push(1.0 / fact);
    }
    values.extend([-700.0, 700.0, f64::INFINITY]);
    let addr = b.constants(&values);
    b.line(format!("li s4, {addr}"));
    for (k, _) in values.iter().enumerate() {
        b.line(format!("fld f{}, {}(s4)", k + 1, 8 * k));
    }
}

/// `e^x` of register `x` into register `sum`, using `r` and `t` as scratch:
/// scale down, Taylor polynomial, square back up, then clamp the
/// out-of-range inputs under masks.
fn exp_ops(x: usize, r: usize, sum: usize, t: usize) -> Vec<String> {
    let mut ops = vec![
        format!("vfmul.vf v{r}, v{x}, f1"),
        format!("vfadd.vf v{sum}, v{r}, f2"),
        format!("vfmul.vv v{t}, v{r}, v{r}"),
        format!("vfmacc.vf v{sum}, f3, v{t}"),
    ];
    for k in 3..=EXP_DEGREE {
        ops.push(format!("vfmul.vv v{t}, v{t}, v{r}"));
        ops.push(format!("vfmacc.vf v{sum}, f{}, v{t}", k + 1));
    }
    for _ in 0..EXP_SQUARINGS {
        ops.push(format!("vfmul.vv v{sum}, v{sum}, v{sum}"));
    }
    let (lo, hi, inf) = (EXP_DEGREE + 2, EXP_DEGREE + 3, EXP_DEGREE + 4);
    ops.push(format!("vmflt.vf v0, v{x}, f{lo}"));
    ops.push(format!("vfmerge.vfm v{sum}, v{sum}, f31, v0"));
    ops.push(format!("vmfgt.vf v0, v{x}, f{hi}"));
    ops.push(format!("vfmerge.vfm v{sum}, v{sum}, f{inf}, v0"));
    ops
}

/// Register set for strip `k`, alternating for double buffering: x, r, sum, t.
fn exp_regs(k: usize) -> (usize, usize, usize, usize) {
    let base = 1 + 4 * (k % 2);
    (base, base + 1, base + 2, base + 3)
}

fn load(b: &mut Builder, v: usize, addr: u64) {
    b.line(format!("li a2, {addr}"));
    b.line(format!("vle64.v v{v}, (a2)"));
}

fn store(b: &mut Builder, v: usize, addr: u64) {
    b.line(format!("li a3, {addr}"));
    b.line(format!("vse64.v v{v}, (a3)"));
}

/// Element-wise exponential of an N-element vector. Strips are unrolled so
/// the next strip's input is requested while the current one computes.
fn exp(spec: &KernelSpec, b: &mut Builder) {
    let strip = spec.strip;
    let input = b.random(spec.n);
    let out = b.reserve(spec.n);
    let off = |k: usize| 8 * (k * strip) as u64;
    exp_constants(b);
    b.setvl(strip, 1);
    load(b, exp_regs(0).0, input);
    for k in 0..spec.strips() {
        let (x, r, sum, t) = exp_regs(k);
        for (i, op) in exp_ops(x, r, sum, t).into_iter().enumerate() {
            b.line(op);
            if i == 0 && k + 1 < spec.strips() {
                load(b, exp_regs(k + 1).0, input + off(k + 1));
            }
        }
        store(b, sum, out + off(k));
    }
}

/// Row-wise softmax of a 64xN matrix, software pipelined: the next strip's
/// input is prefetched, the sum of row `r - 1` is reduced inside the
/// exponentials of row `r`, and row `r - 2` is scaled during row `r`.
fn softmax(spec: &KernelSpec, b: &mut Builder) {
    let (n, strip, strips) = (spec.n, spec.strip, spec.strips());
    let input = b.random(SOFTMAX_ROWS * n);
    let out = b.reserve(SOFTMAX_ROWS * n);
    let addr = |base: u64, row: usize, s: usize| base + 8 * (row * n + s * strip) as u64;
    // Register holding the exponential sum of a row before its reduction.
    let acc = |row: usize| if strips == 1 { exp_regs(row).2 } else { 28 + row % 2 };
    let reduce = |b: &mut Builder, row: usize| {
        b.line(format!("vfredusum.vs v30, v{}, v31", acc(row)));
        b.line("vfmv.f.s f20, v30");
    };
    exp_constants(b);
    b.setvl(strip, 1);
    load(b, exp_regs(0).0, input);
    for row in 0..SOFTMAX_ROWS + 2 {
        if row >= 2 {
            b.line("fdiv.d f21, f2, f20");
        }
        if row == SOFTMAX_ROWS {
            reduce(b, row - 1);
        }
        for s in 0..strips {
            if row < SOFTMAX_ROWS {
                let k = row * strips + s;
                let (x, r, sum, t) = exp_regs(k);
                for (i, op) in exp_ops(x, r, sum, t).into_iter().enumerate() {
                    b.line(op);
                    if i == 0 && k + 1 < SOFTMAX_ROWS * strips {
                        let (nr, ns) = ((k + 1) / strips, (k + 1) % strips);
                        load(b, exp_regs(k + 1).0, addr(input, nr, ns));
                    }
                    if i == 3 && s == 0 && row >= 1 {
                        reduce(b, row - 1);
                    }
                }
                store(b, sum, addr(out, row, s));
                if s == 1 {
                    b.line(format!("vfadd.vv v{}, v{}, v{sum}", acc(row), exp_regs(k - 1).2));
                } else if s > 1 {
                    b.line(format!("vfadd.vv v{0}, v{0}, v{sum}", acc(row)));
                }
            }
            if row >= 2 {
                let v = 26 + s % 2;
                let a = addr(out, row - 2, s);
                load(b, v, a);
                b.line(format!("vfmul.vf v{v}, v{v}, f21"));
                store(b, v, a);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rvv::{Instruction, VectorInstruction};

    #[test]
    fn spec_examples() {
        let cfg = MachineConfig::new(4, 2);
        let s = KernelSpec::new(Kernel::Fdotproduct, &cfg, 1024, 0).unwrap();
        assert_eq!(s.n, 1024);
        assert_eq!(Kernel::Fmatmul.max_perf(64), 128.0);
        assert!((Kernel::Exp.max_perf(64) - 85.333).abs() < 1e-3);
        assert!(KernelSpec::new(Kernel::Exp, &cfg, 96, 0).is_err());
        assert_eq!("softmax".parse::<Kernel>().unwrap(), Kernel::Softmax);
        assert!("gemm".parse::<Kernel>().is_err());
    }

    #[test]
    fn flop_count_examples() {
        let cfg = MachineConfig::new(4, 16);
        let mm = KernelSpec::new(Kernel::Fmatmul, &cfg, 512, 0).unwrap();
        assert_eq!(mm.n, 4096);
        assert_eq!(flop_count(&mm), 134_217_728);
        let dot = KernelSpec::new(Kernel::Fdotproduct, &MachineConfig::new(4, 2), 1024, 0).unwrap();
        assert_eq!(flop_count(&dot), 2048);
    }

    #[test]
    fn generated_programs_use_table_lmul() {
        let cfg = MachineConfig::new(4, 2);
        for k in Kernel::ALL {
            for bpl in [64, 128, 256, 512] {
                let (spec, prog, _) = build(k, &cfg, bpl, 1).unwrap();
                let lmuls: Vec<usize> = prog
                    .instructions
                    .iter()
                    .filter_map(|i| match i {
                        Instruction::Vector(VectorInstruction::Vsetvli { lmul, .. }) => Some(lmul.factor()),
                        _ => None,
                    })
                    .collect();
                assert!(lmuls.contains(&spec.lmul), "{k} {bpl}");
                assert!(lmuls.iter().all(|&l| l == spec.lmul || l == 1), "{k} {bpl}");
            }
        }
    }

    #[test]
    fn oversized_problem_is_rejected() {
        let cfg = MachineConfig::new(4, 16);
        assert!(matches!(build(Kernel::Fconv2d, &cfg, 2048, 0), Err(KernelError::Size(_))));
    }
}
