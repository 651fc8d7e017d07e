use std::fmt;

use thiserror::Error;

/// Selected element width in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sew {
    E8,
    E16,
    E32,
    E64,
}

impl Sew {
    pub fn from_bits(bits: u32) -> Result<Self, ConfigError> {
        match bits {
            8 => Ok(Sew::E8),
            16 => Ok(Sew::E16),
            32 => Ok(Sew::E32),
            64 => Ok(Sew::E64),
            other => Err(ConfigError::IllegalSew(other)),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            Sew::E8 => 8,
            Sew::E16 => 16,
            Sew::E32 => 32,
            Sew::E64 => 64,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }
}

/// Register group multiplier. Fractional LMUL is not part of the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lmul {
    M1,
    M2,
    M4,
    M8,
}

impl Lmul {
    pub fn from_factor(factor: u32) -> Result<Self, ConfigError> {
        match factor {
            1 => Ok(Lmul::M1),
            2 => Ok(Lmul::M2),
            4 => Ok(Lmul::M4),
            8 => Ok(Lmul::M8),
            other => Err(ConfigError::IllegalLmul(other)),
        }
    }

    pub fn factor(self) -> usize {
        match self {
            Lmul::M1 => 1,
            Lmul::M2 => 2,
            Lmul::M4 => 4,
            Lmul::M8 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("illegal SEW {0}")]
    IllegalSew(u32),
    #[error("illegal LMUL {0}")]
    IllegalLmul(u32),
    #[error("VLEN {0} is not a supported vector register width")]
    IllegalVlen(usize),
}

/// The `vtype`/`vl` configuration state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VType {
    pub sew: Sew,
    pub lmul: Lmul,
    pub vl: usize,
}

impl VType {
    pub fn vlmax(&self, vlen: usize) -> usize {
        vlmax(self.sew, self.lmul, vlen)
    }
}

pub fn vlmax(sew: Sew, lmul: Lmul, vlen: usize) -> usize {
    vlen / sew.bits() as usize * lmul.factor()
}

/// `vl = min(avl, VLMAX)`.
pub fn vsetvl(avl: u64, sew: Sew, lmul: Lmul, vlen: usize) -> Result<usize, ConfigError> {
    if vlen == 0 || !vlen.is_power_of_two() || vlen > 65536 {
        return Err(ConfigError::IllegalVlen(vlen));
    }
    let max = vlmax(sew, lmul, vlen) as u64;
    Ok(avl.min(max) as usize)
}

/// Integer register index (x0..x31).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct XReg(pub u8);

/// Floating-point register index (f0..f31).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FReg(pub u8);

/// Vector register index (v0..v31).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VReg(pub u8);

const XNAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

const FNAMES: [&str; 32] = [
    "ft0", "ft1", "ft2", "ft3", "ft4", "ft5", "ft6", "ft7", "fs0", "fs1", "fa0", "fa1", "fa2",
    "fa3", "fa4", "fa5", "fa6", "fa7", "fs2", "fs3", "fs4", "fs5", "fs6", "fs7", "fs8", "fs9",
    "fs10", "fs11", "ft8", "ft9", "ft10", "ft11",
];

fn numbered(text: &str, prefix: char) -> Option<u8> {
    let rest = text.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse::<u8>().ok().filter(|&n| n < 32)
}

impl XReg {
    pub fn parse(text: &str) -> Option<Self> {
        if text == "fp" {
            return Some(XReg(8));
        }
        numbered(text, 'x')
            .or_else(|| XNAMES.iter().position(|&n| n == text).map(|p| p as u8))
            .map(XReg)
    }
}

impl FReg {
    pub fn parse(text: &str) -> Option<Self> {
        numbered(text, 'f')
            .or_else(|| FNAMES.iter().position(|&n| n == text).map(|p| p as u8))
            .map(FReg)
    }
}

impl VReg {
    pub fn parse(text: &str) -> Option<Self> {
        numbered(text, 'v').map(VReg)
    }
}

impl fmt::Display for XReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(XNAMES[self.0 as usize])
    }
}

impl fmt::Display for FReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

impl fmt::Display for VReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FpOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            FpOp::Add => a + b,
            FpOp::Sub => a - b,
            FpOp::Mul => a * b,
            FpOp::Div => a / b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// Second source of a vector arithmetic instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VSrc {
    Vector(VReg),
    Scalar(FReg),
}

/// Slide amount source (`.vx` or `.vi`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlideAmount {
    Reg(XReg),
    Imm(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionOrder {
    Unordered,
    Ordered,
}

/// One instruction of the supported RVV subset.
///
/// Operand naming follows the assembly syntax: `vs2` is the vector operand
/// that appears second-to-last, `src1` the `vs1`/`rs1` operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorInstruction {
    Vsetvli { rd: XReg, avl: XReg, sew: Sew, lmul: Lmul },
    Load { eew: Sew, vd: VReg, base: XReg, masked: bool },
    Store { eew: Sew, vs3: VReg, base: XReg, masked: bool },
    LoadStrided { eew: Sew, vd: VReg, base: XReg, stride: XReg, masked: bool },
    StoreStrided { eew: Sew, vs3: VReg, base: XReg, stride: XReg, masked: bool },
    Arith { op: FpOp, vd: VReg, vs2: VReg, src1: VSrc, masked: bool },
    /// `vd += src1 * vs2`
    Macc { vd: VReg, src1: VSrc, vs2: VReg, masked: bool },
    Compare { op: CmpOp, vd: VReg, vs2: VReg, src1: VSrc, masked: bool },
    /// `vd[0] = vs1[0] + sum(vs2[0..vl])`
    RedSum { order: ReductionOrder, vd: VReg, vs2: VReg, vs1: VReg, masked: bool },
    Slide1Up { vd: VReg, vs2: VReg, fill: FReg, masked: bool },
    Slide1Down { vd: VReg, vs2: VReg, fill: FReg, masked: bool },
    SlideUp { vd: VReg, vs2: VReg, amount: SlideAmount, masked: bool },
    SlideDown { vd: VReg, vs2: VReg, amount: SlideAmount, masked: bool },
    /// `vd[i] = v0[i] ? fs1 : vs2[i]`
    Merge { vd: VReg, vs2: VReg, fs1: FReg },
    Splat { vd: VReg, fs1: FReg },
    MoveToScalar { fd: FReg, vs2: VReg },
}

impl VectorInstruction {
    pub fn is_masked(&self) -> bool {
        use VectorInstruction::*;
        match *self {
            Load { masked, .. }
            | Store { masked, .. }
            | LoadStrided { masked, .. }
            | StoreStrided { masked, .. }
            | Arith { masked, .. }
            | Macc { masked, .. }
            | Compare { masked, .. }
            | RedSum { masked, .. }
            | Slide1Up { masked, .. }
            | Slide1Down { masked, .. }
            | SlideUp { masked, .. }
            | SlideDown { masked, .. } => masked,
            Merge { .. } => true,
            Vsetvli { .. } | Splat { .. } | MoveToScalar { .. } => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntOp {
    Add,
    Sub,
    Sll,
    Mul,
}

/// Scalar-core stub instructions: loop control, address arithmetic and
/// fixed-latency scalar loads/stores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScalarInstruction {
    Li { rd: XReg, imm: i64 },
    Addi { rd: XReg, rs: XReg, imm: i64 },
    Slli { rd: XReg, rs: XReg, shamt: u32 },
    Alu { op: IntOp, rd: XReg, rs1: XReg, rs2: XReg },
    Fld { fd: FReg, base: XReg, offset: i64 },
    Fsd { fs: FReg, base: XReg, offset: i64 },
    Fp { op: FpOp, fd: FReg, fs1: FReg, fs2: FReg },
    FmvD { fd: FReg, fs: FReg },
    Bnez { rs: XReg, target: String },
    Beqz { rs: XReg, target: String },
    Jump { target: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Vector(VectorInstruction),
    Scalar(ScalarInstruction),
    /// `.loop label count`: branch back to `label` until the body has run
    /// `count` times in total.
    Loop { target: String, count: u64 },
}
