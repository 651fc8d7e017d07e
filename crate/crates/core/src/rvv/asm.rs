//! Textual program format.
//!
//! One instruction per line, `#` starts a comment, `name:` defines a label.
//! Directives: `.data <addr> <hex bytes>` and `.loop <label> <count>`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::isa::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("malformed operand `{0}`")]
    MalformedOperand(String),
    #[error("expected {expected} operands, found {found}")]
    OperandCount { expected: usize, found: usize },
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("bad directive: {0}")]
    BadDirective(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub addr: u64,
    pub bytes: Vec<u8>,
}

/// A parsed program: instruction stream, label table and initial data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub labels: BTreeMap<String, usize>,
    pub data: Vec<DataSegment>,
}

impl Program {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut program = Program::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let mut body = raw.split('#').next().unwrap_or("").trim();
            while let Some(colon) = label_end(body) {
                let name = body[..colon].trim();
                if program.labels.insert(name.to_string(), program.instructions.len()).is_some() {
                    return Err(ParseError { line, kind: ParseErrorKind::DuplicateLabel(name.into()) });
                }
                body = body[colon + 1..].trim();
            }
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix(".data") {
                program.data.push(parse_data(rest).map_err(|kind| ParseError { line, kind })?);
                continue;
            }
            program.instructions.push(decode_line(body, line)?);
        }
        program.check_targets()?;
        Ok(program)
    }

    fn check_targets(&self) -> Result<(), ParseError> {
        for (idx, instr) in self.instructions.iter().enumerate() {
            let target = match instr {
                Instruction::Loop { target, .. } => target,
                Instruction::Scalar(ScalarInstruction::Bnez { target, .. })
                | Instruction::Scalar(ScalarInstruction::Beqz { target, .. })
                | Instruction::Scalar(ScalarInstruction::Jump { target }) => target,
                _ => continue,
            };
            if !self.labels.contains_key(target) {
                // Line numbers are not retained past parsing; report the
                // instruction position instead.
                return Err(ParseError {
                    line: idx + 1,
                    kind: ParseErrorKind::UndefinedLabel(target.clone()),
                });
            }
        }
        Ok(())
    }

    pub fn target(&self, label: &str) -> usize {
        self.labels[label]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for seg in &self.data {
            let _ = write!(out, ".data {:#x} ", seg.addr);
            for b in &seg.bytes {
                let _ = write!(out, "{b:02x}");
            }
            out.push('\n');
        }
        let mut by_index: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for (name, &idx) in &self.labels {
            by_index.entry(idx).or_default().push(name);
        }
        for (idx, instr) in self.instructions.iter().enumerate() {
            for name in by_index.get(&idx).into_iter().flatten() {
                let _ = writeln!(out, "{name}:");
            }
            let _ = writeln!(out, "    {instr}");
        }
        for name in by_index.range(self.instructions.len()..).flat_map(|(_, v)| v) {
            let _ = writeln!(out, "{name}:");
        }
        out
    }
}

fn label_end(body: &str) -> Option<usize> {
    let colon = body.find(':')?;
    let name = body[..colon].trim();
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !name.starts_with('.');
    ok.then_some(colon)
}

fn parse_data(rest: &str) -> Result<DataSegment, ParseErrorKind> {
    let mut parts = rest.split_whitespace();
    let addr = parts
        .next()
        .and_then(parse_u64)
        .ok_or_else(|| ParseErrorKind::BadDirective(".data needs an address".into()))?;
    let hex: String = parts.collect();
    if hex.len() % 2 != 0 {
        return Err(ParseErrorKind::BadDirective("odd number of hex digits".into()));
    }
    let bytes = (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ParseErrorKind::BadDirective("invalid hex byte".into()))?;
    Ok(DataSegment { addr, bytes })
}

fn parse_u64(text: &str) -> Option<u64> {
    match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => text.parse().ok(),
    }
}

fn parse_i64(text: &str) -> Option<i64> {
    match text.strip_prefix('-') {
        Some(rest) => parse_u64(rest).map(|v| (v as i64).wrapping_neg()),
        None => parse_u64(text).map(|v| v as i64),
    }
}

/// Decode one instruction line (no label, no comment).
pub fn decode(text: &str) -> Result<Instruction, ParseError> {
    decode_line(text, 1)
}

pub fn decode_line(text: &str, line: usize) -> Result<Instruction, ParseError> {
    decode_inner(text.trim()).map_err(|kind| ParseError { line, kind })
}

struct Operands<'a> {
    items: Vec<&'a str>,
}

impl<'a> Operands<'a> {
    fn split(text: &'a str) -> Self {
        let items = if text.trim().is_empty() {
            Vec::new()
        } else {
            text.split(',').map(str::trim).collect()
        };
        Operands { items }
    }

    /// Strip a trailing `v0.t` mask operand.
    fn take_mask(&mut self) -> bool {
        if self.items.last() == Some(&"v0.t") {
            self.items.pop();
            true
        } else {
            false
        }
    }

    fn expect(&self, n: usize) -> Result<(), ParseErrorKind> {
        if self.items.len() == n {
            Ok(())
        } else {
            Err(ParseErrorKind::OperandCount { expected: n, found: self.items.len() })
        }
    }

    fn v(&self, i: usize) -> Result<VReg, ParseErrorKind> {
        VReg::parse(self.items[i]).ok_or_else(|| bad(self.items[i]))
    }

    fn f(&self, i: usize) -> Result<FReg, ParseErrorKind> {
        FReg::parse(self.items[i]).ok_or_else(|| bad(self.items[i]))
    }

    fn x(&self, i: usize) -> Result<XReg, ParseErrorKind> {
        XReg::parse(self.items[i]).ok_or_else(|| bad(self.items[i]))
    }

    fn imm(&self, i: usize) -> Result<i64, ParseErrorKind> {
        parse_i64(self.items[i]).ok_or_else(|| bad(self.items[i]))
    }

    fn label(&self, i: usize) -> Result<String, ParseErrorKind> {
        let s = self.items[i];
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(bad(s));
        }
        Ok(s.to_string())
    }

    /// `(rs)` address operand.
    fn addr(&self, i: usize) -> Result<XReg, ParseErrorKind> {
        let s = self.items[i];
        s.strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|r| XReg::parse(r.trim()))
            .ok_or_else(|| bad(s))
    }

    /// `offset(rs)` address operand.
    fn offset_addr(&self, i: usize) -> Result<(i64, XReg), ParseErrorKind> {
        let s = self.items[i];
        let open = s.find('(').ok_or_else(|| bad(s))?;
        let off_text = s[..open].trim();
        let offset = if off_text.is_empty() { 0 } else { parse_i64(off_text).ok_or_else(|| bad(s))? };
        let reg = s[open + 1..]
            .strip_suffix(')')
            .and_then(|r| XReg::parse(r.trim()))
            .ok_or_else(|| bad(s))?;
        Ok((offset, reg))
    }
}

fn bad(s: &str) -> ParseErrorKind {
    ParseErrorKind::MalformedOperand(s.to_string())
}

fn eew_of(mnemonic: &str, prefix: &str) -> Option<Sew> {
    let bits = mnemonic.strip_prefix(prefix)?.strip_suffix(".v")?;
    Sew::from_bits(bits.parse().ok()?).ok()
}

fn decode_inner(text: &str) -> Result<Instruction, ParseErrorKind> {
    let (mnemonic, rest) = match text.find(char::is_whitespace) {
        Some(p) => (&text[..p], &text[p..]),
        None => (text, ""),
    };
    let mut ops = Operands::split(rest);
    use VectorInstruction as V;

    if mnemonic == ".loop" {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(ParseErrorKind::BadDirective(".loop needs a label and a count".into()));
        }
        let count = parse_u64(parts[1])
            .filter(|&c| c > 0)
            .ok_or_else(|| ParseErrorKind::BadDirective("loop count must be positive".into()))?;
        return Ok(Instruction::Loop { target: parts[0].to_string(), count });
    }

    if mnemonic == "vsetvli" {
        let mut items = ops.items.clone();
        items.retain(|s| !matches!(*s, "ta" | "tu" | "ma" | "mu"));
        let ops = Operands { items };
        ops.expect(4)?;
        let sew = ops.items[2]
            .strip_prefix('e')
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| bad(ops.items[2]))?;
        let lmul = ops.items[3]
            .strip_prefix('m')
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| bad(ops.items[3]))?;
        return Ok(Instruction::Vector(V::Vsetvli {
            rd: ops.x(0)?,
            avl: ops.x(1)?,
            sew: Sew::from_bits(sew)?,
            lmul: Lmul::from_factor(lmul)?,
        }));
    }

    if let Some(eew) = eew_of(mnemonic, "vle") {
        let masked = ops.take_mask();
        ops.expect(2)?;
        return Ok(Instruction::Vector(V::Load { eew, vd: ops.v(0)?, base: ops.addr(1)?, masked }));
    }
    if let Some(eew) = eew_of(mnemonic, "vse") {
        let masked = ops.take_mask();
        ops.expect(2)?;
        return Ok(Instruction::Vector(V::Store { eew, vs3: ops.v(0)?, base: ops.addr(1)?, masked }));
    }
    if let Some(eew) = eew_of(mnemonic, "vlse") {
        let masked = ops.take_mask();
        ops.expect(3)?;
        return Ok(Instruction::Vector(V::LoadStrided {
            eew,
            vd: ops.v(0)?,
            base: ops.addr(1)?,
            stride: ops.x(2)?,
            masked,
        }));
    }
    if let Some(eew) = eew_of(mnemonic, "vsse") {
        let masked = ops.take_mask();
        ops.expect(3)?;
        return Ok(Instruction::Vector(V::StoreStrided {
            eew,
            vs3: ops.v(0)?,
            base: ops.addr(1)?,
            stride: ops.x(2)?,
            masked,
        }));
    }

    let vector = match mnemonic {
        "vfadd.vv" | "vfsub.vv" | "vfmul.vv" | "vfdiv.vv" | "vfadd.vf" | "vfsub.vf" | "vfmul.vf"
        | "vfdiv.vf" => {
            let masked = ops.take_mask();
            ops.expect(3)?;
            let op = match &mnemonic[2..5] {
                "add" => FpOp::Add,
                "sub" => FpOp::Sub,
                "mul" => FpOp::Mul,
                _ => FpOp::Div,
            };
            let src1 = if mnemonic.ends_with(".vv") { VSrc::Vector(ops.v(2)?) } else { VSrc::Scalar(ops.f(2)?) };
            V::Arith { op, vd: ops.v(0)?, vs2: ops.v(1)?, src1, masked }
        }
        "vfmacc.vv" | "vfmacc.vf" => {
            let masked = ops.take_mask();
            ops.expect(3)?;
            let src1 = if mnemonic.ends_with(".vv") { VSrc::Vector(ops.v(1)?) } else { VSrc::Scalar(ops.f(1)?) };
            V::Macc { vd: ops.v(0)?, src1, vs2: ops.v(2)?, masked }
        }
        "vmfeq.vv" | "vmflt.vv" | "vmfle.vv" | "vmfgt.vv" | "vmfge.vv" | "vmfeq.vf" | "vmflt.vf"
        | "vmfle.vf" | "vmfgt.vf" | "vmfge.vf" => {
            let masked = ops.take_mask();
            ops.expect(3)?;
            let op = match &mnemonic[3..5] {
                "eq" => CmpOp::Eq,
                "lt" => CmpOp::Lt,
                "le" => CmpOp::Le,
                "gt" => CmpOp::Gt,
                _ => CmpOp::Ge,
            };
            let src1 = if mnemonic.ends_with(".vv") { VSrc::Vector(ops.v(2)?) } else { VSrc::Scalar(ops.f(2)?) };
            V::Compare { op, vd: ops.v(0)?, vs2: ops.v(1)?, src1, masked }
        }
        "vfredusum.vs" | "vfredosum.vs" | "vfredsum.vs" => {
            let masked = ops.take_mask();
            ops.expect(3)?;
            let order = if mnemonic == "vfredosum.vs" { ReductionOrder::Ordered } else { ReductionOrder::Unordered };
            V::RedSum { order, vd: ops.v(0)?, vs2: ops.v(1)?, vs1: ops.v(2)?, masked }
        }
        "vfslide1up.vf" | "vfslide1down.vf" => {
            let masked = ops.take_mask();
            ops.expect(3)?;
            let (vd, vs2, fill) = (ops.v(0)?, ops.v(1)?, ops.f(2)?);
            if mnemonic == "vfslide1up.vf" {
                V::Slide1Up { vd, vs2, fill, masked }
            } else {
                V::Slide1Down { vd, vs2, fill, masked }
            }
        }
        "vslideup.vx" | "vslidedown.vx" | "vslideup.vi" | "vslidedown.vi" => {
            let masked = ops.take_mask();
            ops.expect(3)?;
            let amount = if mnemonic.ends_with(".vx") {
                SlideAmount::Reg(ops.x(2)?)
            } else {
                let imm = ops.imm(2)?;
                if imm < 0 {
                    return Err(bad(ops.items[2]));
                }
                SlideAmount::Imm(imm as u64)
            };
            let (vd, vs2) = (ops.v(0)?, ops.v(1)?);
            if mnemonic.starts_with("vslideup") {
                V::SlideUp { vd, vs2, amount, masked }
            } else {
                V::SlideDown { vd, vs2, amount, masked }
            }
        }
        "vfmerge.vfm" => {
            ops.expect(4)?;
            if ops.items[3] != "v0" {
                return Err(bad(ops.items[3]));
            }
            V::Merge { vd: ops.v(0)?, vs2: ops.v(1)?, fs1: ops.f(2)? }
        }
        "vfmv.v.f" => {
            ops.expect(2)?;
            V::Splat { vd: ops.v(0)?, fs1: ops.f(1)? }
        }
        "vfmv.f.s" => {
            ops.expect(2)?;
            V::MoveToScalar { fd: ops.f(0)?, vs2: ops.v(1)? }
        }
        _ => return decode_scalar(mnemonic, ops),
    };
    Ok(Instruction::Vector(vector))
}

fn decode_scalar(mnemonic: &str, ops: Operands<'_>) -> Result<Instruction, ParseErrorKind> {
    use ScalarInstruction as S;
    let s = match mnemonic {
        "li" => {
            ops.expect(2)?;
            S::Li { rd: ops.x(0)?, imm: ops.imm(1)? }
        }
        "addi" => {
            ops.expect(3)?;
            S::Addi { rd: ops.x(0)?, rs: ops.x(1)?, imm: ops.imm(2)? }
        }
        "slli" => {
            ops.expect(3)?;
            let sh = ops.imm(2)?;
            if !(0..64).contains(&sh) {
                return Err(bad(ops.items[2]));
            }
            S::Slli { rd: ops.x(0)?, rs: ops.x(1)?, shamt: sh as u32 }
        }
        "add" | "sub" | "sll" | "mul" => {
            ops.expect(3)?;
            let op = match mnemonic {
                "add" => IntOp::Add,
                "sub" => IntOp::Sub,
                "sll" => IntOp::Sll,
                _ => IntOp::Mul,
            };
            S::Alu { op, rd: ops.x(0)?, rs1: ops.x(1)?, rs2: ops.x(2)? }
        }
        "fld" => {
            ops.expect(2)?;
            let (offset, base) = ops.offset_addr(1)?;
            S::Fld { fd: ops.f(0)?, base, offset }
        }
        "fsd" => {
            ops.expect(2)?;
            let (offset, base) = ops.offset_addr(1)?;
            S::Fsd { fs: ops.f(0)?, base, offset }
        }
        "fadd.d" | "fsub.d" | "fmul.d" | "fdiv.d" => {
            ops.expect(3)?;
            let op = match mnemonic {
                "fadd.d" => FpOp::Add,
                "fsub.d" => FpOp::Sub,
                "fmul.d" => FpOp::Mul,
                _ => FpOp::Div,
            };
            S::Fp { op, fd: ops.f(0)?, fs1: ops.f(1)?, fs2: ops.f(2)? }
        }
        "fmv.d" => {
            ops.expect(2)?;
            S::FmvD { fd: ops.f(0)?, fs: ops.f(1)? }
        }
        "bnez" => {
            ops.expect(2)?;
            S::Bnez { rs: ops.x(0)?, target: ops.label(1)? }
        }
        "beqz" => {
            ops.expect(2)?;
            S::Beqz { rs: ops.x(0)?, target: ops.label(1)? }
        }
        "j" => {
            ops.expect(1)?;
            S::Jump { target: ops.label(0)? }
        }
        other => return Err(ParseErrorKind::UnknownMnemonic(other.to_string())),
    };
    Ok(Instruction::Scalar(s))
}

fn mask_suffix(masked: bool) -> &'static str {
    if masked {
        ", v0.t"
    } else {
        ""
    }
}

fn fp_name(op: FpOp) -> &'static str {
    match op {
        FpOp::Add => "add",
        FpOp::Sub => "sub",
        FpOp::Mul => "mul",
        FpOp::Div => "div",
    }
}

fn src_parts(src: VSrc) -> (&'static str, String) {
    match src {
        VSrc::Vector(v) => ("vv", v.to_string()),
        VSrc::Scalar(f) => ("vf", f.to_string()),
    }
}

impl fmt::Display for VectorInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use VectorInstruction::*;
        match *self {
            Vsetvli { rd, avl, sew, lmul } => {
                write!(f, "vsetvli {rd}, {avl}, e{}, m{}", sew.bits(), lmul.factor())
            }
            Load { eew, vd, base, masked } => {
                write!(f, "vle{}.v {vd}, ({base}){}", eew.bits(), mask_suffix(masked))
            }
            Store { eew, vs3, base, masked } => {
                write!(f, "vse{}.v {vs3}, ({base}){}", eew.bits(), mask_suffix(masked))
            }
            LoadStrided { eew, vd, base, stride, masked } => {
                write!(f, "vlse{}.v {vd}, ({base}), {stride}{}", eew.bits(), mask_suffix(masked))
            }
            StoreStrided { eew, vs3, base, stride, masked } => {
                write!(f, "vsse{}.v {vs3}, ({base}), {stride}{}", eew.bits(), mask_suffix(masked))
            }
            Arith { op, vd, vs2, src1, masked } => {
                let (form, s1) = src_parts(src1);
                write!(f, "vf{}.{form} {vd}, {vs2}, {s1}{}", fp_name(op), mask_suffix(masked))
            }
            Macc { vd, src1, vs2, masked } => {
                let (form, s1) = src_parts(src1);
                write!(f, "vfmacc.{form} {vd}, {s1}, {vs2}{}", mask_suffix(masked))
            }
            Compare { op, vd, vs2, src1, masked } => {
                let name = match op {
                    CmpOp::Eq => "eq",
                    CmpOp::Lt => "lt",
                    CmpOp::Le => "le",
                    CmpOp::Gt => "gt",
                    CmpOp::Ge => "ge",
                };
                let (form, s1) = src_parts(src1);
                write!(f, "vmf{name}.{form} {vd}, {vs2}, {s1}{}", mask_suffix(masked))
            }
            RedSum { order, vd, vs2, vs1, masked } => {
                let name = match order {
                    ReductionOrder::Unordered => "vfredusum.vs",
                    ReductionOrder::Ordered => "vfredosum.vs",
                };
                write!(f, "{name} {vd}, {vs2}, {vs1}{}", mask_suffix(masked))
            }
            Slide1Up { vd, vs2, fill, masked } => {
                write!(f, "vfslide1up.vf {vd}, {vs2}, {fill}{}", mask_suffix(masked))
            }
            Slide1Down { vd, vs2, fill, masked } => {
                write!(f, "vfslide1down.vf {vd}, {vs2}, {fill}{}", mask_suffix(masked))
            }
            SlideUp { vd, vs2, amount, masked } | SlideDown { vd, vs2, amount, masked } => {
                let dir = if matches!(self, SlideUp { .. }) { "up" } else { "down" };
                match amount {
                    SlideAmount::Reg(r) => write!(f, "vslide{dir}.vx {vd}, {vs2}, {r}{}", mask_suffix(masked)),
                    SlideAmount::Imm(i) => write!(f, "vslide{dir}.vi {vd}, {vs2}, {i}{}", mask_suffix(masked)),
                }
            }
            Merge { vd, vs2, fs1 } => write!(f, "vfmerge.vfm {vd}, {vs2}, {fs1}, v0"),
            Splat { vd, fs1 } => write!(f, "vfmv.v.f {vd}, {fs1}"),
            MoveToScalar { fd, vs2 } => write!(f, "vfmv.f.s {fd}, {vs2}"),
        }
    }
}

impl fmt::Display for ScalarInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScalarInstruction::*;
        match self {
            Li { rd, imm } => write!(f, "li {rd}, {imm}"),
            Addi { rd, rs, imm } => write!(f, "addi {rd}, {rs}, {imm}"),
            Slli { rd, rs, shamt } => write!(f, "slli {rd}, {rs}, {shamt}"),
            Alu { op, rd, rs1, rs2 } => {
                let name = match op {
                    IntOp::Add => "add",
                    IntOp::Sub => "sub",
                    IntOp::Sll => "sll",
                    IntOp::Mul => "mul",
                };
                write!(f, "{name} {rd}, {rs1}, {rs2}")
            }
            Fld { fd, base, offset } => write!(f, "fld {fd}, {offset}({base})"),
            Fsd { fs, base, offset } => write!(f, "fsd {fs}, {offset}({base})"),
            Fp { op, fd, fs1, fs2 } => write!(f, "f{}.d {fd}, {fs1}, {fs2}", fp_name(*op)),
            FmvD { fd, fs } => write!(f, "fmv.d {fd}, {fs}"),
            Bnez { rs, target } => write!(f, "bnez {rs}, {target}"),
            Beqz { rs, target } => write!(f, "beqz {rs}, {target}"),
            Jump { target } => write!(f, "j {target}"),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Vector(v) => v.fmt(f),
            Instruction::Scalar(s) => s.fmt(f),
            Instruction::Loop { target, count } => write!(f, ".loop {target} {count}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_vfmacc_vf() {
        let i = decode("vfmacc.vf v8, f0, v16").unwrap();
        assert_eq!(
            i,
            Instruction::Vector(VectorInstruction::Macc {
                vd: VReg(8),
                src1: VSrc::Scalar(FReg(0)),
                vs2: VReg(16),
                masked: false
            })
        );
    }

    #[test]
    fn decodes_unit_stride_load() {
        let i = decode("vle64.v v0, (a0)").unwrap();
        assert_eq!(
            i,
            Instruction::Vector(VectorInstruction::Load { eew: Sew::E64, vd: VReg(0), base: XReg(10), masked: false })
        );
    }

    #[test]
    fn rejects_unknown_mnemonic() {
        let err = decode("vxyz.v v0, v1").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnknownMnemonic(ref m) if m == "vxyz.v"));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let err = Program::parse("li a0, 1\n\n  vfadd.vv v1, v2, q3\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(matches!(err.kind, ParseErrorKind::MalformedOperand(_)));
    }

    #[test]
    fn vsetvli_rejects_illegal_sew() {
        let err = decode("vsetvli t0, a0, e12, m1").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Config(ConfigError::IllegalSew(12))));
    }

    #[test]
    fn parses_labels_data_and_loops() {
        let text = "# header\n.data 0x100 0102ff\nstart: li t0, 3\nbody:\n  addi t0, t0, -1\n  .loop body 4\n  bnez t0, start\n";
        let p = Program::parse(text).unwrap();
        assert_eq!(p.data, vec![DataSegment { addr: 0x100, bytes: vec![1, 2, 0xff] }]);
        assert_eq!(p.target("start"), 0);
        assert_eq!(p.target("body"), 1);
        assert_eq!(p.instructions[2], Instruction::Loop { target: "body".into(), count: 4 });
        let again = Program::parse(&p.to_text()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn undefined_label_is_an_error() {
        let err = Program::parse("bnez t0, nowhere\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UndefinedLabel(_)));
    }

    #[test]
    fn reduction_aliases() {
        let u = decode("vfredusum.vs v1, v8, v2").unwrap();
        let o = decode("vfredosum.vs v1, v8, v2").unwrap();
        assert_ne!(u, o);
        assert_eq!(decode("vfredsum.vs v1, v8, v2").unwrap(), u);
    }
}
