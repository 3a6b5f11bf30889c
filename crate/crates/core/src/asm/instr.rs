use std::fmt;

use super::register::Register;

macro_rules! mnemonics {
    ($($variant:ident => $text:literal,)*) => {
        /// Every mnemonic the toolchain understands, canonical and pseudo.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Mnemonic {
            $($variant,)*
        }

        impl Mnemonic {
            pub const ALL: &'static [Mnemonic] = &[$(Mnemonic::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Mnemonic::$variant => $text,)*
                }
            }

            pub fn parse(text: &str) -> Option<Self> {
                match text {
                    $($text => Some(Mnemonic::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

mnemonics! {
    Add => "add", Sub => "sub", And => "and", Or => "or", Xor => "xor",
    Sll => "sll", Srl => "srl", Sra => "sra", Slt => "slt", Sltu => "sltu",
    Mul => "mul", Addw => "addw", Subw => "subw",
    Addi => "addi", Addiw => "addiw", Andi => "andi", Ori => "ori", Xori => "xori",
    Slti => "slti", Sltiu => "sltiu", Slli => "slli", Srli => "srli", Srai => "srai",
    Lui => "lui",
    Ld => "ld", Lw => "lw", Lwu => "lwu", Lh => "lh", Lhu => "lhu", Lb => "lb", Lbu => "lbu",
    Sd => "sd", Sw => "sw", Sh => "sh", Sb => "sb",
    Beq => "beq", Bne => "bne", Blt => "blt", Bge => "bge", Bltu => "bltu", Bgeu => "bgeu",
    Jal => "jal", Jalr => "jalr",
    Ecall => "ecall", Csrrs => "csrrs",
    J => "j", Jr => "jr", Ret => "ret", Call => "call", Tail => "tail",
    La => "la", Li => "li", Mv => "mv", Nop => "nop", Rdcycle => "rdcycle",
    Beqz => "beqz", Bnez => "bnez", Bltz => "bltz", Bgez => "bgez", Blez => "blez",
    Bgtz => "bgtz", Bgt => "bgt", Ble => "ble", Bgtu => "bgtu", Bleu => "bleu",
}

impl Mnemonic {
    pub fn is_pseudo(self) -> bool {
        use Mnemonic::*;
        matches!(
            self,
            J | Jr
                | Ret
                | Call
                | Tail
                | La
                | Li
                | Mv
                | Nop
                | Rdcycle
                | Beqz
                | Bnez
                | Bltz
                | Bgez
                | Blez
                | Bgtz
                | Bgt
                | Ble
                | Bgtu
                | Bleu
        )
    }

    fn forms(self) -> &'static [&'static [Slot]] {
        use Mnemonic::*;
        use Slot::*;
        match self {
            Add | Sub | And | Or | Xor | Sll | Srl | Sra | Slt | Sltu | Mul | Addw | Subw => {
                &[&[Reg, Reg, Reg]]
            }
            Addi | Addiw => &[&[Reg, Reg, Lo]],
            Andi | Ori | Xori | Slti | Sltiu | Slli | Srli | Srai => &[&[Reg, Reg, Imm]],
            Lui => &[&[Reg, Hi]],
            Ld | Lw | Lwu | Lh | Lhu | Lb | Lbu | Sd | Sw | Sh | Sb => &[&[Reg, Mem]],
            Beq | Bne | Blt | Bge | Bltu | Bgeu => &[&[Reg, Reg, Sym]],
            Jal => &[&[Reg, Sym], &[Sym]],
            Jalr => &[&[Reg, Reg, Lo], &[Reg, Mem], &[Reg, Reg], &[Reg]],
            Ecall | Ret | Nop => &[&[]],
            Csrrs => &[&[Reg, Csr, Reg]],
            J | Call | Tail => &[&[Sym]],
            Jr | Rdcycle => &[&[Reg]],
            La | Beqz | Bnez | Bltz | Bgez | Blez | Bgtz => &[&[Reg, Sym]],
            Bgt | Ble | Bgtu | Bleu => &[&[Reg, Reg, Sym]],
            Li => &[&[Reg, Imm]],
            Mv => &[&[Reg, Reg]],
        }
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Reg,
    Imm,
    Sym,
    Mem,
    Csr,
    /// integer or `%hi(sym)`
    Hi,
    /// integer or `%lo(sym)`
    Lo,
}

/// Read-only counter CSRs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Csr {
    Cycle,
    Time,
    Instret,
}

impl Csr {
    pub fn number(self) -> u16 {
        match self {
            Csr::Cycle => 0xC00,
            Csr::Time => 0xC01,
            Csr::Instret => 0xC02,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Csr::Cycle => "cycle",
            Csr::Time => "time",
            Csr::Instret => "instret",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "cycle" => Some(Csr::Cycle),
            "time" => Some(Csr::Time),
            "instret" => Some(Csr::Instret),
            _ => None,
        }
    }

    fn from_number(n: i64) -> Option<Self> {
        [Csr::Cycle, Csr::Time, Csr::Instret]
            .into_iter()
            .find(|c| i64::from(c.number()) == n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Register),
    Imm(i64),
    Symbol(String),
    /// `offset(base)`
    Mem {
        offset: i64,
        base: Register,
    },
    Hi(String),
    Lo(String),
    Csr(Csr),
}

impl Operand {
    pub fn sym(name: impl Into<String>) -> Self {
        Operand::Symbol(name.into())
    }

    pub fn mem(offset: i64, base: Register) -> Self {
        Operand::Mem { offset, base }
    }

    pub fn as_reg(&self) -> Option<Register> {
        match self {
            Operand::Reg(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_imm(&self) -> Option<i64> {
        match self {
            Operand::Imm(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Operand::Symbol(s) => Some(s),
            _ => None,
        }
    }

    /// Symbol this operand refers to, whatever the relocation flavour.
    pub fn referenced_symbol(&self) -> Option<&str> {
        match self {
            Operand::Symbol(s) | Operand::Hi(s) | Operand::Lo(s) => Some(s),
            _ => None,
        }
    }

    /// Parses one operand without knowing which slot it fills.
    pub fn parse(text: &str) -> Result<Operand, String> {
        let t = text.trim();
        if t.is_empty() {
            return Err("empty operand".into());
        }
        if let Some(r) = Register::parse(t) {
            return Ok(Operand::Reg(r));
        }
        for (prefix, hi) in [("%hi(", true), ("%lo(", false)] {
            if let Some(rest) = t.strip_prefix(prefix) {
                let sym = rest
                    .strip_suffix(')')
                    .filter(|s| is_identifier(s))
                    .ok_or_else(|| format!("malformed relocation `{t}`"))?;
                return Ok(if hi {
                    Operand::Hi(sym.to_string())
                } else {
                    Operand::Lo(sym.to_string())
                });
            }
        }
        if t.ends_with(')') {
            if let Some(open) = t.rfind('(') {
                let base_text = &t[open + 1..t.len() - 1];
                let base = Register::parse(base_text.trim())
                    .ok_or_else(|| format!("bad base register in `{t}`"))?;
                let off_text = t[..open].trim();
                let offset = if off_text.is_empty() {
                    0
                } else {
                    parse_int(off_text).ok_or_else(|| format!("bad offset in `{t}`"))?
                };
                return Ok(Operand::Mem { offset, base });
            }
        }
        if let Some(v) = parse_int(t) {
            return Ok(Operand::Imm(v));
        }
        if is_identifier(t) {
            return Ok(Operand::Symbol(t.to_string()));
        }
        Err(format!("cannot parse operand `{t}`"))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Imm(v) => write!(f, "{v}"),
            Operand::Symbol(s) => f.write_str(s),
            Operand::Mem { offset, base } => write!(f, "{offset}({base})"),
            Operand::Hi(s) => write!(f, "%hi({s})"),
            Operand::Lo(s) => write!(f, "%lo({s})"),
            Operand::Csr(c) => f.write_str(c.name()),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

/// Decimal, `0x`, `0b`, optionally negative, or a quoted character.
pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('\'').and_then(|r| r.strip_suffix('\'')) {
        let mut chars = inner.chars();
        let c = chars.next()?;
        return match (c, chars.next()) {
            ('\\', Some(e)) if chars.next().is_none() => match e {
                'n' => Some(10),
                't' => Some(9),
                '0' => Some(0),
                '\\' => Some(92),
                '\'' => Some(39),
                _ => None,
            },
            (c, None) if c.is_ascii() => Some(c as i64),
            _ => None,
        };
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let magnitude = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()?
    } else if let Some(bin) = body.strip_prefix("0b").or_else(|| body.strip_prefix("0B")) {
        u64::from_str_radix(bin, 2).ok()?
    } else if !body.is_empty() && body.chars().all(|c| c.is_ascii_digit()) {
        body.parse::<u64>().ok()?
    } else {
        return None;
    };
    if neg {
        if magnitude > i64::MAX as u64 + 1 {
            return None;
        }
        Some((magnitude as i64).wrapping_neg())
    } else {
        i64::try_from(magnitude).ok()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Origin {
    #[default]
    Original,
    /// Emitted by the hardener.
    Synthesized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SourceLoc {
    pub line: usize,
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)
    }
}

/// One instruction as written, pseudo forms included.
///
/// Equality ignores `loc`.
#[derive(Clone, Debug)]
pub struct Instruction {
    pub mnemonic: Mnemonic,
    pub operands: Vec<Operand>,
    pub origin: Origin,
    pub loc: Option<SourceLoc>,
    /// Pinned to the 4-byte encoding even when a compressed form exists.
    pub wide: bool,
}

impl PartialEq for Instruction {
    fn eq(&self, other: &Self) -> bool {
        self.mnemonic == other.mnemonic
            && self.operands == other.operands
            && self.origin == other.origin
            && self.wide == other.wide
    }
}

impl Eq for Instruction {}

impl Instruction {
    /// Builds an instruction, checking operand kinds and immediate ranges.
    pub fn new(mnemonic: Mnemonic, operands: Vec<Operand>) -> Result<Self, String> {
        let operands = conform(mnemonic, operands)?;
        Ok(Instruction {
            mnemonic,
            operands,
            origin: Origin::Original,
            loc: None,
            wide: false,
        })
    }

    /// Panics on a malformed shape; for instruction templates fixed at compile time.
    pub(crate) fn build(mnemonic: Mnemonic, operands: Vec<Operand>) -> Self {
        match Instruction::new(mnemonic, operands) {
            Ok(i) => i,
            Err(e) => panic!("malformed instruction template `{mnemonic}`: {e}"),
        }
    }

    pub fn synthesized(mut self) -> Self {
        self.origin = Origin::Synthesized;
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_wide(mut self, wide: bool) -> Self {
        self.wide = wide;
        self
    }

    pub fn is_synthesized(&self) -> bool {
        self.origin == Origin::Synthesized
    }

    pub fn reg(&self, i: usize) -> Option<Register> {
        self.operands.get(i).and_then(Operand::as_reg)
    }

    pub fn imm(&self, i: usize) -> Option<i64> {
        self.operands.get(i).and_then(Operand::as_imm)
    }

    /// True when the instruction is already in the form the size model and the
    /// simulator consume.
    pub fn is_canonical(&self) -> bool {
        !self.mnemonic.is_pseudo() && {
            let first = self.mnemonic.forms()[0];
            first.len() == self.operands.len()
                && first
                    .iter()
                    .zip(&self.operands)
                    .all(|(s, o)| slot_accepts(*s, o))
        }
    }

    fn derive(&self, mnemonic: Mnemonic, operands: Vec<Operand>) -> Instruction {
        Instruction {
            mnemonic,
            operands,
            origin: self.origin,
            loc: self.loc,
            wide: self.wide,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic.as_str())?;
        for (i, op) in self.operands.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            write!(f, "{op}")?;
        }
        Ok(())
    }
}

fn slot_accepts(slot: Slot, op: &Operand) -> bool {
    matches!(
        (slot, op),
        (Slot::Reg, Operand::Reg(_))
            | (Slot::Imm, Operand::Imm(_))
            | (Slot::Sym, Operand::Symbol(_))
            | (Slot::Mem, Operand::Mem { .. })
            | (Slot::Csr, Operand::Csr(_))
            | (Slot::Hi, Operand::Imm(_) | Operand::Hi(_))
            | (Slot::Lo, Operand::Imm(_) | Operand::Lo(_))
    )
}

fn coerce(slot: Slot, op: Operand) -> Option<Operand> {
    if slot == Slot::Csr {
        return match op {
            Operand::Csr(_) => Some(op),
            Operand::Symbol(ref s) => Csr::from_name(s).map(Operand::Csr),
            Operand::Imm(v) => Csr::from_number(v).map(Operand::Csr),
            _ => None,
        };
    }
    slot_accepts(slot, &op).then_some(op)
}

/// Matches operands against the mnemonic's accepted forms and checks ranges.
fn conform(mnemonic: Mnemonic, operands: Vec<Operand>) -> Result<Vec<Operand>, String> {
    let matched = mnemonic
        .forms()
        .iter()
        .filter(|form| form.len() == operands.len())
        .find_map(|form| {
            form.iter()
                .zip(operands.iter().cloned())
                .map(|(slot, op)| coerce(*slot, op))
                .collect::<Option<Vec<_>>>()
        });
    let ops = matched.ok_or_else(|| {
        let list: Vec<String> = operands.iter().map(|o| o.to_string()).collect();
        format!("operands `{}` do not fit `{mnemonic}`", list.join(", "))
    })?;
    check_ranges(mnemonic, &ops)?;
    Ok(ops)
}

fn check_ranges(mnemonic: Mnemonic, ops: &[Operand]) -> Result<(), String> {
    use Mnemonic::*;
    let in_range = |v: i64, lo: i64, hi: i64, what: &str| {
        if (lo..=hi).contains(&v) {
            Ok(())
        } else {
            Err(format!(
                "{what} {v} out of range [{lo}, {hi}] for `{mnemonic}`"
            ))
        }
    };
    for op in ops {
        if let Operand::Mem { offset, .. } = op {
            in_range(*offset, -2048, 2047, "offset")?;
        }
    }
    match (mnemonic, ops) {
        (Addi | Addiw | Andi | Ori | Xori | Slti | Sltiu, [_, _, Operand::Imm(v)]) => {
            in_range(*v, -2048, 2047, "immediate")
        }
        (Slli | Srli | Srai, [_, _, Operand::Imm(v)]) => in_range(*v, 0, 63, "shift amount"),
        (Jalr, [_, _, Operand::Imm(v)]) => in_range(*v, -2048, 2047, "immediate"),
        (Lui, [_, Operand::Imm(v)]) => in_range(*v, 0, 0xF_FFFF, "immediate"),
        (Li, [_, Operand::Imm(v)]) => {
            in_range(*v, i64::from(i32::MIN), i64::from(i32::MAX), "immediate")
        }
        (Csrrs, [_, _, Operand::Reg(rs)]) if *rs != Register::ZERO => {
            Err("only CSR reads (`csrrs rd, csr, zero`) are supported".into())
        }
        _ => Ok(()),
    }
}

/// Upper 20 bits for an `lui`/`addi` pair, rounded so the low part is a signed 12-bit value.
pub fn hi20(value: i64) -> i64 {
    ((value + 0x800) >> 12) & 0xF_FFFF
}

/// Signed low 12 bits complementing [`hi20`].
pub fn lo12(value: i64) -> i64 {
    ((value & 0xFFF) ^ 0x800) - 0x800
}

/// Rewrites a pseudo-instruction (or a non-canonical operand form) into
/// canonical instructions. Canonical instructions map to themselves.
pub fn expand_pseudo(instr: &Instruction) -> Vec<Instruction> {
    use Mnemonic::*;
    use Operand as O;
    let ops = &instr.operands;
    let zero = O::Reg(Register::ZERO);
    let ra = O::Reg(Register::RA);
    let one = |m, o| vec![instr.derive(m, o)];
    match (instr.mnemonic, ops.as_slice()) {
        (J | Tail, [s]) => one(Jal, vec![zero, s.clone()]),
        (Call, [s]) | (Jal, [s @ O::Symbol(_)]) => one(Jal, vec![ra, s.clone()]),
        (Jr, [r]) => one(Jalr, vec![zero, r.clone(), O::Imm(0)]),
        (Ret, []) => one(Jalr, vec![zero, ra.clone(), O::Imm(0)]),
        (Jalr, [r]) => one(Jalr, vec![ra, r.clone(), O::Imm(0)]),
        (Jalr, [rd, O::Mem { offset, base }]) => {
            one(Jalr, vec![rd.clone(), O::Reg(*base), O::Imm(*offset)])
        }
        (Jalr, [rd, rs @ O::Reg(_)]) => one(Jalr, vec![rd.clone(), rs.clone(), O::Imm(0)]),
        (La, [rd, O::Symbol(s)]) => vec![
            instr.derive(Lui, vec![rd.clone(), O::Hi(s.clone())]),
            instr.derive(Addi, vec![rd.clone(), rd.clone(), O::Lo(s.clone())]),
        ],
        (Li, [rd, O::Imm(v)]) => {
            let v = *v;
            if (-2048..=2047).contains(&v) {
                one(Addi, vec![rd.clone(), zero, O::Imm(v)])
            } else {
                let lo = lo12(v);
                let mut seq = vec![instr.derive(Lui, vec![rd.clone(), O::Imm(hi20(v))])];
                if lo != 0 {
                    seq.push(instr.derive(Addiw, vec![rd.clone(), rd.clone(), O::Imm(lo)]));
                }
                seq
            }
        }
        (Mv, [rd, rs]) => one(Addi, vec![rd.clone(), rs.clone(), O::Imm(0)]),
        (Nop, []) => one(Addi, vec![zero.clone(), zero, O::Imm(0)]),
        (Rdcycle, [rd]) => one(Csrrs, vec![rd.clone(), O::Csr(Csr::Cycle), zero]),
        (Beqz, [r, s]) => one(Beq, vec![r.clone(), zero, s.clone()]),
        (Bnez, [r, s]) => one(Bne, vec![r.clone(), zero, s.clone()]),
        (Bltz, [r, s]) => one(Blt, vec![r.clone(), zero, s.clone()]),
        (Bgez, [r, s]) => one(Bge, vec![r.clone(), zero, s.clone()]),
        (Blez, [r, s]) => one(Bge, vec![zero, r.clone(), s.clone()]),
        (Bgtz, [r, s]) => one(Blt, vec![zero, r.clone(), s.clone()]),
        (Bgt, [a, b, s]) => one(Blt, vec![b.clone(), a.clone(), s.clone()]),
        (Ble, [a, b, s]) => one(Bge, vec![b.clone(), a.clone(), s.clone()]),
        (Bgtu, [a, b, s]) => one(Bltu, vec![b.clone(), a.clone(), s.clone()]),
        (Bleu, [a, b, s]) => one(Bgeu, vec![b.clone(), a.clone(), s.clone()]),
        _ => vec![instr.clone()],
    }
}

/// Parses `mnemonic op, op, ...` (no label, no comment).
pub fn parse_instruction(text: &str) -> Result<Instruction, InstrParseError> {
    let text = text.trim();
    let (head, rest) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    let mnemonic =
        Mnemonic::parse(head).ok_or_else(|| InstrParseError::UnknownMnemonic(head.to_string()))?;
    let operands = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(Operand::parse)
            .collect::<Result<Vec<_>, _>>()
            .map_err(InstrParseError::Operands)?
    };
    Instruction::new(mnemonic, operands).map_err(InstrParseError::Operands)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrParseError {
    UnknownMnemonic(String),
    Operands(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Instruction {
        parse_instruction(s).unwrap()
    }

    #[test]
    fn parses_indirect_jump() {
        let i = p("jr a5");
        assert_eq!(i.mnemonic, Mnemonic::Jr);
        assert_eq!(i.operands, vec![Operand::Reg(Register::A5)]);
    }

    #[test]
    fn parses_store_with_memref() {
        let i = p("sd ra, 8(sp)");
        assert_eq!(i.mnemonic, Mnemonic::Sd);
        assert_eq!(
            i.operands,
            vec![Operand::Reg(Register::RA), Operand::mem(8, Register::SP)]
        );
    }

    #[test]
    fn csr_operand_by_name() {
        let i = p("csrrs t0, cycle, zero");
        assert_eq!(i.operands[1], Operand::Csr(Csr::Cycle));
        assert!(parse_instruction("csrrs t0, cycle, t1").is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(
            parse_instruction("frob a0"),
            Err(InstrParseError::UnknownMnemonic("frob".into()))
        );
        assert!(parse_instruction("add a0, a1").is_err());
        assert!(parse_instruction("addi a0, a1, 4096").is_err());
        assert!(parse_instruction("slli a0, a1, 64").is_err());
        assert!(parse_instruction("ld a0, 4096(sp)").is_err());
    }

    #[test]
    fn pseudo_expansions() {
        assert_eq!(expand_pseudo(&p("jr a5")), vec![p("jalr x0, a5, 0")]);
        assert_eq!(expand_pseudo(&p("jalr a5")), vec![p("jalr ra, a5, 0")]);
        assert_eq!(expand_pseudo(&p("ret")), vec![p("jalr zero, ra, 0")]);
        assert_eq!(
            expand_pseudo(&p("call frameDump")),
            vec![p("jal ra, frameDump")]
        );
        assert_eq!(
            expand_pseudo(&p("jal set_up_target")),
            vec![p("jal ra, set_up_target")]
        );
        assert_eq!(expand_pseudo(&p("j loop")), vec![p("jal zero, loop")]);
        assert_eq!(
            expand_pseudo(&p("jalr ra, 4(a5)")),
            vec![p("jalr ra, a5, 4")]
        );
        assert_eq!(expand_pseudo(&p("mv a0, a1")), vec![p("addi a0, a1, 0")]);
        assert_eq!(expand_pseudo(&p("nop")), vec![p("addi zero, zero, 0")]);
        assert_eq!(
            expand_pseudo(&p("rdcycle t0")),
            vec![p("csrrs t0, cycle, zero")]
        );
        assert_eq!(
            expand_pseudo(&p("bnez t1, top")),
            vec![p("bne t1, zero, top")]
        );
        assert_eq!(
            expand_pseudo(&p("bltz t1, top")),
            vec![p("blt t1, zero, top")]
        );
        assert_eq!(
            expand_pseudo(&p("blez t1, top")),
            vec![p("bge zero, t1, top")]
        );
        assert_eq!(
            expand_pseudo(&p("bgtz t1, top")),
            vec![p("blt zero, t1, top")]
        );
        assert_eq!(
            expand_pseudo(&p("bgt a0, a1, top")),
            vec![p("blt a1, a0, top")]
        );
        assert_eq!(
            expand_pseudo(&p("bleu a0, a1, top")),
            vec![p("bgeu a1, a0, top")]
        );
        assert_eq!(
            expand_pseudo(&p("la a5, end")),
            vec![p("lui a5, %hi(end)"), p("addi a5, a5, %lo(end)")]
        );
        let add = p("add a0, a1, a2");
        assert_eq!(expand_pseudo(&add), vec![add]);
    }

    #[test]
    fn li_expansions() {
        assert_eq!(expand_pseudo(&p("li a0, 7")), vec![p("addi a0, zero, 7")]);
        assert_eq!(expand_pseudo(&p("li a0, 4096")), vec![p("lui a0, 1")]);
        assert_eq!(
            expand_pseudo(&p("li a0, 0x12345fff")),
            vec![p("lui a0, 0x12346"), p("addiw a0, a0, -1")]
        );
        assert!(parse_instruction("li a0, 0x100000000").is_err());
    }

    #[test]
    fn hi_lo_recombine() {
        for v in [
            0i64,
            1,
            0x7ff,
            0x800,
            0x20000,
            0x2_0fff,
            0x1234_5678,
            -1,
            -4096,
        ] {
            let hi = hi20(v);
            let upper = (((hi << 12) as i32) as i64).wrapping_add(lo12(v));
            assert_eq!(upper, v, "value {v:#x}");
        }
    }

    #[test]
    fn canonical_detection() {
        assert!(p("jalr x0, a5, 0").is_canonical());
        assert!(!p("jalr a5").is_canonical());
        assert!(!p("jr a5").is_canonical());
        assert!(p("jal ra, f").is_canonical());
        assert!(!p("jal f").is_canonical());
        assert!(p("addi a5, a5, %lo(x)").is_canonical());
    }

    #[test]
    fn int_literals() {
        assert_eq!(parse_int("-16"), Some(-16));
        assert_eq!(parse_int("0x20"), Some(32));
        assert_eq!(parse_int("'B'"), Some(66));
        assert_eq!(parse_int("0b101"), Some(5));
        assert_eq!(parse_int("12a"), None);
    }

    #[test]
    fn equality_ignores_location() {
        let mut a = p("add a0, a1, a2");
        let b = a.clone();
        a.loc = Some(SourceLoc { line: 12 });
        assert_eq!(a, b);
    }
}
