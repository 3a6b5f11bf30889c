//! Encoded size of instructions under RV64G and RV64GC.
//!
//! RV64G is fixed-width. Under RV64GC an instruction takes 2 bytes when it
//! has a compressed equivalent in the table below, which is deliberately a
//! subset of the C extension:
//!
//! | canonical form                           | compressed as        |
//! |------------------------------------------|----------------------|
//! | `addi sp, sp, imm` (imm≠0, 6-bit or 16×) | c.addi / c.addi16sp  |
//! | `addi rd, rd, imm` (imm≠0, 6-bit)        | c.addi               |
//! | `addi rd, zero, imm` (6-bit)             | c.li                 |
//! | `addi zero, zero, 0`                     | c.nop                |
//! | `addiw rd, rd, imm` (6-bit)              | c.addiw              |
//! | `lui rd, imm` (rd∉{zero,sp}, 6-bit)      | c.lui                |
//! | `add rd, rd, rs` / `add rd, zero, rs`    | c.add / c.mv         |
//! | `sub/and/or/xor/addw/subw` on x8..x15    | c.sub ...            |
//! | `andi/srli/srai` on x8..x15, `slli`      | c.andi ...           |
//! | `ld/sd/lw/sw` sp- or x8..x15-relative    | c.ldsp / c.ld ...    |
//! | `jal zero, sym`                          | c.j                  |
//! | `jalr zero, rs, 0` / `jalr ra, rs, 0`    | c.jr / c.jalr        |
//! | `beq/bne rs, zero, sym` (rs in x8..x15)  | c.beqz / c.bnez      |
//!
//! Not compressed, although the C extension could: `addi rd, rs, imm` with
//! rd ≠ rs (no c.mv / c.addi4spn). Operands carrying `%hi`/`%lo`
//! relocations are never compressed, so `la` always costs 8 bytes. An
//! instruction flagged `wide` is always 4 bytes. Branch and jump ranges are
//! assumed to fit.

use serde::{Deserialize, Serialize};

use super::instr::{expand_pseudo, Instruction, Mnemonic, Operand};
use super::register::Register;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsaProfile {
    Rv64g,
    #[default]
    Rv64gc,
}

impl IsaProfile {
    pub fn name(self) -> &'static str {
        match self {
            IsaProfile::Rv64g => "rv64g",
            IsaProfile::Rv64gc => "rv64gc",
        }
    }
}

impl std::str::FromStr for IsaProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rv64g" => Ok(IsaProfile::Rv64g),
            "rv64gc" => Ok(IsaProfile::Rv64gc),
            _ => Err(format!(
                "unknown ISA profile `{s}` (expected rv64g or rv64gc)"
            )),
        }
    }
}

impl std::fmt::Display for IsaProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Size in bytes. Pseudo-instructions cost the sum of their expansion.
pub fn instr_size(instr: &Instruction, isa: IsaProfile) -> u32 {
    if !instr.is_canonical() {
        return expand_pseudo(instr)
            .iter()
            .map(|i| instr_size(i, isa))
            .sum();
    }
    match isa {
        IsaProfile::Rv64g => 4,
        IsaProfile::Rv64gc if !instr.wide && compressible(instr) => 2,
        IsaProfile::Rv64gc => 4,
    }
}

fn six_bit(v: i64) -> bool {
    (-32..=31).contains(&v)
}

fn compressible(i: &Instruction) -> bool {
    use Mnemonic::*;
    use Operand::{Imm, Mem, Reg};
    let zero = Register::ZERO;
    let sp = Register::SP;
    match (i.mnemonic, i.operands.as_slice()) {
        (Addi, [Reg(rd), Reg(rs), Imm(v)]) => {
            let v = *v;
            if *rd == sp && *rs == sp {
                v != 0 && (six_bit(v) || (v % 16 == 0 && (-512..=496).contains(&v)))
            } else if rd == rs && *rd != zero {
                v != 0 && six_bit(v)
            } else if *rd == zero && *rs == zero {
                v == 0
            } else {
                *rs == zero && *rd != zero && six_bit(v)
            }
        }
        (Addiw, [Reg(rd), Reg(rs), Imm(v)]) => rd == rs && *rd != zero && six_bit(*v),
        (Lui, [Reg(rd), Imm(v)]) => {
            *rd != zero && *rd != sp && (matches!(*v, 1..=31) || (0xF_FFE0..=0xF_FFFF).contains(v))
        }
        (Add, [Reg(rd), Reg(rs1), Reg(rs2)]) => {
            *rd != zero && *rs2 != zero && (rd == rs1 || *rs1 == zero)
        }
        (Sub | And | Or | Xor | Addw | Subw, [Reg(rd), Reg(rs1), Reg(rs2)]) => {
            rd == rs1 && rd.is_rvc_short() && rs2.is_rvc_short()
        }
        (Andi, [Reg(rd), Reg(rs), Imm(v)]) => rd == rs && rd.is_rvc_short() && six_bit(*v),
        (Slli, [Reg(rd), Reg(rs), Imm(v)]) => rd == rs && *rd != zero && *v != 0,
        (Srli | Srai, [Reg(rd), Reg(rs), Imm(v)]) => rd == rs && rd.is_rvc_short() && *v != 0,
        (Ld | Sd, [Reg(r), Mem { offset, base }]) => {
            let loads_zero = i.mnemonic == Ld && *r == zero;
            mem_fits(*r, *offset, *base, 8) && !loads_zero
        }
        (Lw | Sw, [Reg(r), Mem { offset, base }]) => {
            let loads_zero = i.mnemonic == Lw && *r == zero;
            mem_fits(*r, *offset, *base, 4) && !loads_zero
        }
        (Jal, [Reg(rd), _]) => *rd == zero,
        (Jalr, [Reg(rd), Reg(rs), Imm(0)]) => *rs != zero && (*rd == zero || *rd == Register::RA),
        (Beq | Bne, [Reg(rs1), Reg(rs2), _]) => *rs2 == zero && rs1.is_rvc_short(),
        _ => false,
    }
}

/// sp-relative: 6-bit scaled offset; otherwise both registers in x8..x15
/// with a 5-bit scaled offset.
fn mem_fits(r: Register, offset: i64, base: Register, scale: i64) -> bool {
    if offset < 0 || offset % scale != 0 {
        return false;
    }
    if base == Register::SP {
        offset <= 63 * scale
    } else {
        base.is_rvc_short() && r.is_rvc_short() && offset <= 31 * scale
    }
}
