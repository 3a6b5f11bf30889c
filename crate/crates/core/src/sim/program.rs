//! Decoding a laid-out unit into executable operations.

use std::collections::HashMap;

use super::SimError;
use crate::asm::{
    expand_pseudo, hi20, instr_size, lo12, AddressMap, AsmUnit, Csr, Instruction, Mnemonic,
    Operand, Register,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AluOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Sll,
    Srl,
    Sra,
    Slt,
    Sltu,
    Mul,
    Addw,
    Subw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchCond {
    Eq,
    Ne,
    Lt,
    Ge,
    Ltu,
    Geu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Alu {
        op: AluOp,
        rd: Register,
        rs1: Register,
        rs2: Register,
    },
    /// Register-immediate forms reuse [`AluOp`]; `Addw` stands for `addiw`.
    AluImm {
        op: AluOp,
        rd: Register,
        rs1: Register,
        imm: i64,
    },
    Lui {
        rd: Register,
        value: u64,
    },
    Load {
        rd: Register,
        base: Register,
        offset: i64,
        width: u8,
        signed: bool,
    },
    Store {
        src: Register,
        base: Register,
        offset: i64,
        width: u8,
    },
    Branch {
        cond: BranchCond,
        rs1: Register,
        rs2: Register,
        target: u64,
    },
    Jal {
        rd: Register,
        target: u64,
    },
    Jalr {
        rd: Register,
        rs: Register,
        imm: i64,
    },
    Ecall,
    ReadCsr {
        rd: Register,
        csr: Csr,
    },
}

impl Op {
    /// Serializing instructions end a speculation window.
    pub fn is_serializing(&self) -> bool {
        matches!(self, Op::Ecall | Op::ReadCsr { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub op: Op,
    pub size: u32,
}

/// Executable image of a unit's text.
#[derive(Clone, Debug)]
pub struct Program {
    code: HashMap<u64, Decoded>,
    pub entry: u64,
}

impl Program {
    pub fn fetch(&self, pc: u64) -> Option<Decoded> {
        self.code.get(&pc).copied()
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn decode(unit: &AsmUnit, map: &AddressMap) -> Result<Program, SimError> {
        let mut code = HashMap::new();
        for (idx, instr) in unit.instructions() {
            let mut pc = map.instr_addr[&idx];
            for c in expand_pseudo(instr) {
                let size = instr_size(&c, map.isa);
                let op = decode_one(&c, map)?;
                code.insert(pc, Decoded { op, size });
                pc += u64::from(size);
            }
        }
        if code.is_empty() {
            return Err(SimError::NoEntry);
        }
        let entry = map.symbol("main").unwrap_or(map.base_text);
        Ok(Program { code, entry })
    }
}

fn decode_one(i: &Instruction, map: &AddressMap) -> Result<Op, SimError> {
    use Mnemonic as M;
    use Operand as O;
    let unsupported = || SimError::Unsupported(i.to_string());
    let addr = |s: &str| {
        map.symbol(s)
            .ok_or_else(|| SimError::UnresolvedSymbol(s.to_string()))
    };
    let imm = |o: &O| -> Result<i64, SimError> {
        match o {
            O::Imm(v) => Ok(*v),
            O::Lo(s) => Ok(lo12(addr(s)? as i64)),
            O::Hi(s) => Ok(hi20(addr(s)? as i64)),
            _ => Err(unsupported()),
        }
    };
    let alu = |m: M| -> Option<AluOp> {
        Some(match m {
            M::Add | M::Addi => AluOp::Add,
            M::Sub => AluOp::Sub,
            M::And | M::Andi => AluOp::And,
            M::Or | M::Ori => AluOp::Or,
            M::Xor | M::Xori => AluOp::Xor,
            M::Sll | M::Slli => AluOp::Sll,
            M::Srl | M::Srli => AluOp::Srl,
            M::Sra | M::Srai => AluOp::Sra,
            M::Slt | M::Slti => AluOp::Slt,
            M::Sltu | M::Sltiu => AluOp::Sltu,
            M::Mul => AluOp::Mul,
            M::Addw | M::Addiw => AluOp::Addw,
            M::Subw => AluOp::Subw,
            _ => return None,
        })
    };
    let load = |m: M| -> Option<(u8, bool)> {
        Some(match m {
            M::Ld => (8, true),
            M::Lw => (4, true),
            M::Lwu => (4, false),
            M::Lh => (2, true),
            M::Lhu => (2, false),
            M::Lb => (1, true),
            M::Lbu => (1, false),
            _ => return None,
        })
    };
    let store = |m: M| -> Option<u8> {
        Some(match m {
            M::Sd => 8,
            M::Sw => 4,
            M::Sh => 2,
            M::Sb => 1,
            _ => return None,
        })
    };
    let branch = |m: M| -> Option<BranchCond> {
        Some(match m {
            M::Beq => BranchCond::Eq,
            M::Bne => BranchCond::Ne,
            M::Blt => BranchCond::Lt,
            M::Bge => BranchCond::Ge,
            M::Bltu => BranchCond::Ltu,
            M::Bgeu => BranchCond::Geu,
            _ => return None,
        })
    };
    let op = match (i.mnemonic, i.operands.as_slice()) {
        (m, [O::Reg(rd), O::Reg(rs1), O::Reg(rs2)]) if alu(m).is_some() => Op::Alu {
            op: alu(m).expect("checked"),
            rd: *rd,
            rs1: *rs1,
            rs2: *rs2,
        },
        (m, [O::Reg(rd), O::Reg(rs1), v]) if alu(m).is_some() => Op::AluImm {
            op: alu(m).expect("checked"),
            rd: *rd,
            rs1: *rs1,
            imm: imm(v)?,
        },
        (M::Lui, [O::Reg(rd), v]) => Op::Lui {
            rd: *rd,
            value: ((imm(v)? << 12) as i32) as i64 as u64,
        },
        (m, [O::Reg(rd), O::Mem { offset, base }]) if load(m).is_some() => {
            let (width, signed) = load(m).expect("checked");
            Op::Load {
                rd: *rd,
                base: *base,
                offset: *offset,
                width,
                signed,
            }
        }
        (m, [O::Reg(src), O::Mem { offset, base }]) if store(m).is_some() => Op::Store {
            src: *src,
            base: *base,
            offset: *offset,
            width: store(m).expect("checked"),
        },
        (m, [O::Reg(rs1), O::Reg(rs2), O::Symbol(s)]) if branch(m).is_some() => Op::Branch {
            cond: branch(m).expect("checked"),
            rs1: *rs1,
            rs2: *rs2,
            target: addr(s)?,
        },
        (M::Jal, [O::Reg(rd), O::Symbol(s)]) => Op::Jal {
            rd: *rd,
            target: addr(s)?,
        },
        (M::Jalr, [O::Reg(rd), O::Reg(rs), v]) => Op::Jalr {
            rd: *rd,
            rs: *rs,
            imm: imm(v)?,
        },
        (M::Ecall, []) => Op::Ecall,
        (M::Csrrs, [O::Reg(rd), O::Csr(csr), _]) => Op::ReadCsr { rd: *rd, csr: *csr },
        _ => return Err(unsupported()),
    };
    Ok(op)
}
