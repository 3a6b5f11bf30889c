//! Prologue splitting.
//!
//! An indirect-call thunk enters the callee past its first two instructions,
//! so every callee must open with the same fixed-size pair. A canonical
//! prologue
//!
//! ```text
//! addi sp, sp, -N
//! sd   ra, N-8(sp)
//! sd   fp, N-16(sp)
//! addi fp, sp, K
//! ```
//!
//! becomes a 16-byte ra/fp phase followed by the residual allocation:
//!
//! ```text
//! addi sp, sp, -16
//! sd   ra, 8(sp)
//! sd   fp, 0(sp)
//! addi fp, sp, K-(N-16)
//! addi sp, sp, -(N-16)     # omitted when N = 16
//! ```
//!
//! Both leave sp, fp and the two saved slots identical, so the rest of the
//! function is untouched.

use crate::asm::{expand_pseudo, Instruction, Item, Mnemonic, Operand, Register};

/// Frame size `N` and frame-pointer offset `K` of a canonical prologue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrologueShape {
    pub frame: i64,
    pub fp_offset: i64,
}

impl PrologueShape {
    /// Bytes allocated after the fixed ra/fp phase.
    pub fn residual(self) -> i64 {
        self.frame - 16
    }

    pub fn needs_split(self) -> bool {
        self.residual() > 0
    }
}

/// Where a function's prologue sits: item indices of its four instructions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocatedPrologue {
    pub shape: PrologueShape,
    pub items: [usize; 4],
}

/// Finds the canonical prologue at the head of the function spanning
/// `items[start..end]` (`start` is the function label). Directives may sit
/// between the label and the prologue; the four instructions must be
/// contiguous.
pub fn locate_prologue(items: &[Item], start: usize, end: usize) -> Option<LocatedPrologue> {
    let mut idx = start + 1;
    while idx < end && matches!(items[idx], Item::Directive(_)) {
        idx += 1;
    }
    if idx + 4 > end {
        return None;
    }
    let mut instrs = Vec::with_capacity(4);
    for it in &items[idx..idx + 4] {
        let Item::Instruction(i) = it else {
            return None;
        };
        let mut canon = expand_pseudo(i);
        if canon.len() != 1 {
            return None;
        }
        instrs.push(canon.remove(0));
    }
    let shape = recognize_prologue(&instrs)?;
    Some(LocatedPrologue {
        shape,
        items: [idx, idx + 1, idx + 2, idx + 3],
    })
}

/// Matches four canonical instructions against the prologue shape.
pub fn recognize_prologue(instrs: &[Instruction]) -> Option<PrologueShape> {
    use Operand::{Imm, Mem, Reg};
    let (sp, fp, ra) = (Register::SP, Register::FP, Register::RA);
    let [a, b, c, d] = instrs else { return None };
    let frame = match (a.mnemonic, a.operands.as_slice()) {
        (Mnemonic::Addi, [Reg(r1), Reg(r2), Imm(v)]) if *r1 == sp && *r2 == sp => -v,
        _ => return None,
    };
    if frame < 16 || frame % 8 != 0 {
        return None;
    }
    let stores = |i: &Instruction, reg: Register, off: i64| {
        i.mnemonic == Mnemonic::Sd
            && matches!(i.operands.as_slice(),
                [Reg(r), Mem { offset, base }] if *r == reg && *offset == off && *base == sp)
    };
    if !stores(b, ra, frame - 8) || !stores(c, fp, frame - 16) {
        return None;
    }
    let fp_offset = match (d.mnemonic, d.operands.as_slice()) {
        (Mnemonic::Addi, [Reg(r1), Reg(r2), Imm(v)]) if *r1 == fp && *r2 == sp => *v,
        _ => return None,
    };
    // the rebased fp offset must still be encodable
    if !(-2048..=2047).contains(&(fp_offset - (frame - 16))) {
        return None;
    }
    Some(PrologueShape { frame, fp_offset })
}

/// Replacement instructions for a recognized prologue, marked synthesized.
pub fn split_prologue_instrs(shape: PrologueShape) -> Vec<Instruction> {
    use Operand::{Imm, Reg};
    let (sp, fp, ra) = (Register::SP, Register::FP, Register::RA);
    let residual = shape.residual();
    let mut out = vec![
        Instruction::build(Mnemonic::Addi, vec![Reg(sp), Reg(sp), Imm(-16)]),
        Instruction::build(Mnemonic::Sd, vec![Reg(ra), Operand::mem(8, sp)]),
        Instruction::build(Mnemonic::Sd, vec![Reg(fp), Operand::mem(0, sp)]),
        Instruction::build(
            Mnemonic::Addi,
            vec![Reg(fp), Reg(sp), Imm(shape.fp_offset - residual)],
        ),
    ];
    if residual > 0 {
        out.push(Instruction::build(
            Mnemonic::Addi,
            vec![Reg(sp), Reg(sp), Imm(-residual)],
        ));
    }
    out.into_iter().map(Instruction::synthesized).collect()
}

/// Error for [`split_prologue`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("function does not open with a recognized prologue")]
pub struct UnrecognizedPrologue;

/// Splits the prologue of one function, given its items starting at the
/// function label. A 16-byte frame comes back unchanged.
pub fn split_prologue(function: &[Item]) -> Result<Vec<Item>, UnrecognizedPrologue> {
    let loc = locate_prologue(function, 0, function.len()).ok_or(UnrecognizedPrologue)?;
    if !loc.shape.needs_split() {
        return Ok(function.to_vec());
    }
    let mut out = function[..loc.items[0]].to_vec();
    out.extend(
        split_prologue_instrs(loc.shape)
            .into_iter()
            .map(Item::Instruction),
    );
    out.extend_from_slice(&function[loc.items[3] + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{parse_instruction, parse_unit};
    use std::collections::BTreeMap;

    fn instrs(text: &str) -> Vec<Instruction> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| parse_instruction(l).unwrap())
            .collect()
    }

    /// Symbolic stack evaluation: sp and fp are `entry + c`, memory maps
    /// offsets from entry to the symbolic value stored there.
    #[derive(Debug, PartialEq, Eq)]
    struct Frame {
        sp: i64,
        fp: i64,
        slots: BTreeMap<i64, &'static str>,
    }

    fn eval(seq: &[Instruction]) -> Frame {
        let mut f = Frame {
            sp: 0,
            fp: i64::MIN,
            slots: BTreeMap::new(),
        };
        for i in seq {
            let ops = &i.operands;
            match (i.mnemonic, ops.as_slice()) {
                (Mnemonic::Addi, [Operand::Reg(rd), Operand::Reg(rs), Operand::Imm(v)]) => {
                    let src = if *rs == Register::SP { f.sp } else { f.fp };
                    if *rd == Register::SP {
                        f.sp = src + v;
                    } else {
                        f.fp = src + v;
                    }
                }
                (Mnemonic::Sd, [Operand::Reg(r), Operand::Mem { offset, base }]) => {
                    assert_eq!(*base, Register::SP);
                    let name = match r.abi_name() {
                        "ra" => "caller_ra",
                        "fp" => "caller_fp",
                        "s1" => "s1",
                        _ => "other",
                    };
                    f.slots.insert(f.sp + offset, name);
                }
                _ => panic!("unexpected {i}"),
            }
        }
        f
    }

    #[test]
    fn f1_example() {
        let orig = instrs("addi sp, sp, -32\nsd ra, 24(sp)\nsd fp, 16(sp)\naddi fp, sp, 16");
        let shape = recognize_prologue(&orig).unwrap();
        assert_eq!(
            shape,
            PrologueShape {
                frame: 32,
                fp_offset: 16
            }
        );
        let split = split_prologue_instrs(shape);
        let expect = instrs(
            "addi sp, sp, -16\nsd ra, 8(sp)\nsd fp, 0(sp)\naddi fp, sp, 0\naddi sp, sp, -16",
        );
        assert_eq!(
            split,
            expect
                .into_iter()
                .map(Instruction::synthesized)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn sixteen_byte_frame_unchanged() {
        let u =
            parse_unit("f:\naddi sp, sp, -16\nsd ra, 8(sp)\nsd fp, 0(sp)\naddi fp, sp, 16\nret\n")
                .unwrap();
        assert_eq!(split_prologue(u.items()).unwrap(), u.items().to_vec());
    }

    #[test]
    fn frame_48_k_48() {
        let orig = instrs("addi sp, sp, -48\nsd ra, 40(sp)\nsd fp, 32(sp)\naddi fp, sp, 48");
        let split = split_prologue_instrs(recognize_prologue(&orig).unwrap());
        assert_eq!(
            split[3],
            parse_instruction("addi fp, sp, 16").unwrap().synthesized()
        );
        assert_eq!(
            split[4],
            parse_instruction("addi sp, sp, -32").unwrap().synthesized()
        );
        assert_eq!(eval(&orig), eval(&split));
    }

    #[test]
    fn symbolic_equivalence_over_frames() {
        for n in (16..=128).step_by(8) {
            for k in [0, n - 16, n] {
                let orig = instrs(&format!(
                    "addi sp, sp, -{n}\nsd ra, {}(sp)\nsd fp, {}(sp)\naddi fp, sp, {k}",
                    n - 8,
                    n - 16
                ));
                let shape = recognize_prologue(&orig).expect("canonical");
                let split = split_prologue_instrs(shape);
                assert_eq!(eval(&orig), eval(&split), "N={n} K={k}");
                assert_eq!(split.len(), if n == 16 { 4 } else { 5 });
            }
        }
    }

    #[test]
    fn rejects_other_shapes() {
        let cases = [
            "addi sp, sp, -16\nsd fp, 8(sp)\naddi fp, sp, 16\nret",
            "addi sp, sp, -32\nsd ra, 16(sp)\nsd fp, 8(sp)\naddi fp, sp, 32",
            "addi sp, sp, -8\nsd ra, 0(sp)\nsd fp, -8(sp)\naddi fp, sp, 8",
            "addi sp, sp, -20\nsd ra, 12(sp)\nsd fp, 4(sp)\naddi fp, sp, 20",
            "ld ra, 56(sp)\naddi sp, sp, 64\nld fp, -16(sp)\nret",
        ];
        for c in cases {
            assert_eq!(recognize_prologue(&instrs(c)), None, "{c}");
        }
        let u = parse_unit("f:\nnop\nret\n").unwrap();
        assert_eq!(split_prologue(u.items()), Err(UnrecognizedPrologue));
    }

    #[test]
    fn directives_may_precede_prologue() {
        let u = parse_unit(
            "f:\n.cfi_startproc\naddi sp, sp, -32\nsd ra, 24(sp)\nsd fp, 16(sp)\naddi fp, sp, 32\nret\n",
        )
        .unwrap();
        let loc = locate_prologue(u.items(), 0, u.items().len()).unwrap();
        assert_eq!(loc.items, [2, 3, 4, 5]);
        let out = split_prologue(u.items()).unwrap();
        assert_eq!(out.len(), u.items().len() + 1);
    }
}
