//! The three thunk templates and a locator for thunk returns in hardened code.
//!
//! Every thunk shares a head: a direct `jal` to `set_up_target_N` pushes the
//! address of a `j capture_spec_N` self-loop onto the RAS, so a mispredicted
//! return spins there harmlessly until the real target resolves.

use crate::asm::{
    expand_pseudo, instr_size, AddressMap, AsmUnit, Instruction, IsaProfile, Item, Label, Mnemonic,
    Operand, Register,
};

pub fn capture_label(id: u64) -> String {
    format!("capture_spec_{id}")
}

pub fn set_up_label(id: u64) -> String {
    format!("set_up_target_{id}")
}

pub fn end_label(id: u64) -> String {
    format!("end_{id}")
}

fn synth(m: Mnemonic, ops: Vec<Operand>) -> Item {
    Item::Instruction(Instruction::build(m, ops).synthesized())
}

fn label(name: String) -> Item {
    Item::Label(Label::synthesized(name))
}

fn ret() -> Instruction {
    Instruction::build(
        Mnemonic::Jalr,
        vec![
            Operand::Reg(Register::ZERO),
            Operand::Reg(Register::RA),
            Operand::Imm(0),
        ],
    )
    .synthesized()
}

fn head(id: u64) -> Vec<Item> {
    vec![
        synth(Mnemonic::Jal, vec![Operand::sym(set_up_label(id))]),
        label(capture_label(id)),
        synth(Mnemonic::J, vec![Operand::sym(capture_label(id))]),
        label(set_up_label(id)),
    ]
}

/// Replacement for `jalr x0, r, offset`.
pub fn rewrite_indirect_jump(target: Register, offset: i64, id: u64) -> Vec<Item> {
    let mut out = head(id);
    out.push(synth(
        Mnemonic::Addi,
        vec![
            Operand::Reg(Register::RA),
            Operand::Reg(target),
            Operand::Imm(offset),
        ],
    ));
    out.push(Item::Instruction(ret()));
    out
}

/// Bytes a thunk skips at the callee entry: the first phase of a split
/// prologue up to and including the ra store, which the thunk performs itself.
pub fn call_skip(isa: IsaProfile) -> i64 {
    let sp = Operand::Reg(Register::SP);
    let alloc = Instruction::build(Mnemonic::Addi, vec![sp.clone(), sp, Operand::Imm(-16)]);
    let save = Instruction::build(
        Mnemonic::Sd,
        vec![Operand::Reg(Register::RA), Operand::mem(8, Register::SP)],
    );
    i64::from(instr_size(&alloc, isa) + instr_size(&save, isa))
}

/// Replacement for `jalr ra, r, offset`. The callee must start with a split
/// prologue; `r` is clobbered with the resume address.
pub fn rewrite_indirect_call(target: Register, offset: i64, isa: IsaProfile, id: u64) -> Vec<Item> {
    let (ra, sp, r) = (
        Operand::Reg(Register::RA),
        Operand::Reg(Register::SP),
        Operand::Reg(target),
    );
    let mut out = head(id);
    out.push(synth(
        Mnemonic::Addi,
        vec![ra, r.clone(), Operand::Imm(offset + call_skip(isa))],
    ));
    out.push(synth(
        Mnemonic::Addi,
        vec![sp.clone(), sp, Operand::Imm(-16)],
    ));
    out.push(synth(
        Mnemonic::La,
        vec![r.clone(), Operand::sym(end_label(id))],
    ));
    out.push(synth(Mnemonic::Sd, vec![r, Operand::mem(8, Register::SP)]));
    out.push(Item::Instruction(ret()));
    out.push(label(end_label(id)));
    out
}

/// Replacement for `jal ra, callee`. The head leaves `ra` at the capture
/// loop; one add moves it to the resume address past the thunk, and the jump
/// goes through `t0` so it pops the RAS without pushing the resume address.
pub fn rewrite_direct_call(callee: &str, isa: IsaProfile, id: u64) -> Vec<Item> {
    let (ra, t0) = (Operand::Reg(Register::RA), Operand::Reg(Register::T0));
    let tail = |bump: i64| {
        vec![
            Instruction::build(
                Mnemonic::Addi,
                vec![ra.clone(), ra.clone(), Operand::Imm(bump)],
            ),
            Instruction::build(
                Mnemonic::Lui,
                vec![t0.clone(), Operand::Hi(callee.to_string())],
            ),
            Instruction::build(
                Mnemonic::Jalr,
                vec![
                    Operand::Reg(Register::ZERO),
                    t0.clone(),
                    Operand::Lo(callee.to_string()),
                ],
            ),
        ]
    };
    // the bump is the distance from the capture loop to the end of the thunk,
    // which does not depend on the bump's own value
    let capture = Instruction::build(Mnemonic::J, vec![Operand::sym(capture_label(id))]);
    let bump = i64::from(instr_size(&capture, isa))
        + tail(1)
            .iter()
            .map(|i| i64::from(instr_size(i, isa)))
            .sum::<i64>();
    let mut out = head(id);
    out.extend(
        tail(bump)
            .into_iter()
            .map(|i| Item::Instruction(i.synthesized())),
    );
    out
}

/// A thunk's return instruction and the loop it must speculate into.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThunkTrap {
    pub id: u64,
    pub return_pc: u64,
    pub capture_pc: u64,
}

/// Locates every thunk in a hardened, laid-out unit: for each
/// `set_up_target_N` label, the first `jalr` after it.
pub fn thunk_traps(unit: &AsmUnit, map: &AddressMap) -> Vec<ThunkTrap> {
    let items = unit.items();
    let mut traps = Vec::new();
    for (idx, item) in items.iter().enumerate() {
        let Some(id) = item
            .as_label()
            .and_then(|l| l.strip_prefix("set_up_target_"))
            .and_then(|n| n.parse::<u64>().ok())
        else {
            continue;
        };
        let Some(capture_pc) = map.symbol(&capture_label(id)) else {
            continue;
        };
        let ret = items[idx + 1..].iter().enumerate().find_map(|(off, it)| {
            let i = it.as_instruction()?;
            let c = expand_pseudo(i);
            (c.len() == 1 && c[0].mnemonic == Mnemonic::Jalr).then_some(idx + 1 + off)
        });
        if let Some(return_pc) = ret.and_then(|r| map.instr_addr.get(&r).copied()) {
            traps.push(ThunkTrap {
                id,
                return_pc,
                capture_pc,
            });
        }
    }
    traps
}
