//! Parser, printer, size-model and layout properties over generated programs
//! and every assembly text the crate produces or ships.

mod common;

use proptest::prelude::*;
use specshield::asm::{
    expand_pseudo, instr_size, layout, parse_unit, print_unit, IsaProfile, Register,
};
use specshield::attack::{build_poc, PocKind, PocVariant};
use specshield::harden::{harden_unit, HardenConfig};
use specshield::sim::MachineConfig;

const LABELS: [&str; 4] = ["top", "mid", "tail_end", "data_word"];

fn reg() -> impl Strategy<Value = String> {
    (0u8..32).prop_map(|i| Register::new(i).unwrap().abi_name().to_string())
}

fn target() -> impl Strategy<Value = String> {
    prop::sample::select(&LABELS[..3]).prop_map(str::to_string)
}

fn instruction() -> impl Strategy<Value = String> {
    let imm12 = -2048i64..=2047;
    prop_oneof![
        (reg(), reg(), imm12.clone()).prop_map(|(d, s, i)| format!("addi {d}, {s}, {i}")),
        (reg(), reg(), reg()).prop_map(|(d, a, b)| format!("add {d}, {a}, {b}")),
        (reg(), reg(), reg()).prop_map(|(d, a, b)| format!("sub {d}, {a}, {b}")),
        (reg(), reg(), 0i64..64).prop_map(|(d, s, i)| format!("slli {d}, {s}, {i}")),
        (reg(), reg(), imm12.clone()).prop_map(|(d, s, i)| format!("andi {d}, {s}, {i}")),
        (reg(), 0i64..0x10_0000).prop_map(|(d, i)| format!("lui {d}, {i}")),
        (reg(), -4096i64..4096).prop_map(|(d, i)| format!("li {d}, {i}")),
        (reg(), reg()).prop_map(|(d, s)| format!("mv {d}, {s}")),
        (reg(), imm12.clone(), reg()).prop_map(|(d, o, b)| format!("ld {d}, {o}({b})")),
        (reg(), imm12.clone(), reg()).prop_map(|(d, o, b)| format!("lbu {d}, {o}({b})")),
        (reg(), imm12.clone(), reg()).prop_map(|(s, o, b)| format!("sd {s}, {o}({b})")),
        (reg(), 0i64..64).prop_map(|(s, o)| format!("sd {s}, {}(sp)", o * 8)),
        (reg(), reg(), target()).prop_map(|(a, b, l)| format!("bne {a}, {b}, {l}")),
        (reg(), target()).prop_map(|(a, l)| format!("beqz {a}, {l}")),
        (reg(), reg(), imm12).prop_map(|(d, s, i)| format!("jalr {d}, {s}, {i}")),
        reg().prop_map(|r| format!("jr {r}")),
        reg().prop_map(|r| format!("rdcycle {r}")),
        target().prop_map(|l| format!("j {l}")),
        target().prop_map(|l| format!("call {l}")),
        target().prop_map(|l| format!("tail {l}")),
        reg().prop_map(|r| format!("la {r}, data_word")),
        Just("ret".to_string()),
        Just("nop".to_string()),
        Just("ecall".to_string()),
    ]
}

/// A unit with the three text labels spread through generated instructions.
fn program() -> impl Strategy<Value = String> {
    prop::collection::vec(instruction(), 3..40).prop_map(|body| {
        let mut s = String::from("    .text\n");
        let third = body.len() / 3;
        for (i, line) in body.iter().enumerate() {
            match i {
                0 => s.push_str("top:\n"),
                _ if i == third => s.push_str("mid:\n"),
                _ if i == 2 * third => s.push_str("tail_end:\n"),
                _ => {}
            }
            s.push_str("    ");
            s.push_str(line);
            s.push('\n');
        }
        s.push_str("    .data\ndata_word:\n    .dword top\n");
        s
    })
}

fn shipped_texts() -> Vec<String> {
    let mut out: Vec<String> = common::benign_sources()
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    for kind in PocKind::ALL {
        let unit = build_poc(&PocVariant::new(kind), &MachineConfig::default()).unwrap();
        out.push(print_unit(&unit));
    }
    let hardened: Vec<String> = out
        .iter()
        .map(|t| {
            let u = parse_unit(t).unwrap();
            print_unit(
                &harden_unit(&u, &HardenConfig::all(IsaProfile::Rv64gc))
                    .unwrap()
                    .unit,
            )
        })
        .collect();
    out.extend(hardened);
    out
}

#[test]
fn round_trip_on_shipped_texts() {
    for t in shipped_texts() {
        let once = parse_unit(&t).unwrap();
        let twice = parse_unit(&print_unit(&once)).unwrap();
        assert_eq!(once, twice);
    }
}

#[test]
fn layout_monotone_on_shipped_texts() {
    for t in shipped_texts() {
        let u = parse_unit(&t).unwrap();
        for isa in [IsaProfile::Rv64gc, IsaProfile::Rv64g] {
            check_layout(&u, isa);
        }
    }
}

fn check_layout(u: &specshield::asm::AsmUnit, isa: IsaProfile) {
    let map = layout(u, isa).unwrap();
    let addrs: Vec<(usize, u64)> = map.instr_addr.iter().map(|(&i, &a)| (i, a)).collect();
    for w in addrs.windows(2) {
        let (i, a) = w[0];
        let (_, b) = w[1];
        let size = u64::from(instr_size(u.items()[i].as_instruction().unwrap(), isa));
        assert!(b > a);
        assert_eq!(b - a, size, "gap after item {i}");
    }
    if let Some(&(i, a)) = addrs.last() {
        let size = u64::from(instr_size(u.items()[i].as_instruction().unwrap(), isa));
        assert_eq!(map.text_end, a + size);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn round_trip(src in program()) {
        let once = parse_unit(&src).unwrap();
        let printed = print_unit(&once);
        let twice = parse_unit(&printed).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(print_unit(&twice), printed);
    }

    #[test]
    fn size_model_consistency(src in program()) {
        let u = parse_unit(&src).unwrap();
        for (_, i) in u.instructions() {
            let canonical = expand_pseudo(i);
            let g = instr_size(i, IsaProfile::Rv64g);
            let gc = instr_size(i, IsaProfile::Rv64gc);
            prop_assert_eq!(g, 4 * canonical.len() as u32);
            prop_assert!(gc <= g);
            for c in &canonical {
                prop_assert_eq!(instr_size(c, IsaProfile::Rv64g), 4);
                prop_assert!(matches!(instr_size(c, IsaProfile::Rv64gc), 2 | 4));
            }
        }
    }

    #[test]
    fn layout_monotone(src in program()) {
        let u = parse_unit(&src).unwrap();
        check_layout(&u, IsaProfile::Rv64gc);
        check_layout(&u, IsaProfile::Rv64g);
    }

    #[test]
    fn expansion_idempotent(src in program()) {
        let u = parse_unit(&src).unwrap();
        for (_, i) in u.instructions() {
            let once = expand_pseudo(i);
            let twice: Vec<_> = once.iter().flat_map(expand_pseudo).collect();
            prop_assert_eq!(&once, &twice);
        }
        let e = u.expanded();
        prop_assert_eq!(e.expanded(), e);
    }
}
