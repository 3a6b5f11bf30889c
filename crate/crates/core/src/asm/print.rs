use std::fmt::Write;

use super::instr::{Instruction, Origin};
use super::parse::MARKER;
use super::unit::{AsmUnit, Item};

/// Renders a unit as assembly text. Hardener output carries a `#@specshield`
/// comment so that a later parse restores its origin.
pub fn print_unit(unit: &AsmUnit) -> String {
    let mut out = String::new();
    for item in unit.items() {
        match item {
            Item::Label(l) => {
                out.push_str(&l.name);
                out.push(':');
                if l.origin == Origin::Synthesized {
                    let _ = write!(out, "  #{MARKER}");
                }
            }
            Item::Directive(d) => {
                let _ = write!(out, "    {}", d.name);
                if !d.args.is_empty() {
                    let _ = write!(out, " {}", d.args);
                }
            }
            Item::Instruction(i) => print_instruction(&mut out, i),
        }
        out.push('\n');
    }
    out
}

fn print_instruction(out: &mut String, i: &Instruction) {
    let _ = write!(out, "    {i}");
    match (i.origin, i.wide) {
        (Origin::Synthesized, true) => {
            let _ = write!(out, "  #{MARKER} norvc");
        }
        (Origin::Synthesized, false) => {
            let _ = write!(out, "  #{MARKER}");
        }
        // parsed back as a width pin
        (Origin::Original, true) => {
            let _ = write!(out, "  # norvc");
        }
        (Origin::Original, false) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_unit;

    #[test]
    fn empty_unit_prints_empty() {
        assert_eq!(print_unit(&AsmUnit::empty()), "");
    }

    #[test]
    fn retpoline_block_prints_its_call() {
        let src = "jal set_up_target\ncapture_spec:\n  j capture_spec\nset_up_target:\n  addi ra, a5, 0\n  jr ra\n";
        let u = parse_unit(src).unwrap();
        let text = print_unit(&u);
        assert!(text.contains("jal set_up_target"));
        assert_eq!(parse_unit(&text).unwrap(), u);
    }
}
