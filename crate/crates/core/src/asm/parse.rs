//! GNU-style assembly text to [`AsmUnit`].
//!
//! Lines hold any number of `label:` prefixes followed by at most one
//! directive or instruction. `#` starts a comment unless quoted. A comment
//! starting with `@specshield` marks the line as hardener output; a trailing
//! `norvc` word pins the instruction to its 4-byte encoding.

use std::collections::HashMap;

use super::error::AsmError;
use super::instr::{is_identifier, parse_instruction, InstrParseError, Origin, SourceLoc};
use super::unit::{AsmUnit, Directive, Item, Label};

pub const MARKER: &str = "@specshield";

pub fn parse_unit(text: &str) -> Result<AsmUnit, AsmError> {
    let mut items = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (code, comment) = split_comment(raw);
        let (origin, wide) = match comment.map(str::trim) {
            Some(c) if c.starts_with(MARKER) => {
                let flags = &c[MARKER.len()..];
                (
                    Origin::Synthesized,
                    flags.split_whitespace().any(|w| w == "norvc"),
                )
            }
            Some("norvc") => (Origin::Original, true),
            _ => (Origin::Original, false),
        };
        let mut rest = code.trim();
        while let Some((name, after)) = take_label(rest) {
            if seen.insert(name.to_string(), line).is_some() {
                return Err(AsmError::DuplicateLabel {
                    line,
                    label: name.to_string(),
                });
            }
            items.push(Item::Label(Label {
                name: name.to_string(),
                origin,
            }));
            rest = after.trim_start();
        }
        if rest.is_empty() {
            continue;
        }
        if rest.starts_with('.') {
            let (name, args) = match rest.find(char::is_whitespace) {
                Some(p) => (&rest[..p], &rest[p..]),
                None => (rest, ""),
            };
            if name.len() < 2 || !is_identifier(name) {
                return Err(AsmError::Syntax {
                    line,
                    msg: format!("malformed directive `{rest}`"),
                });
            }
            items.push(Item::Directive(Directive::new(name, args)));
            continue;
        }
        let mut instr = parse_instruction(rest).map_err(|e| match e {
            InstrParseError::UnknownMnemonic(m) => AsmError::UnknownMnemonic { line, mnemonic: m },
            InstrParseError::Operands(msg) => AsmError::Operands { line, msg },
        })?;
        instr.origin = origin;
        instr.wide = wide;
        instr.loc = Some(SourceLoc { line });
        items.push(Item::Instruction(instr));
    }
    AsmUnit::new(items)
}

/// Splits at the first `#` outside string and character literals.
fn split_comment(line: &str) -> (&str, Option<&str>) {
    let mut in_str = false;
    let mut in_char = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_str || in_char => escaped = true,
            '"' if !in_char => in_str = !in_str,
            '\'' if !in_str => in_char = !in_char,
            '#' if !in_str && !in_char => return (&line[..i], Some(&line[i + 1..])),
            _ => {}
        }
    }
    (line, None)
}

fn take_label(s: &str) -> Option<(&str, &str)> {
    let colon = s.find(':')?;
    let name = &s[..colon];
    is_identifier(name).then(|| (name, &s[colon + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::instr::{Mnemonic, Operand};
    use crate::asm::register::Register;

    #[test]
    fn empty_text_is_empty_unit() {
        assert!(parse_unit("").unwrap().items().is_empty());
        assert!(parse_unit("\n  # only a comment\n")
            .unwrap()
            .items()
            .is_empty());
    }

    #[test]
    fn labels_share_lines_with_instructions() {
        let u = parse_unit("capture_spec: j capture_spec").unwrap();
        assert_eq!(u.items().len(), 2);
        assert_eq!(u.items()[0].as_label(), Some("capture_spec"));
        let i = u.items()[1].as_instruction().unwrap();
        assert_eq!(i.mnemonic, Mnemonic::J);
        assert_eq!(i.operands, vec![Operand::sym("capture_spec")]);
    }

    #[test]
    fn dot_labels_are_labels_not_directives() {
        let u = parse_unit(".L2:\n  .align 3\n").unwrap();
        assert_eq!(u.items()[0].as_label(), Some(".L2"));
        assert!(matches!(&u.items()[1], Item::Directive(d) if d.name == ".align" && d.args == "3"));
    }

    #[test]
    fn marker_sets_origin_and_width() {
        let u = parse_unit("  jalr x0, ra, 0 #@specshield norvc\n  addi ra, a5, 0  # @specshield\nl: #@specshield\n").unwrap();
        let a = u.items()[0].as_instruction().unwrap();
        assert_eq!(a.origin, Origin::Synthesized);
        assert!(a.wide);
        let b = u.items()[1].as_instruction().unwrap();
        assert_eq!(b.origin, Origin::Synthesized);
        assert!(!b.wide);
        assert!(matches!(&u.items()[2], Item::Label(l) if l.origin == Origin::Synthesized));
    }

    #[test]
    fn hash_inside_string_is_not_a_comment() {
        let u = parse_unit(r#"s: .asciz "a#b" # trailing"#).unwrap();
        assert!(matches!(&u.items()[1], Item::Directive(d) if d.args == r#""a#b""#));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_unit("nop\nfoo a0\n").unwrap_err(),
            AsmError::UnknownMnemonic {
                line: 2,
                mnemonic: "foo".into()
            }
        );
        assert_eq!(
            parse_unit("a:\nnop\na:\n").unwrap_err(),
            AsmError::DuplicateLabel {
                line: 3,
                label: "a".into()
            }
        );
        assert!(matches!(
            parse_unit("add a0, a1\n"),
            Err(AsmError::Operands { line: 1, .. })
        ));
        assert!(matches!(
            parse_unit(".\n"),
            Err(AsmError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn memref_and_registers() {
        let u = parse_unit("sd ra, 8(sp)\nld a0, (a1)").unwrap();
        let i = u.items()[1].as_instruction().unwrap();
        assert_eq!(i.operands[1], Operand::mem(0, Register::A1));
    }
}
