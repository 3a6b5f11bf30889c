use serde::Serialize;

use super::prologue::{locate_prologue, PrologueShape};
use super::{HardenConfig, Mitigation};
use crate::asm::{expand_pseudo, AsmUnit, Instruction, Item, Mnemonic, Operand, Register};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    IndirectCall,
    IndirectJump,
    DirectCall,
    Prologue,
}

impl SiteKind {
    /// Key used in the overhead report.
    pub fn category(self) -> &'static str {
        match self {
            SiteKind::IndirectJump => "indirect_jumps",
            SiteKind::IndirectCall => "indirect_calls",
            SiteKind::DirectCall => "direct_calls",
            SiteKind::Prologue => "prologues",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SiteTarget {
    /// `jalr rd, reg, offset`
    Register {
        reg: Register,
        offset: i64,
    },
    Callee(String),
    Function {
        name: String,
        shape: PrologueShape,
        /// Items holding the four prologue instructions.
        items: [usize; 4],
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteSite {
    pub kind: SiteKind,
    /// Index into the unit's items; for a prologue, its first instruction.
    pub item: usize,
    pub target: SiteTarget,
}

/// Canonical form of a single-instruction item, if it is one.
fn single(i: &Instruction) -> Option<Instruction> {
    let mut c = expand_pseudo(i);
    (c.len() == 1).then(|| c.remove(0))
}

fn classify(i: &Instruction) -> Option<(SiteKind, SiteTarget)> {
    let c = single(i)?;
    match (c.mnemonic, c.operands.as_slice()) {
        (Mnemonic::Jalr, [Operand::Reg(rd), Operand::Reg(rs), Operand::Imm(off)]) => {
            let target = SiteTarget::Register {
                reg: *rs,
                offset: *off,
            };
            if *rd == Register::RA {
                Some((SiteKind::IndirectCall, target))
            } else if *rd == Register::ZERO && *rs != Register::RA {
                Some((SiteKind::IndirectJump, target))
            } else {
                None
            }
        }
        (Mnemonic::Jal, [Operand::Reg(rd), Operand::Symbol(s)]) if *rd == Register::RA => {
            Some((SiteKind::DirectCall, SiteTarget::Callee(s.clone())))
        }
        _ => None,
    }
}

/// Functions that open with the canonical prologue, with where it sits.
pub(crate) fn prologues(unit: &AsmUnit) -> Vec<(String, PrologueShape, [usize; 4])> {
    unit.functions()
        .iter()
        .filter_map(|f| {
            locate_prologue(unit.items(), f.start, f.end)
                .map(|p| (f.name.clone(), p.shape, p.items))
        })
        .collect()
}

/// Every original instruction the enabled mitigations rewrite, plus, with
/// calls enabled, every prologue that needs splitting. Item order.
pub fn find_rewrite_sites(unit: &AsmUnit, config: &HardenConfig) -> Vec<RewriteSite> {
    let mut sites = Vec::new();
    if config.enabled(Mitigation::Calls) {
        for (name, shape, items) in prologues(unit) {
            if shape.needs_split() {
                sites.push(RewriteSite {
                    kind: SiteKind::Prologue,
                    item: items[0],
                    target: SiteTarget::Function { name, shape, items },
                });
            }
        }
    }
    for (idx, item) in unit.items().iter().enumerate() {
        let Item::Instruction(i) = item else { continue };
        if i.is_synthesized() {
            continue;
        }
        let Some((kind, target)) = classify(i) else {
            continue;
        };
        let wanted = match kind {
            SiteKind::IndirectJump => Mitigation::Jumps,
            SiteKind::IndirectCall => Mitigation::Calls,
            SiteKind::DirectCall => Mitigation::Rsb,
            SiteKind::Prologue => unreachable!(),
        };
        if config.enabled(wanted) {
            sites.push(RewriteSite {
                kind,
                item: idx,
                target,
            });
        }
    }
    sites.sort_by_key(|s| s.item);
    sites
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{parse_unit, IsaProfile};

    fn all() -> HardenConfig {
        HardenConfig::all(IsaProfile::Rv64gc)
    }

    fn kinds(src: &str, cfg: &HardenConfig) -> Vec<SiteKind> {
        find_rewrite_sites(&parse_unit(src).unwrap(), cfg)
            .into_iter()
            .map(|s| s.kind)
            .collect()
    }

    #[test]
    fn classifies_branch_forms() {
        let src = "main:\n jr a5\n ret\n jalr x0, ra, 0\n call f\n jalr a5\n jalr ra, 8(t0)\n tail f\n j main\n jal x0, f\nf:\n ret\n";
        assert_eq!(
            kinds(src, &all()),
            [
                SiteKind::IndirectJump,
                SiteKind::DirectCall,
                SiteKind::IndirectCall,
                SiteKind::IndirectCall,
            ]
        );
        let u = parse_unit(src).unwrap();
        let sites = find_rewrite_sites(&u, &all());
        assert_eq!(
            sites[0].target,
            SiteTarget::Register {
                reg: Register::A5,
                offset: 0
            }
        );
        assert_eq!(
            sites[3].target,
            SiteTarget::Register {
                reg: Register::T0,
                offset: 8
            }
        );
        assert_eq!(sites[1].target, SiteTarget::Callee("f".into()));
    }

    #[test]
    fn only_returns_gives_nothing() {
        assert!(kinds("f:\n ret\n", &all()).is_empty());
    }

    #[test]
    fn respects_enabled_set() {
        let src = "main:\n jr a5\n call f\n jalr a5\nf:\n ret\n";
        let cfg = HardenConfig::new([Mitigation::Rsb], IsaProfile::Rv64gc);
        assert_eq!(kinds(src, &cfg), [SiteKind::DirectCall]);
        let cfg = HardenConfig::new([Mitigation::Jumps], IsaProfile::Rv64gc);
        assert_eq!(kinds(src, &cfg), [SiteKind::IndirectJump]);
    }

    #[test]
    fn synthesized_never_listed() {
        let src = "main:\n call f  #@specshield\n jr a5  #@specshield\nf:\n ret\n";
        assert!(kinds(src, &all()).is_empty());
    }

    #[test]
    fn prologue_sites_only_when_split_needed() {
        let src = "\
main:
    addi sp, sp, -16
    sd ra, 8(sp)
    sd fp, 0(sp)
    addi fp, sp, 16
    call f
    ret
f:
    addi sp, sp, -32
    sd ra, 24(sp)
    sd fp, 16(sp)
    addi fp, sp, 32
    ret
";
        let u = parse_unit(src).unwrap();
        let sites = find_rewrite_sites(&u, &all());
        assert_eq!(sites.len(), 2);
        assert_eq!(sites[1].kind, SiteKind::Prologue);
        let SiteTarget::Function { name, shape, .. } = &sites[1].target else {
            panic!()
        };
        assert_eq!(name, "f");
        assert_eq!(shape.frame, 32);
        let cfg = HardenConfig::new([Mitigation::Jumps, Mitigation::Rsb], IsaProfile::Rv64gc);
        assert_eq!(kinds(src, &cfg), [SiteKind::DirectCall]);
    }
}
