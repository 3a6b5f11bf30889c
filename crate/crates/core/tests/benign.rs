//! Differential runs of the benign corpus: every fixture must behave the same
//! before and after hardening, under every mitigation subset and both ISA
//! profiles.

mod common;

use specshield::asm::{parse_unit, AsmUnit, IsaProfile};
use specshield::harden::{harden_unit, HardenConfig, Mitigation, SiteKind};
use specshield::sim::{load_unit, Machine, MachineConfig, Status};

fn corpus() -> Vec<(String, String)> {
    common::benign_sources()
}

fn run(unit: &AsmUnit, isa: IsaProfile) -> Machine {
    let mut m = load_unit(unit, isa, &MachineConfig::default()).unwrap();
    m.run();
    m
}

fn configs(isa: IsaProfile) -> Vec<HardenConfig> {
    let mut out = vec![HardenConfig::all(isa)];
    out.extend(Mitigation::ALL.map(|m| HardenConfig::new([m], isa)));
    out
}

#[test]
fn corpus_is_large_enough() {
    assert!(corpus().len() >= 20);
}

#[test]
fn fixtures_compute_their_expected_results() {
    for (name, src) in corpus() {
        let unit = parse_unit(&src).unwrap();
        for isa in [IsaProfile::Rv64gc, IsaProfile::Rv64g] {
            let m = run(&unit, isa);
            assert_eq!(
                m.status(),
                &Status::Exited {
                    code: common::expected_exit(&src)
                },
                "{name} on {isa:?}"
            );
        }
    }
}

#[test]
fn hardening_preserves_semantics() {
    for (name, src) in corpus() {
        let unit = parse_unit(&src).unwrap();
        for isa in [IsaProfile::Rv64gc, IsaProfile::Rv64g] {
            let before = run(&unit, isa);
            for cfg in configs(isa) {
                let out = harden_unit(&unit, &cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
                let after = run(&out.unit, isa);
                let what = format!("{name} on {isa:?} with {:?}", cfg.enable);
                assert_eq!(after.status(), before.status(), "{what}");
                assert_eq!(after.data_snapshot(), before.data_snapshot(), "{what}");
                assert_eq!(after.regs, before.regs, "{what}");
            }
        }
    }
}

#[test]
fn corpus_exercises_every_site_kind() {
    let mut totals = [0u64; 4];
    let kinds = [
        SiteKind::IndirectJump,
        SiteKind::IndirectCall,
        SiteKind::DirectCall,
        SiteKind::Prologue,
    ];
    let mut unchanged = 0;
    for (_, src) in corpus() {
        let unit = parse_unit(&src).unwrap();
        let out = harden_unit(&unit, &HardenConfig::all(IsaProfile::Rv64gc)).unwrap();
        for (t, k) in totals.iter_mut().zip(kinds) {
            *t += out.report.category(k).count;
        }
        if !out.changed() {
            unchanged += 1;
        }
    }
    assert!(totals.iter().all(|&t| t >= 5), "{totals:?}");
    assert!(unchanged >= 1, "a site-free fixture stays byte-identical");
}
