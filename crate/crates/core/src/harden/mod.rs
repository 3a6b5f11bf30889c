//! Retpoline-style hardening against Spectre-BTI and Spectre-RSB.
//!
//! Three rewrites, each replacing one branch with a thunk whose return is
//! predicted into a self-loop:
//!
//! - indirect jumps `jalr x0, r, 0` (r ≠ ra),
//! - indirect calls `jalr ra, r, 0`, which also requires every callee to
//!   open with a split prologue,
//! - direct calls `jal ra, sym`, which keeps a desynchronized RAS from
//!   predicting the instruction after the call.

mod prologue;
mod report;
mod rewrite;
mod sites;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::asm::{instr_size, AsmError, AsmUnit, IsaProfile, Item, Label, Register};

pub use prologue::{
    locate_prologue, recognize_prologue, split_prologue, split_prologue_instrs, LocatedPrologue,
    PrologueShape, UnrecognizedPrologue,
};
pub use report::{CategoryReport, OverheadReport};
pub use rewrite::{
    call_skip, capture_label, end_label, rewrite_direct_call, rewrite_indirect_call,
    rewrite_indirect_jump, set_up_label, thunk_traps, ThunkTrap,
};
pub use sites::{find_rewrite_sites, RewriteSite, SiteKind, SiteTarget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mitigation {
    Jumps,
    Calls,
    Rsb,
}

impl Mitigation {
    pub const ALL: [Mitigation; 3] = [Mitigation::Jumps, Mitigation::Calls, Mitigation::Rsb];

    pub fn name(self) -> &'static str {
        match self {
            Mitigation::Jumps => "jumps",
            Mitigation::Calls => "calls",
            Mitigation::Rsb => "rsb",
        }
    }

    /// Parses `all` or a comma-separated subset of `jumps,calls,rsb`.
    pub fn parse_list(text: &str) -> Result<BTreeSet<Mitigation>, String> {
        let mut out = BTreeSet::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Mitigation::ALL);
            } else {
                out.insert(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err("no mitigation selected".into());
        }
        Ok(out)
    }
}

impl std::str::FromStr for Mitigation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mitigation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mitigation `{s}` (expected jumps, calls, rsb or all)"))
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardenConfig {
    pub enable: BTreeSet<Mitigation>,
    pub isa: IsaProfile,
    /// First suffix tried for fresh thunk labels.
    pub label_seed: u64,
    /// Rewrite indirect calls even when an address-taken function lacks a
    /// recognized prologue.
    pub allow_unsplit: bool,
}

impl HardenConfig {
    pub fn new(enable: impl IntoIterator<Item = Mitigation>, isa: IsaProfile) -> Self {
        HardenConfig {
            enable: enable.into_iter().collect(),
            isa,
            label_seed: 0,
            allow_unsplit: false,
        }
    }

    pub fn all(isa: IsaProfile) -> Self {
        HardenConfig::new(Mitigation::ALL, isa)
    }

    pub fn enabled(&self, m: Mitigation) -> bool {
        self.enable.contains(&m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Note,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Item index in the input unit.
    pub item: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Note => "note",
            Severity::Warning => "warning",
        };
        match self.item {
            Some(i) => write!(f, "{sev}: item {i}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HardenError {
    #[error("no mitigation enabled")]
    NothingEnabled,
    #[error(
        "indirect calls skip a split prologue, but these address-taken functions have no \
         recognized prologue: {}",
        .0.join(", ")
    )]
    UnsplitCallees(Vec<String>),
    #[error("item {item}: indirect call through `{reg}` cannot be rewritten; the thunk needs it as scratch")]
    UnsupportedCallTarget { item: usize, reg: Register },
    #[error(transparent)]
    Asm(#[from] AsmError),
}

#[derive(Clone, Debug)]
pub struct HardenOutput {
    pub unit: AsmUnit,
    pub report: OverheadReport,
    pub diagnostics: Vec<Diagnostic>,
    pub sites: Vec<RewrittenSite>,
}

/// One rewritten site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewrittenSite {
    pub site: RewriteSite,
    /// Label suffix of the emitted thunk; `None` for prologues.
    pub label_id: Option<u64>,
    pub delta_bytes: u64,
}

impl HardenOutput {
    pub fn changed(&self) -> bool {
        !self.sites.is_empty()
    }
}

fn text_size(items: &[Item], isa: IsaProfile) -> u64 {
    items
        .iter()
        .filter_map(Item::as_instruction)
        .map(|i| u64::from(instr_size(i, isa)))
        .sum()
}

/// Hands out label suffixes not already used by any thunk label in the unit.
struct Fresh {
    next: u64,
    taken: BTreeSet<String>,
}

impl Fresh {
    fn take(&mut self) -> u64 {
        loop {
            let n = self.next;
            self.next += 1;
            let names = [capture_label(n), set_up_label(n), end_label(n)];
            if names.iter().all(|l| !self.taken.contains(l)) {
                return n;
            }
        }
    }
}

/// Applies the enabled rewrites in one pass: prologues are split first,
/// then thunks are numbered calls, jumps, direct calls, each in item order.
pub fn harden_unit(unit: &AsmUnit, config: &HardenConfig) -> Result<HardenOutput, HardenError> {
    if config.enable.is_empty() {
        return Err(HardenError::NothingEnabled);
    }
    let isa = config.isa;
    let items = unit.items();
    let sites = find_rewrite_sites(unit, config);
    let mut diagnostics = Vec::new();

    let has_indirect_calls = sites.iter().any(|s| s.kind == SiteKind::IndirectCall);
    if has_indirect_calls {
        check_callees(unit, config, &mut diagnostics)?;
    }
    for s in &sites {
        if let (SiteKind::IndirectCall, SiteTarget::Register { reg, .. }) = (s.kind, &s.target) {
            if matches!(*reg, Register::ZERO | Register::RA | Register::SP) {
                return Err(HardenError::UnsupportedCallTarget {
                    item: s.item,
                    reg: *reg,
                });
            }
            if reg.is_argument() {
                diagnostics.push(Diagnostic {
                    severity: Severity::Warning,
                    item: Some(s.item),
                    message: format!(
                        "indirect call through argument register `{reg}`: the thunk overwrites it \
                         with the resume address before the callee runs"
                    ),
                });
            }
        }
    }

    let mut fresh = Fresh {
        next: config.label_seed,
        taken: unit.symbols().keys().cloned().collect(),
    };
    let mut ids: BTreeMap<usize, u64> = BTreeMap::new();
    for kind in [
        SiteKind::IndirectCall,
        SiteKind::IndirectJump,
        SiteKind::DirectCall,
    ] {
        for s in sites.iter().filter(|s| s.kind == kind) {
            ids.insert(s.item, fresh.take());
        }
    }

    // item index -> (replacement, number of original items consumed)
    let mut plan: BTreeMap<usize, (Vec<Item>, usize)> = BTreeMap::new();
    let mut report = OverheadReport::new(isa, text_size(items, isa));
    let mut rewritten = Vec::with_capacity(sites.len());
    for s in &sites {
        let id = ids.get(&s.item).copied();
        let (replacement, consumed) = match (&s.target, id) {
            (SiteTarget::Function { shape, .. }, _) => {
                let instrs = split_prologue_instrs(*shape);
                (instrs.into_iter().map(Item::Instruction).collect(), 4)
            }
            (SiteTarget::Register { reg, offset }, Some(id))
                if s.kind == SiteKind::IndirectJump =>
            {
                (rewrite_indirect_jump(*reg, *offset, id), 1)
            }
            (SiteTarget::Register { reg, offset }, Some(id)) => {
                (rewrite_indirect_call(*reg, *offset, isa, id), 1)
            }
            (SiteTarget::Callee(callee), Some(id)) => {
                (rewrite_direct_call(callee, config.isa, id), 1)
            }
            _ => unreachable!("every branch site has a label id"),
        };
        let before = text_size(&items[s.item..s.item + consumed], isa);
        let after = text_size(&replacement, isa);
        let delta = after
            .checked_sub(before)
            .expect("rewrites never shrink code");
        report.record(s.kind, delta);
        plan.insert(s.item, (replacement, consumed));
        rewritten.push(RewrittenSite {
            site: s.clone(),
            label_id: id,
            delta_bytes: delta,
        });
    }

    let mut out = Vec::with_capacity(items.len() + plan.len() * 8);
    let mut idx = 0;
    while idx < items.len() {
        match plan.remove(&idx) {
            Some((replacement, consumed)) => {
                out.extend(replacement);
                idx += consumed;
            }
            None => {
                out.push(items[idx].clone());
                idx += 1;
            }
        }
    }
    Ok(HardenOutput {
        unit: AsmUnit::new(out)?,
        report,
        diagnostics,
        sites: rewritten,
    })
}

/// Every function whose address escapes may be reached by a rewritten
/// indirect call, so it must start with a recognized prologue.
fn check_callees(
    unit: &AsmUnit,
    config: &HardenConfig,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<(), HardenError> {
    let with_prologue: BTreeSet<String> = sites::prologues(unit).into_iter().map(|p| p.0).collect();
    let taken = unit.address_taken();
    let unsplit: Vec<String> = unit
        .functions()
        .iter()
        .filter(|f| taken.contains(&f.name) && !with_prologue.contains(&f.name))
        .map(|f| f.name.clone())
        .collect();
    if unsplit.is_empty() {
        return Ok(());
    }
    if !config.allow_unsplit {
        return Err(HardenError::UnsplitCallees(unsplit));
    }
    for name in unsplit {
        diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            item: unit.symbols().get(&name).copied(),
            message: format!(
                "`{name}` has no recognized prologue; an indirect call to it will skip live code"
            ),
        });
    }
    Ok(())
}

/// Labels introduced by hardening, for callers that need to tell them apart.
pub fn is_thunk_label(label: &Label) -> bool {
    ["capture_spec_", "set_up_target_", "end_"].iter().any(|p| {
        label
            .name
            .strip_prefix(p)
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
    })
}
