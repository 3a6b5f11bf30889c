//! Spectre-BTI and Spectre-RSB proofs-of-concept with a Flush&Reload harness.
//!
//! Each trial loads a fresh [`Machine`], writes the secret position into
//! guest memory, runs the fixture to halt and reads back one reload timing
//! per candidate byte. The fastest candidate below the hit threshold is the
//! trial's guess.

mod poc;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use poc::{build_poc, eviction_blocks, poc_source, CANDIDATES};

use crate::asm::{layout_with, AddressMap, AsmError, AsmUnit, IsaProfile, LayoutOptions};
use crate::harden::{harden_unit, thunk_traps, HardenConfig, HardenError, ThunkTrap};
use crate::sim::{load, Machine, MachineConfig, SimError, Status, Trace};

/// Shown for a position without a majority guess.
pub const PLACEHOLDER: char = '?';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PocKind {
    V2Call,
    V2Jump,
    V5,
}

impl PocKind {
    pub const ALL: [PocKind; 3] = [PocKind::V2Call, PocKind::V2Jump, PocKind::V5];

    pub fn name(self) -> &'static str {
        match self {
            PocKind::V2Call => "v2_call",
            PocKind::V2Jump => "v2_jump",
            PocKind::V5 => "v5",
        }
    }
}

impl fmt::Display for PocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PocKind {
    type Err = AttackError;

    /// Accepts `v2_call` and `v2-call` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "v2_call" => Ok(PocKind::V2Call),
            "v2_jump" => Ok(PocKind::V2Jump),
            "v5" => Ok(PocKind::V5),
            _ => Err(AttackError::UnknownVariant(s.to_string())),
        }
    }
}

/// One attack configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PocVariant {
    pub kind: PocKind,
    pub secret: Vec<u8>,
    /// Training rounds before the attack round; unused by `v5`.
    pub mistrain_count: u32,
    pub trials_per_char: u32,
    /// Profile the fixture is laid out (and hardened) for.
    pub isa: IsaProfile,
}

impl PocVariant {
    pub fn new(kind: PocKind) -> Self {
        PocVariant {
            kind,
            secret: b"BOOM!".to_vec(),
            mistrain_count: 40,
            trials_per_char: 10,
            isa: IsaProfile::Rv64gc,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.secret.is_empty() {
            return Err(AttackError::EmptySecret);
        }
        if let Some(pos) = self.secret.iter().position(|b| !(0x20..0x7f).contains(b)) {
            return Err(AttackError::NonPrintable(pos));
        }
        if self.mistrain_count == 0 {
            return Err(AttackError::NoMistraining);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("unknown variant `{0}` (expected v2-call, v2-jump or v5)")]
    UnknownVariant(String),
    #[error("secret must not be empty")]
    EmptySecret,
    #[error("secret byte {0} is not printable ASCII")]
    NonPrintable(usize),
    #[error("mistrain_count must be at least 1")]
    NoMistraining,
    #[error("block_bytes must be a power of two, got {0}")]
    BlockSize(u64),
    #[error("simulation of position {position} did not halt: {status:?}")]
    NoHalt { position: usize, status: Status },
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Harden(#[from] HardenError),
}

/// Guesses for one secret position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CharOutcome {
    pub expected: u8,
    /// Guessed byte to number of trials that guessed it.
    pub guesses: BTreeMap<u8, u32>,
}

impl CharOutcome {
    pub fn correct(&self) -> u32 {
        self.guesses.get(&self.expected).copied().unwrap_or(0)
    }

    /// The most frequent guess if it won more than half of `trials`; ties
    /// go to the lower byte.
    pub fn majority(&self, trials: u32) -> Option<u8> {
        let (&byte, &count) = self
            .guesses
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
        (count > trials / 2).then_some(byte)
    }
}

/// Speculation windows opened by thunk returns across all trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrapAudit {
    pub windows: u64,
    /// Windows whose prediction was the thunk's capture loop and that filled
    /// no cache line.
    pub trapped: u64,
}

impl TrapAudit {
    pub fn holds(&self) -> bool {
        self.windows == self.trapped
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttackOutcome {
    pub variant: PocKind,
    pub mitigated: bool,
    pub trials: u32,
    pub per_char: Vec<CharOutcome>,
    pub recovered: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap_audit: Option<TrapAudit>,
}

impl AttackOutcome {
    fn new(variant: &PocVariant, mitigated: bool, per_char: Vec<CharOutcome>) -> Self {
        let trials = variant.trials_per_char;
        let recovered = per_char
            .iter()
            .map(|c| c.majority(trials).map_or(PLACEHOLDER, char::from))
            .collect();
        AttackOutcome {
            variant: variant.kind,
            mitigated,
            trials,
            per_char,
            recovered,
            trap_audit: None,
        }
    }

    /// Every position's majority guess is the secret byte.
    pub fn leaked(&self) -> bool {
        self.per_char
            .iter()
            .all(|c| c.majority(self.trials) == Some(c.expected))
    }

    /// No position's majority guess is the secret byte.
    pub fn contained(&self) -> bool {
        self.per_char
            .iter()
            .all(|c| c.majority(self.trials) != Some(c.expected))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }

    /// One line per guessed character and position, then the recovered text.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        for (pos, c) in self.per_char.iter().enumerate() {
            if c.guesses.is_empty() {
                out.push_str(&format!(
                    "Position {pos}: the attacker guessed no character.\n"
                ));
            }
            for (&byte, &count) in &c.guesses {
                out.push_str(&format!(
                    "The attacker guessed character {} {} times.\n",
                    char::from(byte),
                    count
                ));
            }
        }
        out.push_str(&format!("The guessed secret is {}\n", self.recovered));
        out
    }
}

/// One simulated trial: the reload timings and the run's trace.
#[derive(Clone, Debug)]
pub struct Trial {
    pub timings: Vec<u64>,
    pub trace: Trace,
}

impl Trial {
    /// Fastest candidate below `threshold`, lowest byte on ties.
    pub fn guess(&self, threshold: u64) -> Option<u8> {
        let (byte, &t) = self
            .timings
            .iter()
            .enumerate()
            .min_by_key(|&(i, t)| (*t, i))?;
        (t < threshold).then_some(byte as u8)
    }
}

/// A fixture loaded once and cloned for every trial.
pub struct Harness {
    pub unit: AsmUnit,
    pub map: AddressMap,
    pub traps: Vec<ThunkTrap>,
    prototype: Machine,
    target_pos: u64,
    results: u64,
}

impl Harness {
    /// Builds the fixture, hardens it when `harden` is given, and loads it.
    /// The hardening profile is forced to `variant.isa`.
    pub fn new(
        variant: &PocVariant,
        cfg: &MachineConfig,
        harden: Option<&HardenConfig>,
    ) -> Result<Self, AttackError> {
        cfg.validate()?;
        let mut unit = build_poc(variant, cfg)?;
        if let Some(h) = harden {
            let h = HardenConfig {
                isa: variant.isa,
                ..h.clone()
            };
            unit = harden_unit(&unit, &h)?.unit;
        }
        let opts = LayoutOptions {
            base_text: cfg.base_text,
            base_data: cfg.base_data,
        };
        let map = layout_with(&unit, variant.isa, opts)?;
        let prototype = load(&unit, &map, cfg)?;
        let sym = |name: &str| {
            map.symbol(name)
                .ok_or_else(|| AttackError::Asm(AsmError::UnresolvedSymbol(name.to_string())))
        };
        let (target_pos, results) = (sym("targetPos")?, sym("results")?);
        let traps = thunk_traps(&unit, &map);
        Ok(Harness {
            unit,
            map,
            traps,
            prototype,
            target_pos,
            results,
        })
    }

    pub fn trial(&self, position: usize) -> Result<Trial, AttackError> {
        let mut m = self.prototype.clone();
        m.mem.write(self.target_pos, 8, position as u64);
        let trace = m.run();
        if !matches!(trace.status, Status::Exited { .. }) {
            return Err(AttackError::NoHalt {
                position,
                status: trace.status,
            });
        }
        let timings = (0..CANDIDATES)
            .map(|c| m.mem.read(self.results + 8 * c, 8))
            .collect();
        Ok(Trial { timings, trace })
    }

    /// Adds the trial's thunk-return windows to `audit`.
    pub fn audit(&self, trial: &Trial, audit: &mut TrapAudit) {
        for e in &trial.trace.spec_events {
            if let Some(trap) = self.traps.iter().find(|t| t.return_pc == e.pc) {
                audit.windows += 1;
                if e.predicted == trap.capture_pc && e.cache_fills == 0 {
                    audit.trapped += 1;
                }
            }
        }
    }
}

/// Runs `trials_per_char` fresh simulations per secret position.
pub fn run_attack(
    variant: &PocVariant,
    cfg: &MachineConfig,
    harden: Option<&HardenConfig>,
) -> Result<AttackOutcome, AttackError> {
    let harness = Harness::new(variant, cfg, harden)?;
    let threshold = cfg.threshold();
    let mut audit = TrapAudit::default();
    let mut per_char = Vec::with_capacity(variant.secret.len());
    for (position, &expected) in variant.secret.iter().enumerate() {
        let mut guesses = BTreeMap::new();
        for _ in 0..variant.trials_per_char {
            let trial = harness.trial(position)?;
            harness.audit(&trial, &mut audit);
            if let Some(g) = trial.guess(threshold) {
                *guesses.entry(g).or_insert(0) += 1;
            }
        }
        per_char.push(CharOutcome { expected, guesses });
    }
    let mut outcome = AttackOutcome::new(variant, harden.is_some(), per_char);
    if harden.is_some() {
        outcome.trap_audit = Some(audit);
    }
    Ok(outcome)
}
