use serde::{Deserialize, Serialize};

use super::SimError;
use crate::asm::{DEFAULT_DATA_BASE, DEFAULT_TEXT_BASE};

/// Geometry and timing of the modelled core. Every field is optional in
/// JSON and falls back to the default below.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub cache_sets: u64,
    pub cache_ways: u64,
    pub block_bytes: u64,
    pub hit_latency: u64,
    pub miss_latency: u64,
    pub btb_sets: u64,
    pub btb_ways: u64,
    pub ras_depth: usize,
    pub spec_window: u32,
    pub max_steps: u64,
    /// Flush&Reload hit threshold in cycles; the hit/miss midpoint when unset.
    pub threshold: Option<u64>,
    pub base_text: u64,
    pub base_data: u64,
    /// Initial sp; the stack grows down from here.
    pub stack_top: u64,
    /// Disables all speculation when false.
    pub speculation: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            cache_sets: 64,
            cache_ways: 4,
            block_bytes: 64,
            hit_latency: 2,
            miss_latency: 40,
            btb_sets: 64,
            btb_ways: 4,
            ras_depth: 8,
            spec_window: 32,
            max_steps: 10_000_000,
            threshold: None,
            base_text: DEFAULT_TEXT_BASE,
            base_data: DEFAULT_DATA_BASE,
            stack_top: 0x100_0000,
            speculation: true,
        }
    }
}

impl MachineConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: MachineConfig =
            serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        for (name, v) in [
            ("block_bytes", self.block_bytes),
            ("cache_sets", self.cache_sets),
            ("btb_sets", self.btb_sets),
        ] {
            if !v.is_power_of_two() {
                return bad(format!("{name} must be a power of two, got {v}"));
            }
        }
        if self.cache_ways == 0 || self.btb_ways == 0 {
            return bad("cache_ways and btb_ways must be at least 1".into());
        }
        if self.miss_latency <= self.hit_latency {
            return bad(format!(
                "miss_latency ({}) must exceed hit_latency ({})",
                self.miss_latency, self.hit_latency
            ));
        }
        if self.spec_window == 0 {
            return bad("spec_window must be at least 1".into());
        }
        Ok(())
    }

    /// Reload time at or above which a probe counts as a miss.
    pub fn threshold(&self) -> u64 {
        self.threshold
            .unwrap_or((self.hit_latency + self.miss_latency) / 2)
    }

    pub fn block_shift(&self) -> u32 {
        self.block_bytes.trailing_zeros()
    }
}
