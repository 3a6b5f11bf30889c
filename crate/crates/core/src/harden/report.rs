use std::collections::BTreeMap;

use serde::Serialize;

use super::sites::SiteKind;
use crate::asm::IsaProfile;

/// Sites and bytes added for one category.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CategoryReport {
    pub count: u64,
    /// Bytes added per site; `None` when sites of this category differ.
    pub delta_bytes: Option<u64>,
    pub total_delta_bytes: u64,
}

impl CategoryReport {
    fn record(&mut self, delta: u64) {
        self.delta_bytes = match (self.count, self.delta_bytes) {
            (0, _) => Some(delta),
            (_, Some(d)) if d == delta => Some(d),
            _ => None,
        };
        self.count += 1;
        self.total_delta_bytes += delta;
    }
}

/// Code-size overhead of one hardening run, in bytes of `.text`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OverheadReport {
    pub isa: IsaProfile,
    pub categories: BTreeMap<String, CategoryReport>,
    pub total_before: u64,
    pub total_after: u64,
}

impl OverheadReport {
    pub(crate) fn new(isa: IsaProfile, total_before: u64) -> Self {
        let categories = [
            SiteKind::DirectCall,
            SiteKind::IndirectCall,
            SiteKind::IndirectJump,
            SiteKind::Prologue,
        ]
        .into_iter()
        .map(|k| {
            let empty = CategoryReport {
                delta_bytes: Some(0),
                ..CategoryReport::default()
            };
            (k.category().to_string(), empty)
        })
        .collect();
        OverheadReport {
            isa,
            categories,
            total_before,
            total_after: total_before,
        }
    }

    pub(crate) fn record(&mut self, kind: SiteKind, delta: u64) {
        self.categories
            .get_mut(kind.category())
            .expect("every category is pre-populated")
            .record(delta);
        self.total_after += delta;
    }

    pub fn category(&self, kind: SiteKind) -> &CategoryReport {
        &self.categories[kind.category()]
    }

    pub fn total_delta(&self) -> u64 {
        self.total_after - self.total_before
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
