use super::lru::SetAssoc;
use super::MachineConfig;

/// Timing-only L1 data cache: tags and recency, no data.
#[derive(Clone, Debug)]
pub struct Cache {
    lines: SetAssoc<()>,
    block_shift: u32,
    hit_latency: u64,
    miss_latency: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Access {
    pub latency: u64,
    pub hit: bool,
}

impl Cache {
    pub fn new(cfg: &MachineConfig) -> Self {
        Cache {
            lines: SetAssoc::new(cfg.cache_sets as usize, cfg.cache_ways as usize),
            block_shift: cfg.block_shift(),
            hit_latency: cfg.hit_latency,
            miss_latency: cfg.miss_latency,
        }
    }

    fn locate(&self, addr: u64) -> (usize, u64) {
        let block = addr >> self.block_shift;
        let sets = self.lines.num_sets() as u64;
        ((block % sets) as usize, block / sets)
    }

    /// Set index of `addr`.
    pub fn set_of(&self, addr: u64) -> usize {
        self.locate(addr).0
    }

    pub fn access(&mut self, addr: u64) -> Access {
        let (set, tag) = self.locate(addr);
        if self.lines.access(set, tag) {
            Access {
                latency: self.hit_latency,
                hit: true,
            }
        } else {
            self.lines.insert(set, tag, ());
            Access {
                latency: self.miss_latency,
                hit: false,
            }
        }
    }

    /// Whether the block holding `addr` is resident; does not touch recency.
    pub fn contains(&self, addr: u64) -> bool {
        let (set, tag) = self.locate(addr);
        self.lines.peek(set, tag).is_some()
    }

    pub fn flush(&mut self) {
        self.lines.clear();
    }

    pub fn ranks(&self, set: usize) -> Vec<usize> {
        self.lines.ranks(set)
    }

    /// Resident block numbers of `set`, most recent first.
    pub fn resident_blocks(&self, set: usize) -> Vec<u64> {
        let sets = self.lines.num_sets() as u64;
        self.lines
            .tags_by_recency(set)
            .into_iter()
            .map(|t| t * sets + set as u64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_then_hit() {
        let cfg = MachineConfig::default();
        let mut c = Cache::new(&cfg);
        assert_eq!(c.access(0x2_0000).latency, 40);
        assert_eq!(c.access(0x2_0000).latency, 2);
        assert_eq!(c.access(0x2_003f).latency, 2);
        assert!(c.contains(0x2_0010));
    }

    #[test]
    fn fifth_conflicting_fill_evicts_first() {
        let cfg = MachineConfig::default();
        let mut c = Cache::new(&cfg);
        let stride = cfg.block_bytes * cfg.cache_sets;
        for k in 0..4 {
            c.access(0x4_0000 + k * stride);
        }
        assert!(c.contains(0x4_0000));
        c.access(0x4_0000 + 4 * stride);
        assert!(!c.contains(0x4_0000));
        assert_eq!(c.access(0x4_0000).latency, cfg.miss_latency);
    }
}
