use super::lru::SetAssoc;
use super::MachineConfig;

/// Branch target buffer for indirect jumps and calls: pc → last resolved
/// target. Indexed by `pc >> 1` for 2-byte instruction alignment.
#[derive(Clone, Debug)]
pub struct Btb {
    entries: SetAssoc<u64>,
    index_bits: u32,
}

impl Btb {
    pub fn new(cfg: &MachineConfig) -> Self {
        Btb {
            entries: SetAssoc::new(cfg.btb_sets as usize, cfg.btb_ways as usize),
            index_bits: cfg.btb_sets.trailing_zeros(),
        }
    }

    fn locate(&self, pc: u64) -> (usize, u64) {
        let sets = self.entries.num_sets() as u64;
        (
            ((pc >> 1) & (sets - 1)) as usize,
            pc >> (1 + self.index_bits),
        )
    }

    /// Predicted target; lookups do not change replacement state.
    pub fn lookup(&self, pc: u64) -> Option<u64> {
        let (set, tag) = self.locate(pc);
        self.entries.peek(set, tag).copied()
    }

    pub fn update(&mut self, pc: u64, target: u64) {
        let (set, tag) = self.locate(pc);
        self.entries.insert(set, tag, target);
    }

    pub fn set_of(&self, pc: u64) -> usize {
        self.locate(pc).0
    }

    pub fn ranks(&self, set: usize) -> Vec<usize> {
        self.entries.ranks(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mistrained_entry_predicts_trained_target() {
        let mut b = Btb::new(&MachineConfig::default());
        let pc = 0x1_0040;
        assert_eq!(b.lookup(pc), None);
        for _ in 0..40 {
            b.update(pc, 0x1_0100);
        }
        assert_eq!(b.lookup(pc), Some(0x1_0100));
        b.update(pc, 0x1_0200);
        assert_eq!(b.lookup(pc), Some(0x1_0200));
    }

    #[test]
    fn index_and_tag() {
        let b = Btb::new(&MachineConfig::default());
        assert_eq!(b.locate(0x1_0002), (1, 0x1_0002 >> 7));
        assert_eq!(b.set_of(0x80), 0);
        assert_eq!(b.set_of(0x7e), 63);
    }

    #[test]
    fn aliasing_pcs_compete_for_ways() {
        let mut b = Btb::new(&MachineConfig::default());
        let stride = 64 * 2;
        for k in 0..5 {
            b.update(0x1_0000 + k * stride, k);
        }
        assert_eq!(b.lookup(0x1_0000), None);
        for k in 1..5 {
            assert_eq!(b.lookup(0x1_0000 + k * stride), Some(k));
        }
    }
}
