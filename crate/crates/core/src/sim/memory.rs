use std::collections::BTreeMap;

const PAGE_BITS: u32 = 12;
const PAGE_SIZE: usize = 1 << PAGE_BITS;

/// Sparse little-endian byte memory; untouched bytes read as zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    pages: BTreeMap<u64, Box<[u8; PAGE_SIZE]>>,
}

impl Memory {
    pub fn new() -> Self {
        Memory::default()
    }

    fn split(addr: u64) -> (u64, usize) {
        (addr >> PAGE_BITS, (addr as usize) & (PAGE_SIZE - 1))
    }

    pub fn read_u8(&self, addr: u64) -> u8 {
        let (page, off) = Memory::split(addr);
        self.pages.get(&page).map_or(0, |p| p[off])
    }

    pub fn write_u8(&mut self, addr: u64, value: u8) {
        let (page, off) = Memory::split(addr);
        self.pages
            .entry(page)
            .or_insert_with(|| Box::new([0; PAGE_SIZE]))[off] = value;
    }

    /// Reads `width` bytes (1..=8) as an unsigned little-endian value.
    pub fn read(&self, addr: u64, width: u8) -> u64 {
        (0..u64::from(width)).fold(0, |acc, k| {
            acc | u64::from(self.read_u8(addr.wrapping_add(k))) << (8 * k)
        })
    }

    pub fn write(&mut self, addr: u64, width: u8, value: u64) {
        for k in 0..u64::from(width) {
            self.write_u8(addr.wrapping_add(k), (value >> (8 * k)) as u8);
        }
    }

    pub fn write_bytes(&mut self, addr: u64, bytes: &[u8]) {
        for (k, b) in bytes.iter().enumerate() {
            self.write_u8(addr + k as u64, *b);
        }
    }

    pub fn read_bytes(&self, addr: u64, len: usize) -> Vec<u8> {
        (0..len as u64).map(|k| self.read_u8(addr + k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn little_endian_round_trip() {
        let mut m = Memory::new();
        m.write(0xffe, 8, 0x1122_3344_5566_7788);
        assert_eq!(m.read_u8(0xffe), 0x88);
        assert_eq!(m.read(0xffe, 8), 0x1122_3344_5566_7788);
        assert_eq!(m.read(0x1000, 2), 0x5566);
        assert_eq!(m.read(0x9000, 8), 0);
    }
}
