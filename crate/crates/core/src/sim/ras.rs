use std::collections::VecDeque;

/// Return address stack. Pushing onto a full stack drops the oldest entry.
#[derive(Clone, Debug)]
pub struct Ras {
    depth: usize,
    entries: VecDeque<u64>,
}

impl Ras {
    pub fn new(depth: usize) -> Self {
        Ras {
            depth,
            entries: VecDeque::with_capacity(depth),
        }
    }

    pub fn push(&mut self, addr: u64) {
        if self.depth == 0 {
            return;
        }
        if self.entries.len() == self.depth {
            self.entries.pop_front();
        }
        self.entries.push_back(addr);
    }

    pub fn pop(&mut self) -> Option<u64> {
        self.entries.pop_back()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self) -> Option<u64> {
        self.entries.back().copied()
    }
}
