//! Set-associative storage with true LRU replacement, shared by the data
//! cache and the BTB.

#[derive(Clone, Debug)]
struct Way<T> {
    tag: u64,
    value: T,
    /// 0 is most recently used.
    rank: usize,
}

#[derive(Clone, Debug)]
pub struct SetAssoc<T> {
    ways: usize,
    sets: Vec<Vec<Option<Way<T>>>>,
}

impl<T: Clone> SetAssoc<T> {
    pub fn new(sets: usize, ways: usize) -> Self {
        SetAssoc {
            ways,
            sets: vec![vec![None; ways]; sets],
        }
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    fn find(&self, set: usize, tag: u64) -> Option<usize> {
        self.sets[set]
            .iter()
            .position(|w| w.as_ref().is_some_and(|w| w.tag == tag))
    }

    /// Value stored under `tag`, without touching recency.
    pub fn peek(&self, set: usize, tag: u64) -> Option<&T> {
        self.find(set, tag)
            .and_then(|i| self.sets[set][i].as_ref())
            .map(|w| &w.value)
    }

    /// Marks `way` most recently used.
    fn touch(&mut self, set: usize, way: usize) {
        let line = &mut self.sets[set];
        let old = line[way].as_ref().map_or(usize::MAX, |w| w.rank);
        for w in line.iter_mut().flatten() {
            if w.rank < old {
                w.rank += 1;
            }
        }
        if let Some(w) = line[way].as_mut() {
            w.rank = 0;
        }
    }

    /// Hit: refreshes recency and returns true. Miss: returns false.
    pub fn access(&mut self, set: usize, tag: u64) -> bool {
        match self.find(set, tag) {
            Some(way) => {
                self.touch(set, way);
                true
            }
            None => false,
        }
    }

    /// Stores `value` under `tag` as most recently used, replacing an
    /// existing entry, else an invalid way, else the least recently used.
    /// Returns the evicted tag, if any.
    pub fn insert(&mut self, set: usize, tag: u64, value: T) -> Option<u64> {
        if let Some(way) = self.find(set, tag) {
            self.sets[set][way].as_mut().expect("found").value = value;
            self.touch(set, way);
            return None;
        }
        let line = &mut self.sets[set];
        let (way, evicted) = match line.iter().position(Option::is_none) {
            Some(free) => (free, None),
            None => {
                let lru = line
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, w)| w.as_ref().map_or(0, |w| w.rank))
                    .map(|(i, _)| i)
                    .expect("non-empty set");
                (lru, line[lru].as_ref().map(|w| w.tag))
            }
        };
        // older than every other way, so touch() ages all of them by one
        line[way] = Some(Way {
            tag,
            value,
            rank: self.ways,
        });
        self.touch(set, way);
        evicted
    }

    /// Recency ranks of the valid ways of `set`, for invariant checks.
    pub fn ranks(&self, set: usize) -> Vec<usize> {
        self.sets[set].iter().flatten().map(|w| w.rank).collect()
    }

    /// Valid tags of `set`, most recent first.
    pub fn tags_by_recency(&self, set: usize) -> Vec<u64> {
        let mut v: Vec<(usize, u64)> = self.sets[set]
            .iter()
            .flatten()
            .map(|w| (w.rank, w.tag))
            .collect();
        v.sort_unstable();
        v.into_iter().map(|(_, t)| t).collect()
    }

    pub fn clear(&mut self) {
        for set in &mut self.sets {
            set.iter_mut().for_each(|w| *w = None);
        }
    }
}
