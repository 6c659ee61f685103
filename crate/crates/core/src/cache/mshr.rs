/// An outstanding LLC miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MshrEntry {
    pub block: u64,
    pub requester: usize,
    /// Requests merged into this entry after the first.
    pub merged: u32,
    /// Memory request that will complete the fill.
    pub fill_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MshrOutcome {
    Allocated,
    Merged,
    /// Every entry is live; retry next cycle.
    StallFull,
}

/// Miss status holding registers of one LLC slice.
#[derive(Debug, Clone)]
pub struct MshrFile {
    capacity: usize,
    entries: Vec<MshrEntry>,
}

impl MshrFile {
    pub fn new(capacity: usize) -> Self {
        MshrFile {
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn allocate(&mut self, block: u64, requester: usize) -> MshrOutcome {
        if let Some(e) = self.entries.iter_mut().find(|e| e.block == block) {
            e.merged += 1;
            return MshrOutcome::Merged;
        }
        if self.entries.len() >= self.capacity {
            return MshrOutcome::StallFull;
        }
        self.entries.push(MshrEntry {
            block,
            requester,
            merged: 0,
            fill_id: None,
        });
        MshrOutcome::Allocated
    }

    pub fn find(&self, block: u64) -> Option<&MshrEntry> {
        self.entries.iter().find(|e| e.block == block)
    }

    pub fn set_fill_id(&mut self, block: u64, id: u64) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.block == block) {
            e.fill_id = Some(id);
        }
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn release(&mut self, block: u64) -> Option<MshrEntry> {
        let idx = self.entries.iter().position(|e| e.block == block)?;
        Some(self.entries.remove(idx))
    }

    pub fn live(&self) -> usize {
        self.entries.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocate_merge_stall() {
        let mut m = MshrFile::new(2);
        assert_eq!(m.allocate(10, 0), MshrOutcome::Allocated);
        assert_eq!(m.allocate(10, 1), MshrOutcome::Merged);
        assert_eq!(m.live(), 1);
        assert_eq!(m.find(10).unwrap().merged, 1);
        assert_eq!(m.allocate(11, 0), MshrOutcome::Allocated);
        assert_eq!(m.allocate(12, 0), MshrOutcome::StallFull);
        assert_eq!(m.live(), m.capacity());
        // a merge still works when full
        assert_eq!(m.allocate(11, 3), MshrOutcome::Merged);
    }

    #[test]
    fn single_entry_stalls_until_release() {
        let mut m = MshrFile::new(1);
        assert_eq!(m.allocate(1, 0), MshrOutcome::Allocated);
        assert_eq!(m.allocate(2, 0), MshrOutcome::StallFull);
        assert_eq!(m.allocate(2, 0), MshrOutcome::StallFull);
        assert!(m.release(1).is_some());
        assert_eq!(m.allocate(2, 0), MshrOutcome::Allocated);
    }
}
