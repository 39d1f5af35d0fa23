use alloc::collections::VecDeque;

use chrono::NaiveDate;

use crate::domain::AllocationVector;
use crate::environment::ObservationDigest;

/// Default number of past steps kept in memory.
pub const DEFAULT_MEMORY_HORIZON: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    /// Date the allocation was decided.
    pub date: NaiveDate,
    pub allocation: AllocationVector,
    /// Cumulative return of the session after executing `allocation`.
    pub cumulative_return: f64,
    pub digest: ObservationDigest,
}

/// Sliding window over the most recent `horizon` steps, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryWindow {
    horizon: usize,
    entries: VecDeque<MemoryEntry>,
}

impl MemoryWindow {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            entries: VecDeque::with_capacity(horizon),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn push(&mut self, entry: MemoryEntry) {
        if self.horizon == 0 {
            return;
        }
        while self.entries.len() >= self.horizon {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for MemoryWindow {
    fn default() -> Self {
        Self::new(DEFAULT_MEMORY_HORIZON)
    }
}
