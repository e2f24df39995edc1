use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::PhysicsLabel;
use crate::relations::PoolItem;

/// Detached embedding snapshot with the metadata relation building needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub key: usize,
    pub traj: usize,
    pub label: PhysicsLabel,
    pub embedding: Vec<f64>,
}

/// Fixed-capacity FIFO of recent embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    capacity: usize,
    entries: VecDeque<BankEntry>,
}

impl MemoryBank {
    pub fn new(capacity: usize) -> Self {
        MemoryBank { capacity, entries: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: BankEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry> {
        self.entries.iter()
    }

    pub fn pool_items(&self) -> impl Iterator<Item = PoolItem> + '_ {
        self.entries.iter().map(|e| PoolItem { key: e.key, traj: e.traj, label: e.label })
    }
}
