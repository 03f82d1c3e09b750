//! Table cache allocator: first-fit placement, least-recently-used
//! eviction, and compaction when free space is fragmented.
//!
//! The compiler drives one instance to decide where LDT instructions go; the
//! simulator replays the same sequence on its own instance, so both always
//! agree on which blocks are resident.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::AccelError;

/// A table block: table id and entry range.
pub type BlockKey = (u32, u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    key: BlockKey,
    addr: usize,
    bytes: usize,
    last_use: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub loads: u64,
    pub hits: u64,
    pub evictions: u64,
    pub compactions: u64,
    pub peak_resident_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct TableCache {
    capacity: usize,
    blocks: BTreeMap<u16, Block>,
    clock: u64,
    stats: CacheStats,
}

impl TableCache {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, blocks: BTreeMap::new(), clock: 0, stats: CacheStats::default() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn resident_bytes(&self) -> usize {
        self.blocks.values().map(|b| b.bytes).sum()
    }

    /// Drops every block without counting evictions.
    pub fn flush(&mut self) {
        self.blocks.clear();
    }

    /// Slot holding `key`, marking it used.
    pub fn lookup(&mut self, key: BlockKey) -> Option<u16> {
        let slot = self.blocks.iter().find(|(_, b)| b.key == key).map(|(&s, _)| s)?;
        self.touch(slot);
        Some(slot)
    }

    /// Key of the block in `slot`, if resident.
    pub fn resident(&self, slot: u16) -> Option<BlockKey> {
        self.blocks.get(&slot).map(|b| b.key)
    }

    /// Marks a resident block used and counts a hit.
    pub fn touch(&mut self, slot: u16) {
        self.clock += 1;
        if let Some(b) = self.blocks.get_mut(&slot) {
            b.last_use = self.clock;
            self.stats.hits += 1;
        }
    }

    /// Makes room for and places a new block, returning its slot.
    pub fn load(&mut self, key: BlockKey, bytes: usize) -> Result<u16, AccelError> {
        if bytes > self.capacity {
            return Err(AccelError::BlockTooLarge { bytes, capacity: self.capacity });
        }
        while self.capacity - self.resident_bytes() < bytes || self.blocks.len() > usize::from(u16::MAX) {
            self.evict_lru();
        }
        let addr = match self.first_fit(bytes) {
            Some(a) => a,
            None => {
                self.compact();
                self.resident_bytes()
            }
        };
        let slot = (0..=u16::MAX).find(|s| !self.blocks.contains_key(s)).expect("slot freed above");
        self.clock += 1;
        self.blocks.insert(slot, Block { key, addr, bytes, last_use: self.clock });
        self.stats.loads += 1;
        self.stats.peak_resident_bytes = self.stats.peak_resident_bytes.max(self.resident_bytes());
        debug_assert!(self.is_consistent());
        Ok(slot)
    }

    fn evict_lru(&mut self) {
        let slot = self
            .blocks
            .iter()
            .min_by_key(|(_, b)| b.last_use)
            .map(|(&s, _)| s)
            .expect("eviction from an empty cache");
        self.blocks.remove(&slot);
        self.stats.evictions += 1;
    }

    fn by_address(&self) -> Vec<(u16, Block)> {
        let mut v: Vec<(u16, Block)> = self.blocks.iter().map(|(&s, &b)| (s, b)).collect();
        v.sort_by_key(|(_, b)| b.addr);
        v
    }

    fn first_fit(&self, bytes: usize) -> Option<usize> {
        let mut cursor = 0;
        for (_, b) in self.by_address() {
            if b.addr - cursor >= bytes {
                return Some(cursor);
            }
            cursor = b.addr + b.bytes;
        }
        (self.capacity - cursor >= bytes).then_some(cursor)
    }

    /// Slides all blocks down to address zero, preserving order.
    fn compact(&mut self) {
        let mut cursor = 0;
        for (slot, b) in self.by_address() {
            self.blocks.get_mut(&slot).expect("resident").addr = cursor;
            cursor += b.bytes;
        }
        self.stats.compactions += 1;
    }

    /// Blocks lie inside the cache and do not overlap.
    pub fn is_consistent(&self) -> bool {
        let mut cursor = 0;
        for (_, b) in self.by_address() {
            if b.addr < cursor {
                return false;
            }
            cursor = b.addr + b.bytes;
        }
        cursor <= self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lru_evicts_oldest() {
        let mut c = TableCache::new(100);
        let a = c.load((0, 0, 1), 40).unwrap();
        let b = c.load((1, 0, 1), 40).unwrap();
        assert_eq!(c.lookup((0, 0, 1)), Some(a));
        // the evicted block's slot is reused
        assert_eq!(c.load((2, 0, 1), 40).unwrap(), b);
        assert_eq!(c.lookup((1, 0, 1)), None);
        assert_eq!(c.resident(a), Some((0, 0, 1)));
        assert_eq!(c.stats().evictions, 1);
    }

    #[test]
    fn fragmentation_triggers_compaction() {
        let mut c = TableCache::new(100);
        c.load((0, 0, 1), 30).unwrap();
        c.load((1, 0, 1), 30).unwrap();
        c.load((2, 0, 1), 30).unwrap();
        c.lookup((0, 0, 1));
        c.lookup((2, 0, 1));
        // evicts the middle block, leaving 30 + 10 free in two holes
        c.load((3, 0, 1), 40).unwrap();
        assert_eq!(c.stats().compactions, 1);
        assert!(c.is_consistent());
        assert_eq!(c.resident_bytes(), 100);
    }

    #[test]
    fn oversized_block_is_rejected() {
        let mut c = TableCache::new(10);
        assert!(c.load((0, 0, 1), 11).is_err());
    }
}
