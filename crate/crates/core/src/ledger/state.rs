//! Versioned key-value world state.

use std::collections::BTreeMap;

/// Value plus the per-key version, which increases by one on every
/// committed write to that key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateEntry {
    pub value: Vec<u8>,
    pub version: u64,
}

/// The committed key-value view of the ledger.
///
/// A `BTreeMap` keeps iteration deterministic so two states can be compared
/// or dumped reproducibly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    entries: BTreeMap<String, StateEntry>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&StateEntry> {
        self.entries.get(key)
    }

    pub fn value(&self, key: &str) -> Option<&[u8]> {
        self.entries.get(key).map(|e| e.value.as_slice())
    }

    /// Current version of `key`, or `None` when absent.
    pub fn version(&self, key: &str) -> Option<u64> {
        self.entries.get(key).map(|e| e.version)
    }

    /// Write `value` under `key`, bumping the version (first write is 1).
    pub fn put(&mut self, key: impl Into<String>, value: Vec<u8>) -> u64 {
        let entry = self.entries.entry(key.into()).or_insert(StateEntry {
            value: Vec::new(),
            version: 0,
        });
        entry.value = value;
        entry.version += 1;
        entry.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &StateEntry)> {
        self.entries.iter()
    }

    /// Keys under a prefix, in lexicographic order.
    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.entries
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, _)| k)
    }
}
