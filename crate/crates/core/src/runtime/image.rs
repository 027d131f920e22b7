use std::collections::BTreeMap;

use rand::Rng;

use super::RuntimeError;
use crate::nvm::{InjectionPolicy, MemorySegment, QualityLevel};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Versioned {
    slots: [Vec<u8>; 2],
    active: usize,
}

/// NVM contents with two versions per buffer.
///
/// A commit writes the inactive version and then flips the active index, so a
/// reader never observes a half-written buffer. The index flip is control
/// metadata and lives in the protected segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NvmImage {
    buffers: BTreeMap<String, Versioned>,
}

impl NvmImage {
    pub fn new() -> Self {
        Self::default()
    }

    /// Places `data` in NVM as the current version of `name`, bypassing injection.
    pub fn preload(&mut self, name: &str, data: Vec<u8>) {
        let zeros = vec![0; data.len()];
        self.buffers.insert(
            name.to_string(),
            Versioned {
                slots: [data, zeros],
                active: 0,
            },
        );
    }

    pub fn read(&self, name: &str) -> Result<&[u8], RuntimeError> {
        self.buffers
            .get(name)
            .map(|v| v.slots[v.active].as_slice())
            .ok_or_else(|| RuntimeError::MissingBuffer(name.to_string()))
    }

    /// Writes `data` as the next version of `name` through `segment` at `ql`.
    /// Returns the number of corrupted bits.
    pub fn commit<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        mut data: Vec<u8>,
        segment: &MemorySegment,
        ql: &QualityLevel,
        policy: &InjectionPolicy,
        rng: &mut R,
    ) -> Result<u64, RuntimeError> {
        let entry = self.buffers.entry(name.to_string()).or_insert_with(|| Versioned {
            slots: [Vec::new(), Vec::new()],
            active: 1,
        });
        let target = 1 - entry.active;
        entry.slots[target].resize(data.len(), 0);
        let corrupted = if segment.protected {
            0
        } else {
            policy.inject_in_place(&mut data, Some(&entry.slots[target]), ql, rng)?
        };
        entry.slots[target] = data;
        entry.active = target;
        Ok(corrupted)
    }

    /// Current version of every buffer.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<u8>> {
        self.buffers
            .iter()
            .map(|(k, v)| (k.clone(), v.slots[v.active].clone()))
            .collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.buffers.keys().map(String::as_str)
    }
}
