use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};

/// How a key in the chain has been used so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyStatus {
    /// Shared and not yet used; can key the next block.
    BasisAvailable,
    /// Used as basis material for a block.
    ConsumedAsBasis,
    /// Spent on an authentication tag.
    ConsumedForTag,
}

/// The ordered keys `K0, K1, K2, ...` held by one party.
///
/// Each key keys exactly one block, which delivers its successor. Once used
/// a key can never be handed out again.
#[derive(Debug, Clone)]
pub struct KeyChain {
    keys: Vec<(Bits, KeyStatus)>,
}

impl KeyChain {
    pub fn new(k0: Bits) -> Self {
        Self {
            keys: vec![(k0, KeyStatus::BasisAvailable)],
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, index: usize) -> Option<&Bits> {
        self.keys.get(index).map(|(k, _)| k)
    }

    pub fn status(&self, index: usize) -> Option<KeyStatus> {
        self.keys.get(index).map(|(_, s)| *s)
    }

    pub fn keys(&self) -> impl Iterator<Item = &Bits> {
        self.keys.iter().map(|(k, _)| k)
    }

    /// Index of the newest key.
    pub fn head(&self) -> usize {
        self.keys.len() - 1
    }

    /// Total bits of every key after `K0`.
    pub fn delivered_bits(&self) -> usize {
        self.keys.iter().skip(1).map(|(k, _)| k.len()).sum()
    }

    /// Marks key `index` as used for a block and returns it.
    pub fn take_basis(&mut self, index: usize) -> Result<Bits> {
        self.take(index, KeyStatus::ConsumedAsBasis)
    }

    /// Marks the newest key as spent on a tag and returns it.
    pub fn take_for_tag(&mut self) -> Result<Bits> {
        let head = self.head();
        self.take(head, KeyStatus::ConsumedForTag)
    }

    fn take(&mut self, index: usize, new_status: KeyStatus) -> Result<Bits> {
        let (key, status) = self
            .keys
            .get_mut(index)
            .ok_or_else(|| Error::Protocol(format!("no key with index {index}")))?;
        if *status != KeyStatus::BasisAvailable {
            return Err(Error::OneTimeViolation { index });
        }
        *status = new_status;
        Ok(key.clone())
    }

    /// Appends a freshly agreed key. Keys never grow along the chain.
    pub fn push(&mut self, key: Bits) -> Result<usize> {
        let prev = &self.keys[self.head()].0;
        if key.len() > prev.len() {
            return Err(Error::Protocol(format!(
                "new key of {} bits is longer than its predecessor ({} bits)",
                key.len(),
                prev.len()
            )));
        }
        self.keys.push((key, KeyStatus::BasisAvailable));
        Ok(self.head())
    }
}
