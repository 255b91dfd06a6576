use std::fmt;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::protocol::chain::KeyChain;

pub const MIN_TAG_KEY_BITS: usize = 256;

/// A 256-bit keyed message tag.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag(pub [u8; 32]);

impl Tag {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({self})")
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

/// `SHA-256(key || message || key)` with the key packed MSB-first.
pub fn tag_with_key(key: &Bits, message: &[u8]) -> Result<Tag> {
    if key.len() < MIN_TAG_KEY_BITS {
        return Err(Error::KeyExhausted(format!(
            "a tag needs {MIN_TAG_KEY_BITS} key bits, only {} available",
            key.len()
        )));
    }
    let key_bytes = key.to_bytes();
    let mut hasher = Sha256::new();
    hasher.update(&key_bytes);
    hasher.update(message);
    hasher.update(&key_bytes);
    Ok(Tag(hasher.finalize().into()))
}

/// Tags `message` with the newest key of the chain and retires that key.
pub fn authenticate_tag(chain: &mut KeyChain, message: &[u8]) -> Result<Tag> {
    let head = chain.key(chain.head()).map(Bits::len).unwrap_or(0);
    if head < MIN_TAG_KEY_BITS {
        return Err(Error::KeyExhausted(format!(
            "a tag needs {MIN_TAG_KEY_BITS} key bits, newest key has {head}"
        )));
    }
    let key = chain.take_for_tag().map_err(|e| match e {
        Error::OneTimeViolation { .. } => Error::KeyExhausted("newest key already used".into()),
        other => other,
    })?;
    tag_with_key(&key, message)
}
