//! Bit strings for key material.

use std::fmt;
use std::ops::{BitXor, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An owned sequence of bits, one `bool` per position.
///
/// Key lengths in this crate stay in the tens of thousands of bits, so the
/// unpacked representation is kept for clarity. Hot loops (privacy
/// amplification) pack into words themselves.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Unpacks bytes most-significant bit first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut out = Vec::with_capacity(bytes.len() * 8);
        for byte in bytes {
            for shift in (0..8).rev() {
                out.push((byte >> shift) & 1 == 1);
            }
        }
        Self(out)
    }

    /// Packs most-significant bit first; a trailing partial byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect()
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Domain(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = bool> + ExactSizeIterator + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn prefix(&self, len: usize) -> Bits {
        Self(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Parity of the positions in `range`.
    pub fn parity_of(&self, positions: impl IntoIterator<Item = usize>) -> bool {
        positions.into_iter().fold(false, |acc, i| acc ^ self.0[i])
    }

    /// Number of positions where `self` and `other` differ, over the shorter length.
    pub fn hamming_distance(&self, other: &Bits) -> usize {
        self.iter().zip(other.iter()).filter(|(a, b)| a != b).count()
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &Bits) -> Result<Bits> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(Self(self.iter().zip(other.iter()).map(|(a, b)| a ^ b).collect()))
    }

    /// Packs into little-endian `u64` words: bit `i` lands in word `i / 64`, position `i % 64`.
    pub(crate) fn to_words(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.len().div_ceil(64)];
        for (i, b) in self.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        words
    }
}

impl Index<usize> for Bits {
    type Output = bool;

    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl BitXor for &Bits {
    type Output = Bits;

    /// Panics on length mismatch; use [`Bits::xor`] for a checked version.
    fn bitxor(self, rhs: &Bits) -> Bits {
        self.xor(rhs).expect("xor of bit strings with different lengths")
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 64 {
            write!(f, "Bits({self})")
        } else {
            write!(f, "Bits({}.. len={})", self.prefix(64), self.len())
        }
    }
}

impl From<Bits> for String {
    fn from(bits: Bits) -> String {
        bits.to_string()
    }
}

impl TryFrom<String> for Bits {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Bits::parse(&s)
    }
}
