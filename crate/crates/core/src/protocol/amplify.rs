//! Privacy amplification by binary Toeplitz hashing.
//!
//! An `m x n` Toeplitz matrix is fixed by `n + m - 1` public random bits. With
//! those bits laid out as a sequence `r`, row `i` is the window
//! `r[m-1-i .. m-1-i+n]`, and output bit `i` is the parity of that row ANDed
//! with the input.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::protocol::ledger::LeakLedger;
use crate::protocol::public_rng;
use rand::RngCore;

/// The `n + m - 1` public bits defining the matrix for a given seed.
pub fn toeplitz_diagonals(public_seed: u64, len: usize) -> Bits {
    let mut rng = public_rng(public_seed, 0);
    let mut out = Bits::new();
    while out.len() < len {
        let word = rng.next_u64();
        for i in 0..64.min(len - out.len()) {
            out.push((word >> i) & 1 == 1);
        }
    }
    out
}

/// Multiplies `input` by the seeded `output_len x input.len()` Toeplitz matrix over GF(2).
pub fn toeplitz_hash(input: &Bits, output_len: usize, public_seed: u64) -> Bits {
    let n = input.len();
    if output_len == 0 || n == 0 {
        return Bits::zeros(output_len);
    }
    let diagonals = toeplitz_diagonals(public_seed, n + output_len - 1);
    let mut r = diagonals.to_words();
    r.push(0);
    let x = input.to_words();

    (0..output_len)
        .map(|i| {
            let offset = output_len - 1 - i;
            let (base, shift) = (offset / 64, offset % 64);
            let ones: u32 = x
                .iter()
                .enumerate()
                .map(|(w, &xw)| {
                    let lo = r[base + w] >> shift;
                    let hi = if shift == 0 { 0 } else { r[base + w + 1] << (64 - shift) };
                    ((lo | hi) & xw).count_ones()
                })
                .sum();
            ones % 2 == 1
        })
        .collect()
}

/// Length left after removing uncharged leak and the safety margin, or
/// `KeyExhausted` when nothing would remain.
pub fn amplified_length(input_len: usize, ledger: &LeakLedger, safety_bits: usize) -> Result<usize> {
    let removed = ledger.uncharged_bits() as u128 + safety_bits as u128;
    if removed >= input_len as u128 {
        return Err(Error::KeyExhausted(format!(
            "{input_len}-bit block cannot absorb {} leaked + {safety_bits} safety bits; share a fresh K0",
            ledger.uncharged_bits()
        )));
    }
    Ok(input_len - removed as usize)
}

/// Compresses `bits` by the leak not yet charged plus `safety_bits`, and
/// charges that leak to the ledger.
pub fn privacy_amplify(bits: &Bits, ledger: &mut LeakLedger, safety_bits: usize, public_seed: u64) -> Result<Bits> {
    let m = amplified_length(bits.len(), ledger, safety_bits)?;
    ledger.charge(ledger.uncharged_bits());
    Ok(toeplitz_hash(bits, m, public_seed))
}
