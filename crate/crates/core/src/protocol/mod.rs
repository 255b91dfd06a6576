//! The key-boosting protocol.
//!
//! Alice and Bob start from a shared seed `K0`. In every transfer the sender
//! draws fresh random bits, encodes bit `j` in the basis named by bit `j` of
//! the newest shared key, adds recorded phase noise and publishes the
//! quantized phases. The receiver knows the basis and reads the bits back;
//! anyone else sees only the public half-plane of each symbol. After parity
//! reconciliation and privacy amplification the fresh bits become the next
//! key of the chain. One Alice-to-Bob transfer followed by one Bob-to-Alice
//! transfer is a cycle.

mod amplify;
mod auth;
mod chain;
mod ledger;
mod params;
mod party;
mod reconcile;

pub use amplify::{amplified_length, privacy_amplify, toeplitz_diagonals, toeplitz_hash};
pub use auth::{authenticate_tag, tag_with_key, Tag, MIN_TAG_KEY_BITS};
pub use chain::{KeyChain, KeyStatus};
pub use ledger::LeakLedger;
pub use params::{SessionParams, DEFAULT_RECONCILIATION_BLOCK, DEFAULT_SAFETY_BITS, MIN_RECONCILIATION_BLOCK};
pub use party::{
    run_cycle, CycleReport, OutgoingTransfer, Party, PhysicalRng, Role, SenderParities, TransferRecord,
};
pub use reconcile::{public_permutation, reconcile, KeyParities, ParitySource, Pass, Reconciled};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::encode::{decode_with_basis, transmit_symbol, Basis, Constellation, QuantizedPhase};
use crate::error::{Error, Result};
use crate::phys::PhaseNoiseModel;

/// Direction of a block on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A->B")]
    AliceToBob,
    #[serde(rename = "B->A")]
    BobToAlice,
}

/// One published block: the quantized noisy phases, exactly what Eve records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTranscript {
    pub direction: Direction,
    pub cycle_index: u32,
    pub symbols: Vec<QuantizedPhase>,
}

impl BlockTranscript {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Generator for publicly announced randomness (permutations, hash seeds).
pub(crate) fn public_rng(seed: u64, purpose: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// Derives a `K0` from a number. Anyone who knows the number knows the key:
/// for tests and demonstrations only.
pub fn insecure_k0_from_seed(seed: u64, bits: usize) -> Bits {
    use rand::Rng;
    let mut rng = public_rng(seed, 7);
    (0..bits).map(|_| rng.random::<bool>()).collect()
}

/// Encodes `fresh` bit by bit in the bases named by `basis_key`, with one noise sample per symbol.
pub fn encode_block(
    fresh: &Bits,
    basis_key: &Bits,
    c: &Constellation,
    noise: &mut PhaseNoiseModel,
) -> Result<Vec<QuantizedPhase>> {
    if fresh.len() != basis_key.len() {
        return Err(Error::LengthMismatch {
            expected: basis_key.len(),
            actual: fresh.len(),
        });
    }
    Ok(fresh
        .iter()
        .zip(basis_key.iter())
        .map(|(bit, b)| transmit_symbol(bit, Basis::from_bit(b), c, noise.sample()))
        .collect())
}

/// Takes key `basis_index` from the chain (one use only) and encodes `fresh` under it.
pub fn send_block(
    fresh: &Bits,
    chain: &mut KeyChain,
    basis_index: usize,
    params: &SessionParams,
    noise: &mut PhaseNoiseModel,
    direction: Direction,
    cycle_index: u32,
) -> Result<BlockTranscript> {
    let c = params.constellation()?;
    match chain.key(basis_index) {
        Some(k) if k.len() != fresh.len() => {
            return Err(Error::LengthMismatch {
                expected: k.len(),
                actual: fresh.len(),
            })
        }
        None => return Err(Error::Protocol(format!("no key with index {basis_index}"))),
        _ => {}
    }
    let basis = chain.take_basis(basis_index)?;
    Ok(BlockTranscript {
        direction,
        cycle_index,
        symbols: encode_block(fresh, &basis, &c, noise)?,
    })
}

/// Reads a block back with the basis key, as the legitimate receiver does.
pub fn recover_block(t: &BlockTranscript, basis_key: &Bits, c: &Constellation) -> Result<Bits> {
    if t.len() != basis_key.len() {
        return Err(Error::LengthMismatch {
            expected: t.len(),
            actual: basis_key.len(),
        });
    }
    Ok(t.symbols
        .iter()
        .zip(basis_key.iter())
        .map(|(&q, b)| decode_with_basis(q, Basis::from_bit(b), c))
        .collect())
}
