//! The passive eavesdropper.
//!
//! Eve records every published block. Without the basis key she can read
//! the half-plane of each symbol but not the bit. Her best classical handle
//! on the basis is the small offset `delta_phi` between the two encodings,
//! which the Helstrom bound caps. Once she learns any key of the chain
//! (for example through a known plaintext), every later key follows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::bits::Bits;
use crate::encode::{classify_set, set_relative_deviation, transmit_symbol, Basis, Constellation, QuantizedPhase};
use crate::error::{Error, Result};
use crate::phys::{eavesdropper_error, CoherentStateParams, PhaseNoiseModel, DEFAULT_REPETITIONS};
use crate::protocol::{recover_block, toeplitz_hash, BlockTranscript, Direction, TransferRecord};

/// What Eve learned, as written by the attack commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub symbols_observed: usize,
    pub basis_guess_error_rate: f64,
    pub bit_guess_error_rate: f64,
    pub helstrom_floor: f64,
    pub recovered_keys: Vec<(usize, Bits)>,
}

/// Maximum-likelihood basis guess from the two emissions that share each basis bit.
///
/// Both phases are folded onto their set pair, averaged, and compared with
/// the midpoint between the basis-0 centre (0) and the basis-1 centre (`delta_phi`).
pub fn eve_ml_basis_guess(pairs: &[(QuantizedPhase, QuantizedPhase)], c: &Constellation) -> Vec<Basis> {
    let mid = c.delta_phi() / 2.0;
    pairs
        .iter()
        .map(|&(a, b)| {
            let mean = 0.5 * (set_relative_deviation(a, c) + set_relative_deviation(b, c));
            Basis::from_bit(mean > mid)
        })
        .collect()
}

/// Eve's bit error rate on one block against the true bits.
///
/// She reads the set of each symbol and combines it with a basis guess: a
/// fair coin, or the true basis when `basis_oracle` is given (which reduces
/// her to the legitimate receiver).
pub fn eve_bit_guess_rate(
    transcript: &BlockTranscript,
    true_bits: &Bits,
    c: &Constellation,
    basis_oracle: Option<&Bits>,
    rng: &mut impl Rng,
) -> Result<f64> {
    if transcript.is_empty() {
        return Err(Error::Domain("empty transcript".into()));
    }
    if true_bits.len() != transcript.len() {
        return Err(Error::LengthMismatch {
            expected: transcript.len(),
            actual: true_bits.len(),
        });
    }
    let guesses: Bits = match basis_oracle {
        Some(basis) => recover_block(transcript, basis, c)?,
        None => transcript
            .symbols
            .iter()
            .map(|&q| classify_set(q, c).as_bit() ^ rng.random::<bool>())
            .collect(),
    };
    Ok(guesses.hamming_distance(true_bits) as f64 / true_bits.len() as f64)
}

/// Recovers a key from a noiselessly encrypted message: `Y xor X`.
pub fn known_plaintext_attack(ciphertext: &Bits, plaintext: &Bits) -> Result<Bits> {
    ciphertext.xor(plaintext)
}

/// Chain keys Eve rebuilt from one known key.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRecovery {
    /// `(chain index, key)` in order, starting after the known key.
    pub keys: Vec<(usize, Bits)>,
    /// Why recovery stopped early, if it did.
    pub gap: Option<String>,
}

/// Position of a transfer in the session: cycle `c` carries transfers `2c` (A->B) and `2c+1` (B->A).
pub fn transfer_index(cycle_index: u32, direction: Direction) -> usize {
    2 * cycle_index as usize + usize::from(direction == Direction::BobToAlice)
}

/// Walks the chain forward from key `known_index`.
///
/// Transfer `t` is encoded in the bases of key `t`, so decoding it with that
/// key (as the receiver would) gives the raw fresh bits; hashing them with the
/// public amplification seed gives key `t + 1`. `records` supplies the seeds
/// and output lengths, which are public.
pub fn chain_compromise(
    transcripts: &[BlockTranscript],
    records: &[TransferRecord],
    known_index: usize,
    known_key: &Bits,
    c: &Constellation,
) -> Result<ChainRecovery> {
    let by_transfer: BTreeMap<usize, &BlockTranscript> = transcripts
        .iter()
        .map(|t| (transfer_index(t.cycle_index, t.direction), t))
        .collect();
    let records: BTreeMap<usize, &TransferRecord> = records
        .iter()
        .map(|r| (transfer_index(r.cycle_index, r.direction), r))
        .collect();
    let last = by_transfer.keys().chain(records.keys()).copied().max();

    let mut keys = Vec::new();
    let mut gap = None;
    let mut key = known_key.clone();
    let mut t = known_index;
    while last.is_some_and(|last| t <= last) {
        let (Some(transcript), Some(record)) = (by_transfer.get(&t), records.get(&t)) else {
            gap = Some(format!(
                "transfer {t} ({}) missing; key {} and later not recovered",
                if by_transfer.contains_key(&t) { "public record" } else { "transcript" },
                t + 1
            ));
            break;
        };
        if transcript.len() != key.len() {
            gap = Some(format!(
                "transfer {t} has {} symbols but key {t} has {} bits",
                transcript.len(),
                key.len()
            ));
            break;
        }
        let raw = recover_block(transcript, &key, c)?;
        key = toeplitz_hash(&raw, record.key_bits, record.public_seed);
        keys.push((t + 1, key.clone()));
        t += 1;
    }
    Ok(ChainRecovery { keys, gap })
}

/// Monte-Carlo basis attack on `key_bits` fresh basis bits.
///
/// Each basis bit is used for two emissions carrying independent random
/// message bits, as happens when a key serves once as a message and once as a
/// basis. Streams of the seeded generator are independent: 0 basis bits,
/// 1 message bits, 2 phase noise, 3 Eve's coin flips.
pub fn simulate_basis_attack(
    params: CoherentStateParams,
    c: &Constellation,
    key_bits: usize,
    seed: u64,
) -> Result<AttackReport> {
    if key_bits == 0 {
        return Err(Error::Domain("no key bits to attack".into()));
    }
    let stream = |s: u64| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    };
    let (mut bases, mut messages, mut coins) = (stream(0), stream(1), stream(3));
    let mut noise = PhaseNoiseModel::with_rng(params.sigma_phi(), seed, stream(2))?;

    let basis: Vec<Basis> = (0..key_bits).map(|_| Basis::from_bit(bases.random())).collect();
    let mut first_bits = Bits::new();
    let mut pairs = Vec::with_capacity(key_bits);
    for &b in &basis {
        let (m1, m2): (bool, bool) = (messages.random(), messages.random());
        first_bits.push(m1);
        pairs.push((
            transmit_symbol(m1, b, c, noise.sample()),
            transmit_symbol(m2, b, c, noise.sample()),
        ));
    }

    let guesses = eve_ml_basis_guess(&pairs, c);
    let basis_errors = guesses.iter().zip(&basis).filter(|(g, b)| g != b).count();
    let first = BlockTranscript {
        direction: Direction::AliceToBob,
        cycle_index: 0,
        symbols: pairs.iter().map(|p| p.0).collect(),
    };
    Ok(AttackReport {
        symbols_observed: 2 * key_bits,
        basis_guess_error_rate: basis_errors as f64 / key_bits as f64,
        bit_guess_error_rate: eve_bit_guess_rate(&first, &first_bits, c, None, &mut coins)?,
        helstrom_floor: eavesdropper_error(params, c.delta_phi(), DEFAULT_REPETITIONS)?,
        recovered_keys: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::quantize;
    use crate::phys::q_function;

    fn constellation(exp: i32) -> Constellation {
        Constellation::new(2f64.powi(exp), 32).unwrap()
    }

    #[test]
    fn noiseless_symbols_give_their_basis() {
        let c = constellation(-6);
        let at = |phase: f64| quantize(phase, 32);
        let pairs = [
            (at(c.delta_phi()), at(c.delta_phi())),
            (at(0.0), at(0.0)),
            (at(std::f64::consts::PI), at(c.delta_phi() + std::f64::consts::PI)),
        ];
        assert_eq!(eve_ml_basis_guess(&pairs, &c), vec![Basis::One, Basis::Zero, Basis::Zero]);
    }

    #[test]
    fn basis_error_sits_between_helstrom_and_classical_ml() {
        let params = CoherentStateParams::new(1e4).unwrap();
        let c = constellation(-6);
        let n = 100_000;
        let report = simulate_basis_attack(params, &c, n, 5).unwrap();
        let upper = q_function(c.delta_phi() * 1e4f64.sqrt() / 2.0);
        let tol = |p: f64| 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!(report.basis_guess_error_rate >= report.helstrom_floor - tol(report.helstrom_floor));
        assert!(report.basis_guess_error_rate <= upper + tol(upper), "{report:?}");
        assert!((report.bit_guess_error_rate - 0.5).abs() < tol(0.5));
    }

    #[test]
    fn basis_oracle_reduces_eve_to_bob() {
        let c = constellation(-10);
        let mut noise = PhaseNoiseModel::new(CoherentStateParams::new(1e4).unwrap().sigma_phi(), 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let bits: Bits = (0..2000).map(|_| rng.random()).collect();
        let basis: Bits = (0..2000).map(|_| rng.random()).collect();
        let t = BlockTranscript {
            direction: Direction::AliceToBob,
            cycle_index: 0,
            symbols: crate::protocol::encode_block(&bits, &basis, &c, &mut noise).unwrap(),
        };
        assert_eq!(eve_bit_guess_rate(&t, &bits, &c, Some(&basis), &mut rng).unwrap(), 0.0);
        let blind = eve_bit_guess_rate(&t, &bits, &c, None, &mut rng).unwrap();
        assert!((blind - 0.5).abs() < 0.034, "{blind}");
    }

    #[test]
    fn kpa_is_xor() {
        let k = Bits::parse("1011001").unwrap();
        assert_eq!(known_plaintext_attack(&k, &Bits::zeros(7)).unwrap(), k);
        assert!(known_plaintext_attack(&k, &Bits::zeros(6)).is_err());
    }

    #[test]
    fn transfer_indices_interleave() {
        assert_eq!(transfer_index(0, Direction::AliceToBob), 0);
        assert_eq!(transfer_index(0, Direction::BobToAlice), 1);
        assert_eq!(transfer_index(3, Direction::BobToAlice), 7);
    }
}
