use std::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::leak_per_symbol;
use crate::bits::Bits;
use crate::encode::Constellation;
use crate::error::{Error, Result};
use crate::phys::PhaseNoiseModel;
use crate::protocol::amplify::privacy_amplify;
use crate::protocol::chain::{KeyChain, KeyStatus};
use crate::protocol::ledger::LeakLedger;
use crate::protocol::params::SessionParams;
use crate::protocol::reconcile::{reconcile, KeyParities, ParitySource, Pass};
use crate::protocol::{encode_block, recover_block, BlockTranscript, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    pub fn outgoing(self) -> Direction {
        match self {
            Role::Alice => Direction::AliceToBob,
            Role::Bob => Direction::BobToAlice,
        }
    }

    /// Stream selector used to split one session seed between the two parties.
    pub fn seed_offset(self) -> u64 {
        match self {
            Role::Alice => 0,
            Role::Bob => 1,
        }
    }

    /// This party's generator seed, split off a shared session seed.
    pub fn party_seed(self, session_seed: u64) -> u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(session_seed);
        rng.set_stream(16 + self.seed_offset());
        rng.next_u64()
    }
}

/// Software stand-in for a party's physical random generator.
///
/// Three independent ChaCha streams off one seed: fresh key bits, phase
/// noise, and public randomness announced on the wire.
#[derive(Debug, Clone)]
pub struct PhysicalRng {
    bits: ChaCha20Rng,
    noise: PhaseNoiseModel,
    public: ChaCha20Rng,
}

impl PhysicalRng {
    pub fn new(seed: u64, sigma_phi: f64) -> Result<Self> {
        let stream = |s: u64| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Ok(Self {
            bits: stream(0),
            noise: PhaseNoiseModel::with_rng(sigma_phi, seed, stream(1))?,
            public: stream(2),
        })
    }

    pub fn fresh_bits(&mut self, len: usize) -> Bits {
        (0..len).map(|_| self.bits.random::<bool>()).collect()
    }

    pub fn noise(&mut self) -> &mut PhaseNoiseModel {
        &mut self.noise
    }

    pub fn public_seed(&mut self) -> u64 {
        self.public.next_u64()
    }
}

/// Public facts about one transfer: everything here is visible on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub cycle_index: u32,
    pub direction: Direction,
    pub symbols: usize,
    pub public_seed: u64,
    pub parities_disclosed: usize,
    pub key_bits: usize,
}

/// A block ready to go on the wire.
#[derive(Debug, Clone)]
pub struct OutgoingTransfer {
    pub transcript: BlockTranscript,
    pub public_seed: u64,
}

#[derive(Debug)]
struct PendingSend {
    fresh: Bits,
    cycle_index: u32,
    public_seed: u64,
    parities: KeyParities,
}

/// Per-cycle progress line.
#[derive(Debug, Clone, Serialize)]
pub struct CycleReport {
    pub cycle: u32,
    pub key_bits_a_to_b: usize,
    pub key_bits_b_to_a: usize,
    pub delivered_bits: usize,
    pub total_delivered_bits: usize,
    pub symbols_sent: u64,
    pub statistical_leak: f64,
    pub disclosed_parity_bits: u64,
    pub ledger_total: f64,
}

/// One side of a session: its key chain, leak ledger and random generator.
#[derive(Debug)]
pub struct Party {
    role: Role,
    params: SessionParams,
    constellation: Constellation,
    leak_per_symbol: f64,
    chain: KeyChain,
    ledger: LeakLedger,
    rng: PhysicalRng,
    pending: Option<PendingSend>,
    history: Vec<TransferRecord>,
    exhausted: bool,
}

impl Party {
    pub fn new(role: Role, params: SessionParams, k0: Bits, seed: u64) -> Result<Self> {
        params.validate()?;
        if k0.len() != params.block_length {
            return Err(Error::LengthMismatch {
                expected: params.block_length,
                actual: k0.len(),
            });
        }
        let state = params.coherent_state()?;
        Ok(Self {
            role,
            constellation: params.constellation()?,
            leak_per_symbol: leak_per_symbol(state, params.delta_phi),
            chain: KeyChain::new(k0),
            ledger: LeakLedger::new(),
            rng: PhysicalRng::new(seed, state.sigma_phi())?,
            pending: None,
            history: Vec::new(),
            exhausted: false,
            params,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn chain(&self) -> &KeyChain {
        &self.chain
    }

    pub fn chain_mut(&mut self) -> &mut KeyChain {
        &mut self.chain
    }

    pub fn ledger(&self) -> &LeakLedger {
        &self.ledger
    }

    pub fn history(&self) -> &[TransferRecord] {
        &self.history
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Completed cycles, counted from this party's transfers.
    pub fn cycles_completed(&self) -> u32 {
        (self.history.len() / 2) as u32
    }

    /// Length of the next block, or why there can be none.
    pub fn next_block_len(&self) -> Result<usize> {
        let head = self.chain.head();
        let len = self.chain.key(head).map(Bits::len).unwrap_or(0);
        if self.exhausted || len <= self.params.safety_bits {
            return Err(Error::KeyExhausted(format!(
                "newest key has {len} bits, safety margin is {}; share a fresh K0",
                self.params.safety_bits
            )));
        }
        if self.chain.status(head) != Some(KeyStatus::BasisAvailable) {
            return Err(Error::KeyExhausted("newest key is already spent".into()));
        }
        Ok(len)
    }

    /// Draws fresh bits, encodes them under the newest key and charges the
    /// symbols to the ledger. The party then answers parity questions until
    /// [`Party::finish_send`].
    pub fn start_transfer(&mut self, cycle_index: u32) -> Result<OutgoingTransfer> {
        if self.pending.is_some() {
            return Err(Error::Protocol("a transfer is already in progress".into()));
        }
        let len = self.next_block_len()?;
        let basis = self.chain.take_basis(self.chain.head())?;
        let fresh = self.rng.fresh_bits(len);
        let public_seed = self.rng.public_seed();
        let symbols = encode_block(&fresh, &basis, &self.constellation, self.rng.noise())?;
        self.ledger.record_symbols(len, self.leak_per_symbol);
        log::debug!("{:?} sends cycle {cycle_index} block of {len} symbols", self.role);
        self.pending = Some(PendingSend {
            parities: KeyParities::new(fresh.clone(), public_seed),
            fresh,
            cycle_index,
            public_seed,
        });
        Ok(OutgoingTransfer {
            transcript: BlockTranscript {
                direction: self.role.outgoing(),
                cycle_index,
                symbols,
            },
            public_seed,
        })
    }

    /// Answers the receiver's reconciliation questions about the pending block.
    pub fn answer_parities(&mut self, pass: Pass, ranges: &[Range<usize>]) -> Result<Vec<bool>> {
        let pending = self
            .pending
            .as_mut()
            .ok_or_else(|| Error::Protocol("parity request without a pending block".into()))?;
        let answers = pending.parities.answer(pass, ranges)?;
        self.ledger.record_parities(answers.len());
        Ok(answers)
    }

    /// Amplifies the sent bits into the next key of the chain.
    pub fn finish_send(&mut self) -> Result<Bits> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("no pending block to finish".into()))?;
        let key = self.amplify(&pending.fresh, pending.public_seed)?;
        self.history.push(TransferRecord {
            cycle_index: pending.cycle_index,
            direction: self.role.outgoing(),
            symbols: pending.fresh.len(),
            public_seed: pending.public_seed,
            parities_disclosed: pending.parities.answered(),
            key_bits: key.len(),
        });
        Ok(key)
    }

    /// Decodes a block with the newest key, reconciles it against the sender
    /// and amplifies it into the next key of the chain.
    pub fn receive_transfer(
        &mut self,
        t: &BlockTranscript,
        public_seed: u64,
        sender: &mut dyn ParitySource,
    ) -> Result<Bits> {
        let len = self.next_block_len()?;
        if t.len() != len {
            return Err(Error::Protocol(format!(
                "block of {} symbols does not match the {len}-bit key it should be read with",
                t.len()
            )));
        }
        let basis = self.chain.take_basis(self.chain.head())?;
        let raw = recover_block(t, &basis, &self.constellation)?;
        self.ledger.record_symbols(len, self.leak_per_symbol);

        let (bits, disclosed) = if self.params.reconcile {
            let out = reconcile(&raw, sender, self.params.reconciliation_block, public_seed)?;
            if out.flipped > 0 {
                log::debug!("{:?} corrected {} bits in cycle {}", self.role, out.flipped, t.cycle_index);
            }
            self.ledger.record_parities(out.parities_disclosed);
            (out.key, out.parities_disclosed)
        } else {
            (raw, 0)
        };

        let key = self.amplify(&bits, public_seed)?;
        self.history.push(TransferRecord {
            cycle_index: t.cycle_index,
            direction: t.direction,
            symbols: len,
            public_seed,
            parities_disclosed: disclosed,
            key_bits: key.len(),
        });
        Ok(key)
    }

    fn amplify(&mut self, bits: &Bits, public_seed: u64) -> Result<Bits> {
        match privacy_amplify(bits, &mut self.ledger, self.params.safety_bits, public_seed) {
            Ok(key) => {
                self.chain.push(key.clone())?;
                Ok(key)
            }
            Err(e) => {
                self.exhausted = true;
                Err(e)
            }
        }
    }

    /// Progress line for the cycle whose transfers are the last two in the history.
    pub fn cycle_report(&self) -> Option<CycleReport> {
        let n = self.history.len();
        if n < 2 || !n.is_multiple_of(2) {
            return None;
        }
        let (ab, ba) = (&self.history[n - 2], &self.history[n - 1]);
        Some(CycleReport {
            cycle: ab.cycle_index,
            key_bits_a_to_b: ab.key_bits,
            key_bits_b_to_a: ba.key_bits,
            delivered_bits: ab.key_bits + ba.key_bits,
            total_delivered_bits: self.chain.delivered_bits(),
            symbols_sent: self.ledger.symbols_sent(),
            statistical_leak: self.ledger.statistical_leak(),
            disclosed_parity_bits: self.ledger.disclosed_parity_bits(),
            ledger_total: self.ledger.total(),
        })
    }
}

/// Lets the receiver query a sender held in the same process.
pub struct SenderParities<'a>(pub &'a mut Party);

impl ParitySource for SenderParities<'_> {
    fn parities(&mut self, pass: Pass, ranges: &[Range<usize>]) -> Result<Vec<bool>> {
        self.0.answer_parities(pass, ranges)
    }
}

/// Runs one Alice-to-Bob and one Bob-to-Alice transfer between two in-process
/// parties, returning Alice's copies of the two new keys.
pub fn run_cycle(alice: &mut Party, bob: &mut Party) -> Result<(Bits, Bits)> {
    if alice.role != Role::Alice || bob.role != Role::Bob {
        return Err(Error::Protocol("run_cycle expects (Alice, Bob)".into()));
    }
    let cycle = alice.cycles_completed();
    let k_ab = transfer(alice, bob, cycle)?;
    let k_ba = transfer(bob, alice, cycle)?;
    Ok((k_ab, k_ba))
}

fn transfer(sender: &mut Party, receiver: &mut Party, cycle: u32) -> Result<Bits> {
    let out = sender.start_transfer(cycle)?;
    let received = receiver.receive_transfer(&out.transcript, out.public_seed, &mut SenderParities(sender));
    match received {
        Ok(_) => sender.finish_send(),
        Err(e) => {
            sender.pending = None;
            sender.exhausted |= matches!(e, Error::KeyExhausted(_));
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k0(len: usize, seed: u64) -> Bits {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random::<bool>()).collect()
    }

    fn pair(params: SessionParams) -> (Party, Party) {
        let key = k0(params.block_length, 1);
        (
            Party::new(Role::Alice, params, key.clone(), 10).unwrap(),
            Party::new(Role::Bob, params, key, 11).unwrap(),
        )
    }

    #[test]
    fn one_cycle_agrees() {
        let params = SessionParams::new(1e4, 2f64.powi(-30), 40, 1024);
        let (mut a, mut b) = pair(params);
        run_cycle(&mut a, &mut b).unwrap();
        assert_eq!(a.chain().len(), 3);
        assert!(a.chain().keys().eq(b.chain().keys()));
        assert_eq!(a.ledger(), b.ledger());
        assert_eq!(a.history(), b.history());
        let report = a.cycle_report().unwrap();
        assert_eq!(report.cycle, 0);
        assert_eq!(report.delivered_bits, a.chain().delivered_bits());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = SessionParams::new(1e4, 2f64.powi(-3), 16, 256);
        assert!(Party::new(Role::Alice, bad, k0(256, 1), 1).is_err());
        let ok = SessionParams::new(1e4, 2f64.powi(-10), 16, 256);
        assert!(Party::new(Role::Alice, ok, k0(255, 1), 1).is_err());
    }

    #[test]
    fn exhaustion_stops_the_chain() {
        // 128-bit seed, 32 safety bits and 2*2 parities per transfer: the key shrinks fast
        let params = SessionParams::new(1e4, 2f64.powi(-10), 16, 128);
        let (mut a, mut b) = pair(params);
        let err = loop {
            if let Err(e) = run_cycle(&mut a, &mut b) {
                break e;
            }
        };
        assert!(matches!(err, Error::KeyExhausted(_)), "{err}");
        assert!(matches!(run_cycle(&mut a, &mut b), Err(Error::KeyExhausted(_))));
        assert!(a.chain().keys().eq(b.chain().keys()));
    }

    #[test]
    fn second_transfer_needs_finish() {
        let params = SessionParams::new(1e4, 2f64.powi(-10), 16, 256);
        let (mut a, _) = pair(params);
        a.start_transfer(0).unwrap();
        assert!(a.start_transfer(0).is_err());
    }

    #[test]
    fn receiver_rejects_wrong_block_length() {
        let params = SessionParams::new(1e4, 2f64.powi(-10), 16, 256);
        let (mut a, mut b) = pair(params);
        let mut out = a.start_transfer(0).unwrap();
        out.transcript.symbols.pop();
        let err = b
            .receive_transfer(&out.transcript, out.public_seed, &mut SenderParities(&mut a))
            .unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }
}
