//! Two-pass parity bisection.
//!
//! The receiver compares block parities with the sender and binary-searches
//! every disagreeing block down to a single bit, which it flips. The first
//! pass walks positions in order; the second walks a public permutation so
//! that error pairs hidden in one first-pass block get split up. All
//! parities travel in clear and each one is charged to the leak ledger.

use std::ops::Range;

use rand::seq::SliceRandom;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::protocol::public_rng;

/// Which position order a parity question refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Sequential,
    Permuted,
}

impl Pass {
    pub fn code(self) -> u8 {
        match self {
            Pass::Sequential => 0,
            Pass::Permuted => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Pass::Sequential),
            1 => Ok(Pass::Permuted),
            other => Err(Error::Protocol(format!("unknown reconciliation pass {other}"))),
        }
    }
}

/// Something that can tell us parities of the other party's key.
///
/// Ranges index the pass's position order: identity for
/// [`Pass::Sequential`], the public permutation for [`Pass::Permuted`].
pub trait ParitySource {
    fn parities(&mut self, pass: Pass, ranges: &[Range<usize>]) -> Result<Vec<bool>>;
}

/// Position order for the second pass, derived from the block's public seed.
pub fn public_permutation(len: usize, public_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut public_rng(public_seed, 1));
    order
}

/// Parity answers computed from a key held in memory.
#[derive(Debug, Clone)]
pub struct KeyParities {
    key: Bits,
    permutation: Vec<usize>,
    answered: usize,
}

impl KeyParities {
    pub fn new(key: Bits, public_seed: u64) -> Self {
        let permutation = public_permutation(key.len(), public_seed);
        Self {
            key,
            permutation,
            answered: 0,
        }
    }

    /// Parities disclosed so far.
    pub fn answered(&self) -> usize {
        self.answered
    }

    pub fn answer(&mut self, pass: Pass, ranges: &[Range<usize>]) -> Result<Vec<bool>> {
        let len = self.key.len();
        let out = ranges
            .iter()
            .map(|r| {
                if r.start >= r.end || r.end > len {
                    return Err(Error::Protocol(format!("parity range {r:?} outside key of {len} bits")));
                }
                Ok(match pass {
                    Pass::Sequential => self.key.parity_of(r.clone()),
                    Pass::Permuted => self.key.parity_of(self.permutation[r.clone()].iter().copied()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.answered += out.len();
        Ok(out)
    }
}

impl ParitySource for KeyParities {
    fn parities(&mut self, pass: Pass, ranges: &[Range<usize>]) -> Result<Vec<bool>> {
        self.answer(pass, ranges)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reconciled {
    pub key: Bits,
    pub flipped: usize,
    pub parities_disclosed: usize,
}

/// Corrects `local` toward the remote key. See the module docs.
///
/// Parity questions are batched one bisection level at a time, so a network
/// peer sees one round trip per level rather than one per bit.
pub fn reconcile(
    local: &Bits,
    remote: &mut dyn ParitySource,
    block_bits: usize,
    public_seed: u64,
) -> Result<Reconciled> {
    if block_bits == 0 {
        return Err(Error::InvalidParams("reconciliation block must be non-empty".into()));
    }
    let mut key = local.clone();
    let len = key.len();
    let permutation = public_permutation(len, public_seed);
    let identity: Vec<usize> = (0..len).collect();
    let blocks: Vec<Range<usize>> = (0..len)
        .step_by(block_bits)
        .map(|s| s..(s + block_bits).min(len))
        .collect();

    let mut flipped = 0;
    let mut disclosed = 0;
    let mut block_parities = Vec::new();

    for pass in [Pass::Sequential, Pass::Permuted] {
        let order = match pass {
            Pass::Sequential => &identity,
            Pass::Permuted => &permutation,
        };
        let local_parity = |key: &Bits, r: &Range<usize>| key.parity_of(order[r.clone()].iter().copied());

        let remote_parities = remote.parities(pass, &blocks)?;
        check_answer_count(&remote_parities, blocks.len())?;
        disclosed += blocks.len();

        let mut active: Vec<Range<usize>> = blocks
            .iter()
            .zip(&remote_parities)
            .filter(|(r, &p)| local_parity(&key, r) != p)
            .map(|(r, _)| r.clone())
            .collect();

        while !active.is_empty() {
            let (done, open): (Vec<_>, Vec<_>) = active.into_iter().partition(|r| r.len() == 1);
            for r in done {
                key.flip(order[r.start]);
                flipped += 1;
            }
            let halves: Vec<Range<usize>> = open
                .iter()
                .map(|r| r.start..r.start + r.len() / 2)
                .collect();
            if halves.is_empty() {
                break;
            }
            let answers = remote.parities(pass, &halves)?;
            check_answer_count(&answers, halves.len())?;
            disclosed += halves.len();
            active = open
                .into_iter()
                .zip(halves)
                .zip(answers)
                .map(|((whole, left), p)| {
                    if local_parity(&key, &left) != p {
                        left
                    } else {
                        left.end..whole.end
                    }
                })
                .collect();
        }

        block_parities.push((order, remote_parities));
    }

    // Every block parity of both passes is already public; recheck them all.
    let residual_blocks = block_parities
        .iter()
        .flat_map(|(order, parities)| {
            let key = &key;
            blocks
                .iter()
                .zip(parities)
                .filter(move |(r, &p)| key.parity_of(order[(*r).clone()].iter().copied()) != p)
        })
        .count();
    if residual_blocks > 0 {
        return Err(Error::ReconciliationFailure { residual_blocks });
    }

    Ok(Reconciled {
        key,
        flipped,
        parities_disclosed: disclosed,
    })
}

fn check_answer_count(answers: &[bool], asked: usize) -> Result<()> {
    if answers.len() != asked {
        return Err(Error::Protocol(format!(
            "asked for {asked} parities, got {}",
            answers.len()
        )));
    }
    Ok(())
}
