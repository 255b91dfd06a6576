//! Running a session between two processes.
//!
//! Message sequence, initiator (Alice) on the left:
//!
//! ```text
//! HELLO(params)            ->
//!                          <- HELLO_ACK | ERROR(report)
//! per cycle:
//!   KEYBLOCK, PA_SEED      ->                 Alice's block
//!                          <- PARITY_REQ ...  Bob reconciles
//!   PARITY_RESP ...        ->
//!                          <- PARITY_REQ(done)
//!                          <- KEYBLOCK, PA_SEED  Bob's block
//!   PARITY_REQ ...         ->
//!                          <- PARITY_RESP ...
//!   PARITY_REQ(done)       ->
//! CONFIRM(tag)             ->
//!                          <- CONFIRM(tag)
//! ```
//!
//! Either side may answer with `ERROR` at any point, which ends the session.

use std::ops::Range;

use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::protocol::{
    authenticate_tag, CycleReport, Direction, LeakLedger, ParitySource, Party, Pass, Role, SessionParams, Tag,
    TransferRecord,
};
use crate::transport::channel::Channel;
use crate::transport::frame::{Frame, MessageType};
use crate::transport::wire::{self, ParityRequest};

/// Message both ends tag at the end of a session to prove key agreement.
pub const CONFIRM_CONTEXT: &[u8] = b"noisepad confirm v1";

/// Sends HELLO and waits for the peer's verdict.
pub fn initiate_handshake(ch: &mut dyn Channel, params: &SessionParams) -> Result<()> {
    ch.send(&Frame::new(MessageType::Hello, wire::encode_hello(params)?))?;
    let reply = ch.recv()?;
    match reply.msg_type {
        MessageType::HelloAck => Ok(()),
        MessageType::Error => Err(Error::Rejected(String::from_utf8_lossy(&reply.payload).into_owned())),
        other => Err(Error::Protocol(format!("expected HELLO_ACK, got {other:?}"))),
    }
}

/// Waits for HELLO, validates the proposed parameters and acknowledges or rejects them.
pub fn accept_handshake(ch: &mut dyn Channel) -> Result<SessionParams> {
    let hello = match ch.recv() {
        Ok(f) => f,
        Err(e @ Error::Frame(_)) => {
            send_error(ch, &e.to_string());
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    if hello.msg_type != MessageType::Hello {
        let msg = format!("expected HELLO, got {:?}", hello.msg_type);
        send_error(ch, &msg);
        return Err(Error::Protocol(msg));
    }
    let checked = wire::decode_hello(&hello.payload).and_then(|p| p.validate().map(|_| p));
    match checked {
        Ok(params) => {
            ch.send(&Frame::new(MessageType::HelloAck, Vec::new()))?;
            Ok(params)
        }
        Err(e) => {
            send_error(ch, &e.to_string());
            Err(e)
        }
    }
}

fn send_error(ch: &mut dyn Channel, msg: &str) {
    if let Err(e) = ch.send(&Frame::new(MessageType::Error, msg.as_bytes().to_vec())) {
        log::debug!("could not deliver ERROR frame: {e}");
    }
}

/// Result of a networked session, from one party's point of view.
#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub role: Role,
    pub cycles_completed: u32,
    pub early_stop: Option<String>,
    pub delivered_bits: usize,
    pub ledger: LeakLedger,
    pub cycles: Vec<CycleReport>,
    pub transfers: Vec<TransferRecord>,
    pub tag: Option<Tag>,
    pub peer_tag: Option<Tag>,
    pub tags_match: bool,
}

fn summarize(party: &Party, cycles: Vec<CycleReport>, early_stop: Option<String>, tag: Option<Tag>, peer_tag: Option<Tag>) -> SessionSummary {
    SessionSummary {
        role: party.role(),
        cycles_completed: party.cycles_completed(),
        early_stop,
        delivered_bits: party.chain().delivered_bits(),
        ledger: *party.ledger(),
        cycles,
        transfers: party.history().to_vec(),
        tags_match: tag.is_some() && tag == peer_tag,
        tag,
        peer_tag,
    }
}

/// Asks the remote sender for parities over the channel.
struct RemoteParities<'a> {
    ch: &'a mut dyn Channel,
}

impl ParitySource for RemoteParities<'_> {
    fn parities(&mut self, pass: Pass, ranges: &[Range<usize>]) -> Result<Vec<bool>> {
        let req = ParityRequest::Query {
            pass,
            ranges: ranges.to_vec(),
        };
        self.ch
            .send(&Frame::new(MessageType::ParityReq, wire::encode_parity_request(&req)))?;
        let resp = expect(self.ch, MessageType::ParityResp)?;
        wire::decode_parity_response(&resp.payload)
    }
}

fn expect(ch: &mut dyn Channel, want: MessageType) -> Result<Frame> {
    let frame = ch.recv()?;
    if frame.msg_type == want {
        return Ok(frame);
    }
    if frame.msg_type == MessageType::Error {
        return Err(Error::Rejected(String::from_utf8_lossy(&frame.payload).into_owned()));
    }
    let msg = format!("expected {want:?}, got {:?}", frame.msg_type);
    send_error(ch, &msg);
    Err(Error::Protocol(msg))
}

fn incoming(role: Role) -> Direction {
    match role {
        Role::Alice => Direction::BobToAlice,
        Role::Bob => Direction::AliceToBob,
    }
}

/// Sends our block and serves the peer's parity questions. A key-exhaustion
/// error is returned only after the peer has been told we are done.
fn send_transfer(ch: &mut dyn Channel, party: &mut Party, cycle: u32) -> Result<Bits> {
    let out = party.start_transfer(cycle)?;
    let r = party.params().resolution_bits;
    ch.send(&Frame::new(MessageType::KeyBlock, wire::encode_keyblock(&out.transcript, r)))?;
    ch.send(&Frame::new(MessageType::PaSeed, wire::encode_pa_seed(out.public_seed)))?;
    loop {
        let frame = expect(ch, MessageType::ParityReq)?;
        match wire::decode_parity_request(&frame.payload)? {
            ParityRequest::Done => break,
            ParityRequest::Query { pass, ranges } => {
                let answers = match party.answer_parities(pass, &ranges) {
                    Ok(a) => a,
                    Err(e) => {
                        send_error(ch, &e.to_string());
                        return Err(e);
                    }
                };
                ch.send(&Frame::new(MessageType::ParityResp, wire::encode_parity_response(&answers)))?;
            }
        }
    }
    party.finish_send()
}

/// Receives the peer's block (whose KEYBLOCK frame is `first`), reconciles and amplifies.
fn receive_transfer(ch: &mut dyn Channel, party: &mut Party, first: Frame) -> Result<Bits> {
    let r = party.params().resolution_bits;
    let t = wire::decode_keyblock(&first.payload, r, incoming(party.role()))?;
    let seed = wire::decode_pa_seed(&expect(ch, MessageType::PaSeed)?.payload)?;
    let result = party.receive_transfer(&t, seed, &mut RemoteParities { ch });
    match &result {
        Ok(_) | Err(Error::KeyExhausted(_)) => {
            ch.send(&Frame::new(MessageType::ParityReq, wire::encode_parity_request(&ParityRequest::Done)))?;
        }
        Err(Error::Rejected(_)) | Err(Error::Io(_)) => {}
        Err(e) => send_error(ch, &e.to_string()),
    }
    result
}

fn own_tag(party: &mut Party) -> Option<Tag> {
    authenticate_tag(party.chain_mut(), CONFIRM_CONTEXT).ok()
}

/// Drives `cycles` cycles as Alice, then exchanges CONFIRM tags.
///
/// Key exhaustion ends the cycles early without failing the session.
pub fn run_initiator(
    ch: &mut dyn Channel,
    alice: &mut Party,
    cycles: u32,
    progress: &mut dyn FnMut(&CycleReport),
) -> Result<SessionSummary> {
    initiate_handshake(ch, alice.params())?;
    let mut reports = Vec::new();
    let mut early_stop = None;
    for cycle in 0..cycles {
        let step = send_transfer(ch, alice, cycle).and_then(|_| {
            // Bob's chain is in the same state; if he cannot send, he will not.
            alice.next_block_len()?;
            let first = expect(ch, MessageType::KeyBlock)?;
            receive_transfer(ch, alice, first)
        });
        match step {
            Ok(_) => {
                let report = alice.cycle_report().expect("two transfers recorded");
                progress(&report);
                reports.push(report);
            }
            Err(Error::KeyExhausted(msg)) => {
                early_stop = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let tag = own_tag(alice);
    ch.send(&Frame::new(MessageType::Confirm, wire::encode_confirm(tag.as_ref())))?;
    let peer_tag = wire::decode_confirm(&expect(ch, MessageType::Confirm)?.payload)?;
    Ok(summarize(alice, reports, early_stop, tag, peer_tag))
}

/// Answers as Bob until Alice sends CONFIRM.
pub fn run_responder(
    ch: &mut dyn Channel,
    bob: &mut Party,
    progress: &mut dyn FnMut(&CycleReport),
) -> Result<SessionSummary> {
    let mut reports = Vec::new();
    let mut early_stop = None;
    loop {
        let frame = ch.recv()?;
        match frame.msg_type {
            MessageType::KeyBlock if early_stop.is_none() => {
                let cycle = wire::decode_keyblock(&frame.payload, bob.params().resolution_bits, Direction::AliceToBob)?
                    .cycle_index;
                let step = receive_transfer(ch, bob, frame).and_then(|_| send_transfer(ch, bob, cycle));
                match step {
                    Ok(_) => {
                        let report = bob.cycle_report().expect("two transfers recorded");
                        progress(&report);
                        reports.push(report);
                    }
                    Err(Error::KeyExhausted(msg)) => early_stop = Some(msg),
                    Err(e) => return Err(e),
                }
            }
            MessageType::Confirm => {
                // Alice stops silently when the shared chain runs dry before her block.
                if let (None, Err(Error::KeyExhausted(msg))) = (&early_stop, bob.next_block_len()) {
                    early_stop = Some(msg);
                }
                let peer_tag = wire::decode_confirm(&frame.payload)?;
                let tag = own_tag(bob);
                ch.send(&Frame::new(MessageType::Confirm, wire::encode_confirm(tag.as_ref())))?;
                return Ok(summarize(bob, reports, early_stop, tag, peer_tag));
            }
            MessageType::Error => {
                return Err(Error::Rejected(String::from_utf8_lossy(&frame.payload).into_owned()));
            }
            other => {
                let msg = format!("unexpected {other:?} frame");
                send_error(ch, &msg);
                return Err(Error::Protocol(msg));
            }
        }
    }
}

/// Accepts the handshake and runs Bob with the negotiated parameters.
///
/// `k0` is asked for the seed key once the parameters (and so its length) are known.
pub fn serve_session(
    ch: &mut dyn Channel,
    k0: impl FnOnce(&SessionParams) -> Result<Bits>,
    seed: u64,
    progress: &mut dyn FnMut(&CycleReport),
) -> Result<(SessionSummary, Party)> {
    let params = accept_handshake(ch)?;
    let k0 = match k0(&params).and_then(|k| check_k0(&params, k)) {
        Ok(k) => k,
        Err(e) => {
            send_error(ch, &e.to_string());
            return Err(e);
        }
    };
    let mut bob = Party::new(Role::Bob, params, k0, seed)?;
    let summary = run_responder(ch, &mut bob, progress)?;
    Ok((summary, bob))
}

/// Builds Alice and runs `cycles` cycles against a peer.
pub fn connect_session(
    ch: &mut dyn Channel,
    params: SessionParams,
    k0: Bits,
    seed: u64,
    cycles: u32,
    progress: &mut dyn FnMut(&CycleReport),
) -> Result<(SessionSummary, Party)> {
    let k0 = check_k0(&params, k0)?;
    let mut alice = Party::new(Role::Alice, params, k0, seed)?;
    let summary = run_initiator(ch, &mut alice, cycles, progress)?;
    Ok((summary, alice))
}

fn check_k0(params: &SessionParams, k0: Bits) -> Result<Bits> {
    if k0.len() != params.block_length {
        return Err(Error::InvalidParams(format!(
            "K0 has {} bits but the session block length is {}",
            k0.len(),
            params.block_length
        )));
    }
    Ok(k0)
}

/// Both ends of a session run in-process.
#[derive(Debug)]
pub struct LoopbackOutcome {
    pub alice_summary: SessionSummary,
    pub bob_summary: SessionSummary,
    pub alice: Party,
    pub bob: Party,
    /// The tap's verdict, when one was attached.
    pub tap: Option<std::io::Result<usize>>,
}

/// Runs Alice and Bob on two threads joined by [`loopback_pair`], with each
/// party's generator split off `session_seed`. A tap, if given, watches
/// Alice's end.
///
/// [`loopback_pair`]: crate::transport::loopback_pair
pub fn run_loopback_session(
    params: SessionParams,
    k0: Bits,
    session_seed: u64,
    cycles: u32,
    tap: Option<crate::transport::Tap>,
    progress: &mut dyn FnMut(&CycleReport),
) -> Result<LoopbackOutcome> {
    let (a_end, mut b_end) = crate::transport::loopback_pair();
    let mut a_end = match tap {
        Some(t) => a_end.with_tap(t),
        None => a_end,
    };
    let bob_k0 = k0.clone();
    let bob = std::thread::spawn(move || {
        serve_session(&mut b_end, |_| Ok(bob_k0), Role::Bob.party_seed(session_seed), &mut |_| {})
    });
    let alice = connect_session(
        &mut a_end,
        params,
        k0,
        Role::Alice.party_seed(session_seed),
        cycles,
        progress,
    );
    let tap = a_end.take_tap().map(|t| t.finish());
    // Hang up so a waiting Bob sees end of stream instead of a timeout.
    drop(a_end);
    let bob = bob.join().map_err(|_| Error::Protocol("responder thread panicked".into()))?;
    let (alice_summary, alice) = alice?;
    let (bob_summary, bob) = bob?;
    Ok(LoopbackOutcome {
        alice_summary,
        bob_summary,
        alice,
        bob,
        tap,
    })
}
