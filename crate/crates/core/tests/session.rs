use std::net::{TcpListener, TcpStream};
use std::thread;

use noisepad::protocol::{insecure_k0_from_seed, Role, SessionParams};
use noisepad::transport::{
    connect_session, read_transcript, run_loopback_session, serve_session, SharedBuffer, StreamChannel, Tap,
};
use noisepad::{Bits, Error};

fn params() -> SessionParams {
    SessionParams::new(1e4, 2f64.powi(-16), 32, 2048)
}

fn loopback(seed: u64, cycles: u32) -> (noisepad::transport::LoopbackOutcome, Vec<u8>) {
    let buf = SharedBuffer::new();
    let k0 = insecure_k0_from_seed(seed, 2048);
    let out = run_loopback_session(params(), k0, seed, cycles, Some(Tap::new(Box::new(buf.clone()))), &mut |_| {})
        .unwrap();
    (out, buf.contents())
}

#[test]
fn loopback_session_agrees_and_confirms() {
    let (out, transcript) = loopback(42, 4);
    assert_eq!(out.alice_summary.cycles_completed, 4);
    assert!(out.alice_summary.tags_match && out.bob_summary.tags_match);
    assert_eq!(out.alice_summary.tag, out.bob_summary.tag);
    let a: Vec<&Bits> = out.alice.chain().keys().collect();
    let b: Vec<&Bits> = out.bob.chain().keys().collect();
    assert_eq!(a, b);
    assert_eq!(a.len(), 9);
    assert_eq!(out.tap.unwrap().unwrap(), 8);
    let blocks = read_transcript(&transcript, 32).unwrap();
    assert_eq!(blocks.len(), 8);
    assert_eq!(blocks[0].len(), 2048);
    assert_eq!(blocks[3].cycle_index, 1);
}

#[test]
fn loopback_runs_are_byte_identical() {
    let (first, t1) = loopback(7, 3);
    let (second, t2) = loopback(7, 3);
    assert_eq!(t1, t2);
    assert_eq!(first.alice_summary.tag, second.alice_summary.tag);
    let (_, other) = loopback(8, 3);
    assert_ne!(t1, other);
}

#[test]
fn tcp_session_matches_loopback() {
    let seed = 11;
    let (reference, reference_transcript) = loopback(seed, 2);

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut ch = StreamChannel::new(stream);
        serve_session(
            &mut ch,
            |p| Ok(insecure_k0_from_seed(seed, p.block_length)),
            Role::Bob.party_seed(seed),
            &mut |_| {},
        )
        .map(|(summary, _)| summary)
    });
    let buf = SharedBuffer::new();
    let mut ch = StreamChannel::new(TcpStream::connect(addr).unwrap()).with_tap(Tap::new(Box::new(buf.clone())));
    let (alice, _) = connect_session(
        &mut ch,
        params(),
        insecure_k0_from_seed(seed, 2048),
        Role::Alice.party_seed(seed),
        2,
        &mut |_| {},
    )
    .unwrap();
    let bob = server.join().unwrap().unwrap();
    assert!(alice.tags_match && bob.tags_match);
    assert_eq!(alice.tag, reference.alice_summary.tag);
    assert_eq!(buf.contents(), reference_transcript);
}

#[test]
fn mismatched_seed_keys_fail_reconciliation() {
    let (a_end, mut b_end) = noisepad::transport::loopback_pair();
    let bob = thread::spawn(move || {
        serve_session(&mut b_end, |p| Ok(insecure_k0_from_seed(2, p.block_length)), 5, &mut |_| {})
            .map(|(s, _)| s)
    });
    let mut a_end = a_end;
    let alice = connect_session(&mut a_end, params(), insecure_k0_from_seed(1, 2048), 6, 2, &mut |_| {});
    drop(a_end);
    let bob = bob.join().unwrap();
    assert!(alice.is_err());
    assert!(matches!(bob, Err(Error::ReconciliationFailure { .. })), "{bob:?}");
}

#[test]
fn invalid_parameters_are_rejected_in_the_handshake() {
    // HELLO is sent unchecked; at n = 2 the phase noise swamps the quarter turn.
    let (a_end, mut b_end) = noisepad::transport::loopback_pair();
    let bob = thread::spawn(move || noisepad::transport::accept_handshake(&mut b_end));
    let mut a_end = a_end;
    let bad = SessionParams::new(2.0, 2f64.powi(-6), 32, 256);
    let err = noisepad::transport::initiate_handshake(&mut a_end, &bad).unwrap_err();
    assert!(matches!(err, Error::Rejected(ref m) if m.contains("pi/2")), "{err}");
    assert!(bob.join().unwrap().is_err());
}

#[test]
fn key_exhaustion_stops_early_without_error() {
    // Leaky parameters: every block loses a large share of its bits.
    let params = SessionParams::new(1e4, 2f64.powi(-10), 32, 1024);
    let k0 = insecure_k0_from_seed(3, 1024);
    let out = run_loopback_session(params, k0, 3, 1000, None, &mut |_| {}).unwrap();
    assert!(out.alice_summary.early_stop.is_some());
    assert!(out.bob_summary.early_stop.is_some());
    assert!(out.alice_summary.cycles_completed < 1000);
    assert_eq!(out.alice_summary.cycles_completed, out.bob_summary.cycles_completed);
    let a: Vec<&Bits> = out.alice.chain().keys().collect();
    let b: Vec<&Bits> = out.bob.chain().keys().collect();
    assert_eq!(a, b);
}
