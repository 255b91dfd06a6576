use noisepad::attacker::{chain_compromise, known_plaintext_attack};
use noisepad::protocol::{insecure_k0_from_seed, SessionParams};
use noisepad::transport::{read_transcript, run_loopback_session, LoopbackOutcome, SharedBuffer, Tap};
use noisepad::Bits;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn recorded_session(cycles: u32) -> (LoopbackOutcome, Vec<noisepad::protocol::BlockTranscript>) {
    let params = SessionParams::new(1e4, 2f64.powi(-16), 32, 2048);
    let buf = SharedBuffer::new();
    let out = run_loopback_session(
        params,
        insecure_k0_from_seed(21, 2048),
        21,
        cycles,
        Some(Tap::new(Box::new(buf.clone()))),
        &mut |_| {},
    )
    .unwrap();
    let transcripts = read_transcript(&buf.contents(), 32).unwrap();
    (out, transcripts)
}

#[test]
fn known_plaintext_exposes_the_key() {
    let (out, _) = recorded_session(1);
    let k1 = out.alice.chain().key(1).unwrap().clone();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let x: Bits = (0..k1.len()).map(|_| rng.random()).collect();
    let y = &x ^ &k1;
    assert_eq!(known_plaintext_attack(&y, &x).unwrap(), k1);
}

#[test]
fn one_key_unlocks_the_rest_of_the_chain() {
    let (out, transcripts) = recorded_session(3);
    let chain = out.alice.chain();
    let c = out.alice.constellation();
    let records = out.alice.history();
    let got = chain_compromise(&transcripts, records, 1, chain.key(1).unwrap(), c).unwrap();
    assert!(got.gap.is_none());
    let indices: Vec<usize> = got.keys.iter().map(|(i, _)| *i).collect();
    assert_eq!(indices, vec![2, 3, 4, 5, 6]);
    for (i, k) in &got.keys {
        assert_eq!(Some(k), chain.key(*i), "key {i}");
    }
}

#[test]
fn a_missing_transcript_is_reported_as_a_gap() {
    let (out, mut transcripts) = recorded_session(3);
    transcripts.remove(3);
    let chain = out.alice.chain();
    let got = chain_compromise(&transcripts, out.alice.history(), 1, chain.key(1).unwrap(), out.alice.constellation())
        .unwrap();
    assert_eq!(got.keys.len(), 2);
    assert!(got.gap.unwrap().contains("transfer 3"));
}

#[test]
fn the_wrong_key_recovers_nothing() {
    let (out, transcripts) = recorded_session(2);
    let chain = out.alice.chain();
    // A key from the wrong cycle, cut to length.
    let wrong = chain.key(0).unwrap().prefix(chain.key(1).unwrap().len());
    let raw = noisepad::protocol::recover_block(&transcripts[1], &wrong, out.alice.constellation()).unwrap();
    let right = noisepad::protocol::recover_block(&transcripts[1], chain.key(1).unwrap(), out.alice.constellation())
        .unwrap();
    let agreement = 1.0 - raw.hamming_distance(&right) as f64 / raw.len() as f64;
    assert!((agreement - 0.5).abs() < 0.05, "{agreement}");
}
