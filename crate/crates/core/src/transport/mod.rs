//! Framed wire protocol, channels and the networked session driver.
//!
//! Every message is a frame: the magic `NOTP`, a version byte, a type byte,
//! a big-endian `u32` payload length and the payload. A transcript file is
//! the raw `KEYBLOCK` frames of a session, concatenated in wire order.

mod channel;
mod frame;
mod session;
mod wire;

pub use channel::{loopback_pair, parse_frames, Channel, PipeEnd, SharedBuffer, StreamChannel, Tap, TcpChannel, LOOPBACK_TIMEOUT};
pub use frame::{frame_decode, frame_encode, read_frame, Frame, FrameError, MessageType, HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION};
pub use session::{
    accept_handshake, connect_session, initiate_handshake, run_initiator, run_loopback_session, run_responder, serve_session,
    LoopbackOutcome, SessionSummary,
    CONFIRM_CONTEXT,
};
pub use wire::{
    decode_confirm, decode_hello, decode_keyblock, decode_pa_seed, decode_parity_request, decode_parity_response,
    delta_phi_exponent, encode_confirm, encode_hello, encode_keyblock, encode_pa_seed, encode_parity_request,
    encode_parity_response, ParityRequest, HELLO_FLAG_NO_RECONCILE, HELLO_LEN,
};

use crate::error::{Error, Result};
use crate::protocol::{BlockTranscript, Direction};

/// Parses a transcript file. Blocks alternate A->B, B->A as they do on the wire.
pub fn read_transcript(bytes: &[u8], resolution_bits: u8) -> Result<Vec<BlockTranscript>> {
    parse_frames(bytes)?
        .into_iter()
        .enumerate()
        .map(|(i, frame)| {
            if frame.msg_type != MessageType::KeyBlock {
                return Err(Error::Protocol(format!(
                    "transcript frame {i} is {:?}, not KEYBLOCK",
                    frame.msg_type
                )));
            }
            let direction = if i % 2 == 0 { Direction::AliceToBob } else { Direction::BobToAlice };
            decode_keyblock(&frame.payload, resolution_bits, direction)
        })
        .collect()
}
