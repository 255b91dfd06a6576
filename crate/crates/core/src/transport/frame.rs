use std::io::{self, Read};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"NOTP";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;
/// Largest accepted payload, 16 MiB.
pub const MAX_PAYLOAD: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Hello = 0x01,
    HelloAck = 0x02,
    KeyBlock = 0x03,
    ParityReq = 0x04,
    ParityResp = 0x05,
    PaSeed = 0x06,
    Confirm = 0x07,
    Error = 0x7F,
}

impl MessageType {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for MessageType {
    type Error = FrameError;

    fn try_from(code: u8) -> Result<Self, FrameError> {
        Ok(match code {
            0x01 => MessageType::Hello,
            0x02 => MessageType::HelloAck,
            0x03 => MessageType::KeyBlock,
            0x04 => MessageType::ParityReq,
            0x05 => MessageType::ParityResp,
            0x06 => MessageType::PaSeed,
            0x07 => MessageType::Confirm,
            0x7F => MessageType::Error,
            other => return Err(FrameError::UnknownType(other)),
        })
    }
}

/// Why a byte sequence is not a valid frame.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the 16 MiB limit")]
    Oversize(usize),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MessageType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MessageType, payload: Vec<u8>) -> Self {
        Self { msg_type, payload }
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        frame_encode(self.msg_type, &self.payload)
    }

    /// Decodes the frame at the start of `bytes`, returning it with the number of bytes used.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Frame, usize), FrameError> {
        if bytes.len() < HEADER_LEN {
            return Err(FrameError::Truncated {
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        let header: [u8; HEADER_LEN] = bytes[..HEADER_LEN].try_into().expect("length checked");
        let (msg_type, len) = parse_header(&header)?;
        let total = HEADER_LEN + len;
        if bytes.len() < total {
            return Err(FrameError::Truncated {
                needed: total,
                available: bytes.len(),
            });
        }
        Ok((Frame::new(msg_type, bytes[HEADER_LEN..total].to_vec()), total))
    }
}

/// `"NOTP" | 0x01 | type | u32 BE length | payload`.
pub fn frame_encode(msg_type: MessageType, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(FrameError::Oversize(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg_type.code());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn frame_decode(bytes: &[u8]) -> Result<(MessageType, Vec<u8>), FrameError> {
    let (frame, _) = Frame::decode_prefix(bytes)?;
    Ok((frame.msg_type, frame.payload))
}

fn parse_header(header: &[u8; HEADER_LEN]) -> Result<(MessageType, usize), FrameError> {
    let magic: [u8; 4] = header[..4].try_into().expect("fixed slice");
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if header[4] != VERSION {
        return Err(FrameError::BadVersion(header[4]));
    }
    let msg_type = MessageType::try_from(header[5])?;
    let len = u32::from_be_bytes(header[6..10].try_into().expect("fixed slice")) as usize;
    if len > MAX_PAYLOAD {
        return Err(FrameError::Oversize(len));
    }
    Ok((msg_type, len))
}

/// Reads one frame from a byte stream. Returns the frame and its raw bytes.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> crate::Result<(Frame, Vec<u8>)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    let (msg_type, len) = parse_header(&header)?;
    let mut raw = Vec::with_capacity(HEADER_LEN + len);
    raw.extend_from_slice(&header);
    raw.resize(HEADER_LEN + len, 0);
    r.read_exact(&mut raw[HEADER_LEN..]).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            crate::Error::Frame(FrameError::Truncated {
                needed: HEADER_LEN + len,
                available: HEADER_LEN,
            })
        } else {
            e.into()
        }
    })?;
    let payload = raw[HEADER_LEN..].to_vec();
    Ok((Frame::new(msg_type, payload), raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hello_header_layout() {
        let bytes = frame_encode(MessageType::Hello, &[]).unwrap();
        assert_eq!(bytes, [0x4E, 0x4F, 0x54, 0x50, 0x01, 0x01, 0, 0, 0, 0]);
        assert_eq!(frame_decode(&bytes).unwrap(), (MessageType::Hello, vec![]));
    }

    #[test]
    fn keyblock_layout() {
        let bytes = frame_encode(MessageType::KeyBlock, &[0xAB, 0xCD, 0xEF]).unwrap();
        assert_eq!(bytes, [0x4E, 0x4F, 0x54, 0x50, 0x01, 0x03, 0, 0, 0, 3, 0xAB, 0xCD, 0xEF]);
    }

    #[test]
    fn rejection_classes_are_distinct() {
        let good = frame_encode(MessageType::Hello, &[]).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] ^= 0xFF;
        assert!(matches!(frame_decode(&bad_magic), Err(FrameError::BadMagic(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 0x02;
        assert_eq!(frame_decode(&bad_version), Err(FrameError::BadVersion(2)));

        let mut unknown = good.clone();
        unknown[5] = 0x42;
        assert_eq!(frame_decode(&unknown), Err(FrameError::UnknownType(0x42)));

        let mut truncated = frame_encode(MessageType::KeyBlock, &[0; 10]).unwrap();
        truncated.truncate(HEADER_LEN + 5);
        assert_eq!(
            frame_decode(&truncated),
            Err(FrameError::Truncated { needed: 20, available: 15 })
        );

        let mut oversize = good;
        oversize[6..10].copy_from_slice(&((MAX_PAYLOAD as u32) + 1).to_be_bytes());
        assert!(matches!(frame_decode(&oversize), Err(FrameError::Oversize(_))));
        assert!(matches!(
            frame_encode(MessageType::KeyBlock, &vec![0; MAX_PAYLOAD + 1]),
            Err(FrameError::Oversize(_))
        ));
    }

    #[test]
    fn stream_reader_reports_truncation() {
        let mut bytes = frame_encode(MessageType::KeyBlock, &[1, 2, 3, 4]).unwrap();
        bytes.pop();
        let err = read_frame(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, crate::Error::Frame(FrameError::Truncated { .. })));
    }

    fn any_type() -> impl Strategy<Value = MessageType> {
        prop_oneof![
            Just(MessageType::Hello),
            Just(MessageType::HelloAck),
            Just(MessageType::KeyBlock),
            Just(MessageType::ParityReq),
            Just(MessageType::ParityResp),
            Just(MessageType::PaSeed),
            Just(MessageType::Confirm),
            Just(MessageType::Error),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn encode_decode_round_trip(t in any_type(), payload in proptest::collection::vec(any::<u8>(), 0..512)) {
            let bytes = frame_encode(t, &payload).unwrap();
            prop_assert_eq!(bytes.len(), HEADER_LEN + payload.len());
            prop_assert_eq!(frame_decode(&bytes).unwrap(), (t, payload.clone()));
            let (frame, raw) = read_frame(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(frame.payload, payload);
            prop_assert_eq!(raw, bytes);
        }
    }
}
