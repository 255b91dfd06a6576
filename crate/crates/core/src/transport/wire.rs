//! Payload layouts. Integers are big-endian; symbol levels inside a
//! `KEYBLOCK` use the little-endian packing of [`crate::encode::pack_symbols`].

use std::ops::Range;

use crate::bits::Bits;
use crate::encode::{pack_symbols, unpack_symbols};
use crate::error::{Error, Result};
use crate::protocol::{BlockTranscript, Direction, Pass, SessionParams, Tag, DEFAULT_RECONCILIATION_BLOCK};

pub const HELLO_LEN: usize = 16;

/// Set in the optional 17th HELLO byte: skip parity reconciliation.
pub const HELLO_FLAG_NO_RECONCILE: u8 = 0x01;

/// Exponent `e` with `2^e == delta_phi` exactly, if it fits a signed byte.
pub fn delta_phi_exponent(delta_phi: f64) -> Result<i8> {
    let e = delta_phi.log2().round();
    if delta_phi.is_nan() || delta_phi <= 0.0 || e.exp2() != delta_phi || !(i8::MIN as f64..=i8::MAX as f64).contains(&e) {
        return Err(Error::InvalidParams(format!(
            "basis offset {delta_phi} is not a power of two with a one-byte exponent"
        )));
    }
    Ok(e as i8)
}

/// `n_avg f64 | exp i8 | R u8 | block_length u32 | safety_bits u16 [| flags u8]`.
///
/// The flags byte is only sent when some flag is set, so ordinary sessions
/// keep the fixed 16-byte layout.
pub fn encode_hello(p: &SessionParams) -> Result<Vec<u8>> {
    let exp = delta_phi_exponent(p.delta_phi)?;
    let block = u32::try_from(p.block_length)
        .map_err(|_| Error::InvalidParams(format!("block length {} does not fit 32 bits", p.block_length)))?;
    let safety = u16::try_from(p.safety_bits)
        .map_err(|_| Error::InvalidParams(format!("safety margin {} does not fit 16 bits", p.safety_bits)))?;
    let mut out = Vec::with_capacity(HELLO_LEN);
    out.extend_from_slice(&p.avg_photon_number.to_be_bytes());
    out.push(exp as u8);
    out.push(p.resolution_bits);
    out.extend_from_slice(&block.to_be_bytes());
    out.extend_from_slice(&safety.to_be_bytes());
    if !p.reconcile {
        out.push(HELLO_FLAG_NO_RECONCILE);
    }
    Ok(out)
}

/// Inverse of [`encode_hello`]. The reconciliation block is not negotiated:
/// both ends use the default, capped at the block length.
pub fn decode_hello(payload: &[u8]) -> Result<SessionParams> {
    let flags = match payload.len() {
        HELLO_LEN => 0,
        n if n == HELLO_LEN + 1 => payload[HELLO_LEN],
        _ => {
            return Err(Error::Protocol(format!(
                "HELLO payload must be {HELLO_LEN} or {} bytes, got {}",
                HELLO_LEN + 1,
                payload.len()
            )))
        }
    };
    if flags & !HELLO_FLAG_NO_RECONCILE != 0 {
        return Err(Error::Protocol(format!("unknown HELLO flags {flags:#04x}")));
    }
    let n = f64::from_be_bytes(payload[0..8].try_into().expect("fixed slice"));
    let exp = payload[8] as i8;
    let resolution_bits = payload[9];
    let block_length = u32::from_be_bytes(payload[10..14].try_into().expect("fixed slice")) as usize;
    let safety_bits = u16::from_be_bytes(payload[14..16].try_into().expect("fixed slice")) as usize;
    let p = SessionParams::new(n, (exp as f64).exp2(), resolution_bits, block_length)
        .with_safety_bits(safety_bits)
        .with_reconciliation_block(DEFAULT_RECONCILIATION_BLOCK.min(block_length));
    Ok(if flags & HELLO_FLAG_NO_RECONCILE != 0 {
        p.without_reconciliation()
    } else {
        p
    })
}

/// `cycle_index u32 | packed symbols`.
pub fn encode_keyblock(t: &BlockTranscript, resolution_bits: u8) -> Vec<u8> {
    let mut out = t.cycle_index.to_be_bytes().to_vec();
    out.extend(pack_symbols(&t.symbols, resolution_bits));
    out
}

pub fn decode_keyblock(payload: &[u8], resolution_bits: u8, direction: Direction) -> Result<BlockTranscript> {
    if payload.len() < 4 {
        return Err(Error::Protocol("KEYBLOCK payload shorter than its cycle index".into()));
    }
    Ok(BlockTranscript {
        direction,
        cycle_index: u32::from_be_bytes(payload[..4].try_into().expect("fixed slice")),
        symbols: unpack_symbols(&payload[4..], resolution_bits)?,
    })
}

pub fn encode_pa_seed(seed: u64) -> Vec<u8> {
    seed.to_be_bytes().to_vec()
}

pub fn decode_pa_seed(payload: &[u8]) -> Result<u64> {
    let bytes: [u8; 8] = payload
        .try_into()
        .map_err(|_| Error::Protocol(format!("PA_SEED payload must be 8 bytes, got {}", payload.len())))?;
    Ok(u64::from_be_bytes(bytes))
}

/// A parity question batch, or the end-of-reconciliation marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParityRequest {
    Query { pass: Pass, ranges: Vec<Range<usize>> },
    Done,
}

/// `pass u8 | count u32 | count x (start u32 | end u32)`; `count = 0` ends reconciliation.
pub fn encode_parity_request(req: &ParityRequest) -> Vec<u8> {
    match req {
        ParityRequest::Done => vec![0, 0, 0, 0, 0],
        ParityRequest::Query { pass, ranges } => {
            let mut out = Vec::with_capacity(5 + 8 * ranges.len());
            out.push(pass.code());
            out.extend_from_slice(&(ranges.len() as u32).to_be_bytes());
            for r in ranges {
                out.extend_from_slice(&(r.start as u32).to_be_bytes());
                out.extend_from_slice(&(r.end as u32).to_be_bytes());
            }
            out
        }
    }
}

pub fn decode_parity_request(payload: &[u8]) -> Result<ParityRequest> {
    if payload.len() < 5 {
        return Err(Error::Protocol("PARITY_REQ payload too short".into()));
    }
    let pass = Pass::from_code(payload[0])?;
    let count = u32::from_be_bytes(payload[1..5].try_into().expect("fixed slice")) as usize;
    if payload.len() != 5 + 8 * count {
        return Err(Error::Protocol(format!(
            "PARITY_REQ announces {count} ranges but carries {} bytes",
            payload.len()
        )));
    }
    if count == 0 {
        return Ok(ParityRequest::Done);
    }
    let word = |i: usize| u32::from_be_bytes(payload[i..i + 4].try_into().expect("fixed slice")) as usize;
    let ranges = (0..count).map(|k| word(5 + 8 * k)..word(9 + 8 * k)).collect();
    Ok(ParityRequest::Query { pass, ranges })
}

/// `count u32 | parities packed MSB-first`.
pub fn encode_parity_response(parities: &[bool]) -> Vec<u8> {
    let mut out = (parities.len() as u32).to_be_bytes().to_vec();
    out.extend(Bits::from_bools(parities.to_vec()).to_bytes());
    out
}

pub fn decode_parity_response(payload: &[u8]) -> Result<Vec<bool>> {
    if payload.len() < 4 {
        return Err(Error::Protocol("PARITY_RESP payload too short".into()));
    }
    let count = u32::from_be_bytes(payload[..4].try_into().expect("fixed slice")) as usize;
    if payload.len() != 4 + count.div_ceil(8) {
        return Err(Error::Protocol(format!("PARITY_RESP for {count} parities has wrong length")));
    }
    Ok(Bits::from_bytes(&payload[4..]).as_slice()[..count].to_vec())
}

/// A 32-byte tag, or empty when no key was left to tag with.
pub fn encode_confirm(tag: Option<&Tag>) -> Vec<u8> {
    tag.map(|t| t.0.to_vec()).unwrap_or_default()
}

pub fn decode_confirm(payload: &[u8]) -> Result<Option<Tag>> {
    match payload.len() {
        0 => Ok(None),
        32 => Ok(Some(Tag(payload.try_into().expect("length checked")))),
        n => Err(Error::Protocol(format!("CONFIRM payload must be 0 or 32 bytes, got {n}"))),
    }
}
