//! The dual-basis phase constellation.
//!
//! Basis 0 puts bit 0 at phase `0` and bit 1 at `pi`. Basis 1 is the same pair
//! rotated by `delta_phi`, with the bit labels swapped: bit 1 at `delta_phi`,
//! bit 0 at `delta_phi + pi`. Neighbouring points of the two bases sit
//! `delta_phi` apart, well inside the phase noise, so the received half-plane
//! ("set") is public while the bit stays hidden behind the basis.
//!
//! Phases travel as `R`-bit quantized levels on a uniform grid over `[0, 2pi)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::phys::wrap_angle;

pub const MIN_RESOLUTION_BITS: u8 = 8;
pub const MAX_RESOLUTION_BITS: u8 = 56;
pub const DEFAULT_RESOLUTION_BITS: u8 = 16;

/// Which of the two phase alphabets carries a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Zero,
    One,
}

impl Basis {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Basis::One
        } else {
            Basis::Zero
        }
    }

    pub fn as_bit(self) -> bool {
        self == Basis::One
    }
}

/// The publicly readable half-plane of a received phase.
///
/// `Set1` holds bit 0 in basis 0 and bit 1 in basis 1; `Set2` the other two
/// points. For ideal symbols the set is `bit XOR basis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseSet {
    Set1,
    Set2,
}

impl PhaseSet {
    /// `false` for `Set1`, `true` for `Set2`.
    pub fn as_bit(self) -> bool {
        self == PhaseSet::Set2
    }
}

/// Basis offset and grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    delta_phi: f64,
    resolution_bits: u8,
}

impl Constellation {
    pub fn new(delta_phi: f64, resolution_bits: u8) -> Result<Self> {
        if !(delta_phi > 0.0 && delta_phi < PI / 8.0) {
            return Err(Error::InvalidParams(format!(
                "basis offset must lie in (0, pi/8), got {delta_phi}"
            )));
        }
        if !(MIN_RESOLUTION_BITS..=MAX_RESOLUTION_BITS).contains(&resolution_bits) {
            return Err(Error::InvalidParams(format!(
                "resolution must be {MIN_RESOLUTION_BITS}..={MAX_RESOLUTION_BITS} bits, got {resolution_bits}"
            )));
        }
        let step = grid_step(resolution_bits);
        if step > delta_phi / 2.0 {
            return Err(Error::InvalidParams(format!(
                "a {resolution_bits}-bit grid (step {step:e}) cannot resolve a basis offset of {delta_phi:e}"
            )));
        }
        Ok(Self {
            delta_phi,
            resolution_bits,
        })
    }

    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    pub fn resolution_bits(&self) -> u8 {
        self.resolution_bits
    }

    /// Bytes per packed symbol on the wire.
    pub fn symbol_bytes(&self) -> usize {
        (self.resolution_bits as usize).div_ceil(8)
    }

    /// Phase offset of a basis.
    fn origin(&self, basis: Basis) -> f64 {
        match basis {
            Basis::Zero => 0.0,
            Basis::One => self.delta_phi,
        }
    }
}

/// Grid step `2pi / 2^R`.
pub fn grid_step(resolution_bits: u8) -> f64 {
    TAU / (1u64 << resolution_bits) as f64
}

/// A phase quantized onto the `R`-bit grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuantizedPhase {
    level: u64,
}

impl QuantizedPhase {
    pub fn from_level(level: u64, resolution_bits: u8) -> Result<Self> {
        if level >> resolution_bits != 0 {
            return Err(Error::Domain(format!(
                "level {level} does not fit in {resolution_bits} bits"
            )));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> u64 {
        self.level
    }
}

/// Ideal phase of `bit` in `basis`.
pub fn modulate(bit: bool, basis: Basis, c: &Constellation) -> f64 {
    // Basis 0: bit 0 -> origin. Basis 1: bit 1 -> origin. The other bit sits opposite.
    let at_origin = bit == basis.as_bit();
    c.origin(basis) + if at_origin { 0.0 } else { PI }
}

/// Rounds a phase to the nearest grid level (ties upward), wrapping at `2pi`.
pub fn quantize(phase: f64, resolution_bits: u8) -> QuantizedPhase {
    let levels = 1u64 << resolution_bits;
    let scaled = phase.rem_euclid(TAU) / TAU * levels as f64;
    let level = ((scaled + 0.5).floor() as u64) % levels;
    QuantizedPhase { level }
}

pub fn dequantize(q: QuantizedPhase, resolution_bits: u8) -> f64 {
    TAU * q.level as f64 / (1u64 << resolution_bits) as f64
}

/// Modulates, adds the recorded noise sample and quantizes.
pub fn transmit_symbol(bit: bool, basis: Basis, c: &Constellation, noise: f64) -> QuantizedPhase {
    quantize(modulate(bit, basis, c) + noise, c.resolution_bits)
}

/// Half-plane decision: `Set1` when the phase is within `(-pi/2, pi/2]` of the
/// midpoint `delta_phi / 2` between the two `Set1` centres.
pub fn classify_set(q: QuantizedPhase, c: &Constellation) -> PhaseSet {
    let phase = dequantize(q, c.resolution_bits);
    let rel = wrap_angle(phase - c.delta_phi / 2.0);
    if rel > -FRAC_PI_2 && rel <= FRAC_PI_2 {
        PhaseSet::Set1
    } else {
        PhaseSet::Set2
    }
}

/// Nearest-point decision inside a known basis. Ties go to bit 0.
pub fn decode_with_basis(q: QuantizedPhase, basis: Basis, c: &Constellation) -> bool {
    let phase = dequantize(q, c.resolution_bits);
    let d0 = wrap_angle(phase - modulate(false, basis, c)).abs();
    let d1 = wrap_angle(phase - modulate(true, basis, c)).abs();
    d1 < d0
}

/// Deviation of a phase from the `Set1`/`Set2` pair it belongs to, folded
/// modulo `pi` into `(-pi/2 + dphi/2, pi/2 + dphi/2]`. Basis 0 symbols scatter
/// around 0, basis 1 symbols around `delta_phi`.
pub fn set_relative_deviation(q: QuantizedPhase, c: &Constellation) -> f64 {
    let phase = dequantize(q, c.resolution_bits);
    let mid = c.delta_phi / 2.0;
    let mut dev = (phase - mid).rem_euclid(PI);
    if dev > FRAC_PI_2 {
        dev -= PI;
    }
    dev + mid
}

/// Packs levels as `ceil(R/8)` little-endian bytes each, in order.
pub fn pack_symbols(symbols: &[QuantizedPhase], resolution_bits: u8) -> Vec<u8> {
    let width = (resolution_bits as usize).div_ceil(8);
    let mut out = Vec::with_capacity(symbols.len() * width);
    for s in symbols {
        out.extend_from_slice(&s.level.to_le_bytes()[..width]);
    }
    out
}

/// Inverse of [`pack_symbols`]; rejects ragged input and levels beyond `2^R`.
pub fn unpack_symbols(bytes: &[u8], resolution_bits: u8) -> Result<Vec<QuantizedPhase>> {
    let width = (resolution_bits as usize).div_ceil(8);
    if !bytes.len().is_multiple_of(width) {
        return Err(Error::Protocol(format!(
            "packed symbol data of {} bytes is not a multiple of {width}",
            bytes.len()
        )));
    }
    bytes
        .chunks(width)
        .map(|chunk| {
            let mut le = [0u8; 8];
            le[..width].copy_from_slice(chunk);
            QuantizedPhase::from_level(u64::from_le_bytes(le), resolution_bits)
        })
        .collect()
}
