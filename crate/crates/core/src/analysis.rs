//! Security analysis: how fast basis information leaks and how long a key
//! chain can run before an eavesdropper could have collected one bit of it.
//!
//! The eavesdropper's chance `P_s` of naming the basis of a twice-emitted key
//! bit comes from the Helstrom bound. The leak per symbol is measured against
//! the one bit of a-priori basis entropy as
//!
//! ```text
//! ΔH = 1 - H_s,   H_s = -P_s log2 P_s
//! ```
//!
//! using the success term alone. `ΔH = 1/2` means the bases are perfectly
//! hidden; anything above that is leak, and `1 / (ΔH - 1/2)` symbols are
//! needed before one bit could accumulate.

use std::f64::consts::{FRAC_PI_2, LN_2};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::encode::Constellation;
use crate::error::{Error, Result};
use crate::phys::{basis_distinguishability, eavesdropper_error, CoherentStateParams, DEFAULT_REPETITIONS};

/// Default factor used to read "much greater than" in the operating condition.
pub const DEFAULT_RATIO: f64 = 8.0;

/// Minimum seed length accepted by [`boost_factor`].
pub const MIN_SEED_BITS: usize = 128;

/// Leak above the indistinguishable floor, `ΔH - 1/2`, per transmitted symbol.
///
/// With `d = P_s - 1/2` this is `(1/2 + d) log2(1 + 2d) - d`, which has no
/// cancellation for tiny `d` and is exactly zero at `d = 0`.
pub fn leak_per_symbol(params: CoherentStateParams, delta_phi: f64) -> f64 {
    let d = 0.5 * basis_distinguishability(params, delta_phi, DEFAULT_REPETITIONS);
    if d == 0.0 {
        return 0.0;
    }
    ((0.5 + d) * (2.0 * d).ln_1p() / LN_2 - d).max(0.0)
}

/// `ΔH` in bits, between 1/2 (bases hidden) and 1 (bases revealed).
pub fn entropy_leak(params: CoherentStateParams, delta_phi: f64) -> f64 {
    0.5 + leak_per_symbol(params, delta_phi)
}

/// Symbols after which `L * (ΔH - 1/2) = 1`; infinite when nothing leaks.
pub fn min_leak_length(params: CoherentStateParams, delta_phi: f64) -> f64 {
    leak_length_from_excess(leak_per_symbol(params, delta_phi))
}

/// Same as [`min_leak_length`] for an already computed `ΔH`.
pub fn leak_length_from_delta_h(delta_h: f64) -> f64 {
    leak_length_from_excess(delta_h - 0.5)
}

fn leak_length_from_excess(excess: f64) -> f64 {
    if excess <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / excess
    }
}

/// Every derived quantity at one `(n, delta_phi)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityPoint {
    pub avg_photon_number: f64,
    pub delta_phi: f64,
    pub p_error: f64,
    pub p_success: f64,
    pub delta_h: f64,
    /// Symbols; `+inf` when the bases are indistinguishable. Serialised as `null` then.
    pub leak_length: f64,
}

impl SecurityPoint {
    pub fn evaluate(params: CoherentStateParams, delta_phi: f64) -> Self {
        let p_error = eavesdropper_error(params, delta_phi, DEFAULT_REPETITIONS)
            .expect("default repetitions are non-zero");
        Self {
            avg_photon_number: params.avg_photon_number(),
            delta_phi,
            p_error,
            p_success: 1.0 - p_error,
            delta_h: entropy_leak(params, delta_phi),
            leak_length: min_leak_length(params, delta_phi),
        }
    }
}

/// The two inequalities of the operating condition `pi/2 >> sigma_phi >> delta_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `pi/2 >> sigma_phi`: the legitimate receiver can separate 0 from 1.
    QuarterTurnOverNoise,
    /// `sigma_phi >> delta_phi`: the noise hides the basis offset.
    NoiseOverOffset,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::QuarterTurnOverNoise => "pi/2 >> sigma_phi",
            Condition::NoiseOverOffset => "sigma_phi >> delta_phi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    /// Achieved ratio of the larger side to the smaller side.
    pub achieved: f64,
    pub required: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated: ratio {:.4} < required {}",
            self.condition, self.achieved, self.required
        )
    }
}

/// Outcome of [`validate_params`]; empty means the parameters are usable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidParams(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks `pi/2 >= ratio * sigma_phi` and `sigma_phi >= ratio * delta_phi`.
pub fn validate_params(params: CoherentStateParams, c: &Constellation, ratio: f64) -> ValidationReport {
    validate_offset(params, c.delta_phi(), ratio)
}

/// [`validate_params`] for a bare offset, without a quantization grid.
pub fn validate_offset(params: CoherentStateParams, delta_phi: f64, ratio: f64) -> ValidationReport {
    let sigma = params.sigma_phi();
    let mut violations = Vec::new();
    if FRAC_PI_2 < ratio * sigma {
        violations.push(Violation {
            condition: Condition::QuarterTurnOverNoise,
            achieved: FRAC_PI_2 / sigma,
            required: ratio,
        });
    }
    if sigma < ratio * delta_phi {
        violations.push(Violation {
            condition: Condition::NoiseOverOffset,
            achieved: sigma / delta_phi,
            required: ratio,
        });
    }
    ValidationReport { violations }
}

/// Quantity tabulated by [`emit_surface`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceQuantity {
    DeltaH,
    LeakLength,
}

impl SurfaceQuantity {
    fn eval(self, params: CoherentStateParams, delta_phi: f64) -> f64 {
        match self {
            SurfaceQuantity::DeltaH => entropy_leak(params, delta_phi),
            SurfaceQuantity::LeakLength => min_leak_length(params, delta_phi),
        }
    }
}

pub const SURFACE_HEADER: &str = "n_avg,delta_phi_exp2,value";

/// CSV table of `quantity` over `n_grid x exp_grid`, where the offset is
/// `2^exp`. An exponent of `-inf` stands for a zero offset.
///
/// Rows run over `n` (outer) and the exponent (inner), both ascending; numbers
/// use Rust's shortest round-trip formatting, so re-parsing is exact.
pub fn emit_surface(n_grid: &[f64], exp_grid: &[f64], quantity: SurfaceQuantity) -> Result<String> {
    let mut ns = n_grid.to_vec();
    let mut exps = exp_grid.to_vec();
    ns.sort_by(f64::total_cmp);
    exps.sort_by(f64::total_cmp);

    let mut out = String::new();
    out.push_str(SURFACE_HEADER);
    out.push('\n');
    for &n in &ns {
        let params = CoherentStateParams::new(n)?;
        for &e in &exps {
            if e.is_nan() || e == f64::INFINITY {
                return Err(Error::Domain(format!("offset exponent {e} is not usable")));
            }
            let value = quantity.eval(params, e.exp2());
            writeln!(out, "{n},{e},{value}").expect("writing to a String");
        }
    }
    Ok(out)
}

/// Fresh key bits deliverable per seed bit before the leak estimate reaches one bit.
///
/// The chain may exchange `1 / (ΔH - 1/2)` symbols, each carrying one fresh
/// bit, before the cumulative leak reaches one bit; `safety_bits` of that are
/// held back. Infinite when nothing leaks.
pub fn boost_factor(
    params: CoherentStateParams,
    delta_phi: f64,
    seed_key_length: usize,
    safety_bits: usize,
) -> Result<f64> {
    if seed_key_length < MIN_SEED_BITS {
        return Err(Error::Domain(format!(
            "seed key must have at least {MIN_SEED_BITS} bits, got {seed_key_length}"
        )));
    }
    let symbols = min_leak_length(params, delta_phi);
    if symbols.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok((symbols - safety_bits as f64).max(0.0) / seed_key_length as f64)
}
