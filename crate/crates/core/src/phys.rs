//! Closed-form statistics of the coherent-state phase signal.
//!
//! A coherent state with mean photon number `n` carries an irreducible phase
//! spread `sigma_phi = sqrt(2 / n)`. Everything an eavesdropper can do against
//! the dual-basis encoding is bounded by how well two such states, offset in
//! phase by `delta_phi`, can be told apart. This module gives the overlap of
//! those states, the optimal (Helstrom) discrimination error, the same error
//! after a key bit has been emitted twice, and the legitimate receiver's
//! error when it knows the basis.
//!
//! The physical random generator is simulated by [`PhaseNoiseModel`], a
//! seeded Gaussian source. It is deterministic on purpose so that sessions
//! replay bit for bit; a deployment needs a physical entropy source because a
//! deterministic generator can be searched for and discovered.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Tolerance for treating a squared overlap slightly outside `[0, 1]` as a rounding artefact.
const OVERLAP_TOLERANCE: f64 = 1e-12;

/// Number of emissions of each key bit in the protocol: once as a message, once as a basis.
pub const DEFAULT_REPETITIONS: u32 = 2;

/// Mean photon number of the coherent state, `n = |alpha|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentStateParams {
    avg_photon_number: f64,
}

impl CoherentStateParams {
    pub fn new(avg_photon_number: f64) -> Result<Self> {
        if !(avg_photon_number.is_finite() && avg_photon_number > 0.0) {
            return Err(Error::Domain(format!(
                "mean photon number must be finite and positive, got {avg_photon_number}"
            )));
        }
        Ok(Self { avg_photon_number })
    }

    pub fn avg_photon_number(&self) -> f64 {
        self.avg_photon_number
    }

    /// Amplitude `|alpha|`.
    pub fn amplitude(&self) -> f64 {
        self.avg_photon_number.sqrt()
    }

    pub fn sigma_phi(&self) -> f64 {
        (2.0 / self.avg_photon_number).sqrt()
    }
}

/// Phase standard deviation `sqrt(2 / n)` of a coherent state.
pub fn sigma_phi(params: CoherentStateParams) -> f64 {
    params.sigma_phi()
}

/// Unnormalised overlap `exp(-dphi^2 / (2 sigma^2))` of two phases `delta_phi_12` apart.
pub fn overlap_probability(delta_phi_12: f64, sigma_phi: f64) -> Result<f64> {
    if sigma_phi.is_nan() || sigma_phi <= 0.0 {
        return Err(Error::Domain(format!("sigma_phi must be positive, got {sigma_phi}")));
    }
    Ok((-(delta_phi_12 * delta_phi_12) / (2.0 * sigma_phi * sigma_phi)).exp())
}

/// Squared overlap `|<psi0|psi1>|^2 = exp(-2n (1 - cos(dphi/2)))` of two coherent states.
pub fn fidelity_exact(params: CoherentStateParams, delta_phi: f64) -> f64 {
    // 1 - cos(x) = 2 sin^2(x/2) avoids cancellation for small offsets.
    let half = (delta_phi / 4.0).sin();
    (-2.0 * params.avg_photon_number * 2.0 * half * half).exp()
}

/// Small-angle form `exp(-n dphi^2 / 4)` of [`fidelity_exact`].
///
/// Never exceeds the exact value, since `1 - cos(y) <= y^2 / 2`.
pub fn fidelity_approx(params: CoherentStateParams, delta_phi: f64) -> f64 {
    (-params.avg_photon_number * delta_phi * delta_phi / 4.0).exp()
}

/// Minimum error `(1 - sqrt(1 - |<psi0|psi1>|^2)) / 2` for telling two equiprobable pure states apart.
pub fn helstrom_error(overlap_sq: f64) -> Result<f64> {
    if !(-OVERLAP_TOLERANCE..=1.0 + OVERLAP_TOLERANCE).contains(&overlap_sq) {
        return Err(Error::Domain(format!("squared overlap {overlap_sq} is outside [0, 1]")));
    }
    let overlap_sq = overlap_sq.clamp(0.0, 1.0);
    Ok(0.5 * (1.0 - (1.0 - overlap_sq).sqrt()))
}

/// Helstrom error for identifying the basis of a key bit seen `repetitions` times.
///
/// Repeating a coherent signal `r` times is worth one emission `r` times as
/// intense, so the overlap exponent scales by `r`. The protocol emits every key
/// bit twice, hence [`DEFAULT_REPETITIONS`].
pub fn eavesdropper_error(params: CoherentStateParams, delta_phi: f64, repetitions: u32) -> Result<f64> {
    if repetitions == 0 {
        return Err(Error::Domain("repetitions must be at least 1".into()));
    }
    Ok(0.5 - 0.5 * basis_distinguishability(params, delta_phi, repetitions))
}

/// `sqrt(1 - exp(-(r n / 4) dphi^2))`, i.e. `1 - 2 P_e`, computed without cancellation.
pub(crate) fn basis_distinguishability(params: CoherentStateParams, delta_phi: f64, repetitions: u32) -> f64 {
    let exponent = repetitions as f64 * params.avg_photon_number / 4.0 * delta_phi * delta_phi;
    (-(-exponent).exp_m1()).sqrt()
}

/// Gaussian tail probability `Q(z) = P(N(0,1) > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Bit error of a receiver that knows the basis: the phase noise has to cross
/// one of the two decision boundaries at `±pi/2`.
pub fn legitimate_error(params: CoherentStateParams) -> f64 {
    2.0 * q_function(FRAC_PI_2 / params.sigma_phi())
}

/// Seeded Gaussian phase-noise source standing in for the physical generator.
#[derive(Debug, Clone)]
pub struct PhaseNoiseModel {
    sigma_phi: f64,
    seed: u64,
    normal: Normal<f64>,
    rng: ChaCha20Rng,
}

impl PhaseNoiseModel {
    pub fn new(sigma_phi: f64, seed: u64) -> Result<Self> {
        Self::with_rng(sigma_phi, seed, ChaCha20Rng::seed_from_u64(seed))
    }

    /// Builds a model on an already-positioned generator (e.g. a dedicated stream).
    pub(crate) fn with_rng(sigma_phi: f64, seed: u64, rng: ChaCha20Rng) -> Result<Self> {
        if !(sigma_phi > 0.0 && sigma_phi < FRAC_PI_2) {
            return Err(Error::Domain(format!(
                "phase noise sigma must lie in (0, pi/2), got {sigma_phi}"
            )));
        }
        let normal = Normal::new(0.0, sigma_phi).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Self {
            sigma_phi,
            seed,
            normal,
            rng,
        })
    }

    pub fn sigma_phi(&self) -> f64 {
        self.sigma_phi
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&mut self) -> f64 {
        self.normal.sample(&mut self.rng)
    }
}

/// Draws `count` zero-mean Gaussian phase samples from `model`.
pub fn sample_phase_noise(model: &mut PhaseNoiseModel, count: usize) -> Vec<f64> {
    (0..count).map(|_| model.sample()).collect()
}

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Reference values from a 40-digit mpmath evaluation.
    const SIGMA_1E4: f64 = 0.014_142_135_623_730_950;
    const EXP_MINUS_HALF: f64 = 0.606_530_659_712_633_4;
    const FIDELITY_EXACT_1000_01: f64 = 0.082_127_758_798_358_56;
    const FIDELITY_APPROX_1000_01: f64 = 0.082_084_998_623_898_795;
    const HELSTROM_HALF: f64 = 0.146_446_609_406_726_24;
    const PE_1E4_EXP6_R2: f64 = 0.080_185_355_238_303_66;
    const LEGIT_N2: f64 = 0.116_229_965_566_818_99;

    fn n(v: f64) -> CoherentStateParams {
        CoherentStateParams::new(v).unwrap()
    }

    #[test]
    fn sigma_phi_values() {
        assert_eq!(sigma_phi(n(2.0)), 1.0);
        assert_eq!(sigma_phi(n(8.0)), 0.5);
        assert!((sigma_phi(n(1e4)) - SIGMA_1E4).abs() < 1e-17);
    }

    #[test]
    fn non_positive_photon_number_is_rejected() {
        assert!(CoherentStateParams::new(0.0).is_err());
        assert!(CoherentStateParams::new(-1.0).is_err());
        assert!(CoherentStateParams::new(f64::NAN).is_err());
    }

    #[test]
    fn overlap_probability_values() {
        assert_eq!(overlap_probability(0.0, 0.3).unwrap(), 1.0);
        assert!((overlap_probability(0.3, 0.3).unwrap() - EXP_MINUS_HALF).abs() < 1e-15);
        assert!(overlap_probability(30.0, 0.3).unwrap() < 1e-15);
        assert!(overlap_probability(1.0, 0.0).is_err());
        assert!(overlap_probability(1.0, -1.0).is_err());
    }

    #[test]
    fn fidelity_values() {
        assert_eq!(fidelity_exact(n(1000.0), 0.0), 1.0);
        assert_eq!(fidelity_approx(n(1000.0), 0.0), 1.0);
        let exact = fidelity_exact(n(1000.0), 0.1);
        let approx = fidelity_approx(n(1000.0), 0.1);
        assert!((exact - FIDELITY_EXACT_1000_01).abs() < 1e-14);
        assert!((approx - FIDELITY_APPROX_1000_01).abs() < 1e-14);
        assert!((exact - approx).abs() / exact < 1e-2);
        assert_eq!(fidelity_exact(n(1000.0), 2.0 * PI), 0.0);
    }

    #[test]
    fn fidelity_ordering_and_gap() {
        for &nv in &[1.0, 10.0, 100.0, 1e3, 1e4] {
            for k in 1..=200 {
                let dphi = PI * k as f64 / 200.0;
                assert!(fidelity_exact(n(nv), dphi) >= fidelity_approx(n(nv), dphi));
            }
        }
        for &nv in &[100.0, 1e3, 1e4, 1e5] {
            for k in 1..=100 {
                let dphi = 0.1 * k as f64 / 100.0;
                // Relative gap grows like n dphi^4 / 192.
                if nv * dphi.powi(4) > 1.0 {
                    continue;
                }
                let exact = fidelity_exact(n(nv), dphi);
                let approx = fidelity_approx(n(nv), dphi);
                assert!((exact - approx) / exact < 1e-2, "n={nv} dphi={dphi}");
            }
        }
    }

    #[test]
    fn helstrom_values() {
        assert_eq!(helstrom_error(0.0).unwrap(), 0.0);
        assert_eq!(helstrom_error(1.0).unwrap(), 0.5);
        assert!((helstrom_error(0.5).unwrap() - HELSTROM_HALF).abs() < 1e-16);
        assert_eq!(helstrom_error(1.0 + 1e-13).unwrap(), 0.5);
        assert!(helstrom_error(1.1).is_err());
        assert!(helstrom_error(-0.01).is_err());
    }

    #[test]
    fn eavesdropper_error_values() {
        for &nv in &[1.0, 1e4, 1e8] {
            for r in 1..4 {
                assert_eq!(eavesdropper_error(n(nv), 0.0, r).unwrap(), 0.5);
            }
        }
        let dphi = 2f64.powi(-6);
        let pe = eavesdropper_error(n(1e4), dphi, 2).unwrap();
        assert!((pe - PE_1E4_EXP6_R2).abs() < 1e-15);
        let single = eavesdropper_error(n(1e4), dphi, 1).unwrap();
        let composed = helstrom_error(fidelity_approx(n(1e4), dphi)).unwrap();
        assert!((single - composed).abs() < 1e-15);
        assert!(eavesdropper_error(n(1e4), dphi, 0).is_err());
    }

    #[test]
    fn eavesdropper_error_is_monotone() {
        let ns: Vec<f64> = (0..20).map(|i| 10f64.powf(1.0 + 0.25 * i as f64)).collect();
        let phis: Vec<f64> = (0..=40).map(|i| PI / 4.0 * i as f64 / 40.0).collect();
        for w in ns.windows(2) {
            for &p in &phis {
                let a = eavesdropper_error(n(w[0]), p, 2).unwrap();
                let b = eavesdropper_error(n(w[1]), p, 2).unwrap();
                assert!(b <= a);
            }
        }
        for &nv in &ns {
            for w in phis.windows(2) {
                let a = eavesdropper_error(n(nv), w[0], 2).unwrap();
                let b = eavesdropper_error(n(nv), w[1], 2).unwrap();
                assert!(b <= a);
            }
        }
    }

    #[test]
    fn helstrom_of_exact_fidelity_is_at_most_half() {
        for &nv in &[1.0, 100.0, 1e4] {
            assert_eq!(helstrom_error(fidelity_exact(n(nv), 0.0)).unwrap(), 0.5);
            for k in 1..=100 {
                let p = helstrom_error(fidelity_exact(n(nv), PI * k as f64 / 100.0)).unwrap();
                assert!(p < 0.5);
            }
        }
    }

    #[test]
    fn legitimate_error_values() {
        assert!((legitimate_error(n(2.0)) - LEGIT_N2).abs() < 1e-12);
        assert!(legitimate_error(n(1e4)) < 1e-300);
        let mut prev = 1.0;
        for i in 0..40 {
            let e = legitimate_error(n(1.0 + i as f64 * 2.5));
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn noise_is_deterministic_and_calibrated() {
        let mut a = PhaseNoiseModel::new(0.5, 7).unwrap();
        let mut b = PhaseNoiseModel::new(0.5, 7).unwrap();
        assert!(sample_phase_noise(&mut a, 0).is_empty());
        let xs = sample_phase_noise(&mut a, 1_000_000);
        let ys = sample_phase_noise(&mut b, 1_000_000);
        assert_eq!(xs, ys);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() - 0.5).abs() < 0.002);
        assert!(mean.abs() < 4.0 * 0.5 / 1000.0);
    }

    #[test]
    fn noise_sigma_bounds() {
        assert!(PhaseNoiseModel::new(0.0, 1).is_err());
        assert!(PhaseNoiseModel::new(FRAC_PI_2, 1).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.1) + 0.1).abs() < 1e-15);
    }
}
