//! attack-kpa, attack-chain and attack-basis.

use std::path::PathBuf;

use clap::Args;
use noisepad::attacker::{chain_compromise, known_plaintext_attack, simulate_basis_attack, AttackReport};
use noisepad::encode::Constellation;
use noisepad::phys::{eavesdropper_error, legitimate_error, CoherentStateParams, DEFAULT_REPETITIONS};
use noisepad::protocol::SessionParams;
use noisepad::transport::{read_transcript, SharedBuffer, Tap};
use noisepad::Bits;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::session::{run_simulation, PublicLog};
use crate::{print_json, Failure, PhysArgs, SessionArgs};

#[derive(Debug, Args)]
pub struct KpaArgs {
    /// Ciphertext file (raw bytes). With --plaintext, attacks these files instead of a simulation.
    #[arg(long, requires = "plaintext")]
    pub ciphertext: Option<PathBuf>,
    /// Plaintext file (raw bytes).
    #[arg(long, requires = "ciphertext")]
    pub plaintext: Option<PathBuf>,
    /// Seed of the simulated session.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cycles of the simulated session.
    #[arg(long, default_value_t = 3)]
    pub cycles: u32,
    /// Chain index of the key the victims use as a pad.
    #[arg(long, default_value_t = 1)]
    pub key_index: usize,
    /// Seed for the known plaintext.
    #[arg(long, default_value_t = 1)]
    pub plaintext_seed: u64,
    /// Mean photon number of the simulated session.
    #[arg(long, value_name = "N", conflicts_with = "ciphertext")]
    pub n_avg: Option<f64>,
    /// Basis offset of the simulated session as a power of two.
    #[arg(long, value_name = "E", allow_hyphen_values = true, conflicts_with = "ciphertext")]
    pub delta_phi_exp: Option<i8>,
    #[arg(long, default_value_t = crate::DEFAULT_RESOLUTION)]
    pub resolution: u8,
    #[arg(long, default_value_t = 1024)]
    pub k0_bits: usize,
    #[arg(long, default_value_t = noisepad::protocol::DEFAULT_SAFETY_BITS)]
    pub safety: usize,
}

#[derive(Serialize)]
struct KpaOutcome {
    key_index: usize,
    plaintext_hex: String,
    ciphertext_hex: String,
    /// The pad key is recovered bit for bit.
    recovered: bool,
    /// Every later key of the chain is recovered too.
    chain_recovered: bool,
    gap: Option<String>,
    #[serde(flatten)]
    report: AttackReport,
}

fn read_bits(path: &PathBuf) -> Result<Bits, Failure> {
    std::fs::read(path)
        .map(|b| Bits::from_bytes(&b))
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn kpa(args: KpaArgs) -> Result<(), Failure> {
    if let (Some(c), Some(p)) = (&args.ciphertext, &args.plaintext) {
        let key = known_plaintext_attack(&read_bits(c)?, &read_bits(p)?).map_err(Failure::invalid)?;
        return print_json(&serde_json::json!({ "key_hex": hex::encode(key.to_bytes()), "key_bits": key.len() }));
    }
    let (Some(n_avg), Some(delta_phi_exp)) = (args.n_avg, args.delta_phi_exp) else {
        return Err(Failure::Invalid(
            "give --ciphertext and --plaintext, or --n-avg and --delta-phi-exp to simulate".into(),
        ));
    };
    let params = SessionArgs {
        n_avg,
        delta_phi_exp,
        resolution: args.resolution,
        k0_bits: args.k0_bits,
        safety: args.safety,
        no_reconcile: false,
    }
    .params()?;
    let buf = SharedBuffer::new();
    let out = run_simulation(args.seed, args.cycles, params, Some(Tap::new(Box::new(buf.clone()))), &mut |_| {})?;
    let chain = out.alice.chain();
    let key = chain
        .key(args.key_index)
        .filter(|_| args.key_index > 0)
        .ok_or_else(|| Failure::invalid(format!("the session produced no key {}", args.key_index)))?;

    // The victims encrypt a message Eve happens to know, without noise.
    let mut rng = ChaCha20Rng::seed_from_u64(args.plaintext_seed);
    let plaintext: Bits = (0..key.len()).map(|_| rng.random::<bool>()).collect();
    let ciphertext = &plaintext ^ key;
    let recovered = known_plaintext_attack(&ciphertext, &plaintext).map_err(Failure::runtime)?;

    // The recorded traffic then gives away every later key.
    let transcripts = read_transcript(&buf.contents(), params.resolution_bits).map_err(Failure::runtime)?;
    let c = out.alice.constellation();
    let later = chain_compromise(&transcripts, out.alice.history(), args.key_index, &recovered, c)
        .map_err(Failure::runtime)?;
    let chain_recovered = later.keys.iter().all(|(i, k)| chain.key(*i) == Some(k));

    let mut recovered_keys = vec![(args.key_index, recovered.clone())];
    recovered_keys.extend(later.keys);
    print_json(&KpaOutcome {
        key_index: args.key_index,
        plaintext_hex: hex::encode(plaintext.to_bytes()),
        ciphertext_hex: hex::encode(ciphertext.to_bytes()),
        recovered: &recovered == key,
        chain_recovered,
        gap: later.gap,
        report: known_key_report(&params, transcripts.iter().map(|t| t.len()).sum(), recovered_keys)?,
    })
}

/// Report for attacks that hold a key: bases are known exactly, and bit
/// errors are those of the legitimate decoder.
fn known_key_report(params: &SessionParams, symbols: usize, recovered_keys: Vec<(usize, Bits)>) -> Result<AttackReport, Failure> {
    let state = CoherentStateParams::new(params.avg_photon_number).map_err(Failure::invalid)?;
    Ok(AttackReport {
        symbols_observed: symbols,
        basis_guess_error_rate: 0.0,
        bit_guess_error_rate: legitimate_error(state),
        helstrom_floor: eavesdropper_error(state, params.delta_phi, DEFAULT_REPETITIONS).map_err(Failure::invalid)?,
        recovered_keys,
    })
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Transcript file written by a recorder (KEYBLOCK frames).
    #[arg(long)]
    pub transcript: PathBuf,
    /// Public log of the same session.
    #[arg(long)]
    pub public_log: PathBuf,
    /// Chain index of the revealed key.
    #[arg(long)]
    pub known_index: usize,
    /// File holding the revealed key as a string of 0s and 1s.
    #[arg(long)]
    pub known_key: PathBuf,
}

#[derive(Serialize)]
struct ChainOutcome {
    gap: Option<String>,
    #[serde(flatten)]
    report: AttackReport,
}

pub fn chain(args: ChainArgs) -> Result<(), Failure> {
    let log = PublicLog::read(&args.public_log)?;
    let bytes = std::fs::read(&args.transcript)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", args.transcript.display())))?;
    let text = std::fs::read_to_string(&args.known_key)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", args.known_key.display())))?;
    let known = Bits::parse(text.trim().trim_matches('"')).map_err(Failure::invalid)?;
    let transcripts = read_transcript(&bytes, log.params.resolution_bits).map_err(Failure::runtime)?;
    let c = Constellation::new(log.params.delta_phi, log.params.resolution_bits).map_err(Failure::invalid)?;
    let got = chain_compromise(&transcripts, &log.transfers, args.known_index, &known, &c).map_err(Failure::runtime)?;
    print_json(&ChainOutcome {
        gap: got.gap,
        report: known_key_report(&log.params, transcripts.iter().map(|t| t.len()).sum(), got.keys)?,
    })
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[arg(long, default_value_t = crate::DEFAULT_RESOLUTION)]
    pub resolution: u8,
    /// Key bits attacked (each observed in two emissions).
    #[arg(long, default_value_t = 100_000)]
    pub bits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct BasisOutcome {
    /// Binomial 3-sigma band the basis error must fall in.
    band: (f64, f64),
    within_band: bool,
    #[serde(flatten)]
    report: AttackReport,
}

pub fn basis(args: BasisArgs) -> Result<(), Failure> {
    let state = args.phys.coherent_state()?;
    let c = Constellation::new(args.phys.delta_phi(), args.resolution).map_err(Failure::invalid)?;
    if args.bits == 0 {
        return Err(Failure::Invalid("--bits must be positive".into()));
    }
    let report = simulate_basis_attack(state, &c, args.bits, args.seed).map_err(Failure::runtime)?;
    let sigma = |p: f64| 3.0 * (p * (1.0 - p) / args.bits as f64).sqrt();
    let band = (
        report.helstrom_floor - sigma(report.helstrom_floor),
        0.5 + sigma(0.5),
    );
    print_json(&BasisOutcome {
        band,
        within_band: (band.0..=band.1).contains(&report.basis_guess_error_rate),
        report,
    })
}
