use std::fmt::{Display, Write as _};
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noisepad::analysis::{boost_factor, emit_surface, validate_offset, SecurityPoint, SurfaceQuantity, DEFAULT_RATIO};
use noisepad::phys::{legitimate_error, CoherentStateParams};
use noisepad::protocol::{SessionParams, DEFAULT_SAFETY_BITS};
use serde::Serialize;

mod attack;
mod session;

/// Fine enough for offsets down to 2^-38.
pub const DEFAULT_RESOLUTION: u8 = 40;

/// Exit status 1: flags or parameters rejected before any work.
const EXIT_INVALID: u8 = 1;
/// Exit status 2: failure while running.
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "noisepad", version, about = "Grow a short shared seed into a chain of one-time-pad keys")]
struct Cli {
    /// Machine-readable output everywhere (JSON documents and JSON-lines progress).
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Security figures for one operating point.
    Analyze(AnalyzeArgs),
    /// Tabulate ΔH or L over a grid as CSV.
    Surface(SurfaceArgs),
    /// Run Alice and Bob in-process and report on the session.
    Simulate(session::SimulateArgs),
    /// Wait for one peer and run a session as Bob.
    Serve(session::ServeArgs),
    /// Run a session as Alice against a serving peer.
    Connect(session::ConnectArgs),
    /// Recover a key from a noiselessly encrypted message and its plaintext.
    AttackKpa(attack::KpaArgs),
    /// Rebuild the key chain from one revealed key and recorded traffic.
    AttackChain(attack::ChainArgs),
    /// Monte-Carlo basis discrimination against the Helstrom floor.
    AttackBasis(attack::BasisArgs),
}

/// Mean photon number and basis offset, shared by most commands.
#[derive(Debug, Clone, Args)]
pub struct PhysArgs {
    /// Mean photon number per pulse.
    #[arg(long, value_name = "N")]
    pub n_avg: f64,
    /// Basis offset as a power of two: delta_phi = 2^E.
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    pub delta_phi_exp: i8,
}

impl PhysArgs {
    pub fn delta_phi(&self) -> f64 {
        f64::from(self.delta_phi_exp).exp2()
    }

    pub fn coherent_state(&self) -> Result<CoherentStateParams, Failure> {
        CoherentStateParams::new(self.n_avg).map_err(Failure::invalid)
    }
}

/// Session parameters proposed by Alice.
#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    /// Mean photon number per pulse.
    #[arg(long, value_name = "N")]
    pub n_avg: f64,
    /// Basis offset as a power of two: delta_phi = 2^E.
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    pub delta_phi_exp: i8,
    /// Bits per quantized phase on the wire.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: u8,
    /// Length of the shared seed K0, which is also the first block length.
    #[arg(long, default_value_t = 1024)]
    pub k0_bits: usize,
    /// Bits removed from every block on top of the leak estimate.
    #[arg(long, default_value_t = DEFAULT_SAFETY_BITS)]
    pub safety: usize,
    /// Skip parity reconciliation (only sensible when errors are negligible).
    #[arg(long)]
    pub no_reconcile: bool,
}

impl SessionArgs {
    pub fn params(&self) -> Result<SessionParams, Failure> {
        let dphi = f64::from(self.delta_phi_exp).exp2();
        let mut p = SessionParams::new(self.n_avg, dphi, self.resolution, self.k0_bits)
            .with_safety_bits(self.safety);
        if self.no_reconcile {
            p = p.without_reconciliation();
        }
        p.validate().map_err(Failure::invalid)?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// How many times larger "much greater than" must be.
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    ratio: f64,
    /// Seed length used for the boost-factor estimate.
    #[arg(long, default_value_t = 256)]
    k0_bits: usize,
    /// Safety margin used for the boost-factor estimate.
    #[arg(long, default_value_t = DEFAULT_SAFETY_BITS)]
    safety: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Quantity {
    DeltaH,
    LeakLength,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[arg(long, value_enum)]
    quantity: Quantity,
    /// Comma-separated mean photon numbers.
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<f64>,
    /// Comma-separated offset exponents; `-inf` means a zero offset.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    exp_grid: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Why a command failed, and so which exit status it gets.
#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    pub fn invalid(e: impl Display) -> Self {
        Failure::Invalid(e.to_string())
    }

    pub fn runtime(e: impl Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Writes to stdout; a reader that went away is not an error.
pub fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::runtime(e)),
        _ => Ok(()),
    }
}

/// Prints a JSON document on stdout.
pub fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    emit(&(text + "\n"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NOISEPAD_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    let result = match cli.command {
        Command::Analyze(a) => analyze(a, json),
        Command::Surface(a) => surface(a, json),
        Command::Simulate(a) => session::simulate(a, json),
        Command::Serve(a) => session::serve(a, json),
        Command::Connect(a) => session::connect(a, json),
        Command::AttackKpa(a) => attack::kpa(a),
        Command::AttackChain(a) => attack::chain(a),
        Command::AttackBasis(a) => attack::basis(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    delta_phi_exp: i8,
    sigma_phi: f64,
    legitimate_error: f64,
    validation: noisepad::analysis::ValidationReport,
    #[serde(flatten)]
    point: SecurityPoint,
    boost_factor: Option<f64>,
}

fn analyze(args: AnalyzeArgs, json: bool) -> Result<(), Failure> {
    let state = args.phys.coherent_state()?;
    let dphi = args.phys.delta_phi();
    let point = SecurityPoint::evaluate(state, dphi);
    let report = AnalyzeReport {
        delta_phi_exp: args.phys.delta_phi_exp,
        sigma_phi: state.sigma_phi(),
        legitimate_error: legitimate_error(state),
        validation: validate_offset(state, dphi, args.ratio),
        point,
        boost_factor: boost_factor(state, dphi, args.k0_bits, args.safety).ok(),
    };
    if json {
        print_json(&report)?;
    } else {
        let mut t = String::new();
        let _ = writeln!(t, "n_avg            {}", point.avg_photon_number);
        let _ = writeln!(t, "delta_phi        2^{} = {}", report.delta_phi_exp, point.delta_phi);
        let _ = writeln!(t, "sigma_phi        {}", report.sigma_phi);
        let _ = writeln!(t, "validation       {}", report.validation);
        let _ = writeln!(t, "legitimate error {}", report.legitimate_error);
        let _ = writeln!(t, "Pe (Eve)         {}", point.p_error);
        let _ = writeln!(t, "delta_H          {}", point.delta_h);
        let _ = writeln!(t, "L                {}", point.leak_length);
        let _ = match report.boost_factor {
            Some(b) => writeln!(t, "boost factor     {b} (K0 = {} bits, safety {})", args.k0_bits, args.safety),
            None => writeln!(t, "boost factor     n/a (K0 = {} bits is too short)", args.k0_bits),
        };
        emit(&t)?;
    }
    if report.validation.is_ok() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("parameters fail validation: {}", report.validation)))
    }
}

fn surface(args: SurfaceArgs, json: bool) -> Result<(), Failure> {
    let quantity = match args.quantity {
        Quantity::DeltaH => SurfaceQuantity::DeltaH,
        Quantity::LeakLength => SurfaceQuantity::LeakLength,
    };
    let csv = emit_surface(&args.n_grid, &args.exp_grid, quantity).map_err(Failure::invalid)?;
    std::fs::write(&args.out, &csv)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", args.out.display())))?;
    let rows = args.n_grid.len() * args.exp_grid.len();
    if json {
        print_json(&serde_json::json!({ "rows": rows, "path": args.out }))?;
    } else {
        emit(&format!("wrote {rows} rows to {}\n", args.out.display()))?;
    }
    Ok(())
}
