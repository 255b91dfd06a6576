//! simulate, serve and connect.

use std::fs::File;
use std::io::BufReader;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use noisepad::protocol::{insecure_k0_from_seed, CycleReport, LeakLedger, Role, SessionParams, Tag, TransferRecord};
use noisepad::transport::{connect_session, run_loopback_session, serve_session, SessionSummary, StreamChannel, Tap};
use noisepad::Bits;
use serde::{Deserialize, Serialize};

use crate::{print_json, Failure, SessionArgs};

const PEER_TIMEOUT: Duration = Duration::from_secs(60);

/// What a recorder learns besides the KEYBLOCK frames: the negotiated
/// parameters and, per transfer, the amplification seed and key length.
#[derive(Debug, Serialize, Deserialize)]
pub struct PublicLog {
    pub params: SessionParams,
    pub transfers: Vec<TransferRecord>,
}

impl PublicLog {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let file = File::open(path).map_err(|e| Failure::invalid(format!("cannot open {}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Failure::invalid(format!("{} is not a public log: {e}", path.display())))
    }

    fn write(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).map_err(Failure::runtime)?;
        std::fs::write(path, text + "\n").map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// Where the recorder's files go.
#[derive(Debug, Clone, Args)]
pub struct RecordArgs {
    /// Write the raw KEYBLOCK frames of the session here.
    #[arg(long)]
    pub transcript_out: Option<PathBuf>,
    /// Write the public parameters and amplification seeds here, as JSON.
    #[arg(long)]
    pub public_log: Option<PathBuf>,
}

impl RecordArgs {
    fn tap(&self) -> Result<Option<Tap>, Failure> {
        self.transcript_out
            .as_ref()
            .map(|p| Tap::to_file(p).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", p.display()))))
            .transpose()
    }

    fn finish(&self, tap: Option<std::io::Result<usize>>, params: SessionParams, transfers: &[TransferRecord]) -> Result<(), Failure> {
        if let Some(Err(e)) = tap {
            return Err(Failure::runtime(format!("transcript could not be stored: {e}")));
        }
        if let Some(path) = &self.public_log {
            PublicLog {
                params,
                transfers: transfers.to_vec(),
            }
            .write(path)?;
        }
        Ok(())
    }
}

/// Where the shared seed key comes from.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct K0Args {
    /// Raw bytes; the first block-length bits are used, most significant bit first.
    #[arg(long)]
    pub k0_file: Option<PathBuf>,
    /// INSECURE, testing only: derive K0 from this number.
    #[arg(long)]
    pub k0_seed: Option<u64>,
}

impl K0Args {
    fn load(&self, bits: usize) -> noisepad::Result<Bits> {
        if let Some(seed) = self.k0_seed {
            log::warn!("K0 derived from --k0-seed is not secret; use only for testing");
            return Ok(insecure_k0_from_seed(seed, bits));
        }
        let path = self.k0_file.as_ref().expect("clap enforces one K0 source");
        let key = Bits::from_bytes(&std::fs::read(path)?);
        if key.len() < bits {
            return Err(noisepad::Error::InvalidParams(format!(
                "{} holds {} bits, the session needs {bits}",
                path.display(),
                key.len()
            )));
        }
        Ok(key.prefix(bits))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Seeds K0 and both parties' generators.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub cycles: u32,
    #[command(flatten)]
    pub session: SessionArgs,
    #[command(flatten)]
    pub record: RecordArgs,
    /// Write every key of the chain here as JSON (simulation only: these are the secrets).
    #[arg(long)]
    pub keys_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    params: SessionParams,
    seed: u64,
    cycles_requested: u32,
    cycles_completed: u32,
    early_stop: Option<&'a str>,
    cycles: &'a [CycleReport],
    delivered_bits: usize,
    ledger: LeakLedger,
    agreement: bool,
    tags_match: bool,
    tag: Option<Tag>,
    boost_factor: f64,
}

pub fn progress_printer(json: bool) -> impl FnMut(&CycleReport) {
    move |r: &CycleReport| {
        if json {
            if let Ok(line) = serde_json::to_string(r) {
                eprintln!("{line}");
            }
        } else {
            eprintln!(
                "cycle {:>5}  A->B {:>7} bits  B->A {:>7} bits  total {:>10}  ledger {:.6e}",
                r.cycle, r.key_bits_a_to_b, r.key_bits_b_to_a, r.total_delivered_bits, r.ledger_total
            );
        }
    }
}

/// Runs a simulated session and returns both parties.
pub fn run_simulation(
    seed: u64,
    cycles: u32,
    params: SessionParams,
    tap: Option<Tap>,
    progress: &mut dyn FnMut(&CycleReport),
) -> Result<noisepad::transport::LoopbackOutcome, Failure> {
    let k0 = insecure_k0_from_seed(seed, params.block_length);
    run_loopback_session(params, k0, seed, cycles, tap, progress).map_err(Failure::runtime)
}

pub fn simulate(args: SimulateArgs, json: bool) -> Result<(), Failure> {
    let params = args.session.params()?;
    let tap = args.record.tap()?;
    let out = run_simulation(args.seed, args.cycles, params, tap, &mut progress_printer(json))?;
    let agreement = out.alice.chain().keys().eq(out.bob.chain().keys());
    let summary = &out.alice_summary;
    print_json(&SimulationSummary {
        params,
        seed: args.seed,
        cycles_requested: args.cycles,
        cycles_completed: summary.cycles_completed,
        early_stop: summary.early_stop.as_deref(),
        cycles: &summary.cycles,
        delivered_bits: summary.delivered_bits,
        ledger: summary.ledger,
        agreement,
        tags_match: summary.tags_match && out.bob_summary.tags_match,
        tag: summary.tag,
        boost_factor: summary.delivered_bits as f64 / params.block_length as f64,
    })?;
    args.record.finish(out.tap, params, out.alice.history())?;
    if let Some(path) = &args.keys_out {
        let keys: Vec<&Bits> = out.alice.chain().keys().collect();
        let text = serde_json::to_string_pretty(&keys).map_err(Failure::runtime)?;
        std::fs::write(path, text + "\n").map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    if !agreement {
        return Err(Failure::Runtime("Alice and Bob hold different keys".into()));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on, e.g. 127.0.0.1:7070 (port 0 picks a free one).
    #[arg(long)]
    pub listen: String,
    /// Session seed; Bob's generator is split off it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub k0: K0Args,
    #[command(flatten)]
    pub record: RecordArgs,
}

#[derive(Debug, Args)]
pub struct ConnectArgs {
    #[arg(long)]
    pub addr: String,
    /// Session seed; Alice's generator is split off it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub cycles: u32,
    #[command(flatten)]
    pub session: SessionArgs,
    #[command(flatten)]
    pub k0: K0Args,
    #[command(flatten)]
    pub record: RecordArgs,
}

fn prepare(stream: &TcpStream) -> Result<(), Failure> {
    stream.set_read_timeout(Some(PEER_TIMEOUT)).map_err(Failure::runtime)?;
    stream.set_nodelay(true).map_err(Failure::runtime)
}

fn report_session(summary: &SessionSummary) -> Result<(), Failure> {
    print_json(summary)?;
    match (&summary.tag, &summary.peer_tag) {
        (Some(_), Some(_)) if summary.tags_match => Ok(()),
        (Some(_), Some(_)) => Err(Failure::Runtime("CONFIRM mismatch: the peers hold different keys".into())),
        _ => Err(Failure::Runtime("no CONFIRM tag: the chain ran out before a 256-bit key was left".into())),
    }
}

pub fn serve(args: ServeArgs, json: bool) -> Result<(), Failure> {
    let listener = TcpListener::bind(&args.listen).map_err(|e| Failure::runtime(format!("cannot listen on {}: {e}", args.listen)))?;
    let addr = listener.local_addr().map_err(Failure::runtime)?;
    eprintln!("listening on {addr}");
    let (stream, peer) = listener.accept().map_err(Failure::runtime)?;
    log::info!("session from {peer}");
    prepare(&stream)?;
    let mut ch = StreamChannel::new(stream);
    if let Some(tap) = args.record.tap()? {
        ch = ch.with_tap(tap);
    }
    let k0 = &args.k0;
    let (summary, bob) = serve_session(
        &mut ch,
        |p| k0.load(p.block_length),
        Role::Bob.party_seed(args.seed),
        &mut progress_printer(json),
    )
    .map_err(Failure::runtime)?;
    args.record.finish(ch.take_tap().map(Tap::finish), *bob.params(), bob.history())?;
    report_session(&summary)
}

pub fn connect(args: ConnectArgs, json: bool) -> Result<(), Failure> {
    let params = args.session.params()?;
    let k0 = args.k0.load(params.block_length).map_err(Failure::invalid)?;
    let stream = TcpStream::connect(&args.addr).map_err(|e| Failure::runtime(format!("cannot reach {}: {e}", args.addr)))?;
    prepare(&stream)?;
    let mut ch = StreamChannel::new(stream);
    if let Some(tap) = args.record.tap()? {
        ch = ch.with_tap(tap);
    }
    let (summary, alice) = connect_session(
        &mut ch,
        params,
        k0,
        Role::Alice.party_seed(args.seed),
        args.cycles,
        &mut progress_printer(json),
    )
    .map_err(Failure::runtime)?;
    args.record.finish(ch.take_tap().map(Tap::finish), params, alice.history())?;
    report_session(&summary)
}
