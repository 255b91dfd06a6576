use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

fn noisepad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisepad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn analyze_prints_library_values() {
    let out = noisepad(&["--json", "analyze", "--n-avg", "1e4", "--delta-phi-exp", "-10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let params = noisepad::phys::CoherentStateParams::new(1e4).unwrap();
    let dphi = 2f64.powi(-10);
    assert_eq!(v["delta_h"].as_f64().unwrap(), noisepad::analysis::entropy_leak(params, dphi));
    let pe = noisepad::phys::eavesdropper_error(params, dphi, noisepad::phys::DEFAULT_REPETITIONS).unwrap();
    assert!((v["p_error"].as_f64().unwrap() - pe).abs() < 1e-14);
    assert!(v["validation"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_reports_a_point_and_its_violation() {
    let out = noisepad(&["analyze", "--n-avg", "1e4", "--delta-phi-exp", "-6"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0.0801853"), "{text}");
    assert!(text.contains("0.889084"), "{text}");
    assert!(text.contains("2.570"), "{text}");
    assert_eq!(code(&out), 1);
}

#[test]
fn analyze_rejects_bad_input_with_status_one() {
    let out = noisepad(&["analyze", "--n-avg", "2", "--delta-phi-exp", "-6"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("pi/2 >> sigma_phi violated"));
    assert_eq!(code(&noisepad(&["analyze", "--n-avg", "2"])), 1);
    assert_eq!(code(&noisepad(&["analyze", "--n-avg", "x", "--delta-phi-exp", "-6"])), 1);
}

#[test]
fn surface_writes_a_deterministic_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dh.csv");
    let p = path.to_str().unwrap();
    let args = [
        "surface", "--quantity", "delta-h", "--n-grid", "1e2,1e3,1e4", "--exp-grid", "-inf,-10,-6", "--out", p,
    ];
    let out = noisepad(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], "n_avg,delta_phi_exp2,value");
    for row in lines[1..].iter().filter(|l| l.contains(",-inf,")) {
        assert!(row.ends_with(",0.5"), "{row}");
    }
    assert_eq!(code(&noisepad(&args)), 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn surface_to_an_unwritable_path_is_a_runtime_error() {
    let out = noisepad(&[
        "surface", "--quantity", "leak-length", "--n-grid", "1e4", "--exp-grid", "-10", "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(code(&out), 2);
}

const SIM: [&str; 12] = [
    "simulate", "--seed", "42", "--k0-bits", "1024", "--cycles", "10", "--n-avg", "1e4", "--delta-phi-exp", "-30",
    "--json",
];

#[test]
fn simulate_agrees_and_is_deterministic() {
    let first = noisepad(&SIM);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let v = json(&first);
    assert_eq!(v["agreement"], Value::Bool(true));
    assert_eq!(v["cycles_completed"], 10);
    assert!(v["ledger"]["statistical_leak"].as_f64().unwrap() < 1e-3);
    assert_eq!(v["cycles"].as_array().unwrap().len(), 10);
    // Progress went to stderr as JSON lines.
    let progress = String::from_utf8_lossy(&first.stderr);
    assert_eq!(progress.lines().filter(|l| l.starts_with('{')).count(), 10);

    let second = noisepad(&SIM);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn simulate_rejects_a_visible_offset() {
    let out = noisepad(&[
        "simulate", "--seed", "42", "--k0-bits", "1024", "--cycles", "10", "--n-avg", "1e4", "--delta-phi-exp", "-3",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn simulate_notes_an_early_stop() {
    let out = noisepad(&[
        "simulate", "--seed", "1", "--k0-bits", "512", "--cycles", "100", "--n-avg", "1e4", "--delta-phi-exp", "-10",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(v["early_stop"].is_string());
    assert!(v["cycles_completed"].as_u64().unwrap() < 100);
    assert_eq!(v["agreement"], Value::Bool(true));
}

/// Starts `serve` on a free port and returns it with its address.
fn spawn_server(extra: &[&str]) -> (Child, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_noisepad"))
        .args(["serve", "--listen", "127.0.0.1:0"])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listen banner").to_string();
    (child, addr)
}

fn connect(addr: &str, k0_seed: &str, transcript: &Path) -> Output {
    noisepad(&[
        "connect", "--addr", addr, "--seed", "9", "--k0-seed", k0_seed, "--n-avg", "1e4", "--delta-phi-exp", "-30",
        "--k0-bits", "2048", "--cycles", "3", "--transcript-out", transcript.to_str().unwrap(),
    ])
}

#[test]
fn serve_and_connect_confirm_the_same_keys() {
    let dir = tempfile::tempdir().unwrap();
    let (server, addr) = spawn_server(&["--seed", "9", "--k0-seed", "5"]);
    let client = connect(&addr, "5", &dir.path().join("t.bin"));
    let server = server.wait_with_output().unwrap();
    assert_eq!(code(&client), 0, "{}", String::from_utf8_lossy(&client.stderr));
    assert_eq!(code(&server), 0);
    let (a, b) = (json(&client), json(&server));
    assert_eq!(a["tag"], b["tag"]);
    assert_eq!(a["peer_tag"], b["tag"]);
    assert_eq!(a["tags_match"], Value::Bool(true));
}

#[test]
fn mismatched_seed_keys_end_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let (server, addr) = spawn_server(&["--seed", "9", "--k0-seed", "6"]);
    let client = connect(&addr, "5", &dir.path().join("t.bin"));
    let server = server.wait_with_output().unwrap();
    assert_eq!(code(&client), 2);
    assert_eq!(code(&server), 2);
}

#[test]
fn a_peer_speaking_another_version_is_refused() {
    let (server, addr) = spawn_server(&["--k0-seed", "5"]);
    let mut stream = TcpStream::connect(&addr).unwrap();
    stream.write_all(&[b'N', b'O', b'T', b'P', 0x02, 0x01, 0, 0, 0, 0]).unwrap();
    let mut reply = Vec::new();
    stream.read_to_end(&mut reply).unwrap();
    let server = server.wait_with_output().unwrap();
    assert_eq!(code(&server), 2);
    let (msg_type, payload) = noisepad::transport::frame_decode(&reply).unwrap();
    assert_eq!(msg_type, noisepad::transport::MessageType::Error);
    assert!(String::from_utf8_lossy(&payload).contains("version"));
}

#[test]
fn attack_kpa_recovers_the_pad_and_the_chain() {
    let out = noisepad(&[
        "attack-kpa", "--seed", "3", "--n-avg", "1e4", "--delta-phi-exp", "-30", "--k0-bits", "2048",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["recovered"], Value::Bool(true));
    assert_eq!(v["chain_recovered"], Value::Bool(true));
    assert_eq!(v["recovered_keys"].as_array().unwrap().len(), 6);
}

#[test]
fn attack_kpa_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let (c, p) = (dir.path().join("c"), dir.path().join("p"));
    std::fs::write(&c, [0b1010_1010, 0xFF]).unwrap();
    std::fs::write(&p, [0b0000_1111, 0x0F]).unwrap();
    let out = noisepad(&["attack-kpa", "--ciphertext", c.to_str().unwrap(), "--plaintext", p.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["key_hex"], "a5f0");
}

#[test]
fn attack_basis_sits_above_the_floor() {
    let out = noisepad(&["attack-basis", "--n-avg", "1e4", "--delta-phi-exp", "-6", "--bits", "100000"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let rate = v["basis_guess_error_rate"].as_f64().unwrap();
    assert!((0.0802..=0.5).contains(&rate), "{rate}");
    assert_eq!(v["within_band"], Value::Bool(true));
    assert!((v["helstrom_floor"].as_f64().unwrap() - 0.080185355).abs() < 1e-8);
}

#[test]
fn attack_chain_from_recorded_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (transcript, log, keys) = (file("t.bin"), file("public.json"), file("keys.json"));
    let out = noisepad(&[
        "simulate", "--seed", "4", "--k0-bits", "2048", "--cycles", "3", "--n-avg", "1e4", "--delta-phi-exp", "-30",
        "--transcript-out", &transcript, "--public-log", &log, "--keys-out", &keys,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let chain: Vec<String> = serde_json::from_str(&std::fs::read_to_string(&keys).unwrap()).unwrap();
    let known = file("k1.txt");
    std::fs::write(&known, &chain[1]).unwrap();

    let out = noisepad(&[
        "attack-chain", "--transcript", &transcript, "--public-log", &log, "--known-index", "1", "--known-key", &known,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let recovered = v["recovered_keys"].as_array().unwrap();
    assert_eq!(recovered.len(), 5);
    for entry in recovered {
        let i = entry[0].as_u64().unwrap() as usize;
        assert_eq!(entry[1].as_str().unwrap(), chain[i], "key {i}");
    }
    assert!(v["gap"].is_null());

    let missing = noisepad(&[
        "attack-chain", "--transcript", &file("nope.bin"), "--public-log", &log, "--known-index", "1", "--known-key",
        &known,
    ]);
    assert_eq!(code(&missing), 1);
}
