use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use gewu_transport::{RelayServer, RelayServerConfig};
use serde_json::Value;

const EDGE: &str = env!("CARGO_BIN_EXE_gewu-edge");
const CLIENT: &str = env!("CARGO_BIN_EXE_gewu-client");
const RELAY: &str = env!("CARGO_BIN_EXE_gewu-relay");

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn client(relay: &str, session: &str, script: &str, dir: &Path) -> Output {
    let script_path = dir.join("script.txt");
    std::fs::write(&script_path, script).unwrap();
    Command::new(CLIENT)
        .args(["--relay", relay, "--session", session, "--out"])
        .arg(dir)
        .arg("--script")
        .arg(&script_path)
        .args(["--log-level", "warn"])
        .output()
        .unwrap()
}

#[test]
fn scripted_client_against_live_edge() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let addr = relay.addr().to_string();
    let _edge = Killed(
        Command::new(EDGE)
            .args(["--relay", &addr, "--session", "e2e", "--compress", "50", "--log-level", "warn"])
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );

    let dir = tempfile::tempdir().unwrap();
    let out = client(&addr, "e2e", "load TinkerCoin\nwait 500\ntrain on\nwait 3s\n", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let telemetry = jsonl(&dir.path().join("telemetry.jsonl"));
    for stream in ["telemetry.reward", "telemetry.episode", "telemetry.curriculum"] {
        assert!(telemetry.iter().any(|e| e["type"] == stream), "{stream} missing");
    }
    let frames: Vec<u32> = std::fs::read_to_string(dir.path().join("frames.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert!(frames.len() > 10, "{}", frames.len());
    assert!(frames.windows(2).all(|w| w[0] < w[1]));
    let received = jsonl(&dir.path().join("received.jsonl"));
    assert!(received.iter().any(|e| e["type"] == "scene.status" && e["payload"]["scene"] == "TinkerCoin"));

    // The edge waits for the next client after the first leaves; protocol
    // errors are data, so the client still exits 0.
    let dir2 = tempfile::tempdir().unwrap();
    let out = client(&addr, "e2e", "load Atlantis\nwait 300\n", dir2.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let received = jsonl(&dir2.path().join("received.jsonl"));
    let err = received.iter().find(|e| e["type"] == "protocol.error").expect("protocol.error logged");
    assert_eq!(err["payload"]["code"], "unknown_scene");
}

#[test]
fn relay_absent_means_nonzero_exit() {
    let addr = format!("127.0.0.1:{}", free_port());
    let edge = Command::new(EDGE).args(["--relay", &addr, "--log-level", "off"]).output().unwrap();
    assert_eq!(edge.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&edge.stderr).contains("relay unreachable"));

    let dir = tempfile::tempdir().unwrap();
    let out = client(&addr, "nobody", "load Playground\n", dir.path());
    assert!(!out.status.success());
}

#[test]
fn client_without_edge_times_out_nonzero() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.txt");
    std::fs::write(&script, "load Playground\n").unwrap();
    let out = Command::new(CLIENT)
        .args(["--relay", &relay.addr().to_string(), "--peer-timeout-ms", "300", "--log-level", "off"])
        .arg("--script")
        .arg(&script)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[stream]\nfsp = 30\n", "fsp"),
        ("[stream]\nencoding = \"jpeg\"\n", "stream.encoding"),
        ("[world]\nhorizon = \"long\"\n", "horizon"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&path, text).unwrap();
        // Config goes through the environment fallback here.
        let out = Command::new(EDGE)
            .args(["--offline", "--log-level", "off"])
            .env("GEWU_CONFIG", &path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(key), "{key} not named in {err}");
    }
}

#[test]
fn offline_boot_is_idempotent_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.txt");
    std::fs::write(&script, "move 0 1 0.5\nwait 200\nload coin\nwait 1s\n").unwrap();
    let run = |name: &str| {
        let log = dir.path().join(name);
        let out = Command::new(EDGE)
            .args(["--offline", "--default-scene", "Playground", "--seed", "3", "--log-level", "off"])
            .arg("--script")
            .arg(&script)
            .arg("--log")
            .arg(&log)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(log).unwrap()
    };
    let a = run("a.jsonl");
    let b = run("b.jsonl");
    assert_eq!(a, b);
    let first: Value = serde_json::from_str(a.lines().next().unwrap()).unwrap();
    assert_eq!(first["event"], "boot");
    assert_eq!(first["active"], "Playground");
}

#[test]
fn relay_binary_serves_health() {
    let (port, health) = (free_port(), free_port());
    let _relay = Killed(
        Command::new(RELAY)
            .args(["--port", &port.to_string(), "--health-port", &health.to_string(), "--log-level", "off"])
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(10);
    let body = loop {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", health)) {
            s.write_all(b"GET /health HTTP/1.0\r\n\r\n").unwrap();
            let mut body = String::new();
            s.read_to_string(&mut body).unwrap();
            break body;
        }
        assert!(Instant::now() < deadline, "relay never came up");
        thread::sleep(Duration::from_millis(20));
    };
    assert!(body.contains("\r\n\r\nok\n"), "{body}");
    assert!(body.contains("rooms_open 0"));
    assert!(TcpStream::connect(("127.0.0.1", port)).is_ok());
}
