//! Socket front ends for [`RelayCore`]: the stream listener, an optional
//! WebSocket bridge for browsers, and a plain-text health endpoint.
//!
//! Each stream connection gets a reader thread and a writer thread fed by
//! an unbounded channel; deliveries are queued while the core lock is held
//! so per-member order matches the order the core produced them.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use gewu_protocol::IdGenerator;
use log::{debug, info, warn};
use tungstenite::Message;

use crate::framing::{self, FrameDecoder, Lane};
use crate::relay::{Delivery, MemberId, RelayCore, RelayStats, DEFAULT_ROOM_TTL_MS};

#[derive(Debug, Clone)]
pub struct RelayServerConfig {
    pub listen: SocketAddr,
    pub health: Option<SocketAddr>,
    /// WebSocket bridge: each binary message carries stream-framed bytes.
    pub websocket: Option<SocketAddr>,
    pub room_ttl_ms: u64,
}

impl RelayServerConfig {
    /// Loopback, ephemeral ports, every front end enabled.
    pub fn loopback() -> Self {
        let any: SocketAddr = "127.0.0.1:0".parse().unwrap();
        RelayServerConfig {
            listen: any,
            health: Some(any),
            websocket: Some(any),
            room_ttl_ms: DEFAULT_ROOM_TTL_MS,
        }
    }
}

enum Out {
    Frame(Lane, Vec<u8>),
    Close,
}

struct Shared {
    core: Mutex<RelayCore>,
    writers: Mutex<HashMap<MemberId, Sender<Out>>>,
    started: Instant,
    stop: AtomicBool,
}

impl Shared {
    fn now(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    /// Runs `f` against the core and queues its deliveries before
    /// releasing the lock.
    fn with_core(&self, f: impl FnOnce(&mut RelayCore, u64) -> Vec<Delivery>) {
        let mut core = self.core.lock().unwrap();
        let out = f(&mut core, self.now());
        let mut writers = self.writers.lock().unwrap();
        for d in out {
            match d {
                Delivery::To(m, lane, bytes) => {
                    if let Some(w) = writers.get(&m) {
                        let _ = w.send(Out::Frame(lane, bytes));
                    }
                }
                Delivery::Close(m) => {
                    if let Some(w) = writers.remove(&m) {
                        let _ = w.send(Out::Close);
                    }
                }
            }
        }
    }

    fn register(&self) -> (MemberId, Receiver<Out>) {
        let (tx, rx) = unbounded();
        let id = self.core.lock().unwrap().connect();
        self.writers.lock().unwrap().insert(id, tx);
        (id, rx)
    }

    fn unregister(&self, member: MemberId) {
        self.with_core(|c, now| c.disconnect(member, now));
        self.writers.lock().unwrap().remove(&member);
    }
}

pub struct RelayServer {
    shared: Arc<Shared>,
    addr: SocketAddr,
    health_addr: Option<SocketAddr>,
    ws_addr: Option<SocketAddr>,
    threads: Vec<JoinHandle<()>>,
}

impl RelayServer {
    pub fn start(cfg: RelayServerConfig) -> io::Result<RelayServer> {
        let shared = Arc::new(Shared {
            core: Mutex::new(RelayCore::new(cfg.room_ttl_ms, IdGenerator::new("relay"))),
            writers: Mutex::new(HashMap::new()),
            started: Instant::now(),
            stop: AtomicBool::new(false),
        });
        let mut threads = Vec::new();

        let listener = nonblocking_listener(cfg.listen)?;
        let addr = listener.local_addr()?;
        let sh = shared.clone();
        threads.push(thread::spawn(move || accept_loop(listener, &sh, serve_stream)));

        let ws_addr = match cfg.websocket {
            Some(a) => {
                let l = nonblocking_listener(a)?;
                let bound = l.local_addr()?;
                let sh = shared.clone();
                threads.push(thread::spawn(move || accept_loop(l, &sh, serve_ws)));
                Some(bound)
            }
            None => None,
        };

        let health_addr = match cfg.health {
            Some(a) => {
                let l = nonblocking_listener(a)?;
                let bound = l.local_addr()?;
                let sh = shared.clone();
                threads.push(thread::spawn(move || accept_loop(l, &sh, serve_health)));
                Some(bound)
            }
            None => None,
        };

        let sh = shared.clone();
        let sweep_every = Duration::from_millis((cfg.room_ttl_ms / 10).clamp(10, 1000));
        threads.push(thread::spawn(move || {
            let mut last = Instant::now();
            while !sh.stop.load(Ordering::Relaxed) {
                thread::sleep(Duration::from_millis(10));
                if last.elapsed() >= sweep_every {
                    last = Instant::now();
                    sh.with_core(|c, now| c.sweep(now));
                }
            }
        }));

        info!("relay listening on {addr}");
        Ok(RelayServer {
            shared,
            addr,
            health_addr,
            ws_addr,
            threads,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn health_addr(&self) -> Option<SocketAddr> {
        self.health_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    pub fn stats(&self) -> RelayStats {
        self.shared.core.lock().unwrap().stats()
    }

    pub fn room(&self, session: &str) -> Option<crate::relay::RoomStats> {
        self.shared.core.lock().unwrap().room(session)
    }

    /// Stops accepting and drops every connection.
    pub fn shutdown(mut self) {
        self.stop_all();
    }

    /// Blocks until the server is shut down from elsewhere (e.g. a signal).
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    fn stop_all(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        for (_, w) in self.shared.writers.lock().unwrap().drain() {
            let _ = w.send(Out::Close);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for RelayServer {
    fn drop(&mut self) {
        self.stop_all();
    }
}

fn nonblocking_listener(addr: SocketAddr) -> io::Result<TcpListener> {
    let l = TcpListener::bind(addr)?;
    l.set_nonblocking(true)?;
    Ok(l)
}

fn accept_loop(listener: TcpListener, shared: &Arc<Shared>, serve: fn(TcpStream, Arc<Shared>)) {
    while !shared.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((s, peer)) => {
                debug!("connection from {peer}");
                if s.set_nonblocking(false).is_err() {
                    continue;
                }
                let _ = s.set_nodelay(true);
                let sh = shared.clone();
                thread::spawn(move || serve(s, sh));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn serve_stream(stream: TcpStream, shared: Arc<Shared>) {
    let (member, rx) = shared.register();
    let Ok(mut wstream) = stream.try_clone() else {
        shared.unregister(member);
        return;
    };
    let writer = thread::spawn(move || {
        for out in rx {
            match out {
                Out::Frame(lane, bytes) => {
                    if framing::write_frame(&mut wstream, lane, &bytes).is_err() {
                        break;
                    }
                }
                Out::Close => break,
            }
        }
        let _ = wstream.shutdown(Shutdown::Both);
    });
    let mut rstream = stream;
    loop {
        match framing::read_frame(&mut rstream) {
            Ok(Some((lane, payload))) => shared.with_core(|c, now| c.on_frame(member, lane, &payload, now)),
            Ok(None) => break,
            Err(e) => {
                debug!("member {member}: {e}");
                break;
            }
        }
    }
    shared.unregister(member);
    let _ = rstream.shutdown(Shutdown::Both);
    let _ = writer.join();
}

fn serve_ws(stream: TcpStream, shared: Arc<Shared>) {
    let _ = stream.set_read_timeout(Some(Duration::from_millis(10)));
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            debug!("websocket handshake failed: {e}");
            return;
        }
    };
    let (member, rx) = shared.register();
    let mut decoder = FrameDecoder::new();
    'conn: loop {
        if shared.stop.load(Ordering::Relaxed) {
            break;
        }
        while let Ok(out) = rx.try_recv() {
            match out {
                Out::Frame(lane, bytes) => {
                    if ws.send(Message::binary(framing::encode(lane, &bytes))).is_err() {
                        break 'conn;
                    }
                }
                Out::Close => break 'conn,
            }
        }
        match ws.read() {
            Ok(Message::Binary(data)) => {
                decoder.push(&data);
                loop {
                    match decoder.next_frame() {
                        Ok(Some((lane, payload))) => {
                            shared.with_core(|c, now| c.on_frame(member, lane, &payload, now))
                        }
                        Ok(None) => break,
                        Err(_) => break 'conn,
                    }
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    shared.unregister(member);
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn serve_health(mut stream: TcpStream, shared: Arc<Shared>) {
    let _ = stream.set_read_timeout(Some(Duration::from_millis(200)));
    let mut buf = [0u8; 1024];
    let _ = stream.read(&mut buf);
    let s = shared.core.lock().unwrap().stats();
    let t = &s.totals;
    let body = format!(
        "ok\nrooms_open {}\nrooms_created {}\nrooms_expired {}\nmembers {}\njoins_rejected {}\n\
         signaling_messages {}\nsignaling_bytes {}\nfallback_control_bytes {}\nfallback_media_bytes {}\n",
        s.rooms_open,
        s.rooms_created,
        s.rooms_expired,
        s.members,
        s.joins_rejected,
        t.signaling.messages,
        t.signaling.bytes,
        t.fallback_control.bytes,
        t.fallback_media.bytes,
    );
    let resp = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        body.len(),
        body
    );
    let _ = stream.write_all(resp.as_bytes());
}
