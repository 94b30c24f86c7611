//! Plain TCP transport: one login frame per connection, one response back.
//!
//! The client writes its frame and half-closes; the server reads exactly one
//! frame, requires end-of-stream after it, replies, and closes. Malformed
//! input gets no response.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::net::{
    IpAddr, Ipv4Addr, Ipv6Addr, Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs,
};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};
use serde::Serialize;
use thiserror::Error;

use super::frame::{
    decode_auth_response, decode_login_request, encode_auth_response, encode_login_request, Header,
    WireError, HEADER_LEN,
};
use crate::bits::{Password, Timestamp};
use crate::clock::Clock;
use crate::protocol::{
    authenticate, make_login_request, AuthDecision, AuthPolicy, LoginRequest, ServerSecrets,
    SmartcardState,
};

pub const DEFAULT_IO_TIMEOUT: Duration = Duration::from_secs(5);

/// One line of the audit log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub ts: u64,
    pub peer: String,
    pub cid_hex: Option<String>,
    pub decision: &'static str,
    pub reason: String,
}

/// Append-only JSON-lines sink. Each entry is written with a single
/// `write_all` under the lock, so lines never interleave.
#[derive(Clone)]
pub struct AuditLog {
    sink: Arc<Mutex<Box<dyn Write + Send>>>,
}

impl AuditLog {
    pub fn new<W: Write + Send + 'static>(w: W) -> Self {
        AuditLog {
            sink: Arc::new(Mutex::new(Box::new(w))),
        }
    }

    pub fn stderr() -> Self {
        Self::new(io::stderr())
    }

    pub fn discard() -> Self {
        Self::new(io::sink())
    }

    pub fn append_to(path: &Path) -> io::Result<Self> {
        let f: File = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::new(f))
    }

    pub fn record(&self, entry: &AuditEntry) {
        let mut line = serde_json::to_vec(entry).expect("audit entry serializes");
        line.push(b'\n');
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = sink.write_all(&line).and_then(|_| sink.flush()) {
            warn!("audit log write failed: {e}");
        }
    }
}

#[derive(Clone)]
pub struct ServeOptions {
    pub policy: AuthPolicy,
    pub io_timeout: Duration,
    pub audit: AuditLog,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            policy: AuthPolicy::default(),
            io_timeout: DEFAULT_IO_TIMEOUT,
            audit: AuditLog::stderr(),
        }
    }
}

/// A running server. Dropping it without calling [`ServerHandle::shutdown`]
/// leaves the accept thread running.
pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops accepting and waits for in-flight connections to finish.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        let Some(t) = self.accept_thread.take() else {
            return;
        };
        self.stop.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect_timeout(&wake_addr(self.local_addr), Duration::from_secs(1));
        let _ = t.join();
    }
}

fn wake_addr(bound: SocketAddr) -> SocketAddr {
    match bound.ip() {
        IpAddr::V4(ip) if ip.is_unspecified() => {
            SocketAddr::new(Ipv4Addr::LOCALHOST.into(), bound.port())
        }
        IpAddr::V6(ip) if ip.is_unspecified() => {
            SocketAddr::new(Ipv6Addr::LOCALHOST.into(), bound.port())
        }
        _ => bound,
    }
}

/// Binds `addr` and starts serving login requests on background threads.
/// `t_star` for every request is read from `clock` on receipt.
pub fn serve<A: ToSocketAddrs>(
    secrets: ServerSecrets,
    addr: A,
    options: ServeOptions,
    clock: Arc<dyn Clock>,
) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let local_addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let ctx = Arc::new(ConnContext {
        secrets,
        options,
        clock,
    });

    let stop_flag = Arc::clone(&stop);
    let accept_thread = thread::Builder::new()
        .name("authlab-accept".into())
        .spawn(move || accept_loop(listener, stop_flag, ctx))?;

    Ok(ServerHandle {
        local_addr,
        stop,
        accept_thread: Some(accept_thread),
    })
}

struct ConnContext {
    secrets: ServerSecrets,
    options: ServeOptions,
    clock: Arc<dyn Clock>,
}

fn accept_loop(listener: TcpListener, stop: Arc<AtomicBool>, ctx: Arc<ConnContext>) {
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let ctx = Arc::clone(&ctx);
        match thread::Builder::new()
            .name("authlab-conn".into())
            .spawn(move || handle_connection(stream, &ctx))
        {
            Ok(h) => workers.push(h),
            Err(e) => warn!("could not spawn connection thread: {e}"),
        }
        workers.retain(|h| !h.is_finished());
    }
    for h in workers {
        let _ = h.join();
    }
}

#[derive(Debug, Error)]
enum ReadError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

fn read_exact_or_malformed(
    stream: &mut TcpStream,
    buf: &mut [u8],
    what: &str,
) -> Result<(), ReadError> {
    stream.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => {
            WireError::MalformedFrame(format!("stream ended inside {what}")).into()
        }
        _ => ReadError::Io(e),
    })
}

/// Reads one frame and requires the peer to have half-closed after it.
fn read_one_frame(stream: &mut TcpStream) -> Result<Vec<u8>, ReadError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or_malformed(stream, &mut header, "header")?;
    let parsed = Header::parse(&header)?;
    let mut frame = header.to_vec();
    frame.resize(HEADER_LEN + parsed.payload_len, 0);
    read_exact_or_malformed(stream, &mut frame[HEADER_LEN..], "payload")?;
    let mut extra = [0u8; 1];
    match stream.read(&mut extra)? {
        0 => Ok(frame),
        _ => Err(WireError::MalformedFrame("trailing bytes after frame".into()).into()),
    }
}

fn handle_connection(mut stream: TcpStream, ctx: &ConnContext) {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "unknown".into());
    let _ = stream.set_read_timeout(Some(ctx.options.io_timeout));
    let _ = stream.set_write_timeout(Some(ctx.options.io_timeout));

    let parsed = read_one_frame(&mut stream).and_then(|bytes| Ok(decode_login_request(&bytes)?));
    let req = match parsed {
        Ok(req) => req,
        Err(e) => {
            let reason = match &e {
                ReadError::Wire(w) => w.code().to_owned(),
                ReadError::Io(_) => "IO_ERROR".to_owned(),
            };
            debug!("dropping connection from {peer}: {e}");
            ctx.options.audit.record(&AuditEntry {
                ts: ctx.clock.now().secs(),
                peer,
                cid_hex: None,
                decision: "error",
                reason,
            });
            let _ = stream.shutdown(Shutdown::Both);
            return;
        }
    };

    let t_star = ctx.clock.now();
    let decision = authenticate(&ctx.secrets, &req, t_star, &ctx.options.policy);
    ctx.options.audit.record(&AuditEntry {
        ts: t_star.secs(),
        peer: peer.clone(),
        cid_hex: Some(req.cid.to_hex()),
        decision: if decision.accepted() {
            "accept"
        } else {
            "reject"
        },
        reason: decision.reason.to_string(),
    });
    if let Err(e) = stream.write_all(&encode_auth_response(&decision)) {
        warn!("failed to reply to {peer}: {e}");
    }
    let _ = stream.shutdown(Shutdown::Both);
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection failed: {0}")]
    ConnectionFailed(#[source] io::Error),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl ClientError {
    pub fn code(&self) -> &'static str {
        match self {
            ClientError::ConnectionFailed(_) => "CONNECTION_FAILED",
            ClientError::MalformedResponse(_) => "MALFORMED_RESPONSE",
        }
    }
}

/// Sends raw bytes as one request and returns whatever the server wrote back
/// before closing.
pub fn exchange_raw<A: ToSocketAddrs>(
    addr: A,
    bytes: &[u8],
    timeout: Duration,
) -> Result<Vec<u8>, ClientError> {
    let addrs: Vec<SocketAddr> = addr
        .to_socket_addrs()
        .map_err(ClientError::ConnectionFailed)?
        .collect();
    let mut last = io::Error::new(io::ErrorKind::AddrNotAvailable, "no address to connect to");
    let mut stream = None;
    for a in addrs {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => {
                stream = Some(s);
                break;
            }
            Err(e) => last = e,
        }
    }
    let mut stream = stream.ok_or(ClientError::ConnectionFailed(last))?;
    stream
        .set_read_timeout(Some(timeout))
        .map_err(ClientError::ConnectionFailed)?;
    stream
        .set_write_timeout(Some(timeout))
        .map_err(ClientError::ConnectionFailed)?;
    if let Err(e) = stream
        .write_all(bytes)
        .and_then(|_| stream.shutdown(Shutdown::Write))
    {
        // the server may close early on input it has already rejected
        if peer_closed(&e) {
            return Ok(Vec::new());
        }
        return Err(ClientError::ConnectionFailed(e));
    }
    let mut reply = Vec::new();
    match stream.read_to_end(&mut reply) {
        Ok(_) => Ok(reply),
        Err(e) if peer_closed(&e) => Ok(reply),
        Err(e) => Err(ClientError::ConnectionFailed(e)),
    }
}

fn peer_closed(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::ConnectionReset | io::ErrorKind::BrokenPipe | io::ErrorKind::NotConnected
    )
}

pub fn send_login_request<A: ToSocketAddrs>(
    addr: A,
    req: &LoginRequest,
) -> Result<AuthDecision, ClientError> {
    let reply = exchange_raw(addr, &encode_login_request(req), DEFAULT_IO_TIMEOUT)?;
    if reply.is_empty() {
        return Err(ClientError::MalformedResponse(
            "server closed without replying".into(),
        ));
    }
    decode_auth_response(&reply).map_err(|e| ClientError::MalformedResponse(e.to_string()))
}

/// Builds a login request at the current clock time and submits it.
pub fn client_login<A: ToSocketAddrs, C: Clock + ?Sized>(
    addr: A,
    card: &SmartcardState,
    typed_pw: &Password,
    clock: &C,
) -> Result<AuthDecision, ClientError> {
    let t: Timestamp = clock.now();
    send_login_request(addr, &make_login_request(card, typed_pw, t))
}
